#pragma once

#include <cstddef>
#include <map>

#include "bagsim/graph.hpp"
#include "bagsim/io.hpp"

namespace bagsim {

/// Hard cap on enumerated random sources (2^25 configurations).
inline constexpr std::size_t kMaxExactSources = 25;

struct ExactPosterior {
  NodeId node_id = 0;
  double probability = 0.0;
};

using ExactMap = std::map<NodeId, ExactPosterior>;

/// Number of independent random sources the oracle enumerates: every LEAF
/// plus every AND/OR node whose local probability is strictly inside (0,1).
/// On a decomposed graph this is exactly the LEAF count.
std::size_t random_source_count(const AttackGraph& graph);

/// Exact Prob(X_k = 1) for every node, by enumerating all joint outcomes of
/// the random sources and propagating the deterministic AND/OR logic.
/// Throws TooManyLeaves above `kMaxExactSources` sources.
ExactMap exact_access(const AttackGraph& graph);

/// Exact Prob(X_k = 1 | evidence). Throws TooManyLeaves, UnknownNode, or
/// ImpossibleEvidence when the evidence has probability zero.
ExactMap exact_conditional(const AttackGraph& graph, const EvidenceSet& evidence);

/// Exact probability of the evidence itself.
double exact_evidence_probability(const AttackGraph& graph, const EvidenceSet& evidence);

}  // namespace bagsim
