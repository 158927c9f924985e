#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bagsim/graph.hpp"

namespace bagsim {

/// Observed Boolean states keyed by node id.
using EvidenceSet = std::map<NodeId, bool>;

/// Canonical JSON:
///   {"nodes": [{"id": 0, "type": "LEAF", "label": "...", "prob": 1.0}, ...],
///    "edges": [[src, dst], ...], "goals": [1]}
/// "prob" is required for LEAF nodes and defaults to 1.0 for AND/OR.
/// Throws MalformedInput for JSON/schema errors and ValidationError for
/// structural invariant violations.
AttackGraph parse_canonical(std::string_view text);

/// Inverse of `parse_canonical`. Nodes, edges and goals are written in ascending order.
std::string serialize_canonical(const AttackGraph& graph, int indent = 2);

enum class ArcDirection {
  DstSrc,  // first column is the edge target (MulVAL ARCS.CSV)
  SrcDst,
};

/// MulVAL VERTICES.CSV / ARCS.CSV adapter. Vertex rows are
/// `id,"label","kind",metric`; arc rows are two ids plus an ignored trailing
/// field. The metric column is read as the node's local probability.
/// Nodes without outgoing arcs become the goals.
AttackGraph parse_mulval_csv(std::string_view vertices_text, std::string_view arcs_text,
                             ArcDirection direction = ArcDirection::DstSrc);

/// Splits one RFC-4180 record. Throws MalformedInput on an unterminated quote.
std::vector<std::string> split_csv_record(std::string_view line);

/// `6=y,11=n`; whitespace around tokens is ignored and an empty string is the
/// empty set. Throws MalformedInput on bad syntax, UnknownNode for ids not in
/// `graph`.
EvidenceSet parse_evidence(std::string_view text, const AttackGraph& graph);
std::string format_evidence(const EvidenceSet& evidence);

/// Throws UnknownNode if any key is not a node of `graph`.
void check_evidence(const EvidenceSet& evidence, const AttackGraph& graph);

std::string read_file(const std::string& path);

}  // namespace bagsim
