#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bagsim/bench.hpp"
#include "bagsim/graph.hpp"
#include "bagsim/io.hpp"

namespace testing_support {

using namespace bagsim;

inline std::string data_path(const std::string& name) { return std::string(BAGSIM_DATA_DIR) + "/" + name; }
inline std::string test_path(const std::string& name) { return std::string(BAGSIM_TEST_DIR) + "/" + name; }

inline AttackGraph load(const std::string& name) { return parse_canonical(read_file(data_path(name))); }
inline AttackGraph noisy_or() { return load("noisy_or.json"); }
inline AttackGraph enterprise() { return load("enterprise.json"); }

inline Node leaf(NodeId id, double prior) { return {id, NodeKind::Leaf, "n" + std::to_string(id), prior}; }
inline Node and_node(NodeId id, double q = 1.0) { return {id, NodeKind::And, "n" + std::to_string(id), q}; }
inline Node or_node(NodeId id, double q = 1.0) { return {id, NodeKind::Or, "n" + std::to_string(id), q}; }

struct Reference {
  double evidence_mass = 0.0;
  std::map<NodeId, double> posterior;
};

// Probability that `n` is true given its parents' values, straight from the
// LEAF / AND / OR definitions.
inline double reference_prob_true(const AttackGraph& g, const Node& n, const std::map<NodeId, int>& val) {
  if (n.kind == NodeKind::Leaf) return n.local_prob;
  const auto ps = g.parents(n.id);
  bool all = true, any = false;
  for (NodeId p : ps) {
    all = all && val.at(p) == 1;
    any = any || val.at(p) == 1;
  }
  if (n.kind == NodeKind::And) return all ? n.local_prob : 0.0;
  return any ? n.local_prob : 0.0;
}

// Independent exact reference: depth-first walk over every joint assignment
// with nonzero probability, in a topological order computed here.
inline Reference brute_force(const AttackGraph& g, const EvidenceSet& evidence = {}) {
  std::vector<const Node*> order;
  std::set<NodeId> placed;
  while (order.size() < g.size()) {
    for (const auto& n : g.nodes()) {
      if (placed.count(n.id)) continue;
      bool ready = true;
      for (NodeId p : g.parents(n.id)) ready = ready && placed.count(p);
      if (ready) {
        order.push_back(&n);
        placed.insert(n.id);
      }
    }
  }

  std::map<NodeId, int> val;
  std::map<NodeId, double> true_mass;
  double total = 0.0;
  auto walk = [&](auto&& self, std::size_t k, double mass) -> void {
    if (k == order.size()) {
      total += mass;
      for (auto [id, v] : val)
        if (v) true_mass[id] += mass;
      return;
    }
    const Node& n = *order[k];
    const double p1 = reference_prob_true(g, n, val);
    for (int v : {0, 1}) {
      auto it = evidence.find(n.id);
      if (it != evidence.end() && static_cast<int>(it->second) != v) continue;
      const double f = v ? p1 : 1.0 - p1;
      if (f == 0.0) continue;
      val[n.id] = v;
      self(self, k + 1, mass * f);
    }
    val.erase(n.id);
  };
  walk(walk, 0, 1.0);

  Reference r;
  r.evidence_mass = total;
  for (const auto& n : g.nodes()) r.posterior[n.id] = total > 0.0 ? true_mass[n.id] / total : 0.0;
  return r;
}

// Small random graphs for oracle comparisons: at most 12 leaves and at most
// `max_sources` random sources so exact enumeration stays cheap.
inline AttackGraph small_random_graph(std::uint64_t seed, std::size_t n_nodes, bool deterministic_internals) {
  SyntheticGraphSpec spec;
  spec.n_nodes = n_nodes;
  spec.seed = seed;
  spec.leaf_fraction = 0.4;
  spec.max_parents = 3;
  spec.layers = 2;
  spec.prior_range = {0.2, 0.9};
  spec.internal_prob_range = deterministic_internals ? std::pair{1.0, 1.0} : std::pair{0.4, 0.95};
  return generate_synthetic(spec);
}

}  // namespace testing_support
