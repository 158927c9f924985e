#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bagsim/error.hpp"

namespace bagsim {

using NodeId = std::uint32_t;

enum class NodeKind : std::uint8_t { Leaf, And, Or };

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view text);

struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::Leaf;
  std::string label;
  // Prior Prob(X=1) for a LEAF, success probability p(k) for AND/OR.
  double local_prob = 1.0;

  friend bool operator==(const Node&, const Node&) = default;
};

using Edge = std::pair<NodeId, NodeId>;  // (source, target)

/// Bayesian attack graph: typed nodes, directed edges and an optional goal set.
///
/// Construction never throws on structural problems so that `validate` can
/// report every violation; use `AttackGraph::checked` to get a graph that is
/// guaranteed to satisfy all invariants. Instances are immutable.
class AttackGraph {
 public:
  AttackGraph() = default;
  AttackGraph(std::vector<Node> nodes, std::vector<Edge> edges, std::vector<NodeId> goals = {});

  /// Same as the constructor, but throws `ErrorCode::ValidationError` listing
  /// every violation when the result would be invalid.
  static AttackGraph checked(std::vector<Node> nodes, std::vector<Edge> edges,
                             std::vector<NodeId> goals = {});

  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
  [[nodiscard]] const std::vector<NodeId>& goals() const noexcept { return goals_; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  [[nodiscard]] bool contains(NodeId id) const { return index_.contains(id); }
  [[nodiscard]] const Node* find(NodeId id) const;
  /// Throws `ErrorCode::UnknownNode`.
  [[nodiscard]] const Node& node(NodeId id) const;

  /// Parent / child ids in ascending order. Edges with dangling endpoints are ignored.
  [[nodiscard]] std::vector<NodeId> parents(NodeId id) const;
  [[nodiscard]] std::vector<NodeId> children(NodeId id) const;

  [[nodiscard]] std::vector<NodeId> leaf_ids() const;
  [[nodiscard]] NodeId max_id() const;

  /// Copy with one node's local probability replaced.
  [[nodiscard]] AttackGraph with_local_prob(NodeId id, double prob) const;

  /// Same ids, kinds, labels, probabilities, edge set and goal set.
  friend bool operator==(const AttackGraph& a, const AttackGraph& b);

 private:
  std::vector<Node> nodes_;  // sorted by id
  std::vector<Edge> edges_;  // sorted
  std::vector<NodeId> goals_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<std::vector<NodeId>> parents_;
  std::vector<std::vector<NodeId>> children_;
};

enum class ViolationKind {
  DuplicateNode,
  DanglingEdge,
  SelfLoop,
  DuplicateEdge,
  LeafWithParent,
  MissingParent,
  ProbabilityOutOfRange,
  Cycle,
  UnknownGoal,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::vector<NodeId> nodes;  // offending node ids, ascending
  std::string message;
};

/// Every invariant violation of `graph`; empty when valid. A cycle is reported
/// once per strongly connected component, naming all of its nodes.
std::vector<Violation> validate(const AttackGraph& graph);

/// Kahn's algorithm with ascending-id tie breaking. Throws `ErrorCode::CycleError`.
std::vector<NodeId> topological_order(const AttackGraph& graph);

/// Conditional probability table implied by a node's kind and local probability.
struct DerivedCpt {
  struct Row {
    std::string condition;
    double prob_true;
  };

  NodeId node_id = 0;
  NodeKind kind = NodeKind::Leaf;
  double local_prob = 1.0;
  std::size_t parent_count = 0;
  std::vector<Row> rows;

  /// Prob(X = value | parents), parents given in ascending parent-id order.
  [[nodiscard]] double probability(bool value, std::span<const std::uint8_t> parents) const;
};

/// Throws `ErrorCode::UnknownNode`.
DerivedCpt derived_cpt(const AttackGraph& graph, NodeId id);

/// Moves every AND/OR local probability onto a fresh LEAF so that all internal
/// nodes become deterministic. OR node C with p < 1 becomes AND(C', v') where C'
/// is a new deterministic OR over C's former parents and v' a new LEAF with prior
/// p; AND node C with p < 1 gains v' as an extra parent. New ids are allocated
/// above the current maximum, in ascending order of the decomposed node's id.
/// Throws `ErrorCode::ValidationError` on an invalid graph.
AttackGraph decompose_to_leaf_probabilities(const AttackGraph& graph);

/// Dense, topologically ordered view used by the inference engines. Position i
/// holds the i-th node of `topological_order`; parents are positions < i.
struct CompiledGraph {
  std::vector<NodeId> ids;
  std::vector<NodeKind> kinds;
  std::vector<double> probs;
  std::vector<std::vector<std::uint32_t>> parents;
  std::vector<std::vector<std::uint32_t>> children;
  std::unordered_map<NodeId, std::uint32_t> position;

  [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
  /// Throws `ErrorCode::UnknownNode`.
  [[nodiscard]] std::uint32_t position_of(NodeId id) const;
  /// True iff every AND/OR node has local probability 1.
  [[nodiscard]] bool deterministic_internals() const;
};

/// Throws `ErrorCode::ValidationError` when the graph is invalid.
CompiledGraph compile(const AttackGraph& graph);

}  // namespace bagsim
