#include "bagsim/graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

namespace bagsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::UnknownNodeKind: return "UnknownNodeKind";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::CycleError: return "CycleError";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NoAcceptedSamples: return "NoAcceptedSamples";
    case ErrorCode::ZeroTotalWeight: return "ZeroTotalWeight";
    case ErrorCode::ZeroNormalization: return "ZeroNormalization";
    case ErrorCode::TooManyParents: return "TooManyParents";
    case ErrorCode::TooManyLeaves: return "TooManyLeaves";
    case ErrorCode::ImpossibleEvidence: return "ImpossibleEvidence";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Leaf: return "LEAF";
    case NodeKind::And: return "AND";
    case NodeKind::Or: return "OR";
  }
  return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view text) {
  if (text == "LEAF") return NodeKind::Leaf;
  if (text == "AND") return NodeKind::And;
  if (text == "OR") return NodeKind::Or;
  return std::nullopt;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::DuplicateNode: return "duplicate_node";
    case ViolationKind::DanglingEdge: return "dangling_edge";
    case ViolationKind::SelfLoop: return "self_loop";
    case ViolationKind::DuplicateEdge: return "duplicate_edge";
    case ViolationKind::LeafWithParent: return "leaf_with_parent";
    case ViolationKind::MissingParent: return "missing_parent";
    case ViolationKind::ProbabilityOutOfRange: return "probability_out_of_range";
    case ViolationKind::Cycle: return "cycle";
    case ViolationKind::UnknownGoal: return "unknown_goal";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// AttackGraph

AttackGraph::AttackGraph(std::vector<Node> nodes, std::vector<Edge> edges, std::vector<NodeId> goals)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), goals_(std::move(goals)) {
  std::stable_sort(nodes_.begin(), nodes_.end(),
                   [](const Node& a, const Node& b) { return a.id < b.id; });
  std::sort(edges_.begin(), edges_.end());
  std::sort(goals_.begin(), goals_.end());
  goals_.erase(std::unique(goals_.begin(), goals_.end()), goals_.end());

  for (std::size_t i = 0; i < nodes_.size(); ++i) index_.try_emplace(nodes_[i].id, i);
  parents_.resize(nodes_.size());
  children_.resize(nodes_.size());
  for (const auto& [src, dst] : edges_) {
    auto s = index_.find(src);
    auto d = index_.find(dst);
    if (s == index_.end() || d == index_.end()) continue;
    parents_[d->second].push_back(src);
    children_[s->second].push_back(dst);
  }
  // Edges are sorted by (src, dst), so children are already ascending.
  for (auto& p : parents_) std::sort(p.begin(), p.end());
}

AttackGraph AttackGraph::checked(std::vector<Node> nodes, std::vector<Edge> edges,
                                 std::vector<NodeId> goals) {
  AttackGraph graph(std::move(nodes), std::move(edges), std::move(goals));
  auto violations = validate(graph);
  if (!violations.empty()) {
    std::vector<std::string> details;
    details.reserve(violations.size());
    for (const auto& v : violations) details.push_back(v.message);
    throw Error(ErrorCode::ValidationError,
                "invalid attack graph: " + std::to_string(violations.size()) + " violation(s)",
                std::move(details));
  }
  return graph;
}

const Node* AttackGraph::find(NodeId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const Node& AttackGraph::node(NodeId id) const {
  if (const Node* n = find(id)) return *n;
  throw Error(ErrorCode::UnknownNode, "unknown node " + std::to_string(id));
}

std::vector<NodeId> AttackGraph::parents(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, "unknown node " + std::to_string(id));
  return parents_[it->second];
}

std::vector<NodeId> AttackGraph::children(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, "unknown node " + std::to_string(id));
  return children_[it->second];
}

std::vector<NodeId> AttackGraph::leaf_ids() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Leaf) out.push_back(n.id);
  return out;
}

NodeId AttackGraph::max_id() const { return nodes_.empty() ? 0 : nodes_.back().id; }

AttackGraph AttackGraph::with_local_prob(NodeId id, double prob) const {
  auto nodes = nodes_;
  auto it = std::find_if(nodes.begin(), nodes.end(), [id](const Node& n) { return n.id == id; });
  if (it == nodes.end()) throw Error(ErrorCode::UnknownNode, "unknown node " + std::to_string(id));
  it->local_prob = prob;
  return AttackGraph(std::move(nodes), edges_, goals_);
}

bool operator==(const AttackGraph& a, const AttackGraph& b) {
  return a.nodes_ == b.nodes_ && a.edges_ == b.edges_ && a.goals_ == b.goals_;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

std::string id_list(const std::vector<NodeId>& ids) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? "," : "") << ids[i];
  os << '}';
  return os.str();
}

// Tarjan's SCC over the well-formed part of the graph; returns components of
// size > 1 (self-loops are reported separately).
std::vector<std::vector<NodeId>> cyclic_components(const AttackGraph& g) {
  const auto& nodes = g.nodes();
  std::unordered_map<NodeId, std::size_t> idx;
  for (std::size_t i = 0; i < nodes.size(); ++i) idx.try_emplace(nodes[i].id, i);
  const std::size_t n = nodes.size();
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& [s, d] : g.edges()) {
    auto si = idx.find(s);
    auto di = idx.find(d);
    if (si != idx.end() && di != idx.end() && s != d) succ[si->second].push_back(di->second);
  }

  std::vector<int> order(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<NodeId>> out;
  int counter = 0;

  // Iterative DFS to stay safe on deep graphs.
  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (order[root] != -1) continue;
    std::vector<Frame> frames{{root, 0}};
    order[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& f = frames.back();
      if (f.next < succ[f.v].size()) {
        std::size_t w = succ[f.v][f.next++];
        if (order[w] == -1) {
          order[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], order[w]);
        }
        continue;
      }
      std::size_t v = f.v;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      if (low[v] == order[v]) {
        std::vector<NodeId> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(nodes[w].id);
        } while (w != v);
        if (comp.size() > 1) {
          std::sort(comp.begin(), comp.end());
          out.push_back(std::move(comp));
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<Violation> validate(const AttackGraph& graph) {
  std::vector<Violation> out;
  const auto& nodes = graph.nodes();

  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].id == nodes[i - 1].id && (i < 2 || nodes[i - 2].id != nodes[i].id)) {
      out.push_back({ViolationKind::DuplicateNode, {nodes[i].id},
                     "node id " + std::to_string(nodes[i].id) + " appears more than once"});
    }
  }

  for (const auto& n : nodes) {
    if (!(n.local_prob >= 0.0 && n.local_prob <= 1.0)) {
      out.push_back({ViolationKind::ProbabilityOutOfRange, {n.id},
                     "node " + std::to_string(n.id) + " has probability outside [0,1]"});
    }
  }

  const auto& edges = graph.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [s, d] = edges[i];
    if (i > 0 && edges[i - 1] == edges[i]) {
      if (i < 2 || edges[i - 2] != edges[i]) {
        out.push_back({ViolationKind::DuplicateEdge, {std::min(s, d), std::max(s, d)},
                       "edge (" + std::to_string(s) + "," + std::to_string(d) + ") is repeated"});
      }
      continue;
    }
    std::vector<NodeId> missing;
    if (!graph.contains(s)) missing.push_back(s);
    if (!graph.contains(d) && d != s) missing.push_back(d);
    if (!missing.empty()) {
      std::sort(missing.begin(), missing.end());
      out.push_back({ViolationKind::DanglingEdge, missing,
                     "edge (" + std::to_string(s) + "," + std::to_string(d) +
                         ") references unknown node(s) " + id_list(missing)});
      continue;
    }
    if (s == d) {
      out.push_back({ViolationKind::SelfLoop, {s}, "self-loop on node " + std::to_string(s)});
    }
  }

  for (const auto& n : nodes) {
    if (graph.find(n.id) != &n) continue;  // duplicate already reported
    const auto pa = graph.parents(n.id);
    if (n.kind == NodeKind::Leaf && !pa.empty()) {
      out.push_back({ViolationKind::LeafWithParent, {n.id},
                     "LEAF node " + std::to_string(n.id) + " is the target of edge(s) from " +
                         id_list(pa)});
    } else if (n.kind != NodeKind::Leaf && pa.empty()) {
      out.push_back({ViolationKind::MissingParent, {n.id},
                     std::string(to_string(n.kind)) + " node " + std::to_string(n.id) +
                         " has no parent"});
    }
  }

  for (auto& comp : cyclic_components(graph)) {
    out.push_back({ViolationKind::Cycle, comp, "directed cycle through nodes " + id_list(comp)});
  }

  for (NodeId g : graph.goals()) {
    if (!graph.contains(g)) {
      out.push_back({ViolationKind::UnknownGoal, {g}, "goal " + std::to_string(g) + " is not a node"});
    }
  }
  return out;
}

std::vector<NodeId> topological_order(const AttackGraph& graph) {
  std::unordered_map<NodeId, std::size_t> indegree;
  for (const auto& n : graph.nodes()) indegree[n.id] = graph.parents(n.id).size();

  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.push(id);

  std::vector<NodeId> out;
  out.reserve(indegree.size());
  while (!ready.empty()) {
    NodeId v = ready.top();
    ready.pop();
    out.push_back(v);
    for (NodeId c : graph.children(v))
      if (--indegree[c] == 0) ready.push(c);
  }
  if (out.size() != indegree.size()) {
    std::vector<NodeId> rest;
    for (const auto& [id, deg] : indegree)
      if (deg > 0) rest.push_back(id);
    std::sort(rest.begin(), rest.end());
    throw Error(ErrorCode::CycleError, "graph is not acyclic; unresolved nodes " + id_list(rest));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CPTs

double DerivedCpt::probability(bool value, std::span<const std::uint8_t> parents) const {
  double p_true = 0.0;
  switch (kind) {
    case NodeKind::Leaf:
      p_true = local_prob;
      break;
    case NodeKind::And:
      p_true = std::all_of(parents.begin(), parents.end(), [](auto x) { return x != 0; })
                   ? local_prob
                   : 0.0;
      break;
    case NodeKind::Or:
      p_true = std::any_of(parents.begin(), parents.end(), [](auto x) { return x != 0; })
                   ? local_prob
                   : 0.0;
      break;
  }
  return value ? p_true : 1.0 - p_true;
}

DerivedCpt derived_cpt(const AttackGraph& graph, NodeId id) {
  const Node& n = graph.node(id);
  DerivedCpt cpt;
  cpt.node_id = id;
  cpt.kind = n.kind;
  cpt.local_prob = n.local_prob;
  cpt.parent_count = graph.parents(id).size();
  switch (n.kind) {
    case NodeKind::Leaf:
      cpt.rows = {{"unconditional", n.local_prob}};
      break;
    case NodeKind::And:
      cpt.rows = {{"all parents = 1", n.local_prob}, {"otherwise", 0.0}};
      break;
    case NodeKind::Or:
      cpt.rows = {{"all parents = 0", 0.0}, {"otherwise", n.local_prob}};
      break;
  }
  return cpt;
}

// ---------------------------------------------------------------------------
// Decomposition

AttackGraph decompose_to_leaf_probabilities(const AttackGraph& graph) {
  auto violations = validate(graph);
  if (!violations.empty()) {
    std::vector<std::string> details;
    for (const auto& v : violations) details.push_back(v.message);
    throw Error(ErrorCode::ValidationError, "cannot decompose an invalid graph", std::move(details));
  }

  std::vector<Node> nodes = graph.nodes();
  std::vector<Edge> edges = graph.edges();
  std::vector<Node> added;
  NodeId next_id = graph.nodes().empty() ? 0 : graph.max_id() + 1;

  for (auto& n : nodes) {
    if (n.kind == NodeKind::Leaf || n.local_prob == 1.0) continue;
    const NodeId prob_leaf = next_id++;
    added.push_back({prob_leaf, NodeKind::Leaf, "p(" + std::to_string(n.id) + ")", n.local_prob});

    if (n.kind == NodeKind::Or) {
      // C keeps its id and children; its former parents move to C'.
      const NodeId inner_or = next_id++;
      added.push_back({inner_or, NodeKind::Or, n.label + " [any parent]", 1.0});
      for (auto& e : edges)
        if (e.second == n.id) e.second = inner_or;
      edges.emplace_back(inner_or, n.id);
      n.kind = NodeKind::And;
    }
    n.local_prob = 1.0;
    edges.emplace_back(prob_leaf, n.id);
  }

  nodes.insert(nodes.end(), added.begin(), added.end());
  return AttackGraph(std::move(nodes), std::move(edges), graph.goals());
}

// ---------------------------------------------------------------------------
// CompiledGraph

std::uint32_t CompiledGraph::position_of(NodeId id) const {
  auto it = position.find(id);
  if (it == position.end()) throw Error(ErrorCode::UnknownNode, "unknown node " + std::to_string(id));
  return it->second;
}

bool CompiledGraph::deterministic_internals() const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (kinds[i] != NodeKind::Leaf && probs[i] != 1.0) return false;
  return true;
}

CompiledGraph compile(const AttackGraph& graph) {
  auto violations = validate(graph);
  if (!violations.empty()) {
    std::vector<std::string> details;
    for (const auto& v : violations) details.push_back(v.message);
    throw Error(ErrorCode::ValidationError, "invalid attack graph", std::move(details));
  }
  CompiledGraph c;
  c.ids = topological_order(graph);
  const auto n = c.ids.size();
  c.kinds.resize(n);
  c.probs.resize(n);
  c.parents.resize(n);
  c.children.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) c.position.emplace(c.ids[i], i);
  for (std::uint32_t i = 0; i < n; ++i) {
    const Node& node = graph.node(c.ids[i]);
    c.kinds[i] = node.kind;
    c.probs[i] = node.local_prob;
    for (NodeId p : graph.parents(node.id)) c.parents[i].push_back(c.position.at(p));
    for (NodeId ch : graph.children(node.id)) c.children[i].push_back(c.position.at(ch));
  }
  return c;
}

}  // namespace bagsim
