#include "bagsim/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "bagsim/oracle.hpp"

namespace bagsim {

std::string_view to_string(Engine e) {
  switch (e) {
    case Engine::Exact: return "exact";
    case Engine::PLS: return "pls";
    case Engine::LW: return "lw";
    case Engine::BS: return "bs";
  }
  return "?";
}

std::optional<Engine> parse_engine(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "exact") return Engine::Exact;
  if (s == "pls") return Engine::PLS;
  if (s == "lw") return Engine::LW;
  if (s == "bs") return Engine::BS;
  return std::nullopt;
}

namespace {

Technique technique_of(Engine e) {
  switch (e) {
    case Engine::PLS: return Technique::PLS;
    case Engine::BS: return Technique::BS;
    default: return Technique::LW;
  }
}

// splitmix64 finaliser, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void require_leaf(const AttackGraph& graph, NodeId goal, NodeId leaf) {
  static_cast<void>(graph.node(goal));  // throws UnknownNode
  if (graph.node(leaf).kind != NodeKind::Leaf) {
    throw Error(ErrorCode::DomainError, "node " + std::to_string(leaf) + " is not a LEAF");
  }
}

}  // namespace

GoalEstimate estimate_goal(const AttackGraph& graph, NodeId goal, const EngineConfig& cfg) {
  static_cast<void>(graph.node(goal));  // throws UnknownNode
  if (cfg.engine == Engine::Exact) {
    return {exact_conditional(graph, cfg.evidence).at(goal).probability, 0.0};
  }
  StopCriterion stop = cfg.stop;
  if (stop.monitored.empty()) stop.monitored = {goal};
  RunOptions run = cfg.run;
  if (run.trace_nodes.empty()) run.trace_nodes = {goal};
  const auto r = run_inference(graph, cfg.evidence, technique_of(cfg.engine), stop, cfg.seed, run);
  const auto& e = r.at(goal);
  return {e.p_hat, e.std_error};
}

SensitivityEntry sensitivity_onoff(const AttackGraph& graph, NodeId goal, NodeId leaf,
                                   const EngineConfig& cfg) {
  require_leaf(graph, goal, leaf);
  const auto on = estimate_goal(graph.with_local_prob(leaf, 1.0), goal, cfg);
  const auto off = estimate_goal(graph.with_local_prob(leaf, 0.0), goal, cfg);
  SensitivityEntry e;
  e.leaf_id = leaf;
  e.goal_id = goal;
  e.p_given_1 = on.probability;
  e.p_given_0 = off.probability;
  e.sensitivity = on.probability - off.probability;
  e.stderr_combined = std::sqrt(on.std_error * on.std_error + off.std_error * off.std_error);
  return e;
}

SensitivityReport sensitivity_report(const AttackGraph& graph, NodeId goal, const EngineConfig& cfg) {
  static_cast<void>(graph.node(goal));  // throws UnknownNode
  SensitivityReport report;
  report.goal_id = goal;
  report.engine = cfg.engine;
  report.baseline = estimate_goal(graph, goal, cfg);
  for (NodeId leaf : graph.leaf_ids()) report.entries.push_back(sensitivity_onoff(graph, goal, leaf, cfg));
  std::stable_sort(report.entries.begin(), report.entries.end(), [](const auto& a, const auto& b) {
    if (a.sensitivity != b.sensitivity) return a.sensitivity > b.sensitivity;
    return a.leaf_id < b.leaf_id;
  });
  return report;
}

double SensitivityDensity::support_width() const {
  std::size_t lo = histogram.size(), hi = 0;
  for (std::size_t b = 0; b < histogram.size(); ++b) {
    if (histogram[b] > 0.0) {
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
  }
  if (lo > hi) return 0.0;
  return static_cast<double>(hi + 1 - lo) * bin_width();
}

double SensitivityDensity::estimate_range() const {
  if (samples.empty()) return 0.0;
  auto [mn, mx] = std::minmax_element(samples.begin(), samples.end(),
                                      [](const auto& a, const auto& b) { return a.second < b.second; });
  return mx->second - mn->second;
}

SensitivityDensity sensitivity_density(const AttackGraph& graph, NodeId goal, NodeId leaf,
                                       std::size_t n_draws, const EngineConfig& cfg) {
  require_leaf(graph, goal, leaf);
  if (n_draws == 0) throw Error(ErrorCode::DomainError, "n_draws must be positive");

  SensitivityDensity d;
  d.leaf_id = leaf;
  d.goal_id = goal;
  d.histogram.assign(kDensityBins, 0.0);

  Philox4x32 prior_rng(cfg.seed, 0xD15u);
  for (std::size_t k = 0; k < n_draws; ++k) {
    const double u = prior_rng.uniform();
    EngineConfig draw_cfg = cfg;
    draw_cfg.seed = mix_seed(cfg.seed, k);
    const double p = estimate_goal(graph.with_local_prob(leaf, u), goal, draw_cfg).probability;
    d.samples.emplace_back(u, p);
    const auto bin = std::min<std::size_t>(kDensityBins - 1, static_cast<std::size_t>(p * kDensityBins));
    d.histogram[bin] += 1.0;
  }
  for (auto& m : d.histogram) m /= static_cast<double>(n_draws);
  return d;
}

}  // namespace bagsim
