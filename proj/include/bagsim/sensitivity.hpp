#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "bagsim/graph.hpp"
#include "bagsim/samplers.hpp"

namespace bagsim {

enum class Engine { Exact, PLS, LW, BS };

std::string_view to_string(Engine e);
/// "exact", "pls", "lw", "bs" (any case).
std::optional<Engine> parse_engine(std::string_view text);

/// Settings shared by every inference the sensitivity routines issue.
struct EngineConfig {
  Engine engine = Engine::Exact;
  StopCriterion stop{};
  std::uint64_t seed = 1;
  RunOptions run{};
  /// Background evidence held fixed while leaves are switched on and off.
  EvidenceSet evidence{};
};

struct GoalEstimate {
  double probability = 0.0;
  double std_error = 0.0;  // 0 for the exact engine
};

/// P(goal | evidence) under the configured engine. For stochastic engines only
/// the goal is monitored for convergence.
GoalEstimate estimate_goal(const AttackGraph& graph, NodeId goal, const EngineConfig& cfg);

struct SensitivityEntry {
  NodeId leaf_id = 0;
  NodeId goal_id = 0;
  double sensitivity = 0.0;  // p_given_1 - p_given_0
  double p_given_1 = 0.0;
  double p_given_0 = 0.0;
  double stderr_combined = 0.0;
};

/// P(goal | leaf = 1) - P(goal | leaf = 0). The leaf is clamped by setting its
/// prior to 1 or 0; for a parentless node conditioning and intervention agree,
/// and a prior of exactly 0 or 1 is simply overridden. Stochastic engines use
/// the same seed for both runs.
///
/// Throws UnknownNode, or DomainError when `leaf` is not a LEAF.
SensitivityEntry sensitivity_onoff(const AttackGraph& graph, NodeId goal, NodeId leaf,
                                   const EngineConfig& cfg);

struct SensitivityReport {
  NodeId goal_id = 0;
  Engine engine = Engine::Exact;
  GoalEstimate baseline;                  // P(goal) with the priors as given
  std::vector<SensitivityEntry> entries;  // descending sensitivity, ties by leaf id
};

/// One entry per LEAF node.
SensitivityReport sensitivity_report(const AttackGraph& graph, NodeId goal, const EngineConfig& cfg);

inline constexpr std::size_t kDensityBins = 50;

struct SensitivityDensity {
  NodeId leaf_id = 0;
  NodeId goal_id = 0;
  std::vector<std::pair<double, double>> samples;  // (leaf prior u, goal estimate)
  std::vector<double> histogram;                   // kDensityBins probability masses over [0,1]

  [[nodiscard]] static double bin_width() { return 1.0 / static_cast<double>(kDensityBins); }
  /// Distance from the lower edge of the first occupied bin to the upper edge
  /// of the last occupied bin.
  [[nodiscard]] double support_width() const;
  /// max - min of the recorded goal estimates.
  [[nodiscard]] double estimate_range() const;
};

/// Draws n_draws priors u ~ Uniform[0,1) for `leaf`, estimates P(goal) under
/// each, and bins the estimates into a kDensityBins histogram.
SensitivityDensity sensitivity_density(const AttackGraph& graph, NodeId goal, NodeId leaf,
                                       std::size_t n_draws, const EngineConfig& cfg);

}  // namespace bagsim
