#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bagsim/graph.hpp"
#include "bagsim/samplers.hpp"

namespace bagsim {

/// Shape of a layered synthetic attack graph: a LEAF layer followed by
/// alternating AND/OR layers, ending in a single OR goal node.
struct SyntheticGraphSpec {
  std::size_t n_nodes = 200;
  double leaf_fraction = 0.4;
  double and_or_ratio = 1.0;  // AND count / OR count among internal nodes
  std::size_t max_parents = 2;
  /// Number of AND/OR layer pairs; 0 picks round(log2(internal nodes) / 3).
  std::size_t layers = 0;
  std::pair<double, double> prior_range{0.3, 0.9};
  /// Local probability range for AND/OR nodes (exploit success, detection
  /// of privilege). {1, 1} yields deterministic internal nodes.
  std::pair<double, double> internal_prob_range{0.3, 0.9};
  std::uint64_t seed = 1;
};

/// Deterministic in `spec`. Throws InvalidSpec for n_nodes < 5 or
/// out-of-range fractions/probabilities.
AttackGraph generate_synthetic(const SyntheticGraphSpec& spec);

/// Longest path (in edges) from any LEAF to each node, keyed by id.
std::vector<std::pair<NodeId, std::size_t>> node_depths(const AttackGraph& graph);

/// Picks `count` OR nodes (goals excluded) observed as compromised, deepest
/// first with seed-shuffled ties. A candidate is kept only if a likelihood-
/// weighting pilot of `pilot_samples` finds a nonzero weight for the
/// accumulated evidence. May return fewer entries when candidates run out.
EvidenceSet select_evidence(const AttackGraph& graph, std::size_t count, std::uint64_t seed,
                            std::uint64_t pilot_samples = 20000);

struct BenchConfig {
  std::vector<std::size_t> sizes{100, 200, 500, 1000};
  std::vector<std::size_t> evidence_counts{1, 3};
  std::vector<Technique> techniques{Technique::PLS, Technique::LW, Technique::BS};
  std::vector<double> target_errors{0.02};
  std::size_t repetitions = 3;
  double timeout_ms = 120'000.0;
  std::uint64_t max_samples = 50'000'000;
  std::uint64_t batch_size = 1000;
  std::uint64_t seed = 1;
  /// Sizes above 1000 are skipped unless set.
  bool extended = false;
  SyntheticGraphSpec graph_template{};
  /// Run cells concurrently (n_raw stays reproducible; wall times do not).
  unsigned parallel_cells = 1;
};

/// JSON object with any of the BenchConfig field names ("techniques" as
/// strings, "graph" for the generator template). Unknown keys are rejected
/// with InvalidSpec; type errors raise MalformedInput.
BenchConfig parse_bench_config(std::string_view json_text);

inline constexpr std::size_t kStandardProfileMaxSize = 1000;
inline constexpr std::size_t kExtendedProfileMaxSize = 5000;

/// One inference run. A run that exhausts the timeout or sample budget, or
/// ends with no weighted sample, is recorded with converged = false.
struct BenchRun {
  Technique technique = Technique::LW;
  std::size_t n_nodes = 0;
  std::size_t n_evidence = 0;
  double target_error = 0.0;
  std::size_t repetition = 0;
  double wall_ms = 0.0;
  std::uint64_t n_raw = 0;
  bool converged = false;
  std::string failure;  // error code name when the run threw
};

/// Aggregate over repetitions of one (technique, size, evidence, error) cell.
struct BenchResult {
  Technique technique = Technique::LW;
  std::size_t n_nodes = 0;
  std::size_t n_evidence = 0;
  double target_error = 0.0;
  std::size_t repetitions = 0;
  std::size_t converged = 0;
  double wall_ms_min = 0.0, wall_ms_max = 0.0, wall_ms_mean = 0.0;
  double n_raw_min = 0.0, n_raw_max = 0.0, n_raw_mean = 0.0, n_raw_median = 0.0;
};

struct BenchOutput {
  std::vector<BenchRun> runs;
  std::vector<BenchResult> cells;
};

/// Every (size, evidence count, technique, target error) cell, `repetitions`
/// times with seeds derived from `config.seed`. Cells never throw; failures
/// are recorded on the run.
BenchOutput run_comparison(const BenchConfig& config);

std::vector<BenchResult> summarize(const std::vector<BenchRun>& runs);

/// `technique,n_nodes,n_evidence,target_error,repetition,wall_ms,n_raw,converged`
std::string bench_csv(const std::vector<BenchRun>& runs, bool include_wall_time = true);

/// Static SVG charts: mean wall time against target error (one series per
/// technique and evidence count), and mean wall time against graph size.
std::string time_vs_error_svg(const std::vector<BenchResult>& cells);
std::string size_scaling_svg(const std::vector<BenchResult>& cells);

}  // namespace bagsim
