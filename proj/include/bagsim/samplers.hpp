#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bagsim/graph.hpp"
#include "bagsim/io.hpp"
#include "bagsim/rng.hpp"

namespace bagsim {

enum class Technique { PLS, LW, BS };

std::string_view to_string(Technique t);
/// Accepts "pls", "lw", "bs" in any case.
std::optional<Technique> parse_technique(std::string_view text);

/// One full Boolean assignment in `CompiledGraph` position order plus its
/// importance weight (1 for forward samples, 0 for rejected PLS samples).
struct Sample {
  std::vector<std::uint8_t> assignment;
  double weight = 1.0;

  [[nodiscard]] bool value(const CompiledGraph& g, NodeId id) const {
    return assignment[g.position_of(id)] != 0;
  }
};

/// Evidence projected onto compiled positions: -1 unobserved, 0 / 1 observed.
std::vector<std::int8_t> evidence_mask(const CompiledGraph& g, const EvidenceSet& evidence);

/// Prob(X_i = value | parents as in `assignment`) under the AND/OR/LEAF CPTs.
double conditional_probability(const CompiledGraph& g, std::uint32_t pos, bool value,
                               const std::vector<std::uint8_t>& assignment);

/// Forward (ancestral) sample: leaves are 1 iff u < prior, internal nodes
/// follow their CPT given the realised parents. Weight is 1.
Sample sample_forward(const CompiledGraph& g, Philox4x32& rng);

/// Likelihood-weighting sample: observed nodes are clamped and multiply the
/// weight by Prob(X_i = z_i | realised parents); others are sampled forward.
Sample sample_likelihood_weighted(const CompiledGraph& g, const std::vector<std::int8_t>& mask,
                                  Philox4x32& rng);

/// Diagnostic record of one backward-simulation sample.
struct BackwardTrace {
  struct Step {
    NodeId node;
    bool value;
    std::vector<NodeId> sampled_parents;  // pa^u at the time of the step
    double normalization;                 // Norm(i)
  };
  std::vector<Step> steps;               // backward-sampled nodes (N_b) in processing order
  std::vector<NodeId> likelihood_nodes;  // instantiated but never sampled from (N \ N_S)
  bool zero_normalization = false;
};

/// Sum over all configurations y of the uninstantiated parents of
/// Prob(X_pos = value | y, instantiated parents). `instantiated` flags which
/// positions already hold a value in `assignment`.
double backward_normalization(const CompiledGraph& g, std::uint32_t pos, bool value,
                              const std::vector<std::uint8_t>& assignment,
                              const std::vector<std::uint8_t>& instantiated);

/// Upper bound on the uninstantiated-parent count enumerated by one backward step.
inline constexpr std::size_t kMaxBackwardParents = 20;

/// Backward-simulation sample. Observed nodes and every node instantiated by a
/// backward step are processed in reverse topological order: when a node has
/// uninstantiated parents, a joint parent configuration y is drawn with
/// probability Prob(x_i | y, pa*) / Norm(i) and Norm(i) multiplies the weight;
/// otherwise the node's own likelihood Prob(x_i | pa) multiplies the weight.
/// All remaining nodes are then sampled forward. A zero normalisation yields
/// weight 0. Throws TooManyParents beyond `kMaxBackwardParents`.
Sample sample_backward(const CompiledGraph& g, const std::vector<std::int8_t>& mask,
                       Philox4x32& rng, BackwardTrace* trace = nullptr);

/// sqrt(p (1 - p) / n). Throws DomainError for n <= 0 or p outside [0,1].
double stderr_of(double p_hat, double n_effective);

/// Kish effective sample size (sum w)^2 / sum w^2; 0 when every weight is 0.
double effective_sample_size(double sum_w, double sum_w2);

struct StopCriterion {
  double per_node_error = 0.02;
  std::uint64_t max_samples = 1'000'000;
  /// Nodes whose standard error must fall below `per_node_error`; empty means
  /// every non-evidence node.
  std::vector<NodeId> monitored;
};

struct TracePoint {
  std::uint64_t batch = 0;
  std::uint64_t n_raw = 0;
  double n_effective = 0.0;
  struct Entry {
    NodeId node_id;
    double p_hat;
    double std_error;
  };
  std::vector<Entry> nodes;
};

struct RunOptions {
  std::uint64_t batch_size = 1000;
  /// Convergence is not declared before this many effective samples, so a
  /// handful of samples with degenerate proportions cannot stop a run.
  double min_effective = 100.0;
  /// Worker threads for batch generation. Output does not depend on it.
  unsigned threads = 1;
  /// Wall-clock budget in milliseconds; 0 disables it.
  double time_budget_ms = 0.0;
  /// Nodes recorded in the per-batch convergence trace; empty means the graph's goals.
  std::vector<NodeId> trace_nodes;
  /// Called after every merged batch with the trace point just appended.
  std::function<void(const TracePoint&)> on_batch;
};

struct PosteriorEstimate {
  NodeId node_id = 0;
  double p_hat = 0.0;
  double std_error = 0.0;
  double n_effective = 0.0;
  std::uint64_t n_raw = 0;
};

struct WeightStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  double max = 0.0;
  std::uint64_t nonzero = 0;
};

struct InferenceResult {
  Technique technique = Technique::LW;
  bool converged = false;
  bool timed_out = false;  // stopped by max_samples or the wall-clock budget
  std::uint64_t n_raw = 0;
  double n_effective = 0.0;
  WeightStats weights;
  double wall_ms = 0.0;
  std::vector<PosteriorEstimate> posteriors;  // ascending node id
  std::vector<TracePoint> trace;

  /// Accepted / generated for PLS; nonzero-weight fraction otherwise.
  [[nodiscard]] double acceptance_rate() const {
    return n_raw == 0 ? 0.0 : static_cast<double>(weights.nonzero) / static_cast<double>(n_raw);
  }
  /// Throws UnknownNode.
  [[nodiscard]] const PosteriorEstimate& at(NodeId id) const;
  [[nodiscard]] double max_monitored_error(const std::vector<NodeId>& monitored) const;
};

/// Runs `technique` in batches until every monitored node's standard error is
/// at most `stop.per_node_error` or `stop.max_samples` samples were drawn.
/// Batch b uses the Philox stream (seed, b); batches are merged in index order,
/// so results are bit-identical for any thread count.
///
/// Throws NoAcceptedSamples (PLS), ZeroNormalization (BS) or ZeroTotalWeight
/// when no sample carries weight by the end of the run.
InferenceResult run_inference(const AttackGraph& graph, const EvidenceSet& evidence,
                              Technique technique, const StopCriterion& stop, std::uint64_t seed,
                              const RunOptions& options = {});

InferenceResult run_inference(const CompiledGraph& graph, const std::vector<NodeId>& goals,
                              const EvidenceSet& evidence, Technique technique,
                              const StopCriterion& stop, std::uint64_t seed,
                              const RunOptions& options = {});

/// Probabilistic logic sampling: forward samples inconsistent with the evidence are discarded.
InferenceResult pls_infer(const AttackGraph& graph, const EvidenceSet& evidence,
                          const StopCriterion& stop, std::uint64_t seed);
/// Likelihood weighting.
InferenceResult lw_infer(const AttackGraph& graph, const EvidenceSet& evidence,
                         const StopCriterion& stop, std::uint64_t seed);
/// Backward simulation.
InferenceResult bs_infer(const AttackGraph& graph, const EvidenceSet& evidence,
                         const StopCriterion& stop, std::uint64_t seed);

}  // namespace bagsim
