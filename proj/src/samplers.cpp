#include "bagsim/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <queue>

namespace bagsim {

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::PLS: return "PLS";
    case Technique::LW: return "LW";
    case Technique::BS: return "BS";
  }
  return "?";
}

std::optional<Technique> parse_technique(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "pls") return Technique::PLS;
  if (s == "lw") return Technique::LW;
  if (s == "bs") return Technique::BS;
  return std::nullopt;
}

std::vector<std::int8_t> evidence_mask(const CompiledGraph& g, const EvidenceSet& evidence) {
  std::vector<std::int8_t> mask(g.size(), -1);
  for (const auto& [id, v] : evidence) mask[g.position_of(id)] = v ? 1 : 0;
  return mask;
}

namespace {

// Prob(X = 1 | parents) for the three node kinds.
inline double prob_true(const CompiledGraph& g, std::uint32_t pos, const std::uint8_t* a) {
  const auto& pa = g.parents[pos];
  switch (g.kinds[pos]) {
    case NodeKind::Leaf:
      return g.probs[pos];
    case NodeKind::And:
      for (auto p : pa)
        if (!a[p]) return 0.0;
      return g.probs[pos];
    case NodeKind::Or:
      for (auto p : pa)
        if (a[p]) return g.probs[pos];
      return 0.0;
  }
  return 0.0;
}

inline double likelihood(const CompiledGraph& g, std::uint32_t pos, bool value, const std::uint8_t* a) {
  const double p = prob_true(g, pos, a);
  return value ? p : 1.0 - p;
}

// Draws X_pos from its CPT given realised parents. Deterministic outcomes
// (probability exactly 0 or 1) consume no random numbers.
inline std::uint8_t draw(const CompiledGraph& g, std::uint32_t pos, const std::uint8_t* a,
                         Philox4x32& rng) {
  const double p = prob_true(g, pos, a);
  if (p == 0.0) return 0;
  if (p == 1.0) return 1;
  return rng.bernoulli(p) ? 1 : 0;
}

void forward_into(const CompiledGraph& g, std::uint8_t* a, Philox4x32& rng) {
  const auto n = static_cast<std::uint32_t>(g.size());
  for (std::uint32_t i = 0; i < n; ++i) a[i] = draw(g, i, a, rng);
}

double lw_into(const CompiledGraph& g, const std::int8_t* mask, std::uint8_t* a, Philox4x32& rng) {
  const auto n = static_cast<std::uint32_t>(g.size());
  double w = 1.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (mask[i] < 0) {
      a[i] = draw(g, i, a, rng);
    } else {
      a[i] = static_cast<std::uint8_t>(mask[i]);
      w *= likelihood(g, i, a[i] != 0, a);
    }
  }
  return w;
}

double pls_into(const CompiledGraph& g, const std::int8_t* mask, std::uint8_t* a, Philox4x32& rng) {
  forward_into(g, a, rng);
  const auto n = g.size();
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i] >= 0 && a[i] != static_cast<std::uint8_t>(mask[i])) return 0.0;
  return 1.0;
}

// Scratch state for backward simulation, reused across samples.
struct BackwardScratch {
  std::vector<std::uint8_t> instantiated;
  std::vector<std::uint8_t> queued;
  std::vector<std::uint32_t> free_parents;
  std::vector<double> config_weight;
  std::priority_queue<std::uint32_t> queue;
  bool zero_normalization = false;
};

// Enumerates configurations of `free_parents` (bit j of the config index is the
// value of free_parents[j]) and stores Prob(X_pos = value | config, pa*) per
// config. Leaves `a` at config 0 on return. Returns the sum (Norm).
double enumerate_parent_configs(const CompiledGraph& g, std::uint32_t pos, bool value,
                                std::uint8_t* a, const std::vector<std::uint32_t>& free_parents,
                                std::vector<double>& out) {
  const std::size_t k = free_parents.size();
  if (k > kMaxBackwardParents) {
    throw Error(ErrorCode::TooManyParents,
                "node " + std::to_string(g.ids[pos]) + " has " + std::to_string(k) +
                    " uninstantiated parents; backward simulation enumerates at most " +
                    std::to_string(kMaxBackwardParents));
  }
  const std::size_t configs = std::size_t{1} << k;
  out.resize(configs);
  double norm = 0.0;
  for (std::size_t c = 0; c < configs; ++c) {
    for (std::size_t j = 0; j < k; ++j) a[free_parents[j]] = static_cast<std::uint8_t>((c >> j) & 1u);
    out[c] = likelihood(g, pos, value, a);
    norm += out[c];
  }
  for (auto p : free_parents) a[p] = 0;
  return norm;
}

double bs_into(const CompiledGraph& g, const std::int8_t* mask, std::uint8_t* a, Philox4x32& rng,
               BackwardScratch& s, BackwardTrace* trace) {
  const auto n = static_cast<std::uint32_t>(g.size());
  s.instantiated.assign(n, 0);
  s.queued.assign(n, 0);
  s.zero_normalization = false;
  std::fill(a, a + n, std::uint8_t{0});
  for (std::uint32_t i = 0; i < n; ++i) {
    if (mask[i] >= 0) {
      a[i] = static_cast<std::uint8_t>(mask[i]);
      s.instantiated[i] = 1;
      s.queued[i] = 1;
      s.queue.push(i);
    }
  }

  double w = 1.0;
  // Highest topological position first: every node is handled after all of
  // its instantiated descendants, so its parents' values are still free to be
  // chosen by it alone.
  while (!s.queue.empty()) {
    const std::uint32_t i = s.queue.top();
    s.queue.pop();
    if (w == 0.0) continue;

    s.free_parents.clear();
    for (auto p : g.parents[i])
      if (!s.instantiated[p]) s.free_parents.push_back(p);

    if (s.free_parents.empty()) {
      // Instantiated but not sampled from: contributes its likelihood.
      w *= likelihood(g, i, a[i] != 0, a);
      if (trace) trace->likelihood_nodes.push_back(g.ids[i]);
      continue;
    }

    // P_s(pa^u) = Prob(x_i | pa^u, pa*) / Norm(i)
    const double norm = enumerate_parent_configs(g, i, a[i] != 0, a, s.free_parents, s.config_weight);
    if (trace) {
      BackwardTrace::Step step{g.ids[i], a[i] != 0, {}, norm};
      for (auto p : s.free_parents) step.sampled_parents.push_back(g.ids[p]);
      trace->steps.push_back(std::move(step));
    }
    if (norm == 0.0) {
      w = 0.0;
      s.zero_normalization = true;
      if (trace) trace->zero_normalization = true;
      continue;
    }
    double u = rng.uniform() * norm;
    std::size_t chosen = 0;
    const std::size_t configs = s.config_weight.size();
    for (; chosen + 1 < configs; ++chosen) {
      if (u < s.config_weight[chosen]) break;
      u -= s.config_weight[chosen];
    }
    // Guard against rounding landing on a zero-likelihood tail entry.
    while (s.config_weight[chosen] == 0.0 && chosen > 0) --chosen;
    for (std::size_t j = 0; j < s.free_parents.size(); ++j) {
      const auto p = s.free_parents[j];
      a[p] = static_cast<std::uint8_t>((chosen >> j) & 1u);
      s.instantiated[p] = 1;
      if (!s.queued[p]) {
        s.queued[p] = 1;
        s.queue.push(p);
      }
    }
    w *= norm;
  }

  for (std::uint32_t i = 0; i < n; ++i)
    if (!s.instantiated[i]) a[i] = draw(g, i, a, rng);
  return w;
}

}  // namespace

double conditional_probability(const CompiledGraph& g, std::uint32_t pos, bool value,
                               const std::vector<std::uint8_t>& assignment) {
  return likelihood(g, pos, value, assignment.data());
}

Sample sample_forward(const CompiledGraph& g, Philox4x32& rng) {
  Sample s{std::vector<std::uint8_t>(g.size()), 1.0};
  forward_into(g, s.assignment.data(), rng);
  return s;
}

Sample sample_likelihood_weighted(const CompiledGraph& g, const std::vector<std::int8_t>& mask,
                                  Philox4x32& rng) {
  Sample s{std::vector<std::uint8_t>(g.size()), 1.0};
  s.weight = lw_into(g, mask.data(), s.assignment.data(), rng);
  return s;
}

double backward_normalization(const CompiledGraph& g, std::uint32_t pos, bool value,
                              const std::vector<std::uint8_t>& assignment,
                              const std::vector<std::uint8_t>& instantiated) {
  std::vector<std::uint8_t> a = assignment;
  std::vector<std::uint32_t> free;
  for (auto p : g.parents[pos])
    if (!instantiated[p]) free.push_back(p);
  std::vector<double> scratch;
  return enumerate_parent_configs(g, pos, value, a.data(), free, scratch);
}

Sample sample_backward(const CompiledGraph& g, const std::vector<std::int8_t>& mask, Philox4x32& rng,
                       BackwardTrace* trace) {
  Sample s{std::vector<std::uint8_t>(g.size()), 1.0};
  BackwardScratch scratch;
  s.weight = bs_into(g, mask.data(), s.assignment.data(), rng, scratch, trace);
  return s;
}

double stderr_of(double p_hat, double n_effective) {
  if (!(n_effective > 0.0)) throw Error(ErrorCode::DomainError, "effective sample size must be positive");
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw Error(ErrorCode::DomainError, "proportion must lie in [0,1]");
  return std::sqrt(p_hat * (1.0 - p_hat) / n_effective);
}

double effective_sample_size(double sum_w, double sum_w2) {
  return sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0;
}

const PosteriorEstimate& InferenceResult::at(NodeId id) const {
  auto it = std::lower_bound(posteriors.begin(), posteriors.end(), id,
                             [](const PosteriorEstimate& p, NodeId v) { return p.node_id < v; });
  if (it == posteriors.end() || it->node_id != id)
    throw Error(ErrorCode::UnknownNode, "no posterior for node " + std::to_string(id));
  return *it;
}

double InferenceResult::max_monitored_error(const std::vector<NodeId>& monitored) const {
  double m = 0.0;
  if (monitored.empty()) {
    for (const auto& p : posteriors) m = std::max(m, p.std_error);
  } else {
    for (NodeId id : monitored) m = std::max(m, at(id).std_error);
  }
  return m;
}

namespace {

struct Accumulator {
  std::uint64_t count = 0;
  WeightStats weights;
  std::uint64_t zero_normalizations = 0;
  std::vector<double> weighted_true;  // sum of weights of samples with X_i = 1

  explicit Accumulator(std::size_t n = 0) : weighted_true(n, 0.0) {}

  void merge(const Accumulator& o) {
    count += o.count;
    weights.sum += o.weights.sum;
    weights.sum_sq += o.weights.sum_sq;
    weights.max = std::max(weights.max, o.weights.max);
    weights.nonzero += o.weights.nonzero;
    zero_normalizations += o.zero_normalizations;
    for (std::size_t i = 0; i < weighted_true.size(); ++i) weighted_true[i] += o.weighted_true[i];
  }
};

Accumulator run_batch(const CompiledGraph& g, const std::vector<std::int8_t>& mask, Technique technique,
                      std::uint64_t seed, std::uint64_t batch, std::uint64_t count) {
  const std::size_t n = g.size();
  Accumulator acc(n);
  Philox4x32 rng(seed, batch);
  std::vector<std::uint8_t> a(n);
  BackwardScratch scratch;
  const bool any_evidence = std::any_of(mask.begin(), mask.end(), [](auto m) { return m >= 0; });

  for (std::uint64_t j = 0; j < count; ++j) {
    double w = 1.0;
    switch (technique) {
      case Technique::PLS:
        w = pls_into(g, mask.data(), a.data(), rng);
        break;
      case Technique::LW:
        w = lw_into(g, mask.data(), a.data(), rng);
        break;
      case Technique::BS:
        if (any_evidence) {
          w = bs_into(g, mask.data(), a.data(), rng, scratch, nullptr);
          if (scratch.zero_normalization) ++acc.zero_normalizations;
        } else {
          forward_into(g, a.data(), rng);
        }
        break;
    }
    ++acc.count;
    if (w > 0.0) {
      acc.weights.sum += w;
      acc.weights.sum_sq += w * w;
      acc.weights.max = std::max(acc.weights.max, w);
      ++acc.weights.nonzero;
      for (std::size_t i = 0; i < n; ++i)
        if (a[i]) acc.weighted_true[i] += w;
    }
  }
  return acc;
}

}  // namespace

InferenceResult run_inference(const CompiledGraph& g, const std::vector<NodeId>& goals,
                              const EvidenceSet& evidence, Technique technique,
                              const StopCriterion& stop, std::uint64_t seed, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const auto mask = evidence_mask(g, evidence);
  const std::size_t n = g.size();

  std::vector<std::uint32_t> monitored;
  if (stop.monitored.empty()) {
    for (std::uint32_t i = 0; i < n; ++i)
      if (mask[i] < 0) monitored.push_back(i);
  } else {
    for (NodeId id : stop.monitored) monitored.push_back(g.position_of(id));
  }
  std::vector<std::uint32_t> traced;
  for (NodeId id : options.trace_nodes.empty() ? goals : options.trace_nodes)
    traced.push_back(g.position_of(id));

  if (options.batch_size == 0) throw Error(ErrorCode::DomainError, "batch size must be positive");
  if (!(stop.per_node_error > 0.0)) throw Error(ErrorCode::DomainError, "per-node error must be positive");

  InferenceResult result;
  result.technique = technique;
  Accumulator total(n);
  std::uint64_t next_batch = 0;
  const unsigned wave = std::max(1u, options.threads);

  auto proportion = [&](std::uint32_t i) {
    return std::clamp(total.weighted_true[i] / total.weights.sum, 0.0, 1.0);
  };

  bool done = false;
  while (!done && total.count < stop.max_samples) {
    // Plan the next wave of batches; sizes depend only on the sample budget.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> plan;  // (batch index, count)
    std::uint64_t planned = total.count;
    for (unsigned k = 0; k < wave && planned < stop.max_samples; ++k) {
      const std::uint64_t count = std::min(options.batch_size, stop.max_samples - planned);
      plan.emplace_back(next_batch++, count);
      planned += count;
    }

    std::vector<Accumulator> results;
    if (plan.size() == 1) {
      results.push_back(run_batch(g, mask, technique, seed, plan[0].first, plan[0].second));
    } else {
      std::vector<std::future<Accumulator>> futures;
      for (const auto& [b, count] : plan) {
        futures.push_back(std::async(std::launch::async, [&, b = b, count = count] {
          return run_batch(g, mask, technique, seed, b, count);
        }));
      }
      for (auto& f : futures) results.push_back(f.get());
    }

    for (std::size_t k = 0; k < results.size(); ++k) {
      total.merge(results[k]);
      const double n_eff = effective_sample_size(total.weights.sum, total.weights.sum_sq);

      TracePoint point;
      point.batch = plan[k].first;
      point.n_raw = total.count;
      point.n_effective = n_eff;
      for (auto i : traced) {
        if (n_eff > 0.0) {
          const double p = proportion(i);
          point.nodes.push_back({g.ids[i], p, stderr_of(p, n_eff)});
        } else {
          point.nodes.push_back({g.ids[i], std::nan(""), std::nan("")});
        }
      }
      result.trace.push_back(point);
      if (options.on_batch) options.on_batch(result.trace.back());

      if (n_eff > 0.0 && n_eff >= options.min_effective) {
        bool ok = true;
        for (auto i : monitored) {
          if (stderr_of(proportion(i), n_eff) > stop.per_node_error) {
            ok = false;
            break;
          }
        }
        if (ok) {
          result.converged = true;
          done = true;
          break;
        }
      }
    }

    if (!done && options.time_budget_ms > 0.0) {
      const double elapsed =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (elapsed >= options.time_budget_ms) break;
    }
  }

  result.n_raw = total.count;
  result.weights = total.weights;
  result.timed_out = !result.converged;
  result.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  if (total.weights.sum <= 0.0) {
    switch (technique) {
      case Technique::PLS:
        throw Error(ErrorCode::NoAcceptedSamples,
                    "no sample consistent with the evidence after " + std::to_string(total.count) +
                        " samples");
      case Technique::BS:
        if (total.zero_normalizations > 0) {
          throw Error(ErrorCode::ZeroNormalization,
                      "backward simulation found no parent configuration supporting the evidence (" +
                          std::to_string(total.count) + " samples)");
        }
        [[fallthrough]];
      case Technique::LW:
        throw Error(ErrorCode::ZeroTotalWeight,
                    "every sample has zero weight after " + std::to_string(total.count) + " samples");
    }
  }

  result.n_effective = effective_sample_size(total.weights.sum, total.weights.sum_sq);
  result.posteriors.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    PosteriorEstimate e;
    e.node_id = g.ids[i];
    e.p_hat = proportion(i);
    e.std_error = stderr_of(e.p_hat, result.n_effective);
    e.n_effective = result.n_effective;
    e.n_raw = total.count;
    result.posteriors.push_back(e);
  }
  std::sort(result.posteriors.begin(), result.posteriors.end(),
            [](const auto& a, const auto& b) { return a.node_id < b.node_id; });
  return result;
}

InferenceResult run_inference(const AttackGraph& graph, const EvidenceSet& evidence, Technique technique,
                              const StopCriterion& stop, std::uint64_t seed, const RunOptions& options) {
  check_evidence(evidence, graph);
  return run_inference(compile(graph), graph.goals(), evidence, technique, stop, seed, options);
}

InferenceResult pls_infer(const AttackGraph& graph, const EvidenceSet& evidence, const StopCriterion& stop,
                          std::uint64_t seed) {
  return run_inference(graph, evidence, Technique::PLS, stop, seed);
}

InferenceResult lw_infer(const AttackGraph& graph, const EvidenceSet& evidence, const StopCriterion& stop,
                         std::uint64_t seed) {
  return run_inference(graph, evidence, Technique::LW, stop, seed);
}

InferenceResult bs_infer(const AttackGraph& graph, const EvidenceSet& evidence, const StopCriterion& stop,
                         std::uint64_t seed) {
  return run_inference(graph, evidence, Technique::BS, stop, seed);
}

}  // namespace bagsim
