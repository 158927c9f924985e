#include "bagsim/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <thread>
#include <vector>

namespace bagsim {

namespace {

// Neumaier's variant of Kahan summation.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) carry += (sum - t) + x;
    else carry += (x - t) + sum;
    sum = t;
  }
  void add(const CompensatedSum& o) {
    add(o.sum);
    add(o.carry);
  }
  [[nodiscard]] double value() const { return sum + carry; }
};

struct Enumeration {
  CompensatedSum evidence_mass;
  std::vector<CompensatedSum> true_mass;  // per compiled position
};

bool is_source(NodeKind kind, double p) {
  return kind == NodeKind::Leaf || (p > 0.0 && p < 1.0);
}

struct Problem {
  CompiledGraph g;
  std::vector<std::uint32_t> sources;
  std::vector<std::int8_t> source_bit;
  std::vector<std::int8_t> observed;
};

Enumeration enumerate_range(const Problem& pr, std::uint64_t lo, std::uint64_t hi) {
  const auto& g = pr.g;
  const std::size_t n = g.size();
  Enumeration out;
  out.true_mass.resize(n);
  std::vector<std::uint8_t> x(n);

  for (std::uint64_t c = lo; c < hi; ++c) {
    double mass = 1.0;
    for (std::size_t s = 0; s < pr.sources.size(); ++s) {
      const double p = g.probs[pr.sources[s]];
      mass *= ((c >> s) & 1u) ? p : 1.0 - p;
    }
    if (mass == 0.0) continue;

    bool consistent = true;
    for (std::uint32_t i = 0; i < n && consistent; ++i) {
      bool coin = true;
      if (pr.source_bit[i] >= 0) coin = ((c >> pr.source_bit[i]) & 1u) != 0;
      else if (g.kinds[i] != NodeKind::Leaf) coin = g.probs[i] == 1.0;

      bool value = coin;
      if (g.kinds[i] == NodeKind::And) {
        bool all = true;
        for (auto p : g.parents[i]) all = all && x[p];
        value = all && coin;
      } else if (g.kinds[i] == NodeKind::Or) {
        bool any = false;
        for (auto p : g.parents[i]) any = any || x[p];
        value = any && coin;
      }
      x[i] = value ? 1 : 0;
      if (pr.observed[i] >= 0 && pr.observed[i] != x[i]) consistent = false;
    }
    if (!consistent) continue;

    out.evidence_mass.add(mass);
    for (std::uint32_t i = 0; i < n; ++i)
      if (x[i]) out.true_mass[i].add(mass);
  }
  return out;
}

void merge_into(Enumeration& a, const Enumeration& b) {
  a.evidence_mass.add(b.evidence_mass);
  for (std::size_t i = 0; i < a.true_mass.size(); ++i) a.true_mass[i].add(b.true_mass[i]);
}

// Returns masses indexed by ascending node id.
Enumeration enumerate(const AttackGraph& graph, const EvidenceSet& evidence) {
  check_evidence(evidence, graph);
  Problem pr{compile(graph), {}, {}, {}};
  const std::size_t n = pr.g.size();

  // Each random source is an independent Bernoulli coin. A LEAF's value is its
  // coin; an AND/OR node is (AND/OR of its parents) && coin, which is exactly
  // its CPT. Internal nodes with p in {0,1} have a fixed coin.
  for (std::uint32_t i = 0; i < n; ++i)
    if (is_source(pr.g.kinds[i], pr.g.probs[i])) pr.sources.push_back(i);
  if (pr.sources.size() > kMaxExactSources) {
    throw Error(ErrorCode::TooManyLeaves,
                "exact enumeration supports at most " + std::to_string(kMaxExactSources) +
                    " random sources; graph has " + std::to_string(pr.sources.size()));
  }
  pr.source_bit.assign(n, -1);
  for (std::size_t s = 0; s < pr.sources.size(); ++s)
    pr.source_bit[pr.sources[s]] = static_cast<std::int8_t>(s);
  pr.observed.assign(n, -1);
  for (const auto& [id, v] : evidence) pr.observed[pr.g.position_of(id)] = v ? 1 : 0;

  // Fixed partitioning and pairwise merging make the rounding independent of
  // how many threads evaluate the partitions.
  const std::uint64_t configs = std::uint64_t{1} << pr.sources.size();
  const std::uint64_t parts = std::min<std::uint64_t>(configs, 64);
  const std::uint64_t chunk = configs / parts;
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 8u));

  std::vector<Enumeration> partial(parts);
  if (workers == 1 || configs < (1u << 16)) {
    for (std::uint64_t k = 0; k < parts; ++k) partial[k] = enumerate_range(pr, k * chunk, (k + 1) * chunk);
  } else {
    std::vector<std::future<void>> jobs;
    std::atomic<std::uint64_t> next{0};
    for (unsigned w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&] {
        for (std::uint64_t k; (k = next.fetch_add(1)) < parts;)
          partial[k] = enumerate_range(pr, k * chunk, (k + 1) * chunk);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  for (std::uint64_t step = 1; step < parts; step *= 2)
    for (std::uint64_t k = 0; k + step < parts; k += 2 * step) merge_into(partial[k], partial[k + step]);

  Enumeration& total = partial[0];
  std::vector<std::pair<NodeId, std::uint32_t>> order;
  for (std::uint32_t i = 0; i < n; ++i) order.emplace_back(pr.g.ids[i], i);
  std::sort(order.begin(), order.end());
  Enumeration result;
  result.evidence_mass = total.evidence_mass;
  result.true_mass.resize(n);
  for (std::size_t k = 0; k < n; ++k) result.true_mass[k] = total.true_mass[order[k].second];
  return result;
}

}  // namespace

std::size_t random_source_count(const AttackGraph& graph) {
  std::size_t k = 0;
  for (const auto& n : graph.nodes())
    if (is_source(n.kind, n.local_prob)) ++k;
  return k;
}

ExactMap exact_conditional(const AttackGraph& graph, const EvidenceSet& evidence) {
  const Enumeration e = enumerate(graph, evidence);
  const double z = e.evidence_mass.value();
  if (z <= 0.0) {
    throw Error(ErrorCode::ImpossibleEvidence, "evidence " + format_evidence(evidence) + " has probability zero");
  }
  ExactMap out;
  std::size_t k = 0;
  for (const auto& node : graph.nodes()) {
    const double p = std::clamp(e.true_mass[k++].value() / z, 0.0, 1.0);
    out.emplace(node.id, ExactPosterior{node.id, p});
  }
  return out;
}

ExactMap exact_access(const AttackGraph& graph) { return exact_conditional(graph, {}); }

double exact_evidence_probability(const AttackGraph& graph, const EvidenceSet& evidence) {
  return enumerate(graph, evidence).evidence_mass.value();
}

}  // namespace bagsim
