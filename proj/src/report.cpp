#include "bagsim/report.hpp"

#include <cstdio>
#include <sstream>

namespace bagsim {

namespace {

std::string fixed4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

std::string pad(std::string s, std::size_t w, bool left = true) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

std::string label_of(const AttackGraph& g, NodeId id) {
  std::string s = g.node(id).label;
  if (s.size() > 48) s = s.substr(0, 45) + "...";
  return s;
}

}  // namespace

json to_json(const TracePoint& p) {
  json nodes = json::array();
  for (const auto& e : p.nodes) nodes.push_back({{"id", e.node_id}, {"p", e.p_hat}, {"stderr", e.std_error}});
  return {{"batch", p.batch}, {"n_raw", p.n_raw}, {"n_eff", p.n_effective}, {"nodes", nodes}};
}

json to_json(const InferenceResult& r, bool include_timing, bool include_trace) {
  json out = {{"technique", to_string(r.technique)},
              {"converged", r.converged},
              {"timed_out", r.timed_out},
              {"n_raw", r.n_raw},
              {"n_eff", r.n_effective},
              {"acceptance_rate", r.acceptance_rate()}};
  if (include_timing) out["wall_ms"] = r.wall_ms;
  json posts = json::array();
  for (const auto& p : r.posteriors)
    posts.push_back({{"id", p.node_id}, {"p", p.p_hat}, {"stderr", p.std_error}, {"n_eff", p.n_effective}});
  out["posteriors"] = posts;
  if (include_trace) {
    json trace = json::array();
    for (const auto& t : r.trace) trace.push_back(to_json(t));
    out["trace"] = trace;
  }
  return out;
}

json to_json(const ExactMap& m) {
  json posts = json::array();
  for (const auto& [id, e] : m) posts.push_back({{"id", id}, {"p", e.probability}});
  return {{"technique", "exact"}, {"posteriors", posts}};
}

json to_json(const SensitivityReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"leaf", e.leaf_id},
                       {"sensitivity", e.sensitivity},
                       {"p_given_1", e.p_given_1},
                       {"p_given_0", e.p_given_0},
                       {"stderr", e.stderr_combined}});
  }
  return {{"goal", r.goal_id},
          {"engine", to_string(r.engine)},
          {"baseline", {{"p", r.baseline.probability}, {"stderr", r.baseline.std_error}}},
          {"entries", entries}};
}

json to_json(const SensitivityDensity& d) {
  json samples = json::array();
  for (auto [u, p] : d.samples) samples.push_back({u, p});
  return {{"leaf", d.leaf_id},
          {"goal", d.goal_id},
          {"bin_width", SensitivityDensity::bin_width()},
          {"histogram", d.histogram},
          {"support_width", d.support_width()},
          {"estimate_range", d.estimate_range()},
          {"samples", samples}};
}

json to_json(const Violation& v) {
  return {{"kind", to_string(v.kind)}, {"nodes", v.nodes}, {"message", v.message}};
}

json to_json(const BenchResult& c) {
  return {{"technique", to_string(c.technique)},
          {"n_nodes", c.n_nodes},
          {"n_evidence", c.n_evidence},
          {"target_error", c.target_error},
          {"repetitions", c.repetitions},
          {"converged", c.converged},
          {"wall_ms", {{"min", c.wall_ms_min}, {"max", c.wall_ms_max}, {"mean", c.wall_ms_mean}}},
          {"n_raw",
           {{"min", c.n_raw_min}, {"max", c.n_raw_max}, {"mean", c.n_raw_mean}, {"median", c.n_raw_median}}}};
}

std::string posterior_table(const AttackGraph& graph, const InferenceResult& r) {
  std::ostringstream os;
  os << pad("id", 6) << pad("label", 50) << pad("p", 10, false) << pad("stderr", 10, false) << '\n';
  for (const auto& p : r.posteriors) {
    os << pad(std::to_string(p.node_id), 6) << pad(label_of(graph, p.node_id), 50)
       << pad(fixed4(p.p_hat), 10, false) << pad(fixed4(p.std_error), 10, false) << '\n';
  }
  os << to_string(r.technique) << ": n_raw=" << r.n_raw << " n_eff=" << static_cast<std::uint64_t>(r.n_effective)
     << " acceptance=" << fixed4(r.acceptance_rate()) << (r.converged ? " converged" : " not converged") << '\n';
  return os.str();
}

std::string posterior_table(const AttackGraph& graph, const ExactMap& m) {
  std::ostringstream os;
  os << pad("id", 6) << pad("label", 50) << pad("p", 10, false) << '\n';
  for (const auto& [id, e] : m)
    os << pad(std::to_string(id), 6) << pad(label_of(graph, id), 50) << pad(fixed4(e.probability), 10, false) << '\n';
  return os.str();
}

std::string sensitivity_table(const AttackGraph& graph, const SensitivityReport& r) {
  std::ostringstream os;
  os << "goal " << r.goal_id << " (" << label_of(graph, r.goal_id) << "), engine " << to_string(r.engine)
     << ", P(goal) = " << fixed4(r.baseline.probability) << '\n';
  os << pad("leaf", 6) << pad("label", 50) << pad("S", 10, false) << pad("P(g|1)", 10, false)
     << pad("P(g|0)", 10, false) << '\n';
  for (const auto& e : r.entries) {
    os << pad(std::to_string(e.leaf_id), 6) << pad(label_of(graph, e.leaf_id), 50)
       << pad(fixed4(e.sensitivity), 10, false) << pad(fixed4(e.p_given_1), 10, false)
       << pad(fixed4(e.p_given_0), 10, false) << '\n';
  }
  return os.str();
}

std::string bench_table(const std::vector<BenchResult>& cells) {
  std::ostringstream os;
  os << pad("tech", 6) << pad("nodes", 7, false) << pad("ev", 4, false) << pad("error", 8, false)
     << pad("conv", 6, false) << pad("median n_raw", 14, false) << pad("mean ms", 12, false) << '\n';
  for (const auto& c : cells) {
    char err[16], ms[32], nr[32];
    std::snprintf(err, sizeof err, "%.3f", c.target_error);
    std::snprintf(ms, sizeof ms, "%.1f", c.wall_ms_mean);
    std::snprintf(nr, sizeof nr, "%.0f", c.n_raw_median);
    os << pad(std::string(to_string(c.technique)), 6) << pad(std::to_string(c.n_nodes), 7, false)
       << pad(std::to_string(c.n_evidence), 4, false) << pad(err, 8, false)
       << pad(std::to_string(c.converged) + "/" + std::to_string(c.repetitions), 6, false) << pad(nr, 14, false)
       << pad(ms, 12, false) << '\n';
  }
  return os.str();
}

}  // namespace bagsim
