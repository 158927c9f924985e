// Acceptance suite: one PASS/FAIL line per primary criterion.

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "bagsim/bench.hpp"
#include "bagsim/oracle.hpp"
#include "bagsim/samplers.hpp"
#include "bagsim/sensitivity.hpp"
#include "bagsim/service.hpp"
#include "support.hpp"

using namespace bagsim;
using namespace testing_support;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail << " [" << why << "]";
    }
  }
};

int failures = 0;
std::string only;  // optional name filter from argv

void report(const std::string& name, const std::function<void(Verdict&)>& body) {
  if (!only.empty() && name.find(only) == std::string::npos) return;
  Verdict v;
  const auto start = Clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << " [exception: " << e.what() << "]";
  }
  if (!v.pass) ++failures;
  std::cout << (v.pass ? "PASS " : "FAIL ") << name << ":" << v.detail.str() << " (" << std::fixed
            << std::setprecision(1) << seconds_since(start) << " s)" << std::endl;
}

bool within(const PosteriorEstimate& e, double truth, double k) {
  return std::abs(e.p_hat - truth) <= k * e.std_error + 1e-12;
}

const Technique kAll[] = {Technique::PLS, Technique::LW, Technique::BS};

// ---------------------------------------------------------------------------

// Up to 5 evidence sets of 1-3 nodes with P(e) >= 0.01, drawn from a seeded stream.
std::vector<EvidenceSet> scenarios(const AttackGraph& g, std::uint64_t seed) {
  Philox4x32 rng(seed, 0xACCE);
  std::vector<NodeId> ids;
  for (const auto& n : g.nodes()) ids.push_back(n.id);
  std::vector<EvidenceSet> out;
  for (int attempt = 0; attempt < 400 && out.size() < 5; ++attempt) {
    EvidenceSet e;
    const std::size_t k = 1 + rng() % 3;
    while (e.size() < k) e[ids[rng() % ids.size()]] = rng.bernoulli(0.6);
    if (exact_evidence_probability(g, e) >= 0.01) out.push_back(e);
  }
  return out;
}

void oracle_equivalence(Verdict& v) {
  const auto start = Clock::now();
  std::vector<AttackGraph> graphs{enterprise()};
  // Deterministic internals allow larger graphs; probabilistic ones count as
  // extra random sources for the oracle.
  for (std::uint64_t seed = 1; seed <= 50; ++seed)
    graphs.push_back(seed % 2 == 0 ? small_random_graph(seed, 24 + seed % 7, true)
                                   : small_random_graph(seed, 12 + seed % 5, false));
  std::size_t cells = 0, good = 0, short_scenarios = 0;
  std::vector<std::string> misses;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = graphs[gi];
    v.require(g.leaf_ids().size() <= 12 || gi == 0, "graph " + std::to_string(gi) + " has more than 12 leaves");
    const auto sc = scenarios(g, 1000 + gi);
    if (sc.size() < 5) ++short_scenarios;
    for (std::size_t si = 0; si < sc.size(); ++si) {
      const auto truth = exact_conditional(g, sc[si]);
      for (auto t : kAll) {
        const std::uint64_t seed = 7919 * gi + 31 * si + static_cast<std::uint64_t>(t);
        const auto r = run_inference(g, sc[si], t, {0.01, 2'000'000, {}}, seed);
        bool ok = true;
        for (const auto& p : r.posteriors) ok = ok && within(p, truth.at(p.node_id).probability, 4.0);
        ++cells;
        if (ok) ++good;
        else misses.push_back("g" + std::to_string(gi) + "/s" + std::to_string(si) + "/" + std::string(to_string(t)));
      }
    }
  }
  const double rate = static_cast<double>(good) / static_cast<double>(cells);
  const double secs = seconds_since(start);
  v.detail << " " << good << "/" << cells << " cells within 4 stderr (" << std::setprecision(4) << 100 * rate
           << "%), " << graphs.size() << " graphs";
  if (!misses.empty()) {
    v.detail << ", misses:";
    for (const auto& m : misses) v.detail << " " << m;
  }
  v.require(short_scenarios == 0, std::to_string(short_scenarios) + " graphs with fewer than 5 scenarios");
  v.require(rate >= 0.99, "coverage below 99%");
  v.require(secs < 300.0, "suite slower than 5 minutes");
}

void decomposition_equivalence(Verdict& v) {
  std::vector<AttackGraph> graphs{noisy_or(), enterprise()};
  for (std::uint64_t seed = 1; seed <= 30; ++seed) graphs.push_back(small_random_graph(seed, 16, false));
  double worst = 0.0;
  for (const auto& g : graphs) {
    const auto before = exact_access(g);
    const auto after = exact_access(decompose_to_leaf_probabilities(g));
    for (const auto& [id, p] : before) worst = std::max(worst, std::abs(after.at(id).probability - p.probability));
  }
  const double pc = exact_access(decompose_to_leaf_probabilities(noisy_or())).at(2).probability;
  v.detail << " max |before - after| = " << std::scientific << std::setprecision(2) << worst << " over "
           << graphs.size() << " graphs; decomposed P(C) = " << std::fixed << std::setprecision(15) << pc;
  v.require(worst <= 1e-12, "marginals differ");
  v.require(std::abs(pc - 0.6) <= 1e-12, "P(C) != 0.6");
}

void lw_weighting(Verdict& v) {
  const auto g = noisy_or();
  const auto c = compile(g);
  const auto mask = evidence_mask(c, {{2, true}});
  Philox4x32 rng(5, 0);
  std::size_t mismatched = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = sample_likelihood_weighted(c, mask, rng);
    const double expected = (s.value(c, 0) || s.value(c, 1)) ? 0.8 : 0.0;
    mismatched += s.weight != expected;
  }
  const auto r = lw_infer(g, {{2, true}}, {1e-9, 10'000, {}}, 3);
  const auto& a = r.at(0);
  v.detail << " n_raw = " << r.n_raw << ", P(A|C=1) = " << std::setprecision(4) << a.p_hat << " +- " << a.std_error
           << " (exact 2/3), weight mismatches = " << mismatched;
  v.require(r.n_raw == 10'000, "n_raw != 1e4");
  v.require(within(a, 2.0 / 3.0, 4.0), "posterior outside 4 stderr");
  v.require(mismatched == 0, "weights differ from CPT rows");
}

void bs_normalization(Verdict& v) {
  const auto d = decompose_to_leaf_probabilities(noisy_or());
  const auto c = compile(d);
  const auto mask = evidence_mask(c, {{2, true}});
  Philox4x32 rng(8, 0);
  double worst = 0.0;
  std::size_t steps = 0;
  for (int i = 0; i < 1000; ++i) {
    BackwardTrace trace;
    sample_backward(c, mask, rng, &trace);
    for (const auto& step : trace.steps) {
      const auto parents = d.parents(step.node);
      double norm = 0.0;
      for (unsigned y = 0; y < (1u << parents.size()); ++y) {
        std::map<NodeId, int> val;
        for (std::size_t k = 0; k < parents.size(); ++k) val[parents[k]] = (y >> k) & 1u;
        const double p1 = reference_prob_true(d, d.node(step.node), val);
        norm += step.value ? p1 : 1.0 - p1;
      }
      worst = std::max(worst, std::abs(norm - step.normalization));
      ++steps;
    }
  }
  const auto r = bs_infer(noisy_or(), {{2, true}}, {0.005, 2'000'000, {}}, 4);
  const auto truth = exact_conditional(noisy_or(), {{2, true}});
  bool ok = true;
  for (const auto& p : r.posteriors) ok = ok && within(p, truth.at(p.node_id).probability, 4.0);
  v.detail << " " << steps << " backward steps, max |Norm - brute force| = " << std::scientific << std::setprecision(2)
           << worst << std::fixed << std::setprecision(4) << ", P(A|C=1) = " << r.at(0).p_hat << " +- "
           << r.at(0).std_error;
  v.require(steps > 0 && worst <= 1e-12, "normalisation mismatch");
  v.require(ok, "posterior outside 4 stderr");
}

void clt_calibration(Verdict& v) {
  const auto g = enterprise();
  const EvidenceSet e{{1, true}};
  const auto truth = exact_conditional(g, e);
  std::map<NodeId, int> covered;
  const int runs = 200;
  for (int s = 1; s <= runs; ++s) {
    const auto r = lw_infer(g, e, {1e-9, 2000, {}}, static_cast<std::uint64_t>(s));
    for (const auto& p : r.posteriors) covered[p.node_id] += within(p, truth.at(p.node_id).probability, 1.96);
  }
  double worst = 1.0, sum = 0.0;
  int nodes = 0;
  NodeId worst_id = 0;
  for (const auto& [id, t] : truth) {
    if (t.probability <= 0.0 || t.probability >= 1.0) continue;  // degenerate: interval is a point
    const double rate = static_cast<double>(covered[id]) / runs;
    sum += rate;
    ++nodes;
    if (rate < worst) worst = rate, worst_id = id;
  }
  v.detail << std::fixed << std::setprecision(1) << " nominal 95% intervals over " << runs
           << " LW runs at n_raw = 2000 (evidence 1=y), " << nodes << " non-degenerate nodes: mean coverage "
           << 100 * sum / nodes << "%, lowest " << 100 * worst << "% (node " << worst_id << ")";
  v.require(nodes > 0 && worst >= 0.90, "coverage below 90%");
}

void sensitivity_theorem(Verdict& v) {
  double worst_affine = 0.0;
  std::size_t checks = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = small_random_graph(seed, 16, seed % 2 == 1);
    const NodeId goal = g.goals().front();
    for (NodeId l : g.leaf_ids()) {
      const auto s = sensitivity_onoff(g, goal, l, {});
      for (double u : {0.0, 0.2, 0.5, 0.7, 1.0}) {
        const double p = exact_access(g.with_local_prob(l, u)).at(goal).probability;
        worst_affine = std::max(worst_affine, std::abs(p - (s.p_given_0 + u * s.sensitivity)));
        ++checks;
      }
    }
  }
  const auto g = enterprise();
  const auto rep = sensitivity_report(g, 1, {});
  const auto& top = rep.entries.front();
  double worst_width = 0.0;
  for (NodeId l : g.leaf_ids()) {
    const auto s = sensitivity_onoff(g, 1, l, {});
    const auto d = sensitivity_density(g, 1, l, 500, {});
    worst_width = std::max(worst_width, std::abs(d.support_width() - s.sensitivity));
  }
  v.detail << " affine to " << std::scientific << std::setprecision(2) << worst_affine << " over " << checks
           << " points; top leaf " << top.leaf_id << " with P(g|0) = " << std::fixed << std::setprecision(4)
           << top.p_given_0 << "; max |density width - on/off| = " << worst_width;
  v.require(worst_affine <= 1e-12, "not affine");
  v.require(top.leaf_id == 17 && top.p_given_0 == 0.0, "leaf 17 not ranked first with P(g|0) = 0");
  v.require(worst_width <= 0.05, "density width disagrees with on/off");
}

void qualitative_trends(Verdict& v) {
  const auto start = Clock::now();
  BenchConfig cfg;
  cfg.sizes = {200};
  cfg.evidence_counts = {1, 3};
  cfg.techniques = {Technique::PLS, Technique::LW};
  cfg.target_errors = {0.02};
  cfg.repetitions = 3;
  cfg.batch_size = 100;
  cfg.timeout_ms = 120'000;
  cfg.seed = 1;
  const auto low = run_comparison(cfg);
  auto median = [&](Technique t, std::size_t ev) {
    for (const auto& c : low.cells)
      if (c.technique == t && c.n_evidence == ev) return c.n_raw_median;
    return -1.0;
  };
  const double pls3 = median(Technique::PLS, 3), pls1 = median(Technique::PLS, 1), lw1 = median(Technique::LW, 1);

  cfg.evidence_counts = {5};
  cfg.techniques = {Technique::PLS, Technique::LW, Technique::BS};
  cfg.repetitions = 1;
  const auto high = run_comparison(cfg);
  std::map<Technique, BenchRun> at5;
  for (const auto& r : high.runs) at5[r.technique] = r;

  v.detail << std::setprecision(0) << std::fixed << " median n_raw PLS(3) = " << pls3 << ", PLS(1) = " << pls1
           << ", LW(1) = " << lw1 << "; 5 evidence:";
  for (auto t : kAll)
    v.detail << " " << to_string(t) << (at5[t].converged ? " converged" : " timed out") << " n_raw " << at5[t].n_raw
             << " in " << std::setprecision(1) << at5[t].wall_ms / 1000 << " s";
  const double secs = seconds_since(start);
  v.require(pls3 > pls1 && pls1 > lw1, "sample-count ordering");
  v.require(at5[Technique::PLS].n_evidence == 5, "fewer than 5 evidence nodes selected");
  v.require(!at5[Technique::PLS].converged && at5[Technique::PLS].wall_ms >= 120'000, "PLS did not time out");
  v.require(at5[Technique::LW].converged, "LW did not converge");
  v.require(at5[Technique::BS].converged, "BS did not converge");
  v.require(secs < 900.0, "trend suite slower than 15 minutes");
}

// --- determinism -----------------------------------------------------------

std::string run_cli(const std::string& args) {
  const std::string cmd = std::string(BAGSIM_CLI_PATH) + " " + args + " 2>/dev/null";
  std::string out;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  out += "\nexit " + std::to_string(::pclose(p));
  return out;
}

std::vector<std::string> service_transcript() {
  Service svc;
  const int port = svc.bind(0);
  if (port <= 0) throw std::runtime_error("cannot bind service");
  std::thread th([&] { svc.listen(); });
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(300, 0);
  std::vector<std::string> out;
  auto keep = [&](const httplib::Result& r) {
    out.push_back(r ? std::to_string(r->status) + " " + r->body : "no response");
    return r ? json::parse(r->body, nullptr, false) : json();
  };
  const auto gid = keep(c.Post("/graphs", read_file(data_path("enterprise.json")), "application/json"))["graph_id"]
                       .get<std::string>();
  keep(c.Get("/graphs"));
  keep(c.Get("/graphs/" + gid));
  keep(c.Get("/graphs/" + gid + "/sensitivity"));
  keep(c.Get("/graphs/" + gid + "/sensitivity?engine=bs&seed=5&error=0.02"));
  const auto sid = keep(c.Post("/sessions", json{{"graph_id", gid}}.dump(), "application/json"))["session_id"]
                       .get<std::string>();
  const std::string base = "/sessions/" + sid;
  keep(c.Patch(base + "/evidence", json{{"set", {{"6", "y"}, {"13", "y"}}}}.dump(), "application/json"));
  for (const char* t : {"pls", "lw", "bs", "exact"}) {
    keep(c.Post(base + "/infer", json{{"technique", t}, {"error", 0.01}, {"seed", 9}}.dump(), "application/json"));
    keep(c.Get(base + "/posteriors"));
    keep(c.Get(base + "/trace"));
  }
  keep(c.Patch(base + "/evidence", json{{"clear", "all"}}.dump(), "application/json"));
  keep(c.Post(base + "/infer", json{{"technique", "lw"}, {"seed", 2}}.dump(), "application/json"));
  keep(c.Delete(base));
  svc.stop();
  th.join();
  return out;
}

void determinism(Verdict& v) {
  const std::string fixture = "'" + data_path("enterprise.json") + "'";
  const auto dir = std::filesystem::temp_directory_path() / ("bagsim_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "bench.json") << R"({"sizes":[100,200],"evidence_counts":[1,2],"repetitions":2,"seed":3})";
  }
  const std::vector<std::string> commands{
      "solve " + fixture + " --exact",
      "solve " + fixture + " --exact --json",
      "solve " + fixture + " --technique lw --error 0.02 --seed 7",
      "solve " + fixture + " --technique pls --error 0.01 --seed 7 --json",
      "solve " + fixture + " --technique bs --error 0.01 --seed 7 --json --threads 3",
      "infer " + fixture + " --evidence 6=y,11=n --technique lw --seed 2 --json",
      "infer " + fixture + " --evidence 6=y --technique bs --seed 2",
      "infer " + fixture + " --evidence 6=y --exact --json",
      "sensitivity " + fixture + " --goal 1 --exact",
      "sensitivity " + fixture + " --goal 1 --technique lw --error 0.02 --seed 4 --json",
      "sensitivity " + fixture + " --density --leaf 18 --technique bs --error 0.02 --draws 20",
      "bench '" + (dir / "bench.json").string() + "' --no-timing",
      "infer " + fixture + " --evidence 99=y",
  };
  std::size_t identical = 0;
  for (const auto& cmd : commands) {
    const auto a = run_cli(cmd);
    const auto b = run_cli(cmd);
    if (a == b) ++identical;
    else v.require(false, "differs: bagsim " + cmd.substr(0, cmd.find(' ')));
  }
  std::filesystem::remove_all(dir);

  const auto first = service_transcript();
  const auto second = service_transcript();
  std::size_t same = 0;
  for (std::size_t i = 0; i < std::min(first.size(), second.size()); ++i) same += first[i] == second[i];
  v.detail << " CLI " << identical << "/" << commands.size() << " commands byte-identical; service " << same << "/"
           << first.size() << " responses byte-identical";
  v.require(first.size() == second.size() && same == first.size(), "service responses differ");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) only = argv[1];
  std::cout << "bagsim acceptance suite" << std::endl;
  report("oracle equivalence", oracle_equivalence);
  report("decomposition equivalence", decomposition_equivalence);
  report("LW weighting", lw_weighting);
  report("BS normalization", bs_normalization);
  report("CLT calibration", clt_calibration);
  report("sensitivity theorem", sensitivity_theorem);
  report("qualitative trends", qualitative_trends);
  report("determinism", determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
