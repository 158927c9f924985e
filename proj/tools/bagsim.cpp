// bagsim: command-line front end.
//
// Exit codes: 0 success, 1 input or validation error, 2 inference/runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "bagsim/bench.hpp"
#include "bagsim/io.hpp"
#include "bagsim/oracle.hpp"
#include "bagsim/report.hpp"
#include "bagsim/samplers.hpp"
#include "bagsim/sensitivity.hpp"
#include "bagsim/service.hpp"

using namespace bagsim;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitRuntime = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoAcceptedSamples:
    case ErrorCode::ZeroTotalWeight:
    case ErrorCode::ZeroNormalization:
    case ErrorCode::TooManyParents:
    case ErrorCode::TooManyLeaves:
    case ErrorCode::ImpossibleEvidence: return kExitRuntime;
    default: return kExitInput;
  }
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("BAGSIM_SEED")) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && end != env) return v;
    std::cerr << "warning: ignoring non-numeric BAGSIM_SEED=" << env << "\n";
  }
  return 1;
}

struct GraphArgs {
  std::string path;
  std::string format = "canonical";
  std::string arcs;

  void add(CLI::App* cmd) {
    cmd->add_option("graph", path, "Graph file (canonical JSON, or VERTICES.CSV with --format mulval)")->required();
    cmd->add_option("--format", format, "Input format")->check(CLI::IsMember({"canonical", "mulval"}));
    cmd->add_option("--arcs", arcs, "ARCS.CSV paired with the vertices file (mulval format)");
  }

  AttackGraph load() const {
    if (format == "mulval") {
      if (arcs.empty()) throw Error(ErrorCode::MalformedInput, "--format mulval requires --arcs");
      return parse_mulval_csv(read_file(path), read_file(arcs));
    }
    if (!arcs.empty()) throw Error(ErrorCode::MalformedInput, "--arcs is only valid with --format mulval");
    return parse_canonical(read_file(path));
  }
};

struct InferArgs {
  bool exact = false;
  std::string technique;
  double error = 0.02;
  std::uint64_t max_samples = 1'000'000;
  std::uint64_t seed = default_seed();
  std::uint64_t batch_size = 1000;
  unsigned threads = 1;
  bool json = false;
  bool timing = false;

  void add(CLI::App* cmd) {
    auto* ex = cmd->add_flag("--exact", exact, "Exact enumeration");
    auto* te = cmd->add_option("--technique", technique, "pls, lw or bs");
    ex->excludes(te);
    cmd->add_option("--error", error, "Target standard error per node")->check(CLI::PositiveNumber);
    cmd->add_option("--max-samples", max_samples, "Sample budget");
    cmd->add_option("--seed", seed, "Random seed (default: BAGSIM_SEED or 1)");
    cmd->add_option("--batch-size", batch_size, "Samples per batch")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--json", json, "Machine-readable output");
    cmd->add_flag("--timing", timing, "Include wall_ms in JSON output");
  }

  Technique parsed_technique() const {
    auto t = parse_technique(technique.empty() ? "lw" : technique);
    if (!t) throw Error(ErrorCode::MalformedInput, "unknown technique: " + technique);
    return *t;
  }

  StopCriterion stop() const { return {error, max_samples, {}}; }

  RunOptions options() const {
    RunOptions o;
    o.batch_size = batch_size;
    o.threads = threads;
    return o;
  }
};

int run_posteriors(const AttackGraph& graph, const EvidenceSet& evidence, const InferArgs& a) {
  if (a.exact) {
    const auto m = exact_conditional(graph, evidence);
    if (a.json) std::cout << to_json(m).dump(2) << "\n";
    else std::cout << posterior_table(graph, m);
    return 0;
  }
  const auto r = run_inference(graph, evidence, a.parsed_technique(), a.stop(), a.seed, a.options());
  if (a.json) std::cout << to_json(r, a.timing).dump(2) << "\n";
  else std::cout << posterior_table(graph, r);
  if (!r.converged) std::cerr << "warning: stopped at the sample budget before reaching the target error\n";
  return 0;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MalformedInput, "cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inference and sensitivity analysis for Bayesian attack graphs"};
  app.require_subcommand(1);

  GraphArgs solve_graph;
  InferArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Access probabilities with no evidence");
  solve_graph.add(solve);
  solve_args.add(solve);

  GraphArgs infer_graph;
  InferArgs infer_args;
  std::string evidence_text;
  auto* infer = app.add_subcommand("infer", "Posteriors given evidence");
  infer_graph.add(infer);
  infer_args.add(infer);
  infer->add_option("--evidence", evidence_text, "Observed nodes, e.g. 6=y,11=n");

  GraphArgs sens_graph;
  InferArgs sens_args;
  std::optional<NodeId> goal;
  bool density = false;
  std::optional<NodeId> leaf;
  std::size_t draws = 200;
  auto* sens = app.add_subcommand("sensitivity", "Rank leaves by their effect on a goal");
  sens_graph.add(sens);
  sens_args.add(sens);
  sens->add_option("--goal", goal, "Goal node (default: the graph's first goal)");
  sens->add_flag("--density", density, "Sample the leaf prior and bin the goal estimates");
  sens->add_option("--leaf", leaf, "Leaf for --density");
  sens->add_option("--draws", draws, "Prior draws for --density")->check(CLI::PositiveNumber);

  std::string bench_config_path;
  std::string bench_out;
  std::string charts_dir;
  bool extended = false;
  bool no_timing = false;
  unsigned parallel = 0;
  auto* bench = app.add_subcommand("bench", "Technique comparison on synthetic graphs");
  bench->add_option("config", bench_config_path, "Bench config JSON")->required();
  bench->add_option("--out", bench_out, "CSV output path (default: stdout)");
  bench->add_option("--charts", charts_dir, "Directory for time-vs-error and size-scaling SVG charts");
  bench->add_flag("--extended", extended, "Allow graph sizes up to 5000 nodes");
  bench->add_flag("--no-timing", no_timing, "Leave the wall_ms column empty");
  bench->add_option("--parallel", parallel, "Run cells concurrently");

  int port = 8080;
  std::string graph_dir;
  std::string host = "127.0.0.1";
  double budget_ms = 10'000.0;
  auto* serve = app.add_subcommand("serve", "HTTP/JSON service");
  serve->add_option("--port", port, "Listen port (0 picks a free port)");
  serve->add_option("--graph-dir", graph_dir, "Preload graphs from this directory");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--infer-budget-ms", budget_ms, "Synchronous inference budget before answering 202");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*solve) {
      return run_posteriors(solve_graph.load(), {}, solve_args);
    }
    if (*infer) {
      const auto graph = infer_graph.load();
      return run_posteriors(graph, parse_evidence(evidence_text, graph), infer_args);
    }
    if (*sens) {
      const auto graph = sens_graph.load();
      if (!goal) {
        if (graph.goals().empty()) throw Error(ErrorCode::MalformedInput, "--goal is required: graph declares no goals");
        goal = graph.goals().front();
      }
      EngineConfig cfg;
      cfg.engine = sens_args.exact || sens_args.technique.empty()
                       ? Engine::Exact
                       : *parse_engine(to_string(sens_args.parsed_technique()));
      cfg.stop = sens_args.stop();
      cfg.seed = sens_args.seed;
      cfg.run = sens_args.options();
      if (density) {
        if (!leaf) throw Error(ErrorCode::MalformedInput, "--density requires --leaf");
        const auto d = sensitivity_density(graph, *goal, *leaf, draws, cfg);
        if (sens_args.json) {
          std::cout << to_json(d).dump(2) << "\n";
        } else {
          std::cout << "u,estimate\n";
          std::cout.precision(17);
          for (auto [u, p] : d.samples) std::cout << u << ',' << p << '\n';
        }
        return 0;
      }
      const auto report = sensitivity_report(graph, *goal, cfg);
      if (sens_args.json) std::cout << to_json(report).dump(2) << "\n";
      else std::cout << sensitivity_table(graph, report);
      return 0;
    }
    if (*bench) {
      auto config = parse_bench_config(read_file(bench_config_path));
      if (extended) config.extended = true;
      if (parallel > 0) config.parallel_cells = parallel;
      const auto out = run_comparison(config);
      const auto csv = bench_csv(out.runs, !no_timing);
      if (bench_out.empty()) std::cout << csv;
      else write_text(bench_out, csv);
      if (!charts_dir.empty()) {
        std::filesystem::create_directories(charts_dir);
        write_text(charts_dir + "/time_vs_error.svg", time_vs_error_svg(out.cells));
        write_text(charts_dir + "/size_scaling.svg", size_scaling_svg(out.cells));
      }
      std::cerr << bench_table(out.cells);
      return 0;
    }
    if (*serve) {
      Service service({host, budget_ms});
      if (!graph_dir.empty()) service.preload_directory(graph_dir, std::cerr);
      const int bound = service.bind(port);
      if (bound < 0) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return kExitInput;
      }
      std::cerr << "listening on http://" << host << ":" << bound << "\n";
      return service.listen() ? 0 : kExitRuntime;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    for (const auto& d : e.details()) std::cerr << "  " << d << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
