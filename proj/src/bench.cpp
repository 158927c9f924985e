#include "bagsim/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <iterator>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "bagsim/rng.hpp"

namespace bagsim {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Uniform integer in [0, n); n > 0. Modulo bias is irrelevant at these sizes
// and keeps the generator independent of the standard library's distributions.
std::size_t pick(Philox4x32& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double uniform_in(Philox4x32& rng, std::pair<double, double> r) {
  return r.first + (r.second - r.first) * rng.uniform();
}

void check_range(std::pair<double, double> r, const char* what) {
  if (!(r.first >= 0.0 && r.second <= 1.0 && r.first <= r.second)) {
    throw Error(ErrorCode::InvalidSpec, std::string(what) + " must satisfy 0 <= lo <= hi <= 1");
  }
}

// Draws up to `k` distinct ids from `pool`, appending to `out` (skipping ids already present).
void draw_distinct(Philox4x32& rng, const std::vector<NodeId>& pool, std::size_t k, std::vector<NodeId>& out) {
  if (pool.empty()) return;
  k = std::min(k, pool.size());
  std::size_t attempts = 0;
  while (k > 0 && attempts < 8 * pool.size() + 16) {
    ++attempts;
    NodeId c = pool[pick(rng, pool.size())];
    if (std::find(out.begin(), out.end(), c) != out.end()) continue;
    out.push_back(c);
    --k;
  }
}

}  // namespace

BenchConfig parse_bench_config(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedInput, std::string("invalid bench config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedInput, "bench config must be a JSON object");

  BenchConfig c;
  auto get = [](const json& j, const std::string& key, auto& out) {
    try {
      j.at(key).get_to(out);
    } catch (const json::exception&) {
      throw Error(ErrorCode::MalformedInput, "bench config field \"" + key + "\" has the wrong type");
    }
  };
  for (const auto& [key, value] : doc.items()) {
    if (key == "sizes") get(doc, key, c.sizes);
    else if (key == "evidence_counts") get(doc, key, c.evidence_counts);
    else if (key == "target_errors") get(doc, key, c.target_errors);
    else if (key == "repetitions") get(doc, key, c.repetitions);
    else if (key == "timeout_ms") get(doc, key, c.timeout_ms);
    else if (key == "max_samples") get(doc, key, c.max_samples);
    else if (key == "batch_size") get(doc, key, c.batch_size);
    else if (key == "seed") get(doc, key, c.seed);
    else if (key == "extended") get(doc, key, c.extended);
    else if (key == "parallel_cells") get(doc, key, c.parallel_cells);
    else if (key == "techniques") {
      std::vector<std::string> names;
      get(doc, key, names);
      c.techniques.clear();
      for (const auto& n : names) {
        auto t = parse_technique(n);
        if (!t) throw Error(ErrorCode::InvalidSpec, "unknown technique in bench config: " + n);
        c.techniques.push_back(*t);
      }
    } else if (key == "graph") {
      if (!value.is_object()) throw Error(ErrorCode::MalformedInput, "bench config \"graph\" must be an object");
      auto& g = c.graph_template;
      for (const auto& [gk, gv] : value.items()) {
        if (gk == "leaf_fraction") get(value, gk, g.leaf_fraction);
        else if (gk == "and_or_ratio") get(value, gk, g.and_or_ratio);
        else if (gk == "max_parents") get(value, gk, g.max_parents);
        else if (gk == "layers") get(value, gk, g.layers);
        else if (gk == "prior_range") get(value, gk, g.prior_range);
        else if (gk == "internal_prob_range") get(value, gk, g.internal_prob_range);
        else throw Error(ErrorCode::InvalidSpec, "unknown bench config graph field: " + gk);
      }
    } else {
      throw Error(ErrorCode::InvalidSpec, "unknown bench config field: " + key);
    }
  }
  for (double e : c.target_errors)
    if (!(e > 0.0)) throw Error(ErrorCode::InvalidSpec, "target errors must be positive");
  if (c.repetitions == 0) throw Error(ErrorCode::InvalidSpec, "repetitions must be at least 1");
  if (c.batch_size == 0) throw Error(ErrorCode::InvalidSpec, "batch_size must be positive");
  return c;
}

AttackGraph generate_synthetic(const SyntheticGraphSpec& spec) {
  if (spec.n_nodes < 5) throw Error(ErrorCode::InvalidSpec, "n_nodes must be at least 5");
  if (!(spec.leaf_fraction > 0.0 && spec.leaf_fraction < 1.0))
    throw Error(ErrorCode::InvalidSpec, "leaf_fraction must lie in (0,1)");
  if (!(spec.and_or_ratio > 0.0)) throw Error(ErrorCode::InvalidSpec, "and_or_ratio must be positive");
  if (spec.max_parents < 1) throw Error(ErrorCode::InvalidSpec, "max_parents must be at least 1");
  check_range(spec.prior_range, "prior_range");
  check_range(spec.internal_prob_range, "internal_prob_range");

  Philox4x32 rng(spec.seed, 0x5EEDu);
  const std::size_t n = spec.n_nodes;
  const std::size_t n_leaf = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(static_cast<double>(n) * spec.leaf_fraction)), 1, n - 2);
  const std::size_t n_body = n - n_leaf - 1;  // internal nodes except the goal
  const double r = spec.and_or_ratio;
  const std::size_t n_and = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(static_cast<double>(n_body) * r / (1.0 + r))), 1, n_body);
  const std::size_t n_or = n_body - n_and;
  const std::size_t layers =
      spec.layers > 0
          ? spec.layers
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::log2(static_cast<double>(n_body)) / 3.0)));

  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<NodeId> leaves;
  NodeId next = 0;
  for (std::size_t i = 0; i < n_leaf; ++i) {
    leaves.push_back(next);
    nodes.push_back({next, NodeKind::Leaf, "leaf " + std::to_string(next), uniform_in(rng, spec.prior_range)});
    ++next;
  }

  auto share = [layers](std::size_t total, std::size_t layer) {
    return total * (layer + 1) / layers - total * layer / layers;
  };

  std::vector<NodeId> earlier_or;  // OR nodes in completed layers
  std::vector<NodeId> last_and;
  for (std::size_t layer = 0; layer < layers; ++layer) {
    std::vector<NodeId> and_layer;
    for (std::size_t i = 0, m = share(n_and, layer); i < m; ++i) {
      const NodeId id = next++;
      std::vector<NodeId> parents;
      draw_distinct(rng, leaves, 1, parents);  // precondition fact
      const std::size_t k = 1 + pick(rng, spec.max_parents);
      draw_distinct(rng, earlier_or.empty() ? leaves : earlier_or, k - 1, parents);
      for (NodeId p : parents) edges.emplace_back(p, id);
      nodes.push_back({id, NodeKind::And, "rule " + std::to_string(id), uniform_in(rng, spec.internal_prob_range)});
      and_layer.push_back(id);
    }
    if (!and_layer.empty()) last_and = and_layer;

    std::vector<NodeId> or_layer;
    for (std::size_t i = 0, m = share(n_or, layer); i < m; ++i) {
      const NodeId id = next++;
      std::vector<NodeId> parents;
      const std::size_t k = 1 + pick(rng, spec.max_parents);
      draw_distinct(rng, last_and.empty() ? leaves : last_and, k, parents);
      for (NodeId p : parents) edges.emplace_back(p, id);
      nodes.push_back({id, NodeKind::Or, "state " + std::to_string(id), uniform_in(rng, spec.internal_prob_range)});
      or_layer.push_back(id);
    }
    earlier_or.insert(earlier_or.end(), or_layer.begin(), or_layer.end());
  }

  const NodeId goal = next++;
  std::vector<NodeId> goal_parents;
  draw_distinct(rng, last_and.empty() ? leaves : last_and, spec.max_parents, goal_parents);
  for (NodeId p : goal_parents) edges.emplace_back(p, goal);
  nodes.push_back({goal, NodeKind::Or, "goal", uniform_in(rng, spec.internal_prob_range)});

  return AttackGraph::checked(std::move(nodes), std::move(edges), {goal});
}

std::vector<std::pair<NodeId, std::size_t>> node_depths(const AttackGraph& graph) {
  std::map<NodeId, std::size_t> depth;
  for (NodeId id : topological_order(graph)) {
    std::size_t d = 0;
    for (NodeId p : graph.parents(id)) d = std::max(d, depth[p] + 1);
    depth[id] = d;
  }
  return {depth.begin(), depth.end()};
}

EvidenceSet select_evidence(const AttackGraph& graph, std::size_t count, std::uint64_t seed,
                            std::uint64_t pilot_samples) {
  auto depths = node_depths(graph);
  const auto& goals = graph.goals();
  std::vector<std::pair<NodeId, std::size_t>> candidates;
  for (const auto& [id, d] : depths) {
    if (graph.node(id).kind != NodeKind::Or) continue;
    if (std::find(goals.begin(), goals.end(), id) != goals.end()) continue;
    candidates.emplace_back(id, d);
  }
  // Seeded shuffle, then a stable sort by depth: deepest first, random among equals.
  Philox4x32 rng(seed, 0xE71Du);
  for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[pick(rng, i)]);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  const CompiledGraph compiled = compile(graph);
  EvidenceSet evidence;
  StopCriterion pilot{1e-9, pilot_samples, {}};
  RunOptions opts;
  opts.batch_size = std::min<std::uint64_t>(pilot_samples, 5000);
  for (const auto& [id, d] : candidates) {
    if (evidence.size() >= count) break;
    EvidenceSet trial = evidence;
    trial[id] = true;
    try {
      run_inference(compiled, {}, trial, Technique::LW, pilot, mix_seed(seed, id), opts);
      evidence = std::move(trial);
    } catch (const Error&) {
      // infeasible (or too unlikely to be detected by the pilot); skip
    }
  }
  return evidence;
}

std::vector<BenchResult> summarize(const std::vector<BenchRun>& runs) {
  std::map<std::tuple<int, std::size_t, std::size_t, double>, std::vector<const BenchRun*>> groups;
  std::vector<std::tuple<int, std::size_t, std::size_t, double>> order;
  for (const auto& r : runs) {
    auto key = std::make_tuple(static_cast<int>(r.technique), r.n_nodes, r.n_evidence, r.target_error);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<BenchResult> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    BenchResult c;
    c.technique = g.front()->technique;
    c.n_nodes = g.front()->n_nodes;
    c.n_evidence = g.front()->n_evidence;
    c.target_error = g.front()->target_error;
    c.repetitions = g.size();
    std::vector<double> walls, raws;
    for (const auto* r : g) {
      walls.push_back(r->wall_ms);
      raws.push_back(static_cast<double>(r->n_raw));
      if (r->converged) ++c.converged;
    }
    auto stats = [](std::vector<double> v, double& mn, double& mx, double& mean) {
      mn = *std::min_element(v.begin(), v.end());
      mx = *std::max_element(v.begin(), v.end());
      mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    stats(walls, c.wall_ms_min, c.wall_ms_max, c.wall_ms_mean);
    stats(raws, c.n_raw_min, c.n_raw_max, c.n_raw_mean);
    std::sort(raws.begin(), raws.end());
    const std::size_t m = raws.size();
    c.n_raw_median = m % 2 ? raws[m / 2] : 0.5 * (raws[m / 2 - 1] + raws[m / 2]);
    out.push_back(c);
  }
  return out;
}

BenchOutput run_comparison(const BenchConfig& config) {
  struct Task {
    const AttackGraph* graph;
    const CompiledGraph* compiled;
    const EvidenceSet* evidence;
    BenchRun run;
    std::uint64_t seed;
  };

  const std::size_t max_size = config.extended ? kExtendedProfileMaxSize : kStandardProfileMaxSize;
  std::vector<std::size_t> sizes;
  for (auto s : config.sizes)
    if (s <= max_size) sizes.push_back(s);

  // Graph / evidence storage must outlive the tasks.
  std::vector<std::unique_ptr<AttackGraph>> graphs;
  std::vector<std::unique_ptr<CompiledGraph>> compiled;
  std::vector<std::unique_ptr<EvidenceSet>> evidences;
  std::vector<Task> tasks;

  if (config.techniques.empty()) return {};
  for (auto size : sizes) {
    SyntheticGraphSpec spec = config.graph_template;
    spec.n_nodes = size;
    spec.seed = mix_seed(config.seed, size);
    graphs.push_back(std::make_unique<AttackGraph>(generate_synthetic(spec)));
    compiled.push_back(std::make_unique<CompiledGraph>(compile(*graphs.back())));
    for (auto count : config.evidence_counts) {
      evidences.push_back(
          std::make_unique<EvidenceSet>(select_evidence(*graphs.back(), count, mix_seed(config.seed, size * 7919 + count))));
      for (double err : config.target_errors) {
        for (auto technique : config.techniques) {
          for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
            BenchRun run;
            run.technique = technique;
            run.n_nodes = size;
            run.n_evidence = evidences.back()->size();
            run.target_error = err;
            run.repetition = rep;
            tasks.push_back({graphs.back().get(), compiled.back().get(), evidences.back().get(), run,
                             mix_seed(config.seed, 1'000'003ull * (rep + 1) + size)});
          }
        }
      }
    }
  }

  auto execute = [&config](Task& t) {
    StopCriterion stop{t.run.target_error, config.max_samples, {}};
    RunOptions opts;
    opts.batch_size = config.batch_size;
    opts.time_budget_ms = config.timeout_ms;
    std::uint64_t seen = 0;
    opts.on_batch = [&seen](const TracePoint& p) { seen = p.n_raw; };
    const auto start = std::chrono::steady_clock::now();
    try {
      auto r = run_inference(*t.compiled, t.graph->goals(), *t.evidence, t.run.technique, stop, t.seed, opts);
      t.run.wall_ms = r.wall_ms;
      t.run.n_raw = r.n_raw;
      t.run.converged = r.converged;
    } catch (const Error& e) {
      t.run.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      t.run.n_raw = seen;
      t.run.converged = false;
      t.run.failure = std::string(to_string(e.code()));
    }
  };

  if (config.parallel_cells <= 1) {
    for (auto& t : tasks) execute(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> workers;
    for (unsigned w = 0; w < config.parallel_cells; ++w) {
      workers.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) execute(tasks[i]);
      }));
    }
    for (auto& w : workers) w.get();
  }

  BenchOutput out;
  for (auto& t : tasks) out.runs.push_back(t.run);
  out.cells = summarize(out.runs);
  return out;
}

std::string bench_csv(const std::vector<BenchRun>& runs, bool include_wall_time) {
  std::ostringstream os;
  os << "technique,n_nodes,n_evidence,target_error,repetition,wall_ms,n_raw,converged\n";
  for (const auto& r : runs) {
    os << to_string(r.technique) << ',' << r.n_nodes << ',' << r.n_evidence << ',' << r.target_error << ','
       << r.repetition << ',';
    if (include_wall_time) os << std::fixed << std::setprecision(3) << r.wall_ms << std::defaultfloat;
    os << ',' << r.n_raw << ',' << (r.converged ? "true" : "false") << '\n';
  }
  return os.str();
}

namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

// Linear x axis, log10 y axis.
std::string line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series) {
  const double W = 720, H = 440, L = 80, R = 190, T = 40, B = 60;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      const double ly = std::log10(std::max(y, 1e-3));
      ymin = std::min(ymin, ly);
      ymax = std::max(ymax, ly);
    }
  if (xmin > xmax) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  ymin = std::floor(ymin);
  ymax = std::max(std::ceil(ymax), ymin + 1);
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (std::log10(std::max(y, 1e-3)) - ymin) / (ymax - ymin) * (H - T - B); };

  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double e = ymin; e <= ymax + 1e-9; e += 1.0) {
    const double y = H - B - (e - ymin) / (ymax - ymin) * (H - T - B);
    os << "<line x1=\"" << L - 4 << "\" y1=\"" << y << "\" x2=\"" << W - R << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << static_cast<int>(e)
       << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
       << std::setprecision(3) << xv << std::setprecision(1) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << xlabel
     << "</text>\n";
  os << "<text transform=\"translate(20," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel
     << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : series[i].points) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    for (auto [x, y] : series[i].points)
      os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(i);
    os << "<rect x=\"" << W - R + 12 << "\" y=\"" << ly << "\" width=\"12\" height=\"3\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << W - R + 30 << "\" y=\"" << ly + 5 << "\">" << series[i].name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string time_vs_error_svg(const std::vector<BenchResult>& cells) {
  std::map<std::string, Series> by_name;
  for (const auto& c : cells) {
    const std::string name = std::string(to_string(c.technique)) + " / " + std::to_string(c.n_evidence) +
                             " ev / " + std::to_string(c.n_nodes) + " nodes";
    auto& s = by_name[name];
    s.name = name;
    s.points.emplace_back(c.target_error, c.wall_ms_mean);
  }
  std::vector<Series> series;
  for (auto& [k, s] : by_name) {
    std::sort(s.points.begin(), s.points.end());
    series.push_back(s);
  }
  return line_chart("Time against per-node error", "target standard error per node", "mean wall time (ms)", series);
}

std::string size_scaling_svg(const std::vector<BenchResult>& cells) {
  std::map<std::string, Series> by_name;
  for (const auto& c : cells) {
    std::ostringstream name;
    name << to_string(c.technique) << " / " << c.n_evidence << " ev / err " << c.target_error;
    auto& s = by_name[name.str()];
    s.name = name.str();
    s.points.emplace_back(static_cast<double>(c.n_nodes), c.wall_ms_mean);
  }
  std::vector<Series> series;
  for (auto& [k, s] : by_name) {
    std::sort(s.points.begin(), s.points.end());
    series.push_back(s);
  }
  return line_chart("Time against graph size", "nodes", "mean wall time (ms)", series);
}

}  // namespace bagsim
