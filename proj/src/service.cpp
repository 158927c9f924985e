#include "bagsim/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <shared_mutex>

#include <httplib.h>

#include "bagsim/io.hpp"
#include "bagsim/oracle.hpp"
#include "bagsim/report.hpp"
#include "bagsim/samplers.hpp"
#include "bagsim/sensitivity.hpp"

namespace bagsim {

namespace {

struct GraphEntry {
  std::string id;
  std::string name;
  AttackGraph graph;
  CompiledGraph compiled;
};

struct Outcome {
  int status = 0;
  std::string body;
};

struct Session {
  std::string id;
  std::shared_ptr<const GraphEntry> graph;

  std::mutex mu;
  EvidenceSet evidence;
  bool running = false;
  std::string token;        // of the current or most recent job
  Outcome job_outcome;      // set when that job finishes
  bool has_result = false;
  std::string last_result;  // body of the last successful inference
  std::vector<TracePoint> trace;
};

json evidence_json(const EvidenceSet& e) {
  json out = json::object();
  for (auto [id, v] : e) out[std::to_string(id)] = v;
  return out;
}

json session_json(const Session& s) {
  return {{"session_id", s.id},
          {"graph_id", s.graph->id},
          {"evidence", evidence_json(s.evidence)},
          {"running", s.running},
          {"has_result", s.has_result}};
}

json handle_json(const GraphEntry& g) {
  return {{"graph_id", g.id},
          {"name", g.name},
          {"n_nodes", g.graph.size()},
          {"n_edges", g.graph.edges().size()},
          {"goals", g.graph.goals()}};
}

int status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput:
    case ErrorCode::UnknownNodeKind:
    case ErrorCode::DomainError:
    case ErrorCode::InvalidSpec: return 400;
    case ErrorCode::NoAcceptedSamples:
    case ErrorCode::ZeroTotalWeight:
    case ErrorCode::ZeroNormalization:
    case ErrorCode::ImpossibleEvidence: return 409;
    default: return 422;
  }
}

std::string error_body(std::string_view code, const std::string& detail, const std::vector<std::string>& violations = {}) {
  return json{{"error", code}, {"detail", detail}, {"violations", violations}}.dump();
}

void send(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send(httplib::Response& res, int status, const json& body) { send(res, status, body.dump()); }

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& detail) {
  send(res, status, error_body(code, detail));
}

void send_error(httplib::Response& res, const Error& e) {
  send(res, status_of(e.code()), error_body(to_string(e.code()), e.what(), e.details()));
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::MalformedInput, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("invalid JSON body: ") + e.what());
  }
}

template <typename T>
T field(const json& body, const char* key, T fallback) {
  if (!body.contains(key) || body[key].is_null()) return fallback;
  try {
    return body[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedInput, std::string("field \"") + key + "\" has the wrong type");
  }
}

template <typename T>
T query(const httplib::Request& req, const char* key, T fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) out = static_cast<T>(std::stod(v, &used));
    else out = static_cast<T>(std::stoull(v, &used));
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedInput, std::string("query parameter ") + key + " is not a number: " + v);
  }
}

bool parse_bool_value(const json& v, NodeId id) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) return v.get<int>() == 1;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "y" || s == "Y" || s == "1") return true;
    if (s == "n" || s == "N" || s == "0") return false;
  }
  throw Error(ErrorCode::MalformedInput, "evidence value for node " + std::to_string(id) + " must be y/n or a boolean");
}

NodeId parse_id(const std::string& text) {
  NodeId id = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
  if (ec != std::errc() || p != text.data() + text.size())
    throw Error(ErrorCode::MalformedInput, "bad node id: " + text);
  return id;
}

// Mirrors the sampler serialization for the exact engine.
json exact_result_json(const ExactMap& m) {
  json posts = json::array();
  for (const auto& [id, e] : m) posts.push_back({{"id", id}, {"p", e.probability}, {"stderr", 0.0}, {"n_eff", 0.0}});
  return {{"technique", "exact"}, {"converged", true}, {"timed_out", false}, {"n_raw", 0},
          {"n_eff", 0.0},         {"acceptance_rate", 1.0}, {"posteriors", posts}, {"trace", json::array()}};
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;

  std::shared_mutex graphs_mu;
  std::map<std::string, std::shared_ptr<const GraphEntry>> graphs;
  std::vector<std::string> graph_order;
  std::uint64_t next_graph = 1;

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_session = 1;
  std::uint64_t next_token = 1;

  std::mutex jobs_mu;
  std::vector<std::future<void>> jobs;

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    // httplib defaults to SO_REUSEPORT, which lets a second server share an
    // occupied port silently.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  ~Impl() {
    server.stop();
    std::lock_guard lock(jobs_mu);
    for (auto& j : jobs) j.wait();
  }

  std::string add_graph(AttackGraph g, std::string name) {
    auto compiled = compile(g);
    std::unique_lock lock(graphs_mu);
    std::string id = "g" + std::to_string(next_graph++);
    graphs[id] = std::make_shared<const GraphEntry>(GraphEntry{id, std::move(name), std::move(g), std::move(compiled)});
    graph_order.push_back(id);
    return id;
  }

  std::shared_ptr<const GraphEntry> find_graph(const std::string& id) {
    std::shared_lock lock(graphs_mu);
    auto it = graphs.find(id);
    return it == graphs.end() ? nullptr : it->second;
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  // Wraps a handler so library errors map to the JSON error body.
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  }

  void routes() {
    server.Get("/health", guarded([](const auto&, auto& res) { send(res, 200, json{{"status", "ok"}}); }));

    server.Get("/graphs", guarded([this](const auto&, auto& res) {
      json out = json::array();
      std::shared_lock lock(graphs_mu);
      for (const auto& id : graph_order) out.push_back(handle_json(*graphs.at(id)));
      send(res, 200, json{{"graphs", out}});
    }));

    server.Post("/graphs", guarded([this](const httplib::Request& req, auto& res) {
      json body = parse_body(req);
      std::string name = field<std::string>(body, "name", "");
      std::optional<AttackGraph> g;
      if (field<std::string>(body, "format", "canonical") == "mulval") {
        g = parse_mulval_csv(field<std::string>(body, "vertices", ""), field<std::string>(body, "arcs", ""));
        if (body.contains("goals")) {
          auto goals = field<std::vector<NodeId>>(body, "goals", {});
          std::vector<Node> nodes = g->nodes();
          g = AttackGraph::checked(std::move(nodes), g->edges(), std::move(goals));
        }
      } else {
        g = parse_canonical(req.body);
      }
      const std::string id = add_graph(std::move(*g), name);
      send(res, 201, handle_json(*find_graph(id)));
    }));

    server.Get(R"(/graphs/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
      auto g = find_graph(req.matches[1]);
      if (!g) return send_error(res, 404, "UnknownGraph", "no graph " + std::string(req.matches[1]));
      json out = handle_json(*g);
      out["graph"] = json::parse(serialize_canonical(g->graph, -1));
      send(res, 200, out);
    }));

    server.Get(R"(/graphs/([^/]+)/sensitivity)", guarded([this](const httplib::Request& req, auto& res) {
      auto g = find_graph(req.matches[1]);
      if (!g) return send_error(res, 404, "UnknownGraph", "no graph " + std::string(req.matches[1]));
      NodeId goal = 0;
      if (req.has_param("goal")) {
        goal = parse_id(req.get_param_value("goal"));
      } else if (!g->graph.goals().empty()) {
        goal = g->graph.goals().front();
      } else {
        return send_error(res, 400, "MalformedInput", "goal parameter required: graph declares no goals");
      }
      if (!g->graph.contains(goal)) return send_error(res, 404, "UnknownNode", "no node " + std::to_string(goal));
      EngineConfig cfg;
      const std::string engine = req.has_param("engine") ? req.get_param_value("engine") : "exact";
      auto e = parse_engine(engine);
      if (!e) return send_error(res, 400, "MalformedInput", "unknown engine " + engine);
      cfg.engine = *e;
      cfg.seed = query<std::uint64_t>(req, "seed", 1);
      cfg.stop.per_node_error = query<double>(req, "error", 0.02);
      cfg.stop.max_samples = query<std::uint64_t>(req, "max_samples", 1'000'000);
      send(res, 200, to_json(sensitivity_report(g->graph, goal, cfg)));
    }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, auto& res) {
      json body = parse_body(req);
      const auto gid = field<std::string>(body, "graph_id", "");
      auto g = find_graph(gid);
      if (!g) return send_error(res, 404, "UnknownGraph", "no graph " + gid);
      auto s = std::make_shared<Session>();
      s->graph = g;
      {
        std::lock_guard lock(sessions_mu);
        s->id = "s" + std::to_string(next_session++);
        sessions[s->id] = s;
      }
      std::lock_guard lock(s->mu);
      send(res, 201, session_json(*s));
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
      auto s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, "UnknownSession", "no session " + std::string(req.matches[1]));
      std::lock_guard lock(s->mu);
      send(res, 200, session_json(*s));
    }));

    server.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
      std::lock_guard lock(sessions_mu);
      if (sessions.erase(req.matches[1]) == 0)
        return send_error(res, 404, "UnknownSession", "no session " + std::string(req.matches[1]));
      res.status = 204;
    }));

    server.Patch(R"(/sessions/([^/]+)/evidence)", guarded([this](const httplib::Request& req, auto& res) {
      auto s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, "UnknownSession", "no session " + std::string(req.matches[1]));
      json body = parse_body(req);
      std::lock_guard lock(s->mu);
      EvidenceSet next = s->evidence;
      if (body.contains("clear")) {
        const auto& c = body["clear"];
        if ((c.is_string() && c.get<std::string>() == "all") || (c.is_boolean() && c.get<bool>())) {
          next.clear();
        } else if (c.is_array()) {
          for (const auto& v : c) {
            if (!v.is_number_unsigned()) throw Error(ErrorCode::MalformedInput, "clear entries must be node ids");
            next.erase(v.get<NodeId>());
          }
        } else {
          throw Error(ErrorCode::MalformedInput, "\"clear\" must be \"all\" or an array of node ids");
        }
      }
      if (body.contains("set")) {
        if (!body["set"].is_object()) throw Error(ErrorCode::MalformedInput, "\"set\" must be an object");
        for (const auto& [k, v] : body["set"].items()) {
          const NodeId id = parse_id(k);
          next[id] = parse_bool_value(v, id);
        }
      }
      check_evidence(next, s->graph->graph);
      s->evidence = std::move(next);
      send(res, 200, session_json(*s));
    }));

    server.Post(R"(/sessions/([^/]+)/infer)", guarded([this](const httplib::Request& req, auto& res) {
      auto s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, "UnknownSession", "no session " + std::string(req.matches[1]));
      infer(s, parse_body(req), res);
    }));

    server.Get(R"(/sessions/([^/]+)/jobs/([^/]+))", guarded([this](const httplib::Request& req, auto& res) {
      auto s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, "UnknownSession", "no session " + std::string(req.matches[1]));
      std::lock_guard lock(s->mu);
      if (s->token != req.matches[2]) return send_error(res, 404, "UnknownJob", "no job " + std::string(req.matches[2]));
      if (s->running) return send(res, 202, json{{"token", s->token}, {"status", "running"}});
      send(res, s->job_outcome.status, s->job_outcome.body);
    }));

    server.Get(R"(/sessions/([^/]+)/posteriors)", guarded([this](const httplib::Request& req, auto& res) {
      auto s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, "UnknownSession", "no session " + std::string(req.matches[1]));
      std::lock_guard lock(s->mu);
      if (!s->has_result) return send_error(res, 404, "NoResult", "session has no completed inference");
      send(res, 200, s->last_result);
    }));

    server.Get(R"(/sessions/([^/]+)/trace)", guarded([this](const httplib::Request& req, auto& res) {
      auto s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, "UnknownSession", "no session " + std::string(req.matches[1]));
      std::lock_guard lock(s->mu);
      json points = json::array();
      for (const auto& p : s->trace) points.push_back(to_json(p));
      send(res, 200, json{{"running", s->running}, {"trace", points}});
    }));
  }

  void infer(const std::shared_ptr<Session>& s, const json& body, httplib::Response& res) {
    const auto technique_name = field<std::string>(body, "technique", "lw");
    std::optional<Technique> technique;
    if (technique_name != "exact") {
      technique = parse_technique(technique_name);
      if (!technique) return send_error(res, 400, "MalformedInput", "unknown technique " + technique_name);
    }
    StopCriterion stop;
    stop.per_node_error = field<double>(body, "error", 0.02);
    stop.max_samples = field<std::uint64_t>(body, "max_samples", 1'000'000);
    const auto seed = field<std::uint64_t>(body, "seed", 1);
    const bool timing = field<bool>(body, "timing", false);
    RunOptions opts;
    opts.batch_size = field<std::uint64_t>(body, "batch_size", 1000);
    if (!(stop.per_node_error > 0.0)) throw Error(ErrorCode::DomainError, "error must be positive");
    if (opts.batch_size == 0) throw Error(ErrorCode::DomainError, "batch_size must be positive");

    EvidenceSet evidence;
    std::string token;
    {
      std::lock_guard lock(s->mu);
      if (s->running) return send_error(res, 409, "InferenceInProgress", "session " + s->id + " is already inferring");
      s->running = true;
      s->trace.clear();
      evidence = s->evidence;
      {
        std::lock_guard slock(sessions_mu);
        token = "j" + std::to_string(next_token++);
      }
      s->token = token;
    }

    std::weak_ptr<Session> weak = s;
    opts.on_batch = [weak](const TracePoint& p) {
      if (auto live = weak.lock()) {
        std::lock_guard lock(live->mu);
        live->trace.push_back(p);
      }
    };

    auto graph = s->graph;
    auto done = std::make_shared<std::promise<void>>();
    auto finished = done->get_future();
    auto job = std::async(std::launch::async, [s, graph, evidence, technique, stop, seed, timing, opts, done] {
      Outcome out;
      bool ok = false;
      try {
        json result;
        if (technique) {
          result = to_json(run_inference(graph->compiled, graph->graph.goals(), evidence, *technique, stop, seed, opts),
                           timing);
        } else {
          result = exact_result_json(exact_conditional(graph->graph, evidence));
        }
        result["evidence"] = evidence_json(evidence);
        out = {200, result.dump()};
        ok = true;
      } catch (const Error& e) {
        out = {status_of(e.code()), error_body(to_string(e.code()), e.what(), e.details())};
      } catch (const std::exception& e) {
        out = {500, error_body("InternalError", e.what())};
      }
      {
        std::lock_guard lock(s->mu);
        if (ok) {
          s->last_result = out.body;
          s->has_result = true;
        }
        s->job_outcome = out;
        s->running = false;
      }
      done->set_value();
    });
    {
      std::lock_guard lock(jobs_mu);
      jobs.erase(std::remove_if(jobs.begin(), jobs.end(),
                                [](auto& f) { return f.wait_for(std::chrono::seconds(0)) == std::future_status::ready; }),
                 jobs.end());
      jobs.push_back(std::move(job));
    }

    const auto budget = std::chrono::duration<double, std::milli>(options.infer_budget_ms);
    if (finished.wait_for(budget) == std::future_status::ready) {
      std::lock_guard lock(s->mu);
      if (s->token == token) return send(res, s->job_outcome.status, s->job_outcome.body);
    }
    send(res, 202, json{{"token", token}, {"status", "running"}, {"poll", "/sessions/" + s->id + "/jobs/" + token}});
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Service::~Service() = default;

std::string Service::add_graph(AttackGraph graph, std::string name) {
  return impl_->add_graph(std::move(graph), std::move(name));
}

std::size_t Service::preload_directory(const std::string& dir, std::ostream& log) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::MalformedInput, "not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::size_t loaded = 0;
  const std::string vsuffix = "_VERTICES.CSV";
  for (const auto& path : files) {
    const std::string fname = path.filename().string();
    try {
      if (path.extension() == ".json") {
        add_graph(parse_canonical(read_file(path.string())), path.stem().string());
        ++loaded;
      } else if (fname.size() > vsuffix.size() && fname.ends_with(vsuffix)) {
        const std::string stem = fname.substr(0, fname.size() - vsuffix.size());
        const fs::path arcs = path.parent_path() / (stem + "_ARCS.CSV");
        if (!fs::exists(arcs)) {
          log << "skipping " << fname << ": no matching " << arcs.filename().string() << "\n";
          continue;
        }
        add_graph(parse_mulval_csv(read_file(path.string()), read_file(arcs.string())), stem);
        ++loaded;
      }
    } catch (const Error& e) {
      log << "skipping " << fname << ": " << e.what() << "\n";
    }
  }
  return loaded;
}

int Service::bind(int port) {
  if (port == 0) return impl_->server.bind_to_any_port(impl_->options.host);
  if (port < 0 || port > 65535) return -1;
  return impl_->server.bind_to_port(impl_->options.host, port) ? port : -1;
}

bool Service::listen() { return impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

}  // namespace bagsim
