#pragma once

#include <memory>
#include <ostream>
#include <string>

#include "bagsim/graph.hpp"

namespace bagsim {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  /// An infer request that has not finished after this long answers 202 with
  /// a poll token; the run continues in the background.
  double infer_budget_ms = 10'000.0;
};

/// HTTP/JSON front end. Routes:
///   GET    /health
///   GET    /graphs                      catalog of handles
///   POST   /graphs                      canonical JSON, or {"format":"mulval","vertices","arcs"}
///   GET    /graphs/{id}                 handle plus the canonical graph
///   GET    /graphs/{id}/sensitivity     ?goal=&engine=&seed=&error=&max_samples=
///   POST   /sessions                    {"graph_id"}
///   GET    /sessions/{id}
///   DELETE /sessions/{id}
///   PATCH  /sessions/{id}/evidence      {"set":{"6":"y"},"clear":[11] | "all"}
///   POST   /sessions/{id}/infer         {"technique","error","max_samples","seed","batch_size","timing"}
///   GET    /sessions/{id}/jobs/{token}  poll a 202 inference
///   GET    /sessions/{id}/posteriors    last completed result
///   GET    /sessions/{id}/trace         batch snapshots of the current or last run
/// Errors are {"error": code, "detail": message, "violations": [...]}.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Registers a graph and returns its server-assigned id.
  std::string add_graph(AttackGraph graph, std::string name);

  /// Loads every `*.json` canonical graph and every `<name>_VERTICES.CSV` /
  /// `<name>_ARCS.CSV` pair in `dir`, in file-name order. Files that fail to
  /// parse or validate are skipped with a message on `log`. Returns the count loaded.
  std::size_t preload_directory(const std::string& dir, std::ostream& log);

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port, or -1 on failure.
  int bind(int port);
  /// Serves until `stop()`; requires a successful `bind`.
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bagsim
