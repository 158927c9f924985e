#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bagsim/bench.hpp"
#include "bagsim/graph.hpp"
#include "bagsim/oracle.hpp"
#include "bagsim/samplers.hpp"
#include "bagsim/sensitivity.hpp"

namespace bagsim {

using json = nlohmann::json;

/// {"technique","converged","timed_out","n_raw","n_eff","acceptance_rate",
///  "posteriors":[{"id","p","stderr","n_eff"}],"trace":[...]}.
/// "wall_ms" is added only with `include_timing`, which keeps the document a
/// pure function of (graph, evidence, technique, stop criterion, seed).
json to_json(const InferenceResult& r, bool include_timing = false, bool include_trace = true);
json to_json(const TracePoint& p);
/// {"technique":"exact","posteriors":[{"id","p"}]}
json to_json(const ExactMap& m);
json to_json(const SensitivityReport& r);
json to_json(const SensitivityDensity& d);
json to_json(const Violation& v);
json to_json(const BenchResult& c);

/// Fixed-width text tables; probabilities are printed with 4 decimals.
std::string posterior_table(const AttackGraph& graph, const InferenceResult& r);
std::string posterior_table(const AttackGraph& graph, const ExactMap& m);
std::string sensitivity_table(const AttackGraph& graph, const SensitivityReport& r);
std::string bench_table(const std::vector<BenchResult>& cells);

}  // namespace bagsim
