#include "bagsim/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bagsim {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedInput, what); }

void check_probability(double p, NodeId id) {
  if (!(p >= 0.0 && p <= 1.0)) {
    malformed("node " + std::to_string(id) + ": probability " + std::to_string(p) +
              " is outside [0,1]");
  }
}

NodeId to_node_id(const json& v, const char* where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
      v.get<std::int64_t>() > std::int64_t{0xFFFFFFFF}) {
    malformed(std::string(where) + ": node ids must be non-negative integers");
  }
  return static_cast<NodeId>(v.get<std::int64_t>());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    // std::from_chars for double is available in libstdc++ 11.
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  } else {
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  }
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(start, end - start));
    if (!line.empty()) out.push_back(line);
    start = end + 1;
  }
  return out;
}

}  // namespace

AttackGraph parse_canonical(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) malformed("top level must be an object");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) malformed("\"nodes\" must be an array");

  std::vector<Node> nodes;
  for (const auto& jn : doc["nodes"]) {
    if (!jn.is_object()) malformed("node entries must be objects");
    if (!jn.contains("id")) malformed("node without \"id\"");
    Node n;
    n.id = to_node_id(jn["id"], "node");
    if (!jn.contains("type") || !jn["type"].is_string())
      malformed("node " + std::to_string(n.id) + ": \"type\" must be a string");
    auto kind = parse_node_kind(jn["type"].get<std::string>());
    if (!kind) malformed("node " + std::to_string(n.id) + ": unknown type \"" +
                         jn["type"].get<std::string>() + "\"");
    n.kind = *kind;
    if (jn.contains("label")) {
      if (!jn["label"].is_string()) malformed("node " + std::to_string(n.id) + ": label must be a string");
      n.label = jn["label"].get<std::string>();
    }
    if (jn.contains("prob")) {
      if (!jn["prob"].is_number()) malformed("node " + std::to_string(n.id) + ": prob must be a number");
      n.local_prob = jn["prob"].get<double>();
      check_probability(n.local_prob, n.id);
    } else if (n.kind == NodeKind::Leaf) {
      malformed("LEAF node " + std::to_string(n.id) + " has no prior (\"prob\")");
    }
    nodes.push_back(std::move(n));
  }

  std::vector<Edge> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) malformed("\"edges\" must be an array");
    for (const auto& je : doc["edges"]) {
      if (!je.is_array() || je.size() != 2) malformed("edges must be [src, dst] pairs");
      edges.emplace_back(to_node_id(je[0], "edge"), to_node_id(je[1], "edge"));
    }
  }

  std::vector<NodeId> goals;
  if (doc.contains("goals")) {
    if (!doc["goals"].is_array()) malformed("\"goals\" must be an array");
    for (const auto& jg : doc["goals"]) goals.push_back(to_node_id(jg, "goal"));
  }
  return AttackGraph::checked(std::move(nodes), std::move(edges), std::move(goals));
}

std::string serialize_canonical(const AttackGraph& graph, int indent) {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& n : graph.nodes()) {
    doc["nodes"].push_back(
        {{"id", n.id}, {"type", to_string(n.kind)}, {"label", n.label}, {"prob", n.local_prob}});
  }
  doc["edges"] = json::array();
  for (const auto& [s, d] : graph.edges()) doc["edges"].push_back({s, d});
  doc["goals"] = graph.goals();
  return doc.dump(indent) + "\n";
}

std::vector<std::string> split_csv_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) malformed("unterminated quoted field in CSV record");
  fields.push_back(std::move(cur));
  return fields;
}

AttackGraph parse_mulval_csv(std::string_view vertices_text, std::string_view arcs_text,
                             ArcDirection direction) {
  std::vector<Node> nodes;
  for (auto line : lines_of(vertices_text)) {
    auto f = split_csv_record(line);
    if (f.size() < 4) malformed("vertex row needs id,label,kind,metric: " + std::string(line));
    Node n;
    if (!parse_number(f[0], n.id)) malformed("bad vertex id: " + f[0]);
    n.label = f[1];
    auto kind = parse_node_kind(trim(f[2]));
    if (!kind) {
      throw Error(ErrorCode::UnknownNodeKind,
                  "vertex " + std::to_string(n.id) + ": unknown kind \"" + f[2] + "\"");
    }
    n.kind = *kind;
    if (!parse_number(f[3], n.local_prob)) malformed("bad metric for vertex " + std::to_string(n.id));
    check_probability(n.local_prob, n.id);
    nodes.push_back(std::move(n));
  }

  std::vector<Edge> edges;
  for (auto line : lines_of(arcs_text)) {
    auto f = split_csv_record(line);
    if (f.size() < 2) malformed("arc row needs two node ids: " + std::string(line));
    NodeId a = 0, b = 0;
    if (!parse_number(f[0], a) || !parse_number(f[1], b)) malformed("bad arc row: " + std::string(line));
    if (direction == ArcDirection::DstSrc) edges.emplace_back(b, a);
    else edges.emplace_back(a, b);
  }
  // MulVAL output carries no goal marker; its sinks are the attack goals.
  std::vector<NodeId> goals;
  for (const auto& n : nodes) {
    const bool has_child =
        std::any_of(edges.begin(), edges.end(), [&](const Edge& e) { return e.first == n.id; });
    if (!has_child) goals.push_back(n.id);
  }
  return AttackGraph::checked(std::move(nodes), std::move(edges), std::move(goals));
}

EvidenceSet parse_evidence(std::string_view text, const AttackGraph& graph) {
  EvidenceSet out;
  text = trim(text);
  if (text.empty()) return out;
  for (const auto& raw : split_csv_record(text)) {
    auto tok = trim(raw);
    auto eq = tok.find('=');
    if (eq == std::string_view::npos) malformed("evidence entry \"" + std::string(tok) + "\" lacks '='");
    NodeId id = 0;
    if (!parse_number(tok.substr(0, eq), id)) malformed("bad node id in evidence \"" + std::string(tok) + "\"");
    auto val = trim(tok.substr(eq + 1));
    bool state;
    if (val == "y" || val == "Y" || val == "1") state = true;
    else if (val == "n" || val == "N" || val == "0") state = false;
    else malformed("evidence value must be y or n: \"" + std::string(tok) + "\"");
    if (auto [it, inserted] = out.emplace(id, state); !inserted && it->second != state) {
      malformed("node " + std::to_string(id) + " given conflicting evidence");
    }
  }
  check_evidence(out, graph);
  return out;
}

std::string format_evidence(const EvidenceSet& evidence) {
  std::string out;
  for (const auto& [id, v] : evidence) {
    if (!out.empty()) out += ',';
    out += std::to_string(id) + (v ? "=y" : "=n");
  }
  return out;
}

void check_evidence(const EvidenceSet& evidence, const AttackGraph& graph) {
  for (const auto& [id, v] : evidence)
    if (!graph.contains(id)) throw Error(ErrorCode::UnknownNode, "evidence names unknown node " + std::to_string(id));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace bagsim
