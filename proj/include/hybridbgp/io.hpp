#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridbgp/error.hpp"
#include "hybridbgp/scenario.hpp"

namespace hybridbgp {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError(std::string("unknown key '") + k + "' in " + what);
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline SimTime seconds_or(const Json& j, const char* key, SimTime fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(std::string("'") + key + "' must be a number of seconds");
  const double s = it->get<double>();
  if (s < 0) throw ConfigError(std::string("'") + key + "' must not be negative");
  return SimTime::from_seconds(s);
}

inline AsNumber asn_at(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_unsigned()) throw ConfigError(std::string("missing or bad AS number '") + key + "'");
  return AsNumber{it->get<std::uint32_t>()};
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

}  // namespace detail

// --- topology ---

inline Json to_json(const Topology& t) {
  Json nodes = Json::array(), links = Json::array(), orig = Json::array();
  for (const Node& n : t.nodes()) nodes.push_back({{"asn", n.asn.value}, {"role", to_string(n.role)}});
  for (const Link& l : t.links()) links.push_back({{"a", l.a.value}, {"b", l.b.value}, {"delay_s", l.delay.to_seconds()}});
  for (auto& [p, origin] : t.originations()) orig.push_back({{"prefix", p.str()}, {"origin", origin.value}});
  return {{"nodes", nodes}, {"links", links}, {"originations", orig}};
}

inline Topology topology_from_json(const Json& j, SimTime default_delay = SimTime::millis(2)) {
  detail::reject_unknown(j, {"nodes", "links", "originations"}, "topology");
  Topology t;
  for (const Json& n : j.value("nodes", Json::array())) {
    detail::reject_unknown(n, {"asn", "role"}, "topology node");
    t.add_node(detail::asn_at(n, "asn"), parse_role(detail::get_or<std::string>(n, "role", "legacy")));
  }
  for (const Json& l : j.value("links", Json::array())) {
    detail::reject_unknown(l, {"a", "b", "delay_s"}, "topology link");
    t.add_link(detail::asn_at(l, "a"), detail::asn_at(l, "b"), detail::seconds_or(l, "delay_s", default_delay));
  }
  for (const Json& o : j.value("originations", Json::array())) {
    detail::reject_unknown(o, {"prefix", "origin"}, "origination");
    const AsNumber origin = detail::asn_at(o, "origin");
    if (!t.has_node(origin)) throw ConfigError("origination by unknown AS " + to_string(origin));
    t.originate(Prefix::parse(detail::get_or<std::string>(o, "prefix", "")), origin);
  }
  return t;
}

// --- scenario ---

inline Json to_json(const GraphParams& g) {
  return {{"family", to_string(g.family)}, {"n", g.n}, {"p", g.p}, {"m", g.m}, {"k", g.k}};
}

inline GraphParams graph_from_json(const Json& j) {
  detail::reject_unknown(j, {"family", "n", "p", "m", "k"}, "graph");
  GraphParams g;
  g.family = parse_family(detail::get_or<std::string>(j, "family", to_string(g.family)));
  g.n = detail::get_or(j, "n", g.n);
  g.p = detail::get_or(j, "p", g.p);
  g.m = detail::get_or(j, "m", g.m);
  g.k = detail::get_or(j, "k", g.k);
  validate(g);
  return g;
}

inline Json timers_to_json(const SimConfig& c) {
  return {{"mrai_s", c.mrai.to_seconds()},
          {"crwi_s", c.controller.crwi.to_seconds()},
          {"install_delay_s", c.controller.install_delay.to_seconds()},
          {"processing_s", c.processing.to_seconds()},
          {"controller_processing_s", c.controller_processing.to_seconds()},
          {"detection_delay_s", c.detection_delay.to_seconds()},
          {"keepalive_s", c.keepalive.to_seconds()},
          {"hold_down_s", c.hold_down.to_seconds()},
          {"reconnect_s", c.reconnect.to_seconds()},
          {"model_keepalives", c.model_keepalives},
          {"batch_decisions", c.batch_decisions}};
}

inline SimConfig timers_from_json(const Json& j, SimConfig c = {}) {
  detail::reject_unknown(j,
                         {"mrai_s", "crwi_s", "install_delay_s", "processing_s", "controller_processing_s",
                          "detection_delay_s", "keepalive_s", "hold_down_s", "reconnect_s", "model_keepalives",
                          "batch_decisions"},
                         "timers");
  c.mrai = detail::seconds_or(j, "mrai_s", c.mrai);
  c.controller.crwi = detail::seconds_or(j, "crwi_s", c.controller.crwi);
  c.controller.install_delay = detail::seconds_or(j, "install_delay_s", c.controller.install_delay);
  c.processing = detail::seconds_or(j, "processing_s", c.processing);
  c.controller_processing = detail::seconds_or(j, "controller_processing_s", c.controller_processing);
  c.detection_delay = detail::seconds_or(j, "detection_delay_s", c.detection_delay);
  c.keepalive = detail::seconds_or(j, "keepalive_s", c.keepalive);
  c.hold_down = detail::seconds_or(j, "hold_down_s", c.hold_down);
  c.reconnect = detail::seconds_or(j, "reconnect_s", c.reconnect);
  c.model_keepalives = detail::get_or(j, "model_keepalives", c.model_keepalives);
  c.batch_decisions = detail::get_or(j, "batch_decisions", c.batch_decisions);
  if (c.controller.crwi <= SimTime{}) throw ConfigError("crwi_s must be positive");
  return c;
}

inline Json to_json(const ScenarioConfig& s) {
  Json j = {{"id", s.id},
            {"seed", s.seed},
            {"graph", to_json(s.graph)},
            {"penetration", s.penetration},
            {"prepend_count", s.prepend_count},
            {"collector", s.collector},
            {"link_delay_s", s.link_delay.to_seconds()},
            {"timers", timers_to_json(s.sim)},
            {"trigger_offset_s", s.trigger_offset.to_seconds()},
            {"run_limit_s", s.run_limit.to_seconds()}};
  if (s.topology) {
    Json t = to_json(s.topology->topology);
    t["client"] = s.topology->client.value;
    t["primary"] = s.topology->primary.value;
    t["backup"] = s.topology->backup.value;
    t["prefix"] = s.topology->prefix.str();
    j["topology"] = t;
  }
  return j;
}

// Fields left out keep their defaults. A "topology" object replaces graph
// generation and cluster placement entirely.
inline ScenarioConfig scenario_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"id", "description", "graph", "penetration", "prepend_count", "collector", "link_delay_s",
                          "timers", "trigger_offset_s", "run_limit_s", "topology", "seed"},
                         "scenario");
  ScenarioConfig s;
  s.id = detail::get_or<std::string>(j, "id", s.id);
  if (s.id.empty() || s.id.find_first_of(",\"\n") != std::string::npos) {
    throw ConfigError("scenario id must be non-empty and free of commas, quotes and newlines");
  }
  s.seed = detail::get_or(j, "seed", s.seed);
  if (j.contains("graph")) s.graph = graph_from_json(j["graph"]);
  s.penetration = detail::get_or(j, "penetration", s.penetration);
  if (s.penetration < 0 || s.penetration > 100) throw ConfigError("penetration must be within [0, 100]");
  s.prepend_count = detail::get_or(j, "prepend_count", s.prepend_count);
  if (s.prepend_count < 1) throw ConfigError("prepend_count must be >= 1");
  s.collector = detail::get_or(j, "collector", s.collector);
  s.link_delay = detail::seconds_or(j, "link_delay_s", s.link_delay);
  if (j.contains("timers")) s.sim = timers_from_json(j["timers"]);
  s.trigger_offset = detail::seconds_or(j, "trigger_offset_s", s.trigger_offset);
  s.run_limit = detail::seconds_or(j, "run_limit_s", s.run_limit);
  if (j.contains("topology")) {
    Json t = j["topology"];
    ScenarioConfig::Explicit e;
    e.client = detail::asn_at(t, "client");
    e.primary = detail::asn_at(t, "primary");
    e.backup = detail::asn_at(t, "backup");
    e.prefix = Prefix::parse(detail::get_or<std::string>(t, "prefix", default_client_prefix().str()));
    for (const char* k : {"client", "primary", "backup", "prefix"}) t.erase(k);
    e.topology = topology_from_json(t, s.link_delay);
    s.topology = std::move(e);
  }
  return s;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  return scenario_from_json(detail::parse_json(detail::read_file(path), path));
}

// --- run records ---

inline const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols = {
      "scenario_id", "family", "n", "p", "m", "k", "penetration", "mrai_s", "crwi_s", "base_seed", "run_index",
      "runs_per_cell", "seed", "cluster_size", "trigger_time_s", "convergence_time_s", "update_count", "churn_rate",
      "churn_zero_duration", "post_convergence_loops", "blackholes", "reachable_fraction",
      "repeated_controller_paths", "mrai_delayed_withdrawals", "trace_hash"};
  return cols;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

inline std::string csv_header() {
  std::string out;
  for (auto& c : record_columns()) out += (out.empty() ? "" : ",") + c;
  return out;
}

inline std::string to_csv_row(const RunRecord& r) {
  const std::vector<std::string> f = {r.scenario_id,
                                      to_string(r.graph.family),
                                      std::to_string(r.graph.n),
                                      format_double(r.graph.p),
                                      std::to_string(r.graph.m),
                                      std::to_string(r.graph.k),
                                      std::to_string(r.penetration),
                                      r.mrai.str(),
                                      r.crwi.str(),
                                      std::to_string(r.base_seed),
                                      std::to_string(r.run_index),
                                      std::to_string(r.runs_per_cell),
                                      std::to_string(r.seed),
                                      std::to_string(r.cluster_size),
                                      r.trigger_time.str(),
                                      r.convergence_time.str(),
                                      std::to_string(r.update_count),
                                      format_double(r.churn_rate),
                                      r.churn_zero_duration ? "1" : "0",
                                      std::to_string(r.post_convergence_loops),
                                      std::to_string(r.blackholes),
                                      format_double(r.reachable_fraction),
                                      std::to_string(r.repeated_controller_paths),
                                      std::to_string(r.mrai_delayed_withdrawals),
                                      hex64(r.trace_hash)};
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Parses "s.uuuuuu" exactly.
inline SimTime parse_time(const std::string& s) {
  const auto dot = s.find('.');
  try {
    std::int64_t whole = std::stoll(s.substr(0, dot));
    std::int64_t frac = 0;
    if (dot != std::string::npos) {
      std::string f = s.substr(dot + 1);
      if (f.size() > 6 || f.find_first_not_of("0123456789") != std::string::npos) throw ConfigError("bad time " + s);
      f.append(6 - f.size(), '0');
      frac = std::stoll(f);
    }
    return SimTime::micros(whole * 1000000 + (s.starts_with("-") ? -frac : frac));
  } catch (const std::logic_error&) {
    throw ConfigError("bad time '" + s + "'");
  }
}

}  // namespace detail

inline RunRecord record_from_csv(const std::string& line) {
  const auto f = detail::split_csv(line);
  if (f.size() != record_columns().size()) {
    throw ConfigError("record has " + std::to_string(f.size()) + " fields, expected " +
                      std::to_string(record_columns().size()));
  }
  try {
    RunRecord r;
    std::size_t i = 0;
    r.scenario_id = f[i++];
    r.graph.family = parse_family(f[i++]);
    r.graph.n = std::stoi(f[i++]);
    r.graph.p = std::stod(f[i++]);
    r.graph.m = std::stoi(f[i++]);
    r.graph.k = std::stoi(f[i++]);
    r.penetration = std::stoi(f[i++]);
    r.mrai = detail::parse_time(f[i++]);
    r.crwi = detail::parse_time(f[i++]);
    r.base_seed = std::stoull(f[i++]);
    r.run_index = std::stoi(f[i++]);
    r.runs_per_cell = std::stoi(f[i++]);
    r.seed = std::stoull(f[i++]);
    r.cluster_size = std::stoull(f[i++]);
    r.trigger_time = detail::parse_time(f[i++]);
    r.convergence_time = detail::parse_time(f[i++]);
    r.update_count = std::stoull(f[i++]);
    r.churn_rate = std::stod(f[i++]);
    r.churn_zero_duration = f[i++] == "1";
    r.post_convergence_loops = std::stoull(f[i++]);
    r.blackholes = std::stoull(f[i++]);
    r.reachable_fraction = std::stod(f[i++]);
    r.repeated_controller_paths = std::stoull(f[i++]);
    r.mrai_delayed_withdrawals = std::stoull(f[i++]);
    r.trace_hash = std::stoull(f[i++], nullptr, 16);
    return r;
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("malformed record: ") + e.what());
  }
}

inline std::vector<RunRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("records file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw ConfigError("records file has an unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(record_from_csv(line));
  return out;
}

inline Json to_json(const RunRecord& r) {
  Json j = Json::object();
  const auto f = detail::split_csv(to_csv_row(r));
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) j[cols[i]] = f[i];
  // Numeric columns as numbers; times stay exact decimal strings as well.
  j["n"] = r.graph.n;
  j["p"] = r.graph.p;
  j["m"] = r.graph.m;
  j["k"] = r.graph.k;
  j["penetration"] = r.penetration;
  j["base_seed"] = r.base_seed;
  j["run_index"] = r.run_index;
  j["runs_per_cell"] = r.runs_per_cell;
  j["seed"] = r.seed;
  j["cluster_size"] = r.cluster_size;
  j["update_count"] = r.update_count;
  j["churn_rate"] = r.churn_rate;
  j["churn_zero_duration"] = r.churn_zero_duration;
  j["post_convergence_loops"] = r.post_convergence_loops;
  j["blackholes"] = r.blackholes;
  j["reachable_fraction"] = r.reachable_fraction;
  j["repeated_controller_paths"] = r.repeated_controller_paths;
  j["mrai_delayed_withdrawals"] = r.mrai_delayed_withdrawals;
  return j;
}

}  // namespace hybridbgp
