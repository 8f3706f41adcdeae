#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "hybridbgp/io.hpp"
#include "hybridbgp/metrics.hpp"
#include "hybridbgp/network.hpp"
#include "hybridbgp/scenario.hpp"

namespace hybridbgp {

inline constexpr int kWireVersion = 1;

enum class Stream : std::uint8_t { Topology, ForwardingTree, UpdateEvent, MetricsTick };

inline const char* to_string(Stream s) {
  switch (s) {
    case Stream::Topology: return "topology";
    case Stream::ForwardingTree: return "forwarding_tree";
    case Stream::UpdateEvent: return "update_event";
    case Stream::MetricsTick: return "metrics_tick";
  }
  return "?";
}

inline std::optional<Stream> parse_stream(const std::string& s) {
  for (Stream k : {Stream::Topology, Stream::ForwardingTree, Stream::UpdateEvent, Stream::MetricsTick})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

// Wall clock in nanoseconds; injectable so tests can pace by hand.
using WallClock = std::function<std::int64_t()>;

inline WallClock steady_wall_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

struct LinkCommand {
  SimTime at;
  AsNumber a;
  AsNumber b;
  LinkState state = LinkState::Down;
  bool noop = false;

  bool operator==(const LinkCommand&) const = default;
};

inline Json to_json(const LinkCommand& c) {
  return {{"sim_time", c.at.to_seconds()},
          {"a", c.a.value},
          {"b", c.b.value},
          {"state", c.state == LinkState::Up ? "up" : "down"},
          {"noop", c.noop}};
}

inline Json to_json(const ForwardingSnapshot& s) {
  Json hops = Json::object();
  for (auto& [asn, hop] : s.next_hops) {
    Json h;
    switch (hop.kind) {
      case NextHop::Kind::Deliver: h = "deliver"; break;
      case NextHop::Kind::Forward: h = hop.via.value; break;
      case NextHop::Kind::None: h = nullptr; break;
    }
    hops[std::to_string(asn.value)] = {{"next_hop", h}, {"verdict", to_string(s.verdicts.at(asn))}};
  }
  return {{"prefix", s.prefix.str()},
          {"sim_time", s.at.to_seconds()},
          {"ases", hops},
          {"delivered", s.delivered},
          {"loops", s.loops},
          {"blackholes", s.blackholes},
          {"reachable_fraction", s.reachable_fraction}};
}

// Cumulative metrics since the last link command (or since start).
struct LiveMetrics {
  SimTime sim_time;
  SimTime last_trigger;
  bool quiescent = false;
  std::size_t total_updates = 0;
  std::size_t updates_since_trigger = 0;
  SimTime convergence_time;
  double churn_rate = 0.0;

  bool operator==(const LiveMetrics&) const = default;
};

inline LiveMetrics measure_live(const Network& net, SimTime trigger) {
  LiveMetrics m;
  m.sim_time = net.sim().now();
  m.last_trigger = trigger;
  m.quiescent = net.sim().quiescent();
  for (const auto& u : net.trace().updates) m.total_updates += u.collector_session ? 0 : 1;
  m.convergence_time = measure_convergence(net.trace(), trigger, true);
  const ChurnResult churn = measure_churn(net.trace(), trigger, m.convergence_time);
  m.updates_since_trigger = churn.count;
  m.churn_rate = churn.rate;
  return m;
}

inline Json to_json(const LiveMetrics& m) {
  return {{"sim_time", m.sim_time.to_seconds()},
          {"last_trigger", m.last_trigger.to_seconds()},
          {"quiescent", m.quiescent},
          {"total_updates", m.total_updates},
          {"updates_since_trigger", m.updates_since_trigger},
          {"convergence_time", m.convergence_time.to_seconds()},
          {"churn_rate", m.churn_rate}};
}

inline std::unique_ptr<Network> make_network(const FailoverScenario& sc, const SimConfig& sim) {
  const FailoverScenario* s = &sc;
  return std::make_unique<Network>(sc.topology, sim, [s](AsNumber from, AsNumber to) { return s->export_prepend(from, to); });
}

// Applies one link command the way a live session does: everything due up to
// the command's time runs first, then the change is injected at that time.
inline void apply_link_command(Network& net, const LinkCommand& c) {
  net.sim().run_until(c.at);
  net.schedule_link_state(c.a, c.b, c.state, c.at);
  net.sim().run_until(c.at);
}

struct ReplayResult {
  FailoverScenario scenario;
  ForwardingSnapshot snapshot;
  LiveMetrics metrics;
  std::uint64_t trace_hash = 0;
};

// Batch re-execution of a live session's command log.
inline ReplayResult replay(const ScenarioConfig& cfg, std::uint64_t seed, const std::vector<LinkCommand>& log) {
  ReplayResult r;
  r.scenario = build_scenario(cfg, seed);
  auto net = make_network(r.scenario, cfg.sim);
  net->start();
  SimTime trigger;
  for (const LinkCommand& c : log) {
    apply_link_command(*net, c);
    if (!c.noop) trigger = c.at;
  }
  const SimTime limit = net->sim().now() + cfg.run_limit;
  if (!net->sim().run_until_quiescent(limit).quiescent) throw InvariantError("replay did not reach quiescence");
  r.snapshot = net->snapshot(r.scenario.prefix);
  r.metrics = measure_live(*net, trigger);
  r.trace_hash = net->sim().trace_hash();
  return r;
}

// One interactive simulation. All simulation work happens on the session's
// own thread (or inside pump() when driven by hand); other threads talk to it
// only through post(), attach() and detach(), and receive serialized wire
// messages through their sink on the session thread.
class LiveSession {
 public:
  using Sink = std::function<void(const std::string&)>;

  static constexpr std::int64_t kTreeThrottleNs = 100'000'000;    // 100 ms wall
  static constexpr std::int64_t kMetricsPeriodNs = 250'000'000;   // 250 ms wall

  LiveSession(std::string id, ScenarioConfig cfg, std::uint64_t seed, double speed, WallClock clock = steady_wall_clock())
      : id_(std::move(id)), cfg_(std::move(cfg)), seed_(seed), speed_(speed), clock_(std::move(clock)) {
    if (!(speed_ > 0)) throw ConfigError("speed must be positive");
    scenario_ = build_scenario(cfg_, seed_);
    net_ = make_network(scenario_, cfg_.sim);
    NetworkObserver obs;
    obs.on_delivery = [this](const UpdateLogEntry& u) { on_delivery(u); };
    obs.on_change = [this](const StateChange& c) { mark_tree_dirty(c.prefix); };
    obs.on_link = [this](AsNumber, AsNumber, LinkState, SimTime) { on_link(); };
    net_->set_observer(std::move(obs));
    refresh_status();
  }

  ~LiveSession() { stop(); }
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  const std::string& id() const { return id_; }
  const FailoverScenario& scenario() const { return scenario_; }
  const ScenarioConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  // Runs pump() on a dedicated thread until stop().
  void run_in_thread() {
    if (thread_.joinable()) return;
    thread_ = std::jthread([this](std::stop_token st) {
      while (!st.stop_requested()) {
        pump();
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, std::chrono::milliseconds(5), [&] { return !inbox_.empty() || st.stop_requested(); });
      }
    });
  }

  void stop() {
    if (thread_.joinable()) {
      thread_.request_stop();
      cv_.notify_all();
      thread_.join();
    }
  }

  // Registers a client; it receives hello, then the topology and metrics
  // streams until it changes its subscriptions.
  int attach(Sink sink) {
    std::lock_guard lock(mu_);
    const int sid = next_subscriber_++;
    inbox_.push_back({sid, Json{{"op", "__attach"}}, std::move(sink)});
    cv_.notify_all();
    return sid;
  }

  void detach(int sid) {
    std::lock_guard lock(mu_);
    inbox_.push_back({sid, Json{{"op", "__detach"}}, {}});
    cv_.notify_all();
  }

  // A client command (a parsed "command" wire message or a bare command object).
  void post(int sid, Json command) {
    std::lock_guard lock(mu_);
    inbox_.push_back({sid, std::move(command), {}});
    cv_.notify_all();
  }

  // Parses raw client text; malformed input is answered with an error.
  void post_text(int sid, const std::string& text) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) j = Json{{"op", "__malformed"}};
    post(sid, std::move(j));
  }

  // Thread-safe status document (as of the last pump).
  Json status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

  std::vector<LinkCommand> command_log() const {
    std::lock_guard lock(mu_);
    return log_copy_;
  }

  // One step of the session loop: handle queued commands in order, advance
  // the simulation to the paced time, flush throttled streams.
  void pump() {
    std::deque<Inbound> batch;
    {
      std::lock_guard lock(mu_);
      batch.swap(inbox_);
    }
    for (auto& in : batch) handle(in);
    advance();
    flush();
    refresh_status();
  }

  // --- direct access for tests driving pump() by hand ---
  const Network& network() const { return *net_; }
  bool started() const { return started_; }

 private:
  struct Inbound {
    int sid;
    Json command;
    Sink sink;
  };

  struct Subscriber {
    Sink sink;
    std::set<Stream> streams{Stream::Topology, Stream::MetricsTick};
    std::optional<Prefix> tree_prefix;
    bool tree_dirty = false;
    std::int64_t tree_sent_ns = 0;
    bool tree_sent_once = false;
  };

  std::int64_t now_ns() const { return clock_(); }

  // Sim time the wall clock says we should have reached.
  SimTime paced_target() const {
    const double elapsed = static_cast<double>(now_ns() - anchor_wall_ns_) / 1e9;
    return anchor_sim_ + SimTime::from_seconds(elapsed * speed_);
  }

  void advance() {
    if (!started_) return;
    const SimTime target = paced_target();
    if (target > net_->sim().now()) net_->sim().run_until(target);
  }

  void reanchor() {
    anchor_wall_ns_ = now_ns();
    anchor_sim_ = net_->sim().now();
  }

  void send(Subscriber& s, const char* type, Json payload) {
    Json msg = {{"v", kWireVersion}, {"type", type}, {"seq", ++seq_}, {"session", id_}, {"payload", std::move(payload)}};
    if (s.sink) s.sink(msg.dump());
  }

  void broadcast(Stream stream, const char* type, const Json& payload) {
    for (auto& [sid, s] : subscribers_)
      if (s.streams.count(stream)) send(s, type, payload);
  }

  void ack(int sid, const Json& cmd, Json extra = Json::object()) {
    auto it = subscribers_.find(sid);
    if (it == subscribers_.end()) return;
    extra["id"] = cmd.contains("id") ? cmd["id"] : Json(nullptr);
    extra["op"] = cmd.value("op", "");
    extra["sim_time"] = net_->sim().now().to_seconds();
    if (!extra.contains("noop")) extra["noop"] = false;
    send(it->second, "command_ack", std::move(extra));
  }

  void fail(int sid, const Json& cmd, const std::string& message) {
    auto it = subscribers_.find(sid);
    if (it == subscribers_.end()) return;
    Json id = cmd.is_object() && cmd.contains("id") ? cmd["id"] : Json(nullptr);
    send(it->second, "error", {{"id", id}, {"message", message}});
  }

  void handle(Inbound& in) {
    Json& cmd = in.command;
    if (cmd.contains("type") && cmd["type"] == "command" && cmd.contains("payload") && cmd["payload"].is_object()) {
      Json inner = cmd["payload"];
      if (cmd.contains("id") && !inner.contains("id")) inner["id"] = cmd["id"];
      cmd = std::move(inner);
    }
    const std::string op = cmd.value("op", "");
    if (op == "__attach") {
      Subscriber s;
      s.sink = std::move(in.sink);
      auto& sub = subscribers_[in.sid] = std::move(s);
      send(sub, "hello", hello());
      send(sub, "topology", topology_payload());
      return;
    }
    if (op == "__detach") {
      subscribers_.erase(in.sid);
      return;
    }
    if (op == "__malformed") {
      fail(in.sid, cmd, "malformed message: expected a JSON object");
      return;
    }
    try {
      if (op == "start") {
        if (started_) throw ConfigError("session already started");
        start();
        ack(in.sid, cmd);
      } else if (op == "link") {
        link_command(in.sid, cmd);
      } else if (op == "subscribe" || op == "unsubscribe") {
        subscription(in.sid, cmd, op == "subscribe");
      } else if (op == "speed") {
        const double v = cmd.value("value", 0.0);
        if (!(v > 0)) throw ConfigError("speed must be positive");
        advance();
        speed_ = v;
        reanchor();
        ack(in.sid, cmd, {{"speed", speed_}});
      } else if (op == "command_log") {
        Json log = Json::array();
        for (auto& c : log_) log.push_back(to_json(c));
        ack(in.sid, cmd, {{"log", log}});
      } else {
        throw ConfigError("unknown op '" + op + "'");
      }
    } catch (const std::exception& e) {
      fail(in.sid, cmd, e.what());
    }
  }

  void start() {
    started_ = true;
    net_->start();
    reanchor();
    for (auto& [sid, s] : subscribers_) {
      if (s.streams.count(Stream::Topology)) send(s, "topology", topology_payload());
      s.tree_dirty = s.tree_prefix.has_value();
    }
  }

  void link_command(int sid, const Json& cmd) {
    if (!started_) throw ConfigError("session not started");
    if (!cmd.contains("a") || !cmd.contains("b") || !cmd["a"].is_number_unsigned() || !cmd["b"].is_number_unsigned()) {
      throw ConfigError("link command needs AS numbers 'a' and 'b'");
    }
    const AsNumber a{cmd["a"].get<std::uint32_t>()};
    const AsNumber b{cmd["b"].get<std::uint32_t>()};
    if (!scenario_.topology.has_link(a, b)) throw ConfigError("unknown link " + to_string(a) + "-" + to_string(b));
    const std::string st = cmd.value("state", "");
    if (st != "up" && st != "down") throw ConfigError("state must be 'up' or 'down'");
    const LinkState state = st == "up" ? LinkState::Up : LinkState::Down;

    advance();
    LinkCommand c{net_->sim().now(), a, b, state, net_->link_up(a, b) == (state == LinkState::Up)};
    apply_link_command(*net_, c);
    log_.push_back(c);
    if (!c.noop) trigger_ = c.at;
    ack(sid, cmd, {{"noop", c.noop}});
    Json echo = to_json(c);
    echo["by"] = sid;
    broadcast(Stream::Topology, "command", echo);
  }

  void subscription(int sid, const Json& cmd, bool on) {
    auto& s = subscribers_.at(sid);
    if (!cmd.contains("streams") || !cmd["streams"].is_array()) throw ConfigError("'streams' must be an array");
    std::vector<Stream> streams;
    for (const Json& v : cmd["streams"]) {
      auto k = v.is_string() ? parse_stream(v.get<std::string>()) : std::nullopt;
      if (!k) throw ConfigError("unknown stream " + v.dump());
      streams.push_back(*k);
    }
    std::optional<Prefix> prefix;
    const bool wants_tree = std::find(streams.begin(), streams.end(), Stream::ForwardingTree) != streams.end();
    if (on && wants_tree) {
      prefix = cmd.contains("prefix") ? Prefix::parse(cmd["prefix"].get<std::string>()) : scenario_.prefix;
      if (!scenario_.topology.originations().count(*prefix)) throw ConfigError("unknown prefix " + prefix->str());
    }
    for (Stream k : streams) {
      if (on) {
        s.streams.insert(k);
      } else {
        s.streams.erase(k);
      }
    }
    if (wants_tree) {
      s.tree_prefix = on ? prefix : std::nullopt;
      s.tree_dirty = false;
      s.tree_sent_once = false;
    }
    ack(sid, cmd);
    // A fresh tree subscription gets one snapshot right away.
    if (on && wants_tree) {
      advance();
      send_tree(s);
    }
  }

  void send_tree(Subscriber& s) {
    s.tree_dirty = false;
    s.tree_sent_ns = now_ns();
    s.tree_sent_once = true;
    send(s, "forwarding_tree", to_json(net_->snapshot(*s.tree_prefix)));
  }

  void on_delivery(const UpdateLogEntry& u) {
    Json p = {{"sim_time", u.time.to_seconds()},
              {"sender", u.sender.value},
              {"receiver", u.receiver.value},
              {"kind", u.kind == BgpUpdate::Kind::Announce ? "announce" : "withdraw"},
              {"prefix", u.prefix.str()},
              {"path", Json::array()},
              {"collector", u.collector_session}};
    for (AsNumber a : u.path) p["path"].push_back(a.value);
    broadcast(Stream::UpdateEvent, "update_event", p);
  }

  void mark_tree_dirty(Prefix p) {
    for (auto& [sid, s] : subscribers_)
      if (s.tree_prefix == p) s.tree_dirty = true;
  }

  void on_link() {
    for (auto& [sid, s] : subscribers_) {
      if (s.tree_prefix) s.tree_dirty = true;
      if (s.streams.count(Stream::Topology)) send(s, "topology", topology_payload());
    }
  }

  void flush() {
    const std::int64_t now = now_ns();
    for (auto& [sid, s] : subscribers_) {
      if (s.tree_prefix && s.streams.count(Stream::ForwardingTree) && s.tree_dirty &&
          (!s.tree_sent_once || now - s.tree_sent_ns >= kTreeThrottleNs)) {
        send_tree(s);
      }
    }
    if (started_ && now - metrics_sent_ns_ >= kMetricsPeriodNs) {
      metrics_sent_ns_ = now;
      Json m = to_json(measure_live(*net_, trigger_));
      const ForwardingSnapshot snap = net_->snapshot(scenario_.prefix);
      m["prefix"] = scenario_.prefix.str();
      m["loops"] = snap.loops;
      m["blackholes"] = snap.blackholes;
      m["reachable_fraction"] = snap.reachable_fraction;
      broadcast(Stream::MetricsTick, "metrics_tick", m);
    }
  }

  Json hello() const {
    return {{"version", kWireVersion},
            {"session", id_},
            {"scenario", cfg_.id},
            {"seed", seed_},
            {"speed", speed_},
            {"started", started_},
            {"prefix", scenario_.prefix.str()},
            {"streams", {"topology", "forwarding_tree", "update_event", "metrics_tick"}}};
  }

  Json topology_payload() const {
    Json nodes = Json::array(), links = Json::array(), prefixes = Json::array();
    for (const Node& n : scenario_.topology.nodes()) nodes.push_back({{"asn", n.asn.value}, {"role", to_string(n.role)}});
    for (const Link& l : scenario_.topology.links())
      links.push_back({{"a", l.a.value}, {"b", l.b.value}, {"up", net_->link_up(l.a, l.b)}});
    for (auto& [p, origin] : scenario_.topology.originations()) prefixes.push_back({{"prefix", p.str()}, {"origin", origin.value}});
    Json out = {{"sim_time", net_->sim().now().to_seconds()},
                {"nodes", nodes},
                {"links", links},
                {"prefixes", prefixes},
                {"client", scenario_.client.value},
                {"primary", scenario_.primary.value},
                {"backup", scenario_.backup.value}};
    return out;
  }

  void refresh_status() {
    Json st = {{"id", id_},
               {"scenario", cfg_.id},
               {"seed", seed_},
               {"speed", speed_},
               {"started", started_},
               {"sim_time", net_->sim().now().to_seconds()},
               {"quiescent", net_->sim().quiescent()},
               {"subscribers", subscribers_.size()},
               {"prefix", scenario_.prefix.str()}};
    Json log = Json::array();
    for (auto& c : log_) log.push_back(to_json(c));
    st["command_log"] = log;
    std::lock_guard lock(mu_);
    status_ = std::move(st);
    log_copy_ = log_;
  }

  std::string id_;
  ScenarioConfig cfg_;
  std::uint64_t seed_;
  double speed_;
  WallClock clock_;
  FailoverScenario scenario_;
  std::unique_ptr<Network> net_;

  // session-thread state
  bool started_ = false;
  std::int64_t anchor_wall_ns_ = 0;
  SimTime anchor_sim_;
  SimTime trigger_;
  std::int64_t metrics_sent_ns_ = 0;
  std::uint64_t seq_ = 0;
  std::map<int, Subscriber> subscribers_;
  std::vector<LinkCommand> log_;

  // shared with other threads
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Inbound> inbox_;
  int next_subscriber_ = 1;
  Json status_;
  std::vector<LinkCommand> log_copy_;
  std::jthread thread_;
};

}  // namespace hybridbgp
