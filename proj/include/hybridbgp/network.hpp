#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hybridbgp/bgp_speaker.hpp"
#include "hybridbgp/controller.hpp"
#include "hybridbgp/error.hpp"
#include "hybridbgp/metrics.hpp"
#include "hybridbgp/simulator.hpp"
#include "hybridbgp/topology.hpp"

namespace hybridbgp {

struct SimConfig {
  SimTime mrai = SimTime::seconds(30);
  ControllerConfig controller;
  SimTime processing = SimTime::millis(1);             // per update at a legacy speaker
  SimTime controller_processing = SimTime::millis(1);  // per update at the cluster speaker
  SimTime detection_delay;                             // link failure/recovery detection
  // Session timers are recorded for completeness; failure detection uses
  // detection_delay. Keep-alives, when modelled, are passive events.
  SimTime keepalive = SimTime::seconds(5);
  SimTime hold_down = SimTime::seconds(15);
  SimTime reconnect = SimTime::seconds(5);
  bool model_keepalives = false;
  // A legacy speaker applies queued updates one at a time but runs the
  // decision process once per prefix when its input queue drains, as a
  // router's route-processing work queue does. Off: decide after every update.
  bool batch_decisions = true;

  bool operator==(const SimConfig& o) const {
    return mrai == o.mrai && controller.crwi == o.controller.crwi &&
           controller.install_delay == o.controller.install_delay && processing == o.processing &&
           controller_processing == o.controller_processing && detection_delay == o.detection_delay &&
           keepalive == o.keepalive && hold_down == o.hold_down && reconnect == o.reconnect &&
           model_keepalives == o.model_keepalives && batch_decisions == o.batch_decisions;
  }
};

// Export prepend count for routes sent from `from` to `to`.
using PrependPolicy = std::function<int(AsNumber from, AsNumber to)>;

// Observer hooks used by live sessions; all are invoked on the simulation thread.
struct NetworkObserver {
  std::function<void(const UpdateLogEntry&)> on_delivery;
  std::function<void(const StateChange&)> on_change;
  std::function<void(AsNumber, AsNumber, LinkState, SimTime)> on_link;
};

// One simulation instance: every AS of a topology as a live protocol entity.
// Legacy and client ASes run a BgpSpeaker, cluster ASes share one controller,
// and the collector only records what it is sent.
class Network final : private SpeakerIo, private ControllerIo {
 public:
  Network(Topology topo, SimConfig cfg, PrependPolicy prepend = {})
      : topo_(std::move(topo)), cfg_(cfg), prepend_(std::move(prepend)) {
    for (const Link& l : topo_.links()) links_[key(l.a, l.b)] = LinkRuntime{l.delay, true, 0};
    for (const Node& n : topo_.nodes()) {
      if (n.role == Role::Legacy || n.role == Role::Client) {
        speakers_.emplace(n.asn, std::make_unique<BgpSpeaker>(n.asn, cfg_.mrai, static_cast<SpeakerIo&>(*this)));
      } else if (n.role == Role::Cluster) {
        if (!controller_) controller_ = std::make_unique<ClusterController>(cfg_.controller, static_cast<ControllerIo&>(*this));
        controller_->add_member(n.asn);
      } else {
        collectors_.insert(n.asn);
      }
    }
    for (const Link& l : topo_.links()) {
      wire(l.a, l.b);
      wire(l.b, l.a);
    }
    sim_.set_busy_probe([this] {
      for (auto& [asn, sp] : speakers_)
        if (sp->pending_count()) return true;
      return false;
    });
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  // Originates every prefix of the topology at the current time.
  void start() {
    if (started_) throw ConfigError("network already started");
    started_ = true;
    for (auto& [prefix, origin] : topo_.originations()) {
      if (auto it = speakers_.find(origin); it != speakers_.end()) {
        it->second->originate(prefix, sim_.now());
      } else if (controller_ && controller_->is_member(origin)) {
        controller_->originate(origin, prefix, sim_.now());
      } else {
        throw ConfigError("prefix " + prefix.str() + " originated by a non-routing AS");
      }
    }
    if (cfg_.model_keepalives) {
      for (auto& [k, l] : links_) schedule_keepalive(k.first, k.second);
    }
  }

  // Changes the physical state of a link now; endpoints notice after the
  // detection delay. Returns false if the link already had that state.
  bool set_link_state(AsNumber a, AsNumber b, LinkState state) {
    auto it = links_.find(key(a, b));
    if (it == links_.end()) throw ConfigError("no link " + to_string(a) + "-" + to_string(b));
    const bool up = state == LinkState::Up;
    if (it->second.up == up) return false;
    it->second.up = up;
    if (!up) ++it->second.epoch;
    const auto k = it->first;
    sim_.schedule_in(cfg_.detection_delay, EventKind::ExternalCommand, up ? "link-up" : "link-down",
                     [this, k, state] { notify_link(k.first, k.second, state); }, Quiescence::StateChanging,
                     pack(k.first, k.second));
    return true;
  }

  // Schedules a link change as an external command at `at`.
  void schedule_link_state(AsNumber a, AsNumber b, LinkState state, SimTime at) {
    if (!links_.count(key(a, b))) throw ConfigError("no link " + to_string(a) + "-" + to_string(b));
    sim_.schedule(at, EventKind::ExternalCommand, "command", [this, a, b, state] { set_link_state(a, b, state); },
                  Quiescence::StateChanging, pack(a, b));
  }

  bool link_up(AsNumber a, AsNumber b) const {
    auto it = links_.find(key(a, b));
    return it != links_.end() && it->second.up;
  }

  Simulator& sim() { return sim_; }
  const Simulator& sim() const { return sim_; }
  const Topology& topology() const { return topo_; }
  const SimConfig& config() const { return cfg_; }
  const RoutingTrace& trace() const { return trace_; }
  void set_observer(NetworkObserver obs) { observer_ = std::move(obs); }

  const BgpSpeaker* speaker(AsNumber a) const {
    auto it = speakers_.find(a);
    return it == speakers_.end() ? nullptr : it->second.get();
  }
  const ClusterController* controller() const { return controller_.get(); }

  std::size_t protocol_errors() const { return protocol_errors_; }
  std::size_t repeated_controller_paths() const { return repeated_controller_paths_; }
  // Withdrawals emitted from inside an MRAI expiry; always zero unless the
  // speaker rate-limits withdrawals.
  std::size_t mrai_delayed_withdrawals() const { return mrai_delayed_withdrawals_; }

  // Next hop of every routing AS (collector excluded) toward `p`.
  std::map<AsNumber, NextHop> forwarding_table(Prefix p) const {
    std::map<AsNumber, NextHop> t;
    for (auto& [asn, sp] : speakers_) {
      auto r = sp->best(p);
      t[asn] = !r ? NextHop::none() : r->local ? NextHop::deliver() : NextHop::forward(r->next_hop);
    }
    if (controller_) {
      for (AsNumber m : controller_->members()) {
        auto c = controller_->installed(m, p);
        t[m] = !c ? NextHop::none() : c->expansion.size() == 1 ? NextHop::deliver() : NextHop::forward(c->expansion[1]);
      }
    }
    return t;
  }

  ForwardingSnapshot snapshot(Prefix p) const {
    return forwarding_snapshot(forwarding_table(p), p, sim_.now(),
                               [this](AsNumber a, AsNumber b) { return link_up(a, b); });
  }

  // AS-path hop count toward `p` held by every routing AS.
  std::map<AsNumber, std::optional<std::size_t>> hop_counts(Prefix p) const {
    std::map<AsNumber, std::optional<std::size_t>> out;
    for (auto& [asn, sp] : speakers_) {
      auto r = sp->best(p);
      out[asn] = r ? std::optional<std::size_t>(r->path.size()) : std::nullopt;
    }
    if (controller_) {
      for (AsNumber m : controller_->members()) {
        auto c = controller_->installed(m, p);
        out[m] = c ? std::optional<std::size_t>(c->expansion.size() - 1) : std::nullopt;
      }
    }
    return out;
  }

  // Routes the collector has heard, per (speaker, prefix).
  const std::map<std::pair<AsNumber, Prefix>, AsPath>& collector_rib() const { return collector_rib_; }

 private:
  struct LinkRuntime {
    SimTime delay;
    bool up = true;
    std::uint64_t epoch = 0;
  };

  static std::pair<AsNumber, AsNumber> key(AsNumber a, AsNumber b) { return b < a ? std::make_pair(b, a) : std::make_pair(a, b); }
  static std::uint64_t pack(AsNumber a, AsNumber b) { return (std::uint64_t{a.value} << 32) | b.value; }

  Role role(AsNumber a) const { return topo_.role(a); }

  void wire(AsNumber self, AsNumber peer) {
    if (auto it = speakers_.find(self); it != speakers_.end()) {
      it->second->add_peer(peer, prepend_ ? prepend_(self, peer) : 1);
    } else if (controller_ && controller_->is_member(self)) {
      if (controller_->is_member(peer)) {
        if (self < peer) controller_->add_switch_link(self, peer);
      } else {
        controller_->add_external_session(self, peer);
      }
    }
  }

  void notify_link(AsNumber a, AsNumber b, LinkState state) {
    const SimTime now = sim_.now();
    if (observer_.on_link) observer_.on_link(a, b, state, now);
    if (state == LinkState::Down) {
      for (auto it = collector_rib_.begin(); it != collector_rib_.end();) {
        const bool drop = (collectors_.count(a) && it->first.first == b) || (collectors_.count(b) && it->first.first == a);
        it = drop ? collector_rib_.erase(it) : std::next(it);
      }
    }
    const bool a_cluster = controller_ && controller_->is_member(a);
    const bool b_cluster = controller_ && controller_->is_member(b);
    if (a_cluster && b_cluster) {
      controller_->handle_cluster_link_event(a, b, state, now);
      return;
    }
    for (auto [self, peer] : {std::make_pair(a, b), std::make_pair(b, a)}) {
      if (auto it = speakers_.find(self); it != speakers_.end()) {
        it->second->handle_link_event(peer, state, now);
      } else if (controller_ && controller_->is_member(self)) {
        controller_->handle_external_session_event(self, peer, state, now);
      }
    }
  }

  void schedule_keepalive(AsNumber a, AsNumber b) {
    sim_.schedule_in(cfg_.keepalive, EventKind::TimerExpiry, "keepalive", [this, a, b] { schedule_keepalive(a, b); },
                     Quiescence::Passive, pack(a, b));
  }

  // --- SpeakerIo / ControllerIo ---
  void send(const BgpUpdate& u) override {
    auto it = links_.find(key(u.sender, u.receiver));
    if (it == links_.end() || !it->second.up) return;
    if (u.is_announce() && controller_ && controller_->is_member(u.sender) && has_repeats(u.path)) {
      ++repeated_controller_paths_;
    }
    if (!u.is_announce() && std::string_view(sim_.current_label()) == "mrai") ++mrai_delayed_withdrawals_;
    const std::uint64_t epoch = it->second.epoch;
    sim_.schedule_in(it->second.delay, EventKind::MessageDelivery, u.is_announce() ? "announce" : "withdraw",
                     [this, u, epoch] { deliver(u, epoch); }, Quiescence::StateChanging, pack(u.sender, u.receiver));
  }

  EventHandle arm_mrai(AsNumber self, AsNumber peer, Prefix prefix, SimTime due) override {
    return sim_.schedule(due, EventKind::TimerExpiry, "mrai",
                         [this, self, peer, prefix] { speakers_.at(self)->mrai_expiry(peer, prefix, sim_.now()); },
                         Quiescence::Passive, pack(self, peer));
  }

  bool cancel_timer(EventHandle h) override { return sim_.cancel(h); }

  void route_changed(AsNumber self, Prefix p, const std::optional<Route>&) override { record_change(self, p); }

  void protocol_error(AsNumber, const BgpUpdate&, const char*) override { ++protocol_errors_; }

  EventHandle schedule_controller(SimTime due, const char* label, std::function<void()> fn) override {
    return sim_.schedule(due, EventKind::TimerExpiry, label, std::move(fn));
  }

  void forwarding_changed(AsNumber member, Prefix p, const std::optional<ChosenPath>&) override { record_change(member, p); }

  void record_change(AsNumber asn, Prefix p) {
    trace_.changes.push_back({sim_.now(), asn, p});
    if (observer_.on_change) observer_.on_change(trace_.changes.back());
  }

  void deliver(const BgpUpdate& u, std::uint64_t epoch) {
    const auto& link = links_.at(key(u.sender, u.receiver));
    if (!link.up || link.epoch != epoch) return;  // lost in flight
    const bool to_collector = collectors_.count(u.receiver) != 0;
    trace_.updates.push_back({sim_.now(), u.sender, u.receiver, u.kind, u.prefix, u.path, to_collector});
    if (observer_.on_delivery) observer_.on_delivery(trace_.updates.back());
    if (to_collector) {
      if (u.is_announce()) {
        collector_rib_[{u.sender, u.prefix}] = u.path;
      } else {
        collector_rib_.erase({u.sender, u.prefix});
      }
      return;
    }
    const bool cluster = controller_ && controller_->is_member(u.receiver);
    if (!cluster) ++queued_[u.receiver];
    SimTime& busy = cluster ? controller_busy_ : busy_until_[u.receiver];
    const SimTime start = busy > sim_.now() ? busy : sim_.now();
    busy = start + (cluster ? cfg_.controller_processing : cfg_.processing);
    sim_.schedule(busy, EventKind::MessageDelivery, "process", [this, u, epoch, cluster] { process(u, epoch, cluster); },
                  Quiescence::StateChanging, pack(u.sender, u.receiver));
  }

  void process(const BgpUpdate& u, std::uint64_t epoch, bool cluster) {
    const auto& link = links_.at(key(u.sender, u.receiver));
    const bool current = link.epoch == epoch;  // else the session was torn down since delivery
    if (cluster) {
      if (current) controller_->ingest_external_update(u, sim_.now());
      return;
    }
    BgpSpeaker& sp = *speakers_.at(u.receiver);
    const std::size_t left = --queued_[u.receiver];
    if (!cfg_.batch_decisions) {
      if (current) sp.process_update(u, sim_.now());
      return;
    }
    auto& dirty = undecided_[u.receiver];
    if (current && sp.receive(u)) dirty.insert(u.prefix);
    if (left != 0) return;
    std::set<Prefix> todo;
    todo.swap(dirty);
    for (Prefix p : todo) sp.run_decision(p, sim_.now());
  }

  Topology topo_;
  SimConfig cfg_;
  PrependPolicy prepend_;
  Simulator sim_;
  std::map<std::pair<AsNumber, AsNumber>, LinkRuntime> links_;
  std::map<AsNumber, std::unique_ptr<BgpSpeaker>> speakers_;
  std::unique_ptr<ClusterController> controller_;
  std::set<AsNumber> collectors_;
  std::map<std::pair<AsNumber, Prefix>, AsPath> collector_rib_;
  std::map<AsNumber, SimTime> busy_until_;
  std::map<AsNumber, std::size_t> queued_;           // updates delivered, not yet processed
  std::map<AsNumber, std::set<Prefix>> undecided_;  // applied, decision pending
  SimTime controller_busy_;
  RoutingTrace trace_;
  NetworkObserver observer_;
  std::size_t protocol_errors_ = 0;
  std::size_t repeated_controller_paths_ = 0;
  std::size_t mrai_delayed_withdrawals_ = 0;
  bool started_ = false;
};

}  // namespace hybridbgp
