#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "hybridbgp/as_graph.hpp"
#include "hybridbgp/error.hpp"
#include "hybridbgp/sim_time.hpp"
#include "hybridbgp/simulator.hpp"
#include "hybridbgp/types.hpp"

namespace hybridbgp {

struct ControllerConfig {
  SimTime crwi = SimTime::seconds(1);
  SimTime install_delay = SimTime::millis(300);
};

class ControllerIo {
 public:
  virtual ~ControllerIo() = default;
  virtual void send(const BgpUpdate& update) = 0;
  // Controller timers (CRWI, installation) always change state.
  virtual EventHandle schedule_controller(SimTime due, const char* label, std::function<void()> fn) = 0;
  virtual void forwarding_changed(AsNumber /*member*/, Prefix, const std::optional<ChosenPath>&) {}
};

// Pending recomputation work accumulated over one CRWI.
struct RecomputeQueue {
  bool full = false;
  std::set<Prefix> dirty;  // empty whenever `full` is set
  EventHandle crwi_timer;
  bool armed = false;
};

// Multi-AS controller for one SDN cluster, including the cluster BGP speaker
// that owns every external session of every member AS.
class ClusterController {
 public:
  ClusterController(ControllerConfig cfg, ControllerIo& io) : cfg_(cfg), io_(&io) {}

  const ControllerConfig& config() const { return cfg_; }

  void add_member(AsNumber a) { graph_.add_switch(a); }
  bool is_member(AsNumber a) const { return graph_.has_switch(a); }
  const std::set<AsNumber>& members() const { return graph_.switches(); }

  // Physical adjacency between two members, detected in both directions.
  void add_switch_link(AsNumber a, AsNumber b) {
    require_member(a);
    require_member(b);
    graph_.set_switch_edge(a, b, true);
    graph_.set_switch_edge(b, a, true);
  }

  void add_external_session(AsNumber member, AsNumber peer) {
    require_member(member);
    if (is_member(peer)) throw ConfigError("external session between two cluster members");
    sessions_[member][peer] = true;
  }
  bool external_session_up(AsNumber member, AsNumber peer) const {
    auto it = sessions_.find(member);
    if (it == sessions_.end()) return false;
    auto jt = it->second.find(peer);
    return jt != it->second.end() && jt->second;
  }

  void originate(AsNumber member, Prefix p, SimTime now) {
    require_member(member);
    if (!direct_.insert({member, p}).second) {
      throw ConfigError("AS " + to_string(member) + " already originates " + p.str());
    }
    refresh_annotation(member, p, now);
  }

  void ingest_external_update(const BgpUpdate& u, SimTime now) {
    const AsNumber at = u.receiver;
    if (!is_member(at) || !external_session_up(at, u.sender)) {
      ++dropped_;
      return;
    }
    bool changed = false;
    if (u.is_announce()) {
      if (u.path.empty()) {
        ++dropped_;
        return;
      }
      // Standard receive-side loop check for the identity of the entry AS.
      if (contains(u.path, at)) {
        changed = store_.erase(at, u.sender, u.prefix);
      } else {
        changed = store_.put(at, u.sender, u.prefix, u.path);
      }
    } else {
      changed = store_.erase(at, u.sender, u.prefix);
    }
    refresh_annotation(at, u.prefix, now);
    if (changed) mark_dirty(u.prefix, now);
  }

  void handle_cluster_link_event(AsNumber a, AsNumber b, LinkState state, SimTime now) {
    require_member(a);
    require_member(b);
    const bool present = state == LinkState::Up;
    const bool changed_ab = graph_.set_switch_edge(a, b, present);
    const bool changed_ba = graph_.set_switch_edge(b, a, present);
    if (changed_ab || changed_ba) mark_full(now);
  }

  void handle_external_session_event(AsNumber member, AsNumber peer, LinkState state, SimTime now) {
    auto it = sessions_.find(member);
    if (it == sessions_.end() || !it->second.count(peer)) return;
    bool& up = it->second[peer];
    if (state == LinkState::Down) {
      if (!up) return;
      up = false;
      for (auto ait = advertised_.begin(); ait != advertised_.end();) {
        if (ait->first.at_switch == member && ait->first.peer == peer) {
          ait = advertised_.erase(ait);
        } else {
          ++ait;
        }
      }
      for (Prefix p : store_.erase_session(member, peer)) {
        refresh_annotation(member, p, now);
        mark_dirty(p, now);
      }
    } else {
      if (up) return;
      up = true;
      for (auto& [prefix, routes] : installed_) advertise_to(member, peer, prefix);
    }
  }

  // Recomputes everything queued over the waiting interval and schedules the
  // installation; advertisements follow once installation completes.
  void crwi_expiry(SimTime now) {
    queue_.armed = false;
    queue_.crwi_timer = {};
    std::set<Prefix> todo;
    if (queue_.full) {
      todo = graph_.prefixes();
      for (Prefix p : store_.prefixes()) todo.insert(p);
      for (auto& [p, routes] : installed_) todo.insert(p);
      ++full_recomputes_;
    } else {
      todo = std::move(queue_.dirty);
    }
    queue_.full = false;
    queue_.dirty.clear();
    if (todo.empty()) return;

    auto batch = std::make_shared<std::map<Prefix, std::map<AsNumber, ChosenPath>>>();
    for (Prefix p : todo) {
      (*batch)[p] = compute_paths(transform(graph_, p, store_));
      ++compute_count_[p];
      compute_log_.push_back({now, p});
    }
    io_->schedule_controller(now + cfg_.install_delay, "install", [this, batch] { install(*batch); });
  }

  // --- inspection ---
  AsGraph as_graph(Prefix p) const { return transform(graph_, p, store_); }
  const SwitchGraph& switch_graph() const { return graph_; }
  const PathStore& path_store() const { return store_; }
  const RecomputeQueue& recompute_queue() const { return queue_; }
  std::size_t compute_count(Prefix p) const {
    auto it = compute_count_.find(p);
    return it == compute_count_.end() ? 0 : it->second;
  }
  std::size_t full_recompute_count() const { return full_recomputes_; }
  struct ComputeRecord {
    SimTime at;
    Prefix prefix;
  };
  const std::vector<ComputeRecord>& compute_log() const { return compute_log_; }
  std::size_t dropped_updates() const { return dropped_; }

  std::optional<ChosenPath> installed(AsNumber member, Prefix p) const {
    auto it = installed_.find(p);
    if (it == installed_.end()) return std::nullopt;
    auto jt = it->second.find(member);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
  }
  const std::map<Prefix, std::map<AsNumber, ChosenPath>>& installed_routes() const { return installed_; }

  std::optional<AsPath> advertised(AsNumber member, AsNumber peer, Prefix p) const {
    auto it = advertised_.find({member, peer, p});
    if (it == advertised_.end()) return std::nullopt;
    return it->second;
  }

 private:
  void require_member(AsNumber a) const {
    if (!is_member(a)) throw ConfigError("AS " + to_string(a) + " is not a cluster member");
  }

  void refresh_annotation(AsNumber at, Prefix p, SimTime now) {
    std::optional<AsPath> annotation;
    if (direct_.count({at, p})) {
      annotation = AsPath{};
    } else if (auto best = store_.best(at, p)) {
      annotation = std::move(best->second);
    }
    if (graph_.set_prefix_edge(at, p, std::move(annotation))) mark_dirty(p, now);
  }

  void mark_dirty(Prefix p, SimTime now) {
    if (!queue_.full) queue_.dirty.insert(p);
    arm(now);
  }

  void mark_full(SimTime now) {
    queue_.full = true;
    queue_.dirty.clear();
    arm(now);
  }

  void arm(SimTime now) {
    if (queue_.armed) return;
    queue_.armed = true;
    queue_.crwi_timer = io_->schedule_controller(now + cfg_.crwi, "crwi", [this, now] {
      crwi_expiry(now + cfg_.crwi);
    });
  }

  void install(const std::map<Prefix, std::map<AsNumber, ChosenPath>>& batch) {
    for (auto& [p, routes] : batch) {
      auto& current = installed_[p];
      for (AsNumber m : graph_.switches()) {
        auto old_it = current.find(m);
        auto new_it = routes.find(m);
        const bool had = old_it != current.end();
        const bool has = new_it != routes.end();
        if (!had && !has) continue;
        if (had && has && old_it->second == new_it->second) continue;
        io_->forwarding_changed(m, p, has ? std::optional<ChosenPath>(new_it->second) : std::nullopt);
      }
      current = routes;
      if (current.empty()) installed_.erase(p);
      for (auto& [member, peers] : sessions_)
        for (auto& [peer, up] : peers)
          if (up) advertise_to(member, peer, p);
    }
  }

  // Announces the expanded path of the member's installed route, or withdraws
  // it. Receivers apply their own loop check; nothing is filtered here.
  void advertise_to(AsNumber member, AsNumber peer, Prefix p) {
    PathStore::Key key{member, peer, p};
    auto adv = advertised_.find(key);
    std::optional<ChosenPath> route = installed(member, p);
    if (!route) {
      if (adv != advertised_.end()) {
        advertised_.erase(adv);
        io_->send(BgpUpdate::withdraw(member, peer, p));
      }
      return;
    }
    if (adv != advertised_.end() && adv->second == route->expansion) return;
    advertised_[key] = route->expansion;
    io_->send(BgpUpdate::announce(member, peer, p, route->expansion));
  }

  ControllerConfig cfg_;
  ControllerIo* io_;
  SwitchGraph graph_;
  PathStore store_;
  std::set<std::pair<AsNumber, Prefix>> direct_;
  std::map<AsNumber, std::map<AsNumber, bool>> sessions_;
  RecomputeQueue queue_;
  std::map<Prefix, std::map<AsNumber, ChosenPath>> installed_;
  std::map<PathStore::Key, AsPath> advertised_;
  std::map<Prefix, std::size_t> compute_count_;
  std::vector<ComputeRecord> compute_log_;
  std::size_t full_recomputes_ = 0;
  std::size_t dropped_ = 0;
};

}  // namespace hybridbgp
