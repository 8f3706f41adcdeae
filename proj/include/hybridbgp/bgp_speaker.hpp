#pragma once

#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "hybridbgp/error.hpp"
#include "hybridbgp/sim_time.hpp"
#include "hybridbgp/simulator.hpp"
#include "hybridbgp/types.hpp"

namespace hybridbgp {

// Selected route. An empty path marks a local origination.
struct Route {
  AsPath path;
  AsNumber next_hop;
  bool local = false;

  bool operator==(const Route&) const = default;
};

// Hop count, then lowest next-hop AS, then the lexicographically smallest path.
inline bool better_route(const Route& a, const Route& b) {
  if (a.local != b.local) return a.local;
  if (a.path.size() != b.path.size()) return a.path.size() < b.path.size();
  return std::tie(a.next_hop, a.path) < std::tie(b.next_hop, b.path);
}

// What a speaker needs from the environment. The simulation network
// implements it; unit tests substitute a recorder.
class SpeakerIo {
 public:
  virtual ~SpeakerIo() = default;
  virtual void send(const BgpUpdate& update) = 0;
  virtual EventHandle arm_mrai(AsNumber self, AsNumber peer, Prefix prefix, SimTime due) = 0;
  virtual bool cancel_timer(EventHandle h) = 0;
  virtual void route_changed(AsNumber /*self*/, Prefix, const std::optional<Route>&) {}
  virtual void protocol_error(AsNumber /*self*/, const BgpUpdate&, const char* /*what*/) {}
};

// Path-vector state machine of one legacy AS. MRAI is kept per (peer, prefix)
// and re-armed whenever an announcement is sent; withdrawals bypass it.
class BgpSpeaker {
 public:
  BgpSpeaker(AsNumber self, SimTime mrai, SpeakerIo& io) : self_(self), mrai_(mrai), io_(&io) {}

  AsNumber asn() const { return self_; }
  SimTime mrai() const { return mrai_; }

  // Registers an established session. No routes are exchanged.
  void add_peer(AsNumber peer, int export_prepend = 1) {
    if (export_prepend < 1) throw ConfigError("export prepend must be >= 1");
    peers_[peer] = PeerState{true, export_prepend};
  }

  bool has_peer(AsNumber peer) const { return peers_.count(peer) != 0; }
  bool session_up(AsNumber peer) const {
    auto it = peers_.find(peer);
    return it != peers_.end() && it->second.up;
  }
  std::vector<AsNumber> peers() const {
    std::vector<AsNumber> out;
    for (auto& [p, s] : peers_) out.push_back(p);
    return out;
  }

  void originate(Prefix prefix, SimTime now) {
    if (!originated_.insert(prefix).second) {
      throw ConfigError("AS " + to_string(self_) + " already originates " + prefix.str());
    }
    decide(prefix, now);
  }

  void process_update(const BgpUpdate& u, SimTime now) {
    if (receive(u)) decide(u.prefix, now);
  }

  // Applies an update to the Adj-RIB-In without running the decision process;
  // returns false if it was rejected as a protocol error. Callers that batch
  // decisions follow up with run_decision.
  bool receive(const BgpUpdate& u) {
    if (u.receiver != self_ || !session_up(u.sender)) {
      io_->protocol_error(self_, u, "update on unknown or closed session");
      return false;
    }
    if (u.is_announce()) {
      if (u.path.empty()) {
        io_->protocol_error(self_, u, "announcement without AS path");
        return false;
      }
      if (contains(u.path, self_)) {
        erase_candidate(u.prefix, u.sender);
      } else {
        rib_in_[u.prefix][u.sender] = u.path;
      }
    } else {
      erase_candidate(u.prefix, u.sender);
    }
    return true;
  }

  void run_decision(Prefix p, SimTime now) { decide(p, now); }

  void handle_link_event(AsNumber peer, LinkState state, SimTime now) {
    auto it = peers_.find(peer);
    if (it == peers_.end()) return;
    if (state == LinkState::Down) {
      if (!it->second.up) return;
      it->second.up = false;
      for (auto oit = out_.begin(); oit != out_.end();) {
        if (oit->first.first == peer) {
          if (oit->second.timer_armed) io_->cancel_timer(oit->second.timer);
          if (oit->second.pending) --pending_total_;
          oit = out_.erase(oit);
        } else {
          ++oit;
        }
      }
      std::vector<Prefix> affected;
      for (auto& [prefix, cands] : rib_in_)
        if (cands.erase(peer)) affected.push_back(prefix);
      for (Prefix p : affected) decide(p, now);
    } else {
      if (it->second.up) return;
      it->second.up = true;
      for (auto& [prefix, route] : loc_rib_) export_to(peer, prefix, now);
    }
  }

  void mrai_expiry(AsNumber peer, Prefix prefix, SimTime now) {
    auto it = out_.find({peer, prefix});
    if (it == out_.end() || !it->second.timer_armed) return;
    OutState& os = it->second;
    os.timer_armed = false;
    os.timer = {};
    if (os.pending) {
      AsPath path = std::move(*os.pending);
      os.pending.reset();
      --pending_total_;
      if (!os.advertised || *os.advertised != path) send_announce(peer, prefix, std::move(path), os, now);
    }
  }

  // --- inspection ---
  std::optional<Route> best(Prefix p) const {
    auto it = loc_rib_.find(p);
    if (it == loc_rib_.end()) return std::nullopt;
    return it->second;
  }
  const std::map<Prefix, Route>& loc_rib() const { return loc_rib_; }
  std::optional<AsPath> adj_rib_in(AsNumber peer, Prefix p) const {
    auto it = rib_in_.find(p);
    if (it == rib_in_.end()) return std::nullopt;
    auto jt = it->second.find(peer);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
  }
  std::map<AsNumber, AsPath> candidates(Prefix p) const {
    auto it = rib_in_.find(p);
    return it == rib_in_.end() ? std::map<AsNumber, AsPath>{} : it->second;
  }
  bool originates(Prefix p) const { return originated_.count(p) != 0; }
  std::optional<AsPath> advertised(AsNumber peer, Prefix p) const {
    auto it = out_.find({peer, p});
    if (it == out_.end()) return std::nullopt;
    return it->second.advertised;
  }
  std::optional<AsPath> pending(AsNumber peer, Prefix p) const {
    auto it = out_.find({peer, p});
    if (it == out_.end()) return std::nullopt;
    return it->second.pending;
  }
  bool mrai_running(AsNumber peer, Prefix p) const {
    auto it = out_.find({peer, p});
    return it != out_.end() && it->second.timer_armed;
  }
  std::size_t pending_count() const { return pending_total_; }

 private:
  struct PeerState {
    bool up = true;
    int export_prepend = 1;
  };
  struct OutState {
    std::optional<AsPath> advertised;
    std::optional<AsPath> pending;
    EventHandle timer;
    bool timer_armed = false;
  };

  void erase_candidate(Prefix p, AsNumber peer) {
    auto it = rib_in_.find(p);
    if (it == rib_in_.end()) return;
    it->second.erase(peer);
    if (it->second.empty()) rib_in_.erase(it);
  }

  std::optional<Route> select(Prefix p) const {
    if (originated_.count(p)) return Route{{}, self_, true};
    std::optional<Route> best;
    auto it = rib_in_.find(p);
    if (it == rib_in_.end()) return best;
    for (auto& [peer, path] : it->second) {
      Route r{path, peer, false};
      if (!best || better_route(r, *best)) best = std::move(r);
    }
    return best;
  }

  void decide(Prefix p, SimTime now) {
    std::optional<Route> next = select(p);
    auto it = loc_rib_.find(p);
    const bool had = it != loc_rib_.end();
    if ((!had && !next) || (had && next && it->second == *next)) return;
    if (next) {
      loc_rib_[p] = *next;
    } else {
      loc_rib_.erase(it);
    }
    io_->route_changed(self_, p, next);
    for (auto& [peer, st] : peers_)
      if (st.up) export_to(peer, p, now);
  }

  AsPath export_path(AsNumber peer, const Route& r) const {
    AsPath out(static_cast<std::size_t>(peers_.at(peer).export_prepend), self_);
    out.insert(out.end(), r.path.begin(), r.path.end());
    return out;
  }

  void export_to(AsNumber peer, Prefix p, SimTime now) {
    auto best_it = loc_rib_.find(p);
    OutState& os = out_[{peer, p}];
    if (best_it == loc_rib_.end()) {
      if (os.pending) {
        os.pending.reset();
        --pending_total_;
      }
      if (os.advertised) {
        os.advertised.reset();
        io_->send(BgpUpdate::withdraw(self_, peer, p));
      }
      return;
    }
    AsPath desired = export_path(peer, best_it->second);
    if (os.advertised && *os.advertised == desired) {
      if (os.pending) {
        os.pending.reset();
        --pending_total_;
      }
      return;
    }
    if (os.timer_armed) {
      if (!os.pending) ++pending_total_;
      os.pending = std::move(desired);
      return;
    }
    send_announce(peer, p, std::move(desired), os, now);
  }

  void send_announce(AsNumber peer, Prefix p, AsPath path, OutState& os, SimTime now) {
    os.advertised = path;
    io_->send(BgpUpdate::announce(self_, peer, p, std::move(path)));
    if (mrai_ > SimTime{}) {
      os.timer = io_->arm_mrai(self_, peer, p, now + mrai_);
      os.timer_armed = true;
    }
  }

  AsNumber self_;
  SimTime mrai_;
  SpeakerIo* io_;
  std::map<AsNumber, PeerState> peers_;
  std::set<Prefix> originated_;
  std::map<Prefix, std::map<AsNumber, AsPath>> rib_in_;
  std::map<Prefix, Route> loc_rib_;
  std::map<std::pair<AsNumber, Prefix>, OutState> out_;
  std::size_t pending_total_ = 0;
};

}  // namespace hybridbgp
