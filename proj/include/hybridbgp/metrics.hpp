#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hybridbgp/error.hpp"
#include "hybridbgp/sim_time.hpp"
#include "hybridbgp/types.hpp"

namespace hybridbgp {

// One delivered BGP message. Collector-session copies are kept but flagged.
struct UpdateLogEntry {
  SimTime time;
  AsNumber sender;
  AsNumber receiver;
  BgpUpdate::Kind kind = BgpUpdate::Kind::Announce;
  Prefix prefix;
  AsPath path;
  bool collector_session = false;

  bool operator==(const UpdateLogEntry&) const = default;
};

// A change of routing state: a legacy Loc-RIB change or a cluster
// forwarding-table installation.
struct StateChange {
  SimTime time;
  AsNumber asn;
  Prefix prefix;

  bool operator==(const StateChange&) const = default;
};

struct RoutingTrace {
  std::vector<UpdateLogEntry> updates;  // append-only, time-ordered
  std::vector<StateChange> changes;     // append-only, time-ordered
};

// Time from the trigger to the later of the last routing-state change and the
// last inter-AS update delivery at or after it. Zero if nothing happened.
inline SimTime measure_convergence(const RoutingTrace& trace, SimTime trigger, bool quiescent) {
  if (!quiescent) throw InvariantError("convergence measured on a non-quiescent simulation");
  SimTime last = trigger;
  for (const auto& c : trace.changes)
    if (c.time >= trigger && c.time > last) last = c.time;
  for (const auto& u : trace.updates)
    if (!u.collector_session && u.time >= trigger && u.time > last) last = u.time;
  return last - trigger;
}

struct ChurnResult {
  double rate = 0.0;  // updates per second
  std::size_t count = 0;
  bool zero_duration = false;
};

// Announcements and withdrawals delivered on inter-AS sessions, collector
// sessions excluded, within [trigger, trigger + duration].
inline ChurnResult measure_churn(const RoutingTrace& trace, SimTime trigger, SimTime duration) {
  ChurnResult r;
  const SimTime end = trigger + duration;
  for (const auto& u : trace.updates)
    if (!u.collector_session && u.time >= trigger && u.time <= end) ++r.count;
  if (duration <= SimTime{}) {
    r.zero_duration = true;
    return r;
  }
  r.rate = static_cast<double>(r.count) / duration.to_seconds();
  return r;
}

struct NextHop {
  enum class Kind : std::uint8_t { Deliver, Forward, None };
  Kind kind = Kind::None;
  AsNumber via;

  static NextHop deliver() { return {Kind::Deliver, {}}; }
  static NextHop forward(AsNumber a) { return {Kind::Forward, a}; }
  static NextHop none() { return {Kind::None, {}}; }
  bool operator==(const NextHop&) const = default;
};

enum class Verdict : std::uint8_t { Delivered, Loop, Blackhole };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Delivered: return "delivered";
    case Verdict::Loop: return "loop";
    case Verdict::Blackhole: return "blackhole";
  }
  return "?";
}

struct ForwardingSnapshot {
  Prefix prefix;
  SimTime at;
  std::map<AsNumber, NextHop> next_hops;
  std::map<AsNumber, Verdict> verdicts;
  std::size_t delivered = 0;
  std::size_t loops = 0;
  std::size_t blackholes = 0;
  double reachable_fraction = 0.0;

  bool operator==(const ForwardingSnapshot&) const = default;
};

using LinkUpFn = std::function<bool(AsNumber, AsNumber)>;

// Walks next hops from every AS in the table. A hop over a down link or to an
// AS outside the table is a blackhole; revisiting an AS on the walk is a loop.
inline ForwardingSnapshot forwarding_snapshot(const std::map<AsNumber, NextHop>& table, Prefix prefix, SimTime at,
                                              const LinkUpFn& link_up = {}) {
  ForwardingSnapshot s;
  s.prefix = prefix;
  s.at = at;
  s.next_hops = table;
  for (auto& [start, hop0] : table) {
    std::set<AsNumber> seen;
    AsNumber cur = start;
    Verdict v = Verdict::Blackhole;
    while (true) {
      if (!seen.insert(cur).second) {
        v = Verdict::Loop;
        break;
      }
      auto it = table.find(cur);
      if (it == table.end() || it->second.kind == NextHop::Kind::None) break;
      if (it->second.kind == NextHop::Kind::Deliver) {
        v = Verdict::Delivered;
        break;
      }
      const AsNumber next = it->second.via;
      if (link_up && !link_up(cur, next)) break;
      cur = next;
    }
    s.verdicts[start] = v;
    if (v == Verdict::Delivered) ++s.delivered;
    if (v == Verdict::Loop) ++s.loops;
    if (v == Verdict::Blackhole) ++s.blackholes;
  }
  s.reachable_fraction = table.empty() ? 0.0 : static_cast<double>(s.delivered) / static_cast<double>(table.size());
  return s;
}

}  // namespace hybridbgp
