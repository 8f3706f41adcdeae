#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "hybridbgp/error.hpp"
#include "hybridbgp/sim_time.hpp"

namespace hybridbgp {

enum class EventKind : std::uint8_t { MessageDelivery, TimerExpiry, ExternalCommand };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::MessageDelivery: return "message";
    case EventKind::TimerExpiry: return "timer";
    case EventKind::ExternalCommand: return "command";
  }
  return "?";
}

struct EventHandle {
  std::uint64_t seq = 0;
  bool valid() const { return seq != 0; }
};

// Events that only exist to be observed (keep-alives, idle MRAI timers) are
// registered as not state-changing so they never hold off quiescence.
enum class Quiescence : std::uint8_t { StateChanging, Passive };

struct TraceEntry {
  SimTime time;
  EventKind kind;
  const char* label;
  std::uint64_t detail;

  bool operator==(const TraceEntry& o) const {
    return time == o.time && kind == o.kind && std::string(label) == o.label && detail == o.detail;
  }
};

struct RunOutcome {
  bool quiescent = false;
  SimTime at;  // quiescent-at, or the clock when the limit was hit
};

// Single-threaded discrete-event engine. Events are ordered by (due, seq);
// seq is assigned at insertion, starts at 1 and is never reused.
class Simulator {
 public:
  using Action = std::function<void()>;

  SimTime now() const { return clock_; }

  EventHandle schedule(SimTime due, EventKind kind, const char* label, Action action,
                       Quiescence q = Quiescence::StateChanging, std::uint64_t detail = 0) {
    if (due < clock_) {
      throw SchedulingError("event '" + std::string(label) + "' due at " + due.str() +
                            " is before the clock " + clock_.str());
    }
    const std::uint64_t seq = next_seq_++;
    status_.push_back(q == Quiescence::StateChanging ? kPendingActive : kPendingPassive);
    heap_.push(Entry{due, seq, kind, label, detail, std::move(action)});
    if (q == Quiescence::StateChanging) ++active_;
    return EventHandle{seq};
  }

  EventHandle schedule_in(SimTime delay, EventKind kind, const char* label, Action action,
                          Quiescence q = Quiescence::StateChanging, std::uint64_t detail = 0) {
    return schedule(clock_ + delay, kind, label, std::move(action), q, detail);
  }

  // True if the event was pending and is now removed.
  bool cancel(EventHandle h) {
    if (!h.valid() || h.seq >= next_seq_) return false;
    auto& st = status_[h.seq];
    if (st == kPendingActive) {
      --active_;
    } else if (st != kPendingPassive) {
      return false;
    }
    st = kCancelled;
    return true;
  }

  bool pending(EventHandle h) const {
    return h.valid() && h.seq < next_seq_ &&
           (status_[h.seq] == kPendingActive || status_[h.seq] == kPendingPassive);
  }

  // Extra busy signal consulted when no state-changing event is queued; lets
  // owners of passive timers report that one of them still has work to do.
  void set_busy_probe(std::function<bool()> probe) { busy_probe_ = std::move(probe); }

  bool quiescent() const { return active_ == 0 && !(busy_probe_ && busy_probe_()); }

  // Processes events in (due, seq) order until nothing state-changing remains
  // or the next event lies beyond `limit`.
  RunOutcome run_until_quiescent(SimTime limit) {
    while (true) {
      if (quiescent()) return {true, clock_};
      drop_cancelled();
      if (heap_.empty()) return {true, clock_};
      if (heap_.top().due > limit) return {false, clock_};
      step();
    }
  }

  // Processes every event due at or before `t`, then moves the clock to `t`.
  void run_until(SimTime t) {
    while (true) {
      drop_cancelled();
      if (heap_.empty() || heap_.top().due > t) break;
      step();
    }
    if (t > clock_) clock_ = t;
  }

  std::size_t pending_count() const { return heap_.size(); }
  // Label of the event being processed ("" outside of event processing).
  const char* current_label() const { return current_label_; }
  std::uint64_t processed_count() const { return processed_; }

  void enable_trace(bool on) { trace_on_ = on; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  // FNV-1a over every processed (time, kind, label, detail); always maintained.
  std::uint64_t trace_hash() const { return hash_; }

 private:
  static constexpr std::uint8_t kPendingActive = 0;
  static constexpr std::uint8_t kPendingPassive = 1;
  static constexpr std::uint8_t kFired = 2;
  static constexpr std::uint8_t kCancelled = 3;

  struct Entry {
    SimTime due;
    std::uint64_t seq;
    EventKind kind;
    const char* label;
    std::uint64_t detail;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.due != b.due ? a.due > b.due : a.seq > b.seq;
    }
  };

  void drop_cancelled() {
    while (!heap_.empty() && status_[heap_.top().seq] == kCancelled) heap_.pop();
  }

  void step() {
    Entry e = std::move(const_cast<Entry&>(heap_.top()));
    heap_.pop();
    auto& st = status_[e.seq];
    if (st == kPendingActive) --active_;
    st = kFired;
    clock_ = e.due;
    ++processed_;
    mix(static_cast<std::uint64_t>(e.due.us()));
    mix(static_cast<std::uint64_t>(e.kind));
    for (const char* c = e.label; *c; ++c) mix(static_cast<unsigned char>(*c));
    mix(e.detail);
    if (trace_on_) trace_.push_back({e.due, e.kind, e.label, e.detail});
    current_label_ = e.label;
    e.action();
    current_label_ = "";
  }

  void mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xffu;
      hash_ *= 0x100000001b3ull;
    }
  }

  SimTime clock_;
  std::uint64_t next_seq_ = 1;
  std::vector<std::uint8_t> status_{kFired};  // index 0 unused
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::size_t active_ = 0;
  std::uint64_t processed_ = 0;
  std::function<bool()> busy_probe_;
  bool trace_on_ = false;
  const char* current_label_ = "";
  std::vector<TraceEntry> trace_;
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

}  // namespace hybridbgp
