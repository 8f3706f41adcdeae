#pragma once

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>

namespace hybridbgp {

// Fixed-point simulation time with microsecond resolution. Used both for
// instants on the virtual clock and for durations.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime micros(std::int64_t us) { return SimTime(us); }
  static constexpr SimTime millis(std::int64_t ms) { return SimTime(ms * 1000); }
  static constexpr SimTime seconds(std::int64_t s) { return SimTime(s * 1000000); }
  // Rounds to the nearest microsecond.
  static SimTime from_seconds(double s) {
    return SimTime(static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5)));
  }

  constexpr std::int64_t us() const { return us_; }
  constexpr double to_seconds() const { return static_cast<double>(us_) / 1e6; }

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime operator+(SimTime o) const { return SimTime(us_ + o.us_); }
  constexpr SimTime operator-(SimTime o) const { return SimTime(us_ - o.us_); }
  constexpr SimTime& operator+=(SimTime o) {
    us_ += o.us_;
    return *this;
  }
  constexpr SimTime operator*(std::int64_t k) const { return SimTime(us_ * k); }

  // "12.345678" seconds, exact.
  std::string str() const {
    std::int64_t v = us_ < 0 ? -us_ : us_;
    std::string frac = std::to_string(v % 1000000);
    frac.insert(0, 6 - frac.size(), '0');
    return (us_ < 0 ? "-" : "") + std::to_string(v / 1000000) + "." + frac;
  }

 private:
  constexpr explicit SimTime(std::int64_t us) : us_(us) {}
  std::int64_t us_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, SimTime t) { return os << t.str() << "s"; }

}  // namespace hybridbgp
