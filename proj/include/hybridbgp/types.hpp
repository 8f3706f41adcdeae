#pragma once

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hybridbgp/error.hpp"

namespace hybridbgp {

struct AsNumber {
  std::uint32_t value = 0;

  constexpr AsNumber() = default;
  constexpr explicit AsNumber(std::uint32_t v) : value(v) {}
  constexpr auto operator<=>(const AsNumber&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, AsNumber a) { return os << "AS" << a.value; }
inline std::string to_string(AsNumber a) { return std::to_string(a.value); }

// Leftmost entry is the most recent hop; length is the hop count.
using AsPath = std::vector<AsNumber>;

inline bool contains(const AsPath& p, AsNumber a) { return std::find(p.begin(), p.end(), a) != p.end(); }

// True if some AS occurs in two separate runs, i.e. the path loops. Back-to-back
// copies of one AS are prepending and do not count.
inline bool has_repeats(const AsPath& p) {
  AsPath runs;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (i == 0 || p[i] != p[i - 1]) runs.push_back(p[i]);
  std::sort(runs.begin(), runs.end());
  return std::adjacent_find(runs.begin(), runs.end()) != runs.end();
}

inline std::string to_string(const AsPath& p) {
  std::string s = "[";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(p[i].value);
  }
  return s + "]";
}

// IPv4 CIDR prefix with host bits cleared.
class Prefix {
 public:
  constexpr Prefix() = default;
  Prefix(std::uint32_t network, std::uint8_t length) : net_(network), len_(length) {
    if (length > 32) throw ConfigError("prefix length > 32");
    if (network & ~mask()) throw ConfigError("prefix " + str() + " has host bits set");
  }

  static Prefix parse(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) throw ConfigError("prefix '" + std::string(text) + "' lacks /len");
    std::uint32_t addr = 0;
    std::string_view ip = text.substr(0, slash);
    for (int octet = 0; octet < 4; ++octet) {
      const auto dot = ip.find('.');
      if ((octet < 3) == (dot == std::string_view::npos)) {
        throw ConfigError("malformed IPv4 address in '" + std::string(text) + "'");
      }
      std::string_view part = ip.substr(0, dot);
      unsigned v = 0;
      auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
      if (ec != std::errc{} || ptr != part.data() + part.size() || part.empty() || v > 255) {
        throw ConfigError("malformed IPv4 address in '" + std::string(text) + "'");
      }
      addr = (addr << 8) | v;
      ip = dot == std::string_view::npos ? std::string_view{} : ip.substr(dot + 1);
    }
    std::string_view lenpart = text.substr(slash + 1);
    unsigned len = 0;
    auto [ptr, ec] = std::from_chars(lenpart.data(), lenpart.data() + lenpart.size(), len);
    if (ec != std::errc{} || ptr != lenpart.data() + lenpart.size() || lenpart.empty() || len > 32) {
      throw ConfigError("malformed prefix length in '" + std::string(text) + "'");
    }
    return Prefix(addr, static_cast<std::uint8_t>(len));
  }

  std::uint32_t network() const { return net_; }
  std::uint8_t length() const { return len_; }
  std::uint32_t mask() const { return len_ == 0 ? 0 : ~std::uint32_t{0} << (32 - len_); }

  std::string str() const {
    return std::to_string(net_ >> 24) + "." + std::to_string((net_ >> 16) & 0xff) + "." +
           std::to_string((net_ >> 8) & 0xff) + "." + std::to_string(net_ & 0xff) + "/" +
           std::to_string(len_);
  }

  constexpr auto operator<=>(const Prefix&) const = default;

 private:
  std::uint32_t net_ = 0;
  std::uint8_t len_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, const Prefix& p) { return os << p.str(); }

struct BgpUpdate {
  enum class Kind : std::uint8_t { Announce, Withdraw };

  Kind kind = Kind::Announce;
  Prefix prefix;
  AsPath path;  // empty for withdrawals
  AsNumber sender;
  AsNumber receiver;

  static BgpUpdate announce(AsNumber from, AsNumber to, Prefix p, AsPath path) {
    return {Kind::Announce, p, std::move(path), from, to};
  }
  static BgpUpdate withdraw(AsNumber from, AsNumber to, Prefix p) { return {Kind::Withdraw, p, {}, from, to}; }

  bool is_announce() const { return kind == Kind::Announce; }
  bool operator==(const BgpUpdate&) const = default;
};

enum class LinkState : std::uint8_t { Up, Down };

}  // namespace hybridbgp

template <>
struct std::hash<hybridbgp::AsNumber> {
  std::size_t operator()(hybridbgp::AsNumber a) const noexcept { return std::hash<std::uint32_t>{}(a.value); }
};
