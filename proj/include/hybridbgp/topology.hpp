#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hybridbgp/error.hpp"
#include "hybridbgp/rng.hpp"
#include "hybridbgp/sim_time.hpp"
#include "hybridbgp/types.hpp"

namespace hybridbgp {

enum class Role : std::uint8_t { Legacy, Cluster, Client, Collector };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::Legacy: return "legacy";
    case Role::Cluster: return "cluster";
    case Role::Client: return "client";
    case Role::Collector: return "collector";
  }
  return "?";
}

inline Role parse_role(const std::string& s) {
  if (s == "legacy") return Role::Legacy;
  if (s == "cluster") return Role::Cluster;
  if (s == "client") return Role::Client;
  if (s == "collector") return Role::Collector;
  throw ConfigError("unknown role '" + s + "'");
}

inline bool is_isp(Role r) { return r == Role::Legacy || r == Role::Cluster; }

struct Node {
  AsNumber asn;
  Role role = Role::Legacy;
};

// Undirected; stored with a < b.
struct Link {
  AsNumber a;
  AsNumber b;
  SimTime delay;

  bool operator==(const Link&) const = default;
};

class Topology {
 public:
  void add_node(AsNumber asn, Role role) {
    if (asn.value == 0) throw ConfigError("AS number 0 is reserved");
    if (!nodes_.emplace(asn, role).second) throw ConfigError("duplicate AS " + to_string(asn));
  }

  void add_link(AsNumber a, AsNumber b, SimTime delay) {
    if (a == b) throw ConfigError("self-link on AS " + to_string(a));
    if (!has_node(a) || !has_node(b)) {
      throw ConfigError("link " + to_string(a) + "-" + to_string(b) + " references an unknown AS");
    }
    if (b < a) std::swap(a, b);
    if (!links_.emplace(std::make_pair(a, b), delay).second) {
      throw ConfigError("duplicate link " + to_string(a) + "-" + to_string(b));
    }
  }

  void originate(Prefix p, AsNumber origin) {
    if (!has_node(origin)) throw ConfigError("origination by unknown AS " + to_string(origin));
    if (!originations_.emplace(p, origin).second) throw ConfigError("prefix " + p.str() + " already originated");
  }

  void set_role(AsNumber asn, Role role) { nodes_.at(asn) = role; }

  bool has_node(AsNumber a) const { return nodes_.count(a) != 0; }
  Role role(AsNumber a) const {
    auto it = nodes_.find(a);
    if (it == nodes_.end()) throw ConfigError("unknown AS " + to_string(a));
    return it->second;
  }
  bool has_link(AsNumber a, AsNumber b) const {
    if (b < a) std::swap(a, b);
    return links_.count({a, b}) != 0;
  }
  SimTime link_delay(AsNumber a, AsNumber b) const {
    if (b < a) std::swap(a, b);
    return links_.at({a, b});
  }

  std::vector<Node> nodes() const {
    std::vector<Node> out;
    for (auto [asn, role] : nodes_) out.push_back({asn, role});
    return out;
  }
  std::vector<Link> links() const {
    std::vector<Link> out;
    for (auto& [k, d] : links_) out.push_back({k.first, k.second, d});
    return out;
  }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }
  const std::map<Prefix, AsNumber>& originations() const { return originations_; }

  std::vector<AsNumber> with_role(Role r) const {
    std::vector<AsNumber> out;
    for (auto [asn, role] : nodes_)
      if (role == r) out.push_back(asn);
    return out;
  }
  std::vector<AsNumber> isp_nodes() const {
    std::vector<AsNumber> out;
    for (auto [asn, role] : nodes_)
      if (is_isp(role)) out.push_back(asn);
    return out;
  }
  std::vector<AsNumber> neighbors(AsNumber a) const {
    std::vector<AsNumber> out;
    for (auto& [k, d] : links_) {
      if (k.first == a) out.push_back(k.second);
      if (k.second == a) out.push_back(k.first);
    }
    return out;
  }

  // Connectivity among nodes that forward data (collector excluded).
  bool connected() const {
    std::vector<AsNumber> members;
    for (auto [asn, role] : nodes_)
      if (role != Role::Collector) members.push_back(asn);
    if (members.empty()) return true;
    std::map<AsNumber, std::vector<AsNumber>> adj;
    for (auto& [k, d] : links_) {
      if (role(k.first) == Role::Collector || role(k.second) == Role::Collector) continue;
      adj[k.first].push_back(k.second);
      adj[k.second].push_back(k.first);
    }
    std::set<AsNumber> seen{members.front()};
    std::vector<AsNumber> stack{members.front()};
    while (!stack.empty()) {
      AsNumber u = stack.back();
      stack.pop_back();
      for (AsNumber v : adj[u])
        if (seen.insert(v).second) stack.push_back(v);
    }
    return seen.size() == members.size();
  }

  bool operator==(const Topology&) const = default;

 private:
  std::map<AsNumber, Role> nodes_;
  std::map<std::pair<AsNumber, AsNumber>, SimTime> links_;
  std::map<Prefix, AsNumber> originations_;
};

enum class GraphFamily : std::uint8_t { Clique, ErdosRenyi, BarabasiAlbert, NewmanWattsStrogatz };

inline const char* to_string(GraphFamily f) {
  switch (f) {
    case GraphFamily::Clique: return "clique";
    case GraphFamily::ErdosRenyi: return "erdos-renyi";
    case GraphFamily::BarabasiAlbert: return "barabasi-albert";
    case GraphFamily::NewmanWattsStrogatz: return "newman-watts-strogatz";
  }
  return "?";
}

inline GraphFamily parse_family(const std::string& s) {
  if (s == "clique") return GraphFamily::Clique;
  if (s == "erdos-renyi") return GraphFamily::ErdosRenyi;
  if (s == "barabasi-albert") return GraphFamily::BarabasiAlbert;
  if (s == "newman-watts-strogatz") return GraphFamily::NewmanWattsStrogatz;
  throw ConfigError("unknown graph family '" + s + "'");
}

// Defaults sit between a full mesh and a sparse tiered graph.
struct GraphParams {
  GraphFamily family = GraphFamily::Clique;
  int n = 8;
  double p = 0.3;  // E-R edge probability, N-W-S shortcut probability
  int m = 2;       // B-A attachment count
  int k = 4;       // N-W-S ring degree

  bool operator==(const GraphParams&) const = default;
};

struct DelayModel {
  SimTime link = SimTime::millis(2);
  SimTime processing = SimTime::millis(1);

  bool operator==(const DelayModel&) const = default;
};

namespace detail {

using EdgeSet = std::set<std::pair<int, int>>;

inline void add_edge(EdgeSet& e, int u, int v) {
  if (u > v) std::swap(u, v);
  e.insert({u, v});
}

inline EdgeSet clique_edges(int n) {
  EdgeSet e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) e.insert({u, v});
  return e;
}

inline EdgeSet erdos_renyi_edges(int n, double p, Rng& rng) {
  EdgeSet e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) e.insert({u, v});
  return e;
}

// Preferential attachment seeded with a star on m+1 nodes; every later node
// attaches to m distinct targets drawn proportionally to degree.
inline EdgeSet barabasi_albert_edges(int n, int m, Rng& rng) {
  EdgeSet e;
  std::vector<int> repeated;
  for (int v = 1; v <= m; ++v) {
    add_edge(e, 0, v);
    repeated.push_back(0);
    repeated.push_back(v);
  }
  for (int source = m + 1; source < n; ++source) {
    std::set<int> targets;
    while (static_cast<int>(targets.size()) < m) targets.insert(repeated[rng.below(repeated.size())]);
    for (int t : targets) {
      add_edge(e, source, t);
      repeated.push_back(t);
      repeated.push_back(source);
    }
  }
  return e;
}

// Ring lattice with k nearest neighbours, plus a shortcut from u to a random
// non-neighbour for each lattice edge (u, v) with probability p.
inline EdgeSet newman_watts_strogatz_edges(int n, int k, double p, Rng& rng) {
  EdgeSet e;
  for (int j = 1; j <= k / 2; ++j)
    for (int u = 0; u < n; ++u) add_edge(e, u, (u + j) % n);
  std::vector<std::pair<int, int>> lattice;
  for (int j = 1; j <= k / 2; ++j)
    for (int u = 0; u < n; ++u) lattice.push_back({u, (u + j) % n});
  auto degree = [&](int u) {
    int d = 0;
    for (auto& [a, b] : e) d += (a == u) + (b == u);
    return d;
  };
  for (auto [u, v] : lattice) {
    if (!rng.bernoulli(p)) continue;
    if (degree(u) >= n - 1) continue;
    int w;
    do {
      w = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    } while (w == u || e.count({std::min(u, w), std::max(u, w)}));
    add_edge(e, u, w);
  }
  return e;
}

inline bool edges_connected(int n, const EdgeSet& e) {
  std::vector<std::vector<int>> adj(n);
  for (auto [u, v] : e) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<bool> seen(n, false);
  std::vector<int> stack{0};
  seen[0] = true;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
  }
  return count == n;
}

}  // namespace detail

inline void validate(const GraphParams& g) {
  if (g.n < 2) throw ConfigError("graph needs n >= 2");
  switch (g.family) {
    case GraphFamily::Clique: break;
    case GraphFamily::ErdosRenyi:
      if (!(g.p > 0.0 && g.p <= 1.0)) throw ConfigError("erdos-renyi needs 0 < p <= 1");
      break;
    case GraphFamily::BarabasiAlbert:
      if (g.m < 1 || g.m >= g.n) throw ConfigError("barabasi-albert needs 1 <= m < n");
      break;
    case GraphFamily::NewmanWattsStrogatz:
      if (g.k < 2 || g.k % 2 || g.k >= g.n) throw ConfigError("newman-watts-strogatz needs even 2 <= k < n");
      if (g.p < 0.0 || g.p > 1.0) throw ConfigError("newman-watts-strogatz needs 0 <= p <= 1");
      break;
  }
}

inline constexpr int kMaxConnectivityAttempts = 32;

// ISP-only graph with AS numbers 1..n, all legacy. Disconnected samples are
// redrawn from derived sub-seeds.
inline Topology generate(const GraphParams& g, std::uint64_t seed, SimTime link_delay = SimTime::millis(2)) {
  validate(g);
  const Rng root(seed);
  for (int attempt = 0; attempt < kMaxConnectivityAttempts; ++attempt) {
    Rng rng = root.fork(static_cast<std::uint64_t>(attempt));
    detail::EdgeSet edges;
    switch (g.family) {
      case GraphFamily::Clique: edges = detail::clique_edges(g.n); break;
      case GraphFamily::ErdosRenyi: edges = detail::erdos_renyi_edges(g.n, g.p, rng); break;
      case GraphFamily::BarabasiAlbert: edges = detail::barabasi_albert_edges(g.n, g.m, rng); break;
      case GraphFamily::NewmanWattsStrogatz: edges = detail::newman_watts_strogatz_edges(g.n, g.k, g.p, rng); break;
    }
    if (!detail::edges_connected(g.n, edges)) continue;
    Topology t;
    for (int i = 1; i <= g.n; ++i) t.add_node(AsNumber(static_cast<std::uint32_t>(i)), Role::Legacy);
    for (auto [u, v] : edges)
      t.add_link(AsNumber(static_cast<std::uint32_t>(u + 1)), AsNumber(static_cast<std::uint32_t>(v + 1)), link_delay);
    return t;
  }
  throw ConfigError(std::string("no connected ") + to_string(g.family) + " graph after " +
                    std::to_string(kMaxConnectivityAttempts) + " attempts");
}

// round(penetration * isps / 100), half away from zero.
inline std::size_t cluster_size_for(int penetration, std::size_t isps) {
  return (static_cast<std::size_t>(penetration) * isps * 2 + 100) / 200;
}

// Marks a uniformly random subset of ISPs as cluster members. The subset is a
// prefix of one seeded permutation, so for a fixed seed the members at a lower
// penetration are contained in those at a higher one.
inline Topology assign_cluster(Topology topo, int penetration, std::uint64_t seed) {
  if (penetration < 0 || penetration > 100) throw ConfigError("penetration must be within [0, 100]");
  std::vector<AsNumber> isps = topo.isp_nodes();
  for (AsNumber a : isps) topo.set_role(a, Role::Legacy);
  Rng rng(seed);
  rng.shuffle(isps);
  const std::size_t count = cluster_size_for(penetration, isps.size());
  for (std::size_t i = 0; i < count; ++i) topo.set_role(isps[i], Role::Cluster);
  return topo;
}

struct FailoverScenario {
  Topology topology;
  AsNumber client;
  AsNumber primary;
  AsNumber backup;
  std::optional<AsNumber> collector;
  Prefix prefix;
  int prepend_count = 10;

  // Occurrences of `from`'s ASN at the head of paths it exports to `to`.
  int export_prepend(AsNumber from, AsNumber to) const {
    return (from == client && to == backup) ? prepend_count : 1;
  }
};

inline constexpr AsNumber kDefaultClientAsn{64512};
inline constexpr AsNumber kDefaultCollectorAsn{65000};

inline Prefix default_client_prefix() { return Prefix::parse("203.0.113.0/24"); }

// Adds a dual-homed client (primary and backup providers drawn without
// replacement) and, optionally, a route collector peering with every speaker.
inline FailoverScenario build_failover_scenario(Topology topo, std::uint64_t seed, int prepend_count = 10,
                                                bool with_collector = true,
                                                SimTime link_delay = SimTime::millis(2)) {
  std::vector<AsNumber> isps = topo.isp_nodes();
  if (isps.size() < 2) throw ConfigError("fail-over scenario needs at least two ISP nodes");
  if (prepend_count < 1) throw ConfigError("prepend_count must be >= 1");
  Rng rng(seed);
  const std::size_t i = rng.below(isps.size());
  std::size_t j = rng.below(isps.size() - 1);
  if (j >= i) ++j;

  FailoverScenario s;
  s.client = kDefaultClientAsn;
  s.primary = isps[i];
  s.backup = isps[j];
  s.prefix = default_client_prefix();
  s.prepend_count = prepend_count;
  topo.add_node(s.client, Role::Client);
  topo.add_link(s.client, s.primary, link_delay);
  topo.add_link(s.client, s.backup, link_delay);
  topo.originate(s.prefix, s.client);
  if (with_collector) {
    s.collector = kDefaultCollectorAsn;
    topo.add_node(*s.collector, Role::Collector);
    for (const Node& n : topo.nodes())
      if (n.role != Role::Collector) topo.add_link(n.asn, *s.collector, link_delay);
  }
  s.topology = std::move(topo);
  return s;
}

}  // namespace hybridbgp
