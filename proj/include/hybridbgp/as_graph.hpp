#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "hybridbgp/types.hpp"

namespace hybridbgp {

// Externally learned paths, keyed by (border switch, external peer, prefix).
// Paths are kept verbatim; loop sanitization happens in transform().
class PathStore {
 public:
  struct Key {
    AsNumber at_switch;
    AsNumber peer;
    Prefix prefix;
    auto operator<=>(const Key&) const = default;
  };

  // Both return true if the store changed.
  bool put(AsNumber at_switch, AsNumber peer, Prefix p, AsPath path) {
    auto [it, inserted] = paths_.try_emplace({at_switch, peer, p}, path);
    if (inserted) return true;
    if (it->second == path) return false;
    it->second = std::move(path);
    return true;
  }
  bool erase(AsNumber at_switch, AsNumber peer, Prefix p) { return paths_.erase({at_switch, peer, p}) != 0; }

  // Removes everything learned over one session; returns the prefixes touched.
  std::vector<Prefix> erase_session(AsNumber at_switch, AsNumber peer) {
    std::vector<Prefix> touched;
    for (auto it = paths_.begin(); it != paths_.end();) {
      if (it->first.at_switch == at_switch && it->first.peer == peer) {
        touched.push_back(it->first.prefix);
        it = paths_.erase(it);
      } else {
        ++it;
      }
    }
    return touched;
  }

  // Hop-count-minimal stored path for (switch, prefix); ties go to the lowest
  // peer AS, then the lexicographically smallest path.
  std::optional<std::pair<AsNumber, AsPath>> best(AsNumber at_switch, Prefix p) const {
    std::optional<std::pair<AsNumber, AsPath>> out;
    auto it = paths_.lower_bound({at_switch, AsNumber{0}, Prefix{}});
    for (; it != paths_.end() && it->first.at_switch == at_switch; ++it) {
      if (it->first.prefix != p) continue;
      const AsPath& cand = it->second;
      if (!out || cand.size() < out->second.size() ||
          (cand.size() == out->second.size() && std::tie(it->first.peer, cand) < std::tie(out->first, out->second))) {
        out = std::make_pair(it->first.peer, cand);
      }
    }
    return out;
  }

  std::set<Prefix> prefixes() const {
    std::set<Prefix> out;
    for (auto& [k, v] : paths_) out.insert(k.prefix);
    return out;
  }

  const std::map<Key, AsPath>& all() const { return paths_; }
  std::size_t size() const { return paths_.size(); }

 private:
  std::map<Key, AsPath> paths_;
};

// Directed graph of cluster switches plus switch -> prefix edges. A prefix
// edge carries the best external AS path for that switch; an empty annotation
// means the prefix is directly connected.
class SwitchGraph {
 public:
  void add_switch(AsNumber s) { switches_.insert(s); }
  bool has_switch(AsNumber s) const { return switches_.count(s) != 0; }
  const std::set<AsNumber>& switches() const { return switches_; }

  // Returns true if the edge set changed.
  bool set_switch_edge(AsNumber from, AsNumber to, bool present) {
    return present ? edges_.insert({from, to}).second : edges_.erase({from, to}) != 0;
  }
  bool has_switch_edge(AsNumber from, AsNumber to) const { return edges_.count({from, to}) != 0; }
  const std::set<std::pair<AsNumber, AsNumber>>& switch_edges() const { return edges_; }

  // Returns true if the annotation changed.
  bool set_prefix_edge(AsNumber s, Prefix p, std::optional<AsPath> annotation) {
    auto key = std::make_pair(s, p);
    auto it = prefix_edges_.find(key);
    if (!annotation) {
      if (it == prefix_edges_.end()) return false;
      prefix_edges_.erase(it);
      return true;
    }
    if (it != prefix_edges_.end() && it->second == *annotation) return false;
    prefix_edges_[key] = std::move(*annotation);
    return true;
  }
  std::optional<AsPath> prefix_edge(AsNumber s, Prefix p) const {
    auto it = prefix_edges_.find({s, p});
    if (it == prefix_edges_.end()) return std::nullopt;
    return it->second;
  }
  const std::map<std::pair<AsNumber, Prefix>, AsPath>& prefix_edges() const { return prefix_edges_; }

  std::set<Prefix> prefixes() const {
    std::set<Prefix> out;
    for (auto& [k, v] : prefix_edges_) out.insert(k.second);
    return out;
  }

 private:
  std::set<AsNumber> switches_;
  std::set<std::pair<AsNumber, AsNumber>> edges_;
  std::map<std::pair<AsNumber, Prefix>, AsPath> prefix_edges_;
};

enum class EdgeKind : std::uint8_t { Intra, Virtual, Attachment };

struct AsGraphEdge {
  EdgeKind kind = EdgeKind::Intra;
  AsNumber from;
  AsNumber to;       // unused for attachments
  AsPath segment;    // external ASes crossed (virtual) or remaining path (attachment)
  int weight = 1;

  auto operator<=>(const AsGraphEdge&) const = default;
};

// Per-prefix graph over cluster ASes. Costs equal expanded AS-path hop counts:
// intra-cluster edges weigh 1, a virtual link weighs |segment| + 1 and an
// attachment weighs |segment|.
struct AsGraph {
  Prefix prefix;
  std::set<AsNumber> nodes;
  std::vector<AsGraphEdge> edges;  // sorted, no duplicates

  bool operator==(const AsGraph&) const = default;

  void add(AsGraphEdge e) {
    auto it = std::lower_bound(edges.begin(), edges.end(), e);
    if (it == edges.end() || *it != e) edges.insert(it, std::move(e));
  }
};

inline AsGraphEdge intra_edge(AsNumber from, AsNumber to) { return {EdgeKind::Intra, from, to, {}, 1}; }
inline AsGraphEdge virtual_link(AsNumber from, AsNumber to, AsPath seg) {
  const int w = static_cast<int>(seg.size()) + 1;
  return {EdgeKind::Virtual, from, to, std::move(seg), w};
}
inline AsGraphEdge attachment(AsNumber at, AsPath seg) {
  const int w = static_cast<int>(seg.size());
  return {EdgeKind::Attachment, at, AsNumber{}, std::move(seg), w};
}

namespace detail {

// Splits one external path known at `at` into AsGraph edges. Returns false if
// the path re-enters the cluster at `at` itself or crosses two cluster ASes
// back to back without a live intra-cluster edge. `segment` is left holding the
// external run after the last cluster AS, whose identity ends up in `current`.
inline bool split_path(const SwitchGraph& sg, AsNumber at, const AsPath& path, std::vector<AsGraphEdge>& pieces,
                       AsNumber& current, AsPath& segment) {
  current = at;
  segment.clear();
  for (AsNumber hop : path) {
    if (!sg.has_switch(hop)) {
      segment.push_back(hop);
      continue;
    }
    if (hop == current || hop == at || (segment.empty() && !sg.has_switch_edge(current, hop))) return false;
    pieces.push_back(segment.empty() ? intra_edge(current, hop) : virtual_link(current, hop, std::move(segment)));
    segment.clear();
    current = hop;
  }
  return true;
}

}  // namespace detail

// Splits every best external path at each cluster AS it crosses: the external
// run between two cluster ASes becomes a virtual link, and the run after the
// last cluster AS attaches the prefix there.
inline AsGraph transform(const SwitchGraph& sg, Prefix prefix) {
  AsGraph g;
  g.prefix = prefix;
  g.nodes = sg.switches();
  for (auto [a, b] : sg.switch_edges()) g.add(intra_edge(a, b));
  for (auto& [key, annotation] : sg.prefix_edges()) {
    if (key.second != prefix) continue;
    std::vector<AsGraphEdge> pieces;
    AsNumber current;
    AsPath segment;
    if (!detail::split_path(sg, key.first, annotation, pieces, current, segment)) continue;
    pieces.push_back(attachment(current, std::move(segment)));
    for (auto& e : pieces) g.add(std::move(e));
  }
  return g;
}

// Controller form: splits every stored path, not only each switch's best, so a
// stale best path cannot hide a valid alternative. Attachments come only from
// a switch's own sessions and originations; the run after the last cluster AS
// of a path learned elsewhere is a claim about another switch's route, which
// that switch's own entries already describe when it is current.
inline AsGraph transform(const SwitchGraph& sg, Prefix prefix, const PathStore& store) {
  AsGraph g;
  g.prefix = prefix;
  g.nodes = sg.switches();
  for (auto [a, b] : sg.switch_edges()) g.add(intra_edge(a, b));
  for (auto& [key, annotation] : sg.prefix_edges())
    if (key.second == prefix && annotation.empty()) g.add(attachment(key.first, {}));
  for (auto& [key, path] : store.all()) {
    if (key.prefix != prefix || !sg.has_switch(key.at_switch)) continue;
    std::vector<AsGraphEdge> pieces;
    AsNumber current;
    AsPath segment;
    if (!detail::split_path(sg, key.at_switch, path, pieces, current, segment)) continue;
    if (current == key.at_switch) pieces.push_back(attachment(current, std::move(segment)));
    for (auto& e : pieces) g.add(std::move(e));
  }
  return g;
}

struct ChosenPath {
  int cost = 0;
  std::vector<AsGraphEdge> hops;  // from the AS to the prefix, ending in an attachment
  AsPath expansion;               // the AS itself, then every AS crossed

  bool operator==(const ChosenPath&) const = default;
};

// Shortest loop-free paths towards the prefix, searched backwards from the
// attachments. A path is loop-free when its expansion crosses no AS twice
// (prepending aside). Because two virtual links can share an external AS, one
// label per node is not enough: every label not dominated by an earlier one at
// the same node (cost no lower, AS set a superset) is kept and extended. Labels
// leave the queue in (cost, expansion) order, so the first one settled at a
// node is its answer, ties going to the lexicographically smallest expansion.
inline std::map<AsNumber, ChosenPath> compute_paths(const AsGraph& g) {
  std::map<AsNumber, std::vector<const AsGraphEdge*>> into;  // to-node -> edges
  std::vector<const AsGraphEdge*> attachments;
  for (const auto& e : g.edges) {
    if (e.kind == EdgeKind::Attachment) {
      attachments.push_back(&e);
    } else {
      into[e.to].push_back(&e);
    }
  }

  struct Label {
    int cost;
    AsNumber at;
    AsPath expansion;
    AsPath ases;  // sorted, unique
    const AsGraphEdge* edge;
    int parent;
  };
  std::vector<Label> labels;
  auto later = [&labels](int a, int b) {
    return std::tie(labels[b].cost, labels[b].expansion) < std::tie(labels[a].cost, labels[a].expansion);
  };
  std::priority_queue<int, std::vector<int>, decltype(later)> queue(later);

  auto extend = [&](AsNumber u, const AsGraphEdge& e, int parent) {
    Label l{e.weight, u, {}, {}, &e, parent};
    l.expansion.push_back(u);
    l.expansion.insert(l.expansion.end(), e.segment.begin(), e.segment.end());
    if (parent >= 0) {
      l.cost += labels[parent].cost;
      const AsPath& tail = labels[parent].expansion;
      l.expansion.insert(l.expansion.end(), tail.begin(), tail.end());
    }
    if (has_repeats(l.expansion)) return;
    l.ases = l.expansion;
    std::sort(l.ases.begin(), l.ases.end());
    l.ases.erase(std::unique(l.ases.begin(), l.ases.end()), l.ases.end());
    labels.push_back(std::move(l));
    queue.push(static_cast<int>(labels.size() - 1));
  };

  for (const AsGraphEdge* e : attachments)
    if (g.nodes.count(e->from)) extend(e->from, *e, -1);

  std::map<AsNumber, std::vector<int>> settled;
  std::map<AsNumber, ChosenPath> out;
  while (!queue.empty()) {
    const int i = queue.top();
    queue.pop();
    const AsNumber at = labels[i].at;
    auto& here = settled[at];
    const bool dominated = std::any_of(here.begin(), here.end(), [&](int j) {
      return std::includes(labels[i].ases.begin(), labels[i].ases.end(), labels[j].ases.begin(), labels[j].ases.end());
    });
    if (dominated) continue;
    here.push_back(i);
    if (here.size() == 1) {
      ChosenPath c;
      c.cost = labels[i].cost;
      c.expansion = labels[i].expansion;
      for (int k = i; k >= 0; k = labels[k].parent) c.hops.push_back(*labels[k].edge);
      out[at] = std::move(c);
    }
    auto it = into.find(at);
    if (it == into.end()) continue;
    for (const AsGraphEdge* e : it->second)
      if (g.nodes.count(e->from)) extend(e->from, *e, i);
  }
  return out;
}

}  // namespace hybridbgp
