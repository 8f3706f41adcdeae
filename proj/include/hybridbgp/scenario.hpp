#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridbgp/error.hpp"
#include "hybridbgp/metrics.hpp"
#include "hybridbgp/network.hpp"
#include "hybridbgp/rng.hpp"
#include "hybridbgp/topology.hpp"

namespace hybridbgp {

// Everything needed to build and run one fail-over experiment. When
// `topology` is set it is used verbatim (roles included) together with
// `client`/`primary`/`backup`; otherwise the ISP graph is generated from
// `graph`, the cluster is drawn at `penetration` and the client is placed at
// random.
struct ScenarioConfig {
  std::string id = "scenario";
  std::uint64_t seed = 1;  // for single runs; sweeps derive their own
  GraphParams graph;
  int penetration = 0;
  int prepend_count = 10;
  bool collector = true;
  SimTime link_delay = SimTime::millis(2);
  SimConfig sim;
  SimTime trigger_offset = SimTime::seconds(60);  // after initial convergence
  SimTime run_limit = SimTime::seconds(3600);     // per phase, beyond its start

  struct Explicit {
    Topology topology;
    AsNumber client;
    AsNumber primary;
    AsNumber backup;
    Prefix prefix;
  };
  std::optional<Explicit> topology;
};

struct RunRecord {
  std::string scenario_id;
  std::uint64_t base_seed = 0;
  int run_index = 0;
  int runs_per_cell = 1;
  std::uint64_t seed = 0;
  GraphParams graph;
  int penetration = 0;
  SimTime mrai;
  SimTime crwi;
  std::size_t cluster_size = 0;
  SimTime trigger_time;
  SimTime convergence_time;
  std::size_t update_count = 0;
  double churn_rate = 0.0;
  bool churn_zero_duration = false;
  std::size_t post_convergence_loops = 0;
  std::size_t blackholes = 0;
  double reachable_fraction = 0.0;
  std::size_t repeated_controller_paths = 0;
  std::size_t mrai_delayed_withdrawals = 0;
  std::uint64_t trace_hash = 0;

  bool operator==(const RunRecord&) const = default;
};

struct RunResult {
  RunRecord record;
  FailoverScenario scenario;  // topology with final roles
  RoutingTrace trace;
  ForwardingSnapshot final_snapshot;
  std::map<AsNumber, std::optional<std::size_t>> hop_counts;
  std::vector<TraceEntry> events;  // only when requested
};

struct Seeds {
  std::uint64_t topology;
  std::uint64_t placement;
  std::uint64_t cluster;
};

inline Seeds derive_seeds(std::uint64_t run_seed) {
  const Rng root(run_seed);
  return {root.fork("topology").seed(), root.fork("placement").seed(), root.fork("cluster").seed()};
}

inline FailoverScenario build_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.topology) {
    const auto& e = *cfg.topology;
    FailoverScenario s;
    s.topology = e.topology;
    s.client = e.client;
    s.primary = e.primary;
    s.backup = e.backup;
    s.prefix = e.prefix;
    s.prepend_count = cfg.prepend_count;
    if (!s.topology.has_link(s.client, s.primary) || !s.topology.has_link(s.client, s.backup)) {
      throw ConfigError("client must link to both primary and backup providers");
    }
    auto it = s.topology.originations().find(s.prefix);
    if (it == s.topology.originations().end() || it->second != s.client) {
      throw ConfigError("client must originate the scenario prefix");
    }
    auto collectors = s.topology.with_role(Role::Collector);
    if (!collectors.empty()) s.collector = collectors.front();
    return s;
  }
  const Seeds seeds = derive_seeds(seed);
  Topology isp = generate(cfg.graph, seeds.topology, cfg.link_delay);
  isp = assign_cluster(std::move(isp), cfg.penetration, seeds.cluster);
  return build_failover_scenario(std::move(isp), seeds.placement, cfg.prepend_count, cfg.collector, cfg.link_delay);
}

// Initial convergence, then the primary client link fails `trigger_offset`
// later and the network is run to quiescence again.
inline RunResult run_failover(const ScenarioConfig& cfg, std::uint64_t seed, bool record_events = false) {
  FailoverScenario sc = build_scenario(cfg, seed);
  Network net(sc.topology, cfg.sim, [&sc](AsNumber from, AsNumber to) { return sc.export_prepend(from, to); });
  net.sim().enable_trace(record_events);
  net.start();

  const RunOutcome initial = net.sim().run_until_quiescent(net.sim().now() + cfg.run_limit);
  if (!initial.quiescent) throw InvariantError(cfg.id + ": initial convergence did not finish");

  const SimTime trigger = initial.at + cfg.trigger_offset;
  net.schedule_link_state(sc.client, sc.primary, LinkState::Down, trigger);
  const RunOutcome after = net.sim().run_until_quiescent(trigger + cfg.run_limit);
  if (!after.quiescent) throw InvariantError(cfg.id + ": did not converge after the fail-over");

  RunResult out;
  RunRecord& r = out.record;
  r.scenario_id = cfg.id;
  r.seed = seed;
  r.graph = cfg.graph;
  r.penetration = cfg.penetration;
  r.mrai = cfg.sim.mrai;
  r.crwi = cfg.sim.controller.crwi;
  r.cluster_size = sc.topology.with_role(Role::Cluster).size();
  r.trigger_time = trigger;
  r.convergence_time = measure_convergence(net.trace(), trigger, after.quiescent);
  const ChurnResult churn = measure_churn(net.trace(), trigger, r.convergence_time);
  r.update_count = churn.count;
  r.churn_rate = churn.rate;
  r.churn_zero_duration = churn.zero_duration;
  out.final_snapshot = net.snapshot(sc.prefix);
  r.post_convergence_loops = out.final_snapshot.loops;
  r.blackholes = out.final_snapshot.blackholes;
  r.reachable_fraction = out.final_snapshot.reachable_fraction;
  r.repeated_controller_paths = net.repeated_controller_paths();
  r.mrai_delayed_withdrawals = net.mrai_delayed_withdrawals();
  r.trace_hash = net.sim().trace_hash();

  out.hop_counts = net.hop_counts(sc.prefix);
  out.trace = net.trace();
  if (record_events) out.events = net.sim().trace();
  out.scenario = std::move(sc);
  return out;
}

}  // namespace hybridbgp
