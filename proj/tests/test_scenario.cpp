#include <gtest/gtest.h>

#include <queue>
#include <sstream>

#include "hybridbgp/io.hpp"
#include "hybridbgp/scenario.hpp"

using namespace hybridbgp;

namespace {

ScenarioConfig cell(GraphFamily f, int n, int pen, int mrai_s) {
  ScenarioConfig c;
  c.graph.family = f;
  c.graph.n = n;
  c.penetration = pen;
  c.sim.mrai = SimTime::seconds(mrai_s);
  return c;
}

// Weighted shortest distances to the client on the post-failure AS graph:
// collector sessions and the failed primary link removed, the backup link
// weighted by the prepend count, every other link weight 1.
std::map<AsNumber, int> oracle_distances(const FailoverScenario& sc) {
  std::map<AsNumber, std::vector<std::pair<AsNumber, int>>> adj;
  for (const Link& l : sc.topology.links()) {
    if (sc.topology.role(l.a) == Role::Collector || sc.topology.role(l.b) == Role::Collector) continue;
    const bool primary = (l.a == sc.client && l.b == sc.primary) || (l.b == sc.client && l.a == sc.primary);
    if (primary) continue;
    const bool backup = (l.a == sc.client && l.b == sc.backup) || (l.b == sc.client && l.a == sc.backup);
    const int w = backup ? sc.prepend_count : 1;
    adj[l.a].push_back({l.b, w});
    adj[l.b].push_back({l.a, w});
  }
  std::map<AsNumber, int> dist;
  using Item = std::pair<int, AsNumber>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[sc.client] = 0;
  pq.push({0, sc.client});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d != dist[u]) continue;
    for (auto [v, w] : adj[u]) {
      if (!dist.count(v) || d + w < dist[v]) {
        dist[v] = d + w;
        pq.push({d + w, v});
      }
    }
  }
  return dist;
}

}  // namespace

TEST(Scenario, SeedsDeriveIndependentStreams) {
  const Seeds a = derive_seeds(5), b = derive_seeds(5), c = derive_seeds(6);
  EXPECT_EQ(a.topology, b.topology);
  EXPECT_NE(a.topology, a.placement);
  EXPECT_NE(a.placement, a.cluster);
  EXPECT_NE(a.topology, c.topology);
}

TEST(Scenario, RunsAreDeterministic) {
  for (auto f : {GraphFamily::Clique, GraphFamily::BarabasiAlbert}) {
    const ScenarioConfig c = cell(f, 16, 50, 30);
    const RunResult a = run_failover(c, 99, true);
    const RunResult b = run_failover(c, 99, true);
    EXPECT_EQ(a.record, b.record);
    EXPECT_EQ(a.events, b.events);
    EXPECT_EQ(to_csv_row(a.record), to_csv_row(b.record));
    EXPECT_FALSE(a.events.empty());
    const RunResult other = run_failover(c, 100);
    EXPECT_NE(other.record.trace_hash, a.record.trace_hash);
  }
}

TEST(Scenario, HopCountsMatchAnIndependentShortestPathOracle) {
  int checked = 0;
  for (auto f : {GraphFamily::Clique, GraphFamily::ErdosRenyi, GraphFamily::BarabasiAlbert,
                 GraphFamily::NewmanWattsStrogatz}) {
    for (int pen : {0, 25, 50, 75, 100}) {
      for (int mrai : {0, 30}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
          const RunResult r = run_failover(cell(f, 8, pen, mrai), seed);
          const auto dist = oracle_distances(r.scenario);
          for (auto& [asn, hops] : r.hop_counts) {
            ASSERT_TRUE(hops) << to_string(f) << " pen=" << pen << " AS " << asn;
            EXPECT_EQ(static_cast<int>(*hops), dist.at(asn))
                << to_string(f) << " pen=" << pen << " mrai=" << mrai << " seed=" << seed << " AS " << asn;
            ++checked;
          }
          EXPECT_EQ(r.record.post_convergence_loops, 0u);
          EXPECT_EQ(r.record.blackholes, 0u);
          EXPECT_EQ(r.record.repeated_controller_paths, 0u);
          EXPECT_DOUBLE_EQ(r.record.reachable_fraction, 1.0);
        }
      }
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Scenario, FullPenetrationMatchesTheClosedForm) {
  // CRWI + installation + one link delay to the external neighbours.
  for (auto f : {GraphFamily::Clique, GraphFamily::ErdosRenyi, GraphFamily::NewmanWattsStrogatz}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const RunResult r = run_failover(cell(f, 16, 100, 30), seed);
      EXPECT_EQ(r.record.cluster_size, 16u);
      EXPECT_EQ(r.record.convergence_time, SimTime::seconds(1) + SimTime::millis(300) + SimTime::millis(2))
          << to_string(f) << " seed " << seed;
    }
  }
}

TEST(Scenario, NoWithdrawalIsEverHeldByMrai) {
  for (int pen : {0, 50}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const RunResult r = run_failover(cell(GraphFamily::Clique, 8, pen, 30), seed, true);
      EXPECT_EQ(r.record.mrai_delayed_withdrawals, 0u);
      for (std::size_t i = 0; i < r.trace.updates.size(); ++i) {
        const auto& u = r.trace.updates[i];
        if (u.kind == BgpUpdate::Kind::Withdraw) {
          EXPECT_GE(u.time, r.record.trigger_time);  // only the fail-over withdraws
        }
      }
    }
  }
}

TEST(Scenario, ExplicitTopologyFromJson) {
  const ScenarioConfig c = load_scenario(std::string(HB_SOURCE_DIR) + "/scenarios/demo-ring.json");
  ASSERT_TRUE(c.topology);
  EXPECT_EQ(c.topology->client, AsNumber{100});
  EXPECT_EQ(c.topology->topology.link_delay(AsNumber{2}, AsNumber{6}), SimTime::millis(20));
  EXPECT_EQ(c.topology->topology.link_delay(AsNumber{1}, AsNumber{2}), SimTime::millis(5));
  const RunResult r = run_failover(c, c.seed);
  EXPECT_EQ(r.record.cluster_size, 3u);
  EXPECT_EQ(r.record.blackholes, 0u);
  const auto dist = oracle_distances(r.scenario);
  for (auto& [asn, hops] : r.hop_counts) EXPECT_EQ(static_cast<int>(hops.value()), dist.at(asn)) << asn;
}

TEST(Scenario, RejectsInconsistentExplicitTopologies) {
  Json j = Json::parse(detail::read_file(std::string(HB_SOURCE_DIR) + "/scenarios/demo-ring.json"));
  Json bad = j;
  bad["topology"]["backup"] = 3;  // no client link to AS 3
  EXPECT_THROW(build_scenario(scenario_from_json(bad), 1), ConfigError);
  bad = j;
  bad["topology"]["prefix"] = "192.0.2.0/24";
  EXPECT_THROW(build_scenario(scenario_from_json(bad), 1), ConfigError);
  bad = j;
  bad["topology"]["links"].push_back({{"a", 1}, {"b", 77}});
  EXPECT_THROW(scenario_from_json(bad), ConfigError);
  bad = j;
  bad["colour"] = "blue";
  EXPECT_THROW(scenario_from_json(bad), ConfigError);
  bad = j;
  bad["timers"] = {{"mrai_s", -1}};
  EXPECT_THROW(scenario_from_json(bad), ConfigError);
}

TEST(Scenario, JsonRoundTrip) {
  ScenarioConfig c = cell(GraphFamily::NewmanWattsStrogatz, 16, 25, 0);
  c.id = "rt";
  c.graph.k = 6;
  c.sim.controller.crwi = SimTime::millis(1500);
  c.sim.detection_delay = SimTime::millis(40);
  c.prepend_count = 7;
  const Json j = to_json(c);
  const ScenarioConfig back = scenario_from_json(j);
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(back.sim, c.sim);
  EXPECT_EQ(back.graph, c.graph);
}

TEST(Scenario, RecordCsvRoundTripIsExact) {
  const RunResult r = run_failover(cell(GraphFamily::ErdosRenyi, 8, 50, 30), 3);
  RunRecord rec = r.record;
  rec.base_seed = 12345;
  rec.run_index = 4;
  rec.runs_per_cell = 20;
  const std::string row = to_csv_row(rec);
  EXPECT_EQ(record_from_csv(row), rec);
  std::stringstream ss;
  ss << csv_header() << "\n" << row << "\n";
  const auto back = read_records_csv(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], rec);

  std::stringstream wrong("scenario_id,nonsense\n");
  EXPECT_THROW(read_records_csv(wrong), ConfigError);
}

TEST(Prefix, ParseAndPrint) {
  EXPECT_EQ(Prefix::parse("8.0.10.0/29").str(), "8.0.10.0/29");
  EXPECT_EQ(Prefix::parse("10.0.0.0/8").length(), 8);
  for (const char* bad : {"8.0.0.10.0/29", "10.0.0/8", "10.0.0.0", "256.0.0.0/8", "10.0.0.0/33", "a.b.c.d/1"})
    EXPECT_THROW(Prefix::parse(bad), ConfigError) << bad;
}
