#include <gtest/gtest.h>

#include "hybridbgp/network.hpp"
#include "hybridbgp/topology.hpp"

using namespace hybridbgp;

namespace {

AsNumber as(std::uint32_t v) { return AsNumber{v}; }
const Prefix kP = Prefix::parse("203.0.113.0/24");

UpdateLogEntry upd(double t, std::uint32_t from, std::uint32_t to, bool collector = false) {
  return {SimTime::from_seconds(t), as(from), as(to), BgpUpdate::Kind::Announce, kP, {as(from)}, collector};
}

}  // namespace

TEST(Metrics, ConvergenceIsTheLastChangeOrDeliveryAfterTheTrigger) {
  RoutingTrace t;
  t.updates = {upd(1, 1, 2), upd(10.5, 1, 2), upd(12, 2, 3), upd(40, 3, 9, true)};
  t.changes = {{SimTime::seconds(2), as(2), kP}, {SimTime::from_seconds(12.001), as(3), kP}};
  EXPECT_EQ(measure_convergence(t, SimTime::seconds(10), true), SimTime::micros(2'001'000));
  EXPECT_EQ(measure_convergence(t, SimTime::seconds(50), true), SimTime{});
  EXPECT_THROW(measure_convergence(t, SimTime::seconds(10), false), InvariantError);
}

TEST(Metrics, ChurnCountsInterAsUpdatesInTheWindow) {
  RoutingTrace t;
  t.updates = {upd(9, 1, 2), upd(10, 1, 2), upd(11, 2, 3), upd(11, 2, 9, true), upd(12, 3, 1), upd(13, 1, 2)};
  const ChurnResult c = measure_churn(t, SimTime::seconds(10), SimTime::seconds(2));
  EXPECT_EQ(c.count, 3u);
  EXPECT_DOUBLE_EQ(c.rate, 1.5);
  EXPECT_FALSE(c.zero_duration);

  const ChurnResult z = measure_churn(t, SimTime::seconds(10), SimTime{});
  EXPECT_TRUE(z.zero_duration);
  EXPECT_EQ(z.count, 1u);
  EXPECT_EQ(z.rate, 0.0);
}

TEST(Metrics, ForwardingVerdicts) {
  std::map<AsNumber, NextHop> table = {
      {as(1), NextHop::deliver()},       {as(2), NextHop::forward(as(1))}, {as(3), NextHop::forward(as(2))},
      {as(4), NextHop::forward(as(5))},  {as(5), NextHop::forward(as(4))}, {as(6), NextHop::none()},
      {as(7), NextHop::forward(as(42))}, {as(8), NextHop::forward(as(4))}};
  const auto s = forwarding_snapshot(table, kP, SimTime{});
  EXPECT_EQ(s.verdicts.at(as(3)), Verdict::Delivered);
  EXPECT_EQ(s.verdicts.at(as(4)), Verdict::Loop);
  EXPECT_EQ(s.verdicts.at(as(8)), Verdict::Loop);
  EXPECT_EQ(s.verdicts.at(as(6)), Verdict::Blackhole);
  EXPECT_EQ(s.verdicts.at(as(7)), Verdict::Blackhole);
  EXPECT_EQ(s.delivered, 3u);
  EXPECT_EQ(s.loops, 3u);
  EXPECT_EQ(s.blackholes, 2u);
  EXPECT_DOUBLE_EQ(s.reachable_fraction, 3.0 / 8.0);

  // A next hop over a failed link does not deliver.
  const auto down = forwarding_snapshot(table, kP, SimTime{}, [](AsNumber a, AsNumber b) {
    return !((a == as(2) && b == as(1)) || (a == as(1) && b == as(2)));
  });
  EXPECT_EQ(down.verdicts.at(as(3)), Verdict::Blackhole);
  EXPECT_EQ(down.verdicts.at(as(1)), Verdict::Delivered);
}

// Replays a fail-over on a small network while logging every delivery and
// routing change through the observer, then recomputes the metrics from that
// independent log.
TEST(Metrics, AgreesWithAnIndependentReplayOfTheRun) {
  for (int cluster : {0, 2}) {
    Topology t;
    for (std::uint32_t i = 1; i <= 5; ++i) t.add_node(as(i), i <= static_cast<std::uint32_t>(cluster) ? Role::Cluster : Role::Legacy);
    for (auto [a, b] : {std::pair{1u, 2u}, {2u, 3u}, {3u, 4u}, {4u, 5u}, {5u, 1u}, {2u, 4u}})
      t.add_link(as(a), as(b), SimTime::millis(2));
    const FailoverScenario sc = build_failover_scenario(t, 17, 10, true);
    SimConfig cfg;
    cfg.mrai = SimTime::seconds(30);
    Network net(sc.topology, cfg, [&sc](AsNumber f, AsNumber to) { return sc.export_prepend(f, to); });

    std::vector<std::pair<SimTime, bool>> deliveries;  // (time, collector)
    std::vector<SimTime> changes;
    NetworkObserver obs;
    obs.on_delivery = [&](const UpdateLogEntry& u) { deliveries.emplace_back(u.time, u.collector_session); };
    obs.on_change = [&](const StateChange& c) { changes.push_back(c.time); };
    net.set_observer(obs);

    net.start();
    const RunOutcome init = net.sim().run_until_quiescent(SimTime::seconds(3600));
    ASSERT_TRUE(init.quiescent);
    const SimTime trigger = init.at + SimTime::seconds(60);
    net.schedule_link_state(sc.client, sc.primary, LinkState::Down, trigger);
    const RunOutcome after = net.sim().run_until_quiescent(trigger + SimTime::seconds(3600));
    ASSERT_TRUE(after.quiescent);

    SimTime last = trigger;
    std::size_t count = 0;
    for (auto [time, collector] : deliveries)
      if (!collector && time >= trigger) last = std::max(last, time);
    for (SimTime time : changes)
      if (time >= trigger) last = std::max(last, time);
    for (auto [time, collector] : deliveries)
      if (!collector && time >= trigger && time <= last) ++count;

    const SimTime conv = measure_convergence(net.trace(), trigger, true);
    EXPECT_EQ(conv, last - trigger) << "cluster " << cluster;
    const ChurnResult churn = measure_churn(net.trace(), trigger, conv);
    EXPECT_EQ(churn.count, count);
    EXPECT_GT(count, 0u);
    EXPECT_DOUBLE_EQ(churn.rate, static_cast<double>(count) / (last - trigger).to_seconds());

    // Quiescence really is final: nothing changes in the next hour.
    const std::size_t n_changes = changes.size(), n_deliveries = deliveries.size();
    net.sim().run_until(net.sim().now() + SimTime::seconds(3600));
    EXPECT_EQ(changes.size(), n_changes);
    EXPECT_EQ(deliveries.size(), n_deliveries);

    const auto snap = net.snapshot(sc.prefix);
    EXPECT_EQ(snap.loops, 0u);
    EXPECT_EQ(snap.blackholes, 0u);
    EXPECT_EQ(net.mrai_delayed_withdrawals(), 0u);
  }
}
