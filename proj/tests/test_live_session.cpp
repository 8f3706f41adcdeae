#include <gtest/gtest.h>

#include "hybridbgp/live_session.hpp"

using namespace hybridbgp;

namespace {

struct ManualClock {
  std::int64_t ns = 0;
  WallClock fn() {
    return [this] { return ns; };
  }
  void advance_ms(std::int64_t ms) { ns += ms * 1'000'000; }
};

struct Client {
  std::vector<Json> got;
  LiveSession::Sink sink() {
    return [this](const std::string& text) { got.push_back(Json::parse(text)); };
  }
  std::vector<Json> of(const std::string& type) const {
    std::vector<Json> out;
    for (auto& m : got)
      if (m["type"] == type) out.push_back(m);
    return out;
  }
  Json last(const std::string& type) const {
    auto v = of(type);
    return v.empty() ? Json() : v.back();
  }
};

ScenarioConfig demo() {
  ScenarioConfig c;
  c.id = "live";
  c.graph.family = GraphFamily::ErdosRenyi;
  c.graph.n = 8;
  c.penetration = 50;
  return c;
}

// Pumps in 50 ms wall steps until the simulation is quiescent.
void settle(LiveSession& s, ManualClock& clock) {
  for (int i = 0; i < 100000; ++i) {
    clock.advance_ms(50);
    s.pump();
    if (s.network().sim().quiescent()) return;
  }
  FAIL() << "session did not settle";
}

}  // namespace

TEST(LiveSession, HelloAndTopologyOnAttach) {
  ManualClock clock;
  LiveSession s("s1", demo(), 4, 100.0, clock.fn());
  Client c;
  s.attach(c.sink());
  s.pump();
  ASSERT_GE(c.got.size(), 2u);
  EXPECT_EQ(c.got[0]["type"], "hello");
  EXPECT_EQ(c.got[0]["v"], 1);
  EXPECT_EQ(c.got[0]["session"], "s1");
  EXPECT_EQ(c.got[0]["payload"]["started"], false);
  EXPECT_EQ(c.got[1]["type"], "topology");
  EXPECT_EQ(c.got[1]["payload"]["nodes"].size(), 10u);  // 8 ISPs, client, collector
  EXPECT_LT(c.got[0]["seq"].get<int>(), c.got[1]["seq"].get<int>());
  // Nothing runs before start.
  clock.advance_ms(10'000);
  s.pump();
  EXPECT_EQ(s.network().sim().now(), SimTime{});
}

TEST(LiveSession, PacesSimulationTimeByTheWallClock) {
  ManualClock clock;
  LiveSession s("s1", demo(), 4, 20.0, clock.fn());
  const int sid = s.attach({});
  s.post(sid, {{"op", "start"}});
  s.pump();
  clock.advance_ms(500);
  s.pump();
  EXPECT_EQ(s.network().sim().now(), SimTime::seconds(10));
  s.post(sid, {{"op", "speed"}, {"value", 2.0}});
  s.pump();
  clock.advance_ms(1000);
  s.pump();
  EXPECT_EQ(s.network().sim().now(), SimTime::seconds(12));
}

TEST(LiveSession, ScriptedSessionMatchesTheBatchReplay) {
  ManualClock clock;
  const ScenarioConfig cfg = demo();
  LiveSession s("s1", cfg, 4, 100.0, clock.fn());
  Client c;
  const int sid = s.attach(c.sink());
  s.post(sid, {{"op", "start"}, {"id", 1}});
  settle(s, clock);
  clock.advance_ms(300);
  s.pump();
  const auto& sc = s.scenario();
  s.post(sid, {{"op", "link"}, {"a", sc.client.value}, {"b", sc.primary.value}, {"state", "down"}, {"id", 2}});
  settle(s, clock);

  const auto log = s.command_log();
  ASSERT_EQ(log.size(), 1u);
  EXPECT_FALSE(log[0].noop);
  const ReplayResult batch = replay(cfg, 4, log);
  const ForwardingSnapshot live = s.network().snapshot(sc.prefix);
  EXPECT_EQ(live.next_hops, batch.snapshot.next_hops);
  EXPECT_EQ(live.verdicts, batch.snapshot.verdicts);
  EXPECT_EQ(live.loops, 0u);
  const LiveMetrics m = measure_live(s.network(), log[0].at);
  EXPECT_EQ(m.convergence_time, batch.metrics.convergence_time);
  EXPECT_EQ(m.updates_since_trigger, batch.metrics.updates_since_trigger);
  EXPECT_EQ(m.total_updates, batch.metrics.total_updates);
  EXPECT_DOUBLE_EQ(m.churn_rate, batch.metrics.churn_rate);

  // The same fail-over as a batch run, with the trigger at the same instant.
  const auto acks = c.of("command_ack");
  ASSERT_EQ(acks.size(), 2u);
  EXPECT_EQ(acks[1]["payload"]["id"], 2);
  EXPECT_EQ(acks[1]["payload"]["noop"], false);
  EXPECT_EQ(c.last("command")["payload"]["state"], "down");
}

TEST(LiveSession, RepeatedLinkCommandIsANoop) {
  ManualClock clock;
  LiveSession s("s1", demo(), 4, 100.0, clock.fn());
  Client c;
  const int sid = s.attach(c.sink());
  s.post(sid, {{"op", "start"}});
  s.pump();
  const auto& sc = s.scenario();
  const Json down = {{"op", "link"}, {"a", sc.client.value}, {"b", sc.backup.value}, {"state", "down"}};
  s.post(sid, down);
  s.post(sid, down);
  s.post(sid, {{"op", "link"}, {"a", sc.backup.value}, {"b", sc.client.value}, {"state", "up"}});
  s.pump();
  const auto acks = c.of("command_ack");
  ASSERT_EQ(acks.size(), 4u);
  EXPECT_EQ(acks[1]["payload"]["noop"], false);
  EXPECT_EQ(acks[2]["payload"]["noop"], true);
  EXPECT_EQ(acks[3]["payload"]["noop"], false);
  EXPECT_TRUE(s.network().link_up(sc.client, sc.backup));
  EXPECT_EQ(s.command_log().size(), 3u);
}

TEST(LiveSession, ErrorsAreReportedToTheSender) {
  ManualClock clock;
  LiveSession s("s1", demo(), 4, 100.0, clock.fn());
  Client c, other;
  const int sid = s.attach(c.sink());
  s.attach(other.sink());
  s.post(sid, {{"op", "link"}, {"a", 1}, {"b", 2}, {"state", "down"}, {"id", "early"}});
  s.post(sid, {{"op", "start"}});
  s.post(sid, {{"op", "start"}, {"id", "again"}});
  s.post(sid, {{"op", "link"}, {"a", 1}, {"b", 4242}, {"state", "down"}, {"id", "nolink"}});
  s.post(sid, {{"op", "subscribe"}, {"streams", {"forwarding_tree"}}, {"prefix", "192.0.2.0/24"}, {"id", "nopfx"}});
  s.post(sid, {{"op", "subscribe"}, {"streams", {"weather"}}, {"id", "nostream"}});
  s.post(sid, {{"op", "teleport"}, {"id", "noop"}});
  s.post(sid, {{"op", "speed"}, {"value", -1}, {"id", "speed"}});
  s.post_text(sid, "{not json");
  s.pump();
  const auto errors = c.of("error");
  ASSERT_EQ(errors.size(), 8u);
  const std::vector<Json> ids = {"early", "again", "nolink", "nopfx", "nostream", "noop", "speed", nullptr};
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(errors[i]["payload"]["id"], ids[i]) << i;
  EXPECT_TRUE(other.of("error").empty());
  EXPECT_TRUE(s.started());
}

TEST(LiveSession, TreeUpdatesAreThrottled) {
  ManualClock clock;
  LiveSession s("s1", demo(), 4, 1000.0, clock.fn());
  Client c;
  const int sid = s.attach(c.sink());
  s.post(sid, {{"op", "subscribe"}, {"streams", {"forwarding_tree", "update_event"}}});
  s.post(sid, {{"op", "start"}});
  s.pump();
  ASSERT_EQ(c.of("forwarding_tree").size(), 1u);  // immediate snapshot on subscribe
  for (int i = 0; i < 200; ++i) {
    clock.advance_ms(5);
    s.pump();
  }
  const auto trees = c.of("forwarding_tree");
  const auto updates = c.of("update_event");
  EXPECT_GT(updates.size(), trees.size());
  EXPECT_LE(trees.size(), 1u + 1000 / 100 + 1);
  // Latest state wins: the final tree matches the network now.
  settle(s, clock);
  clock.advance_ms(200);
  s.pump();
  const Json want = to_json(s.network().snapshot(s.scenario().prefix));
  EXPECT_EQ(c.last("forwarding_tree")["payload"]["ases"], want["ases"]);

  const auto ticks = c.of("metrics_tick");
  ASSERT_FALSE(ticks.empty());
  EXPECT_EQ(ticks.back()["payload"]["loops"], 0);
}

TEST(LiveSession, UnsubscribeStopsAStream) {
  ManualClock clock;
  LiveSession s("s1", demo(), 4, 100.0, clock.fn());
  Client c;
  const int sid = s.attach(c.sink());
  s.post(sid, {{"op", "unsubscribe"}, {"streams", {"metrics_tick", "topology"}}});
  s.post(sid, {{"op", "start"}});
  for (int i = 0; i < 20; ++i) {
    clock.advance_ms(100);
    s.pump();
  }
  EXPECT_TRUE(c.of("metrics_tick").empty());
  EXPECT_EQ(c.of("topology").size(), 1u);  // the one sent on attach
  s.detach(sid);
  s.pump();
  EXPECT_EQ(s.status()["subscribers"], 0);
}

TEST(LiveSession, ThreadedSessionRuns) {
  LiveSession s("s1", demo(), 4, 1000.0);
  std::mutex mu;
  std::vector<std::string> got;
  const int sid = s.attach([&](const std::string& m) {
    std::lock_guard lock(mu);
    got.push_back(m);
  });
  s.run_in_thread();
  s.post(sid, {{"op", "start"}});
  for (int i = 0; i < 200 && !s.status()["started"].get<bool>(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  EXPECT_TRUE(s.status()["started"].get<bool>());
  s.stop();
  std::lock_guard lock(mu);
  EXPECT_GE(got.size(), 3u);
}
