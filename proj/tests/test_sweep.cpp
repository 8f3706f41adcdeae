#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "hybridbgp/sweep.hpp"

using namespace hybridbgp;

namespace {

SweepConfig small_sweep() {
  SweepConfig c;
  c.id = "t";
  GraphParams clique;
  GraphParams ba;
  ba.family = GraphFamily::BarabasiAlbert;
  c.graphs = {clique, ba};
  c.sizes = {8};
  c.penetrations = {0, 50};
  c.mrai = {SimTime::seconds(30)};
  c.runs_per_cell = 3;
  c.base_seed = 11;
  return c;
}

}  // namespace

TEST(Sweep, QuantilesUseLinearInterpolation) {
  const BoxStats b = box_stats({5, 1, 4, 2, 3});
  EXPECT_EQ(b, (BoxStats{1, 2, 3, 4, 5}));
  const BoxStats even = box_stats({4, 3, 2, 1});
  EXPECT_DOUBLE_EQ(even.q1, 1.75);
  EXPECT_DOUBLE_EQ(even.median, 2.5);
  EXPECT_DOUBLE_EQ(even.q3, 3.25);
  EXPECT_DOUBLE_EQ(even.iqr(), 1.5);
  EXPECT_EQ(box_stats({7}), (BoxStats{7, 7, 7, 7, 7}));
  EXPECT_THROW(quantile({}, 0.5), ConfigError);
}

TEST(Sweep, FullGridSize) {
  SweepConfig c = load_sweep(std::string(HB_SOURCE_DIR) + "/scenarios/full-grid.json");
  EXPECT_EQ(c.graphs.size(), 4u);
  EXPECT_EQ(c.runs_per_cell, 20);
  EXPECT_EQ(enumerate_jobs(c).size(), 1920u);
}

TEST(Sweep, SeedsArePairedAcrossPenetrationAndMrai) {
  SweepConfig c = small_sweep();
  c.mrai = {SimTime{}, SimTime::seconds(30)};
  std::map<std::pair<GraphFamily, int>, std::set<std::uint64_t>> seeds;
  for (const auto& j : enumerate_jobs(c)) seeds[{j.scenario.graph.family, j.run_index}].insert(j.seed);
  for (auto& [k, s] : seeds) EXPECT_EQ(s.size(), 1u);
  EXPECT_NE(paired_seed(11, c.graphs[0], 0), paired_seed(11, c.graphs[1], 0));
  EXPECT_NE(paired_seed(11, c.graphs[0], 0), paired_seed(11, c.graphs[0], 1));
  EXPECT_NE(paired_seed(11, c.graphs[0], 0), paired_seed(12, c.graphs[0], 0));

  // Paired runs share topology and client placement.
  const auto jobs = enumerate_jobs(c);
  const auto a = build_scenario(jobs.front().scenario, jobs.front().seed);
  for (const auto& j : jobs) {
    if (j.scenario.graph.family != GraphFamily::Clique || j.run_index != 0) continue;
    const auto b = build_scenario(j.scenario, j.seed);
    EXPECT_EQ(a.primary, b.primary);
    EXPECT_EQ(a.backup, b.backup);
  }
}

TEST(Sweep, ResultsDoNotDependOnWorkerCount) {
  const SweepConfig c = small_sweep();
  const auto jobs = enumerate_jobs(c);
  const auto one = run_jobs(jobs, c, 1);
  const auto four = run_jobs(jobs, c, 4);
  ASSERT_EQ(one.size(), jobs.size());
  EXPECT_EQ(one, four);
  std::stringstream a, b;
  write_records_csv(a, one);
  write_records_csv(b, four);
  EXPECT_EQ(a.str(), b.str());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    EXPECT_EQ(one[i].run_index, jobs[i].run_index);
    EXPECT_EQ(one[i].seed, jobs[i].seed);
    EXPECT_EQ(one[i].runs_per_cell, 3);
  }
}

TEST(Sweep, SummaryCoversEveryCell) {
  const SweepConfig c = small_sweep();
  const auto recs = run_sweep(c);
  const auto cells = summarize(recs);
  EXPECT_EQ(cells.size(), 4u);
  for (const auto& s : cells) {
    EXPECT_EQ(s.runs, 3u);
    std::vector<double> conv;
    for (const auto& r : recs)
      if (cell_of(r) == s.key) conv.push_back(r.convergence_time.to_seconds());
    EXPECT_EQ(s.metrics.at("convergence_time_s"), box_stats(conv));
  }
  std::stringstream out;
  write_summary_csv(out, cells);
  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, summary_csv_header());
  int rows = 0;
  while (std::getline(out, line)) ++rows;
  EXPECT_EQ(rows, 4 * 4 * 5);  // cells x metrics x statistics
}

TEST(Sweep, IncompleteCellsAreNamed) {
  const SweepConfig c = small_sweep();
  auto recs = run_sweep(c);
  const RunRecord dropped = recs[1];
  recs.erase(recs.begin() + 1);
  try {
    summarize(recs);
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("run 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(dropped.seed)), std::string::npos) << msg;
  }
  auto dup = run_sweep(c);
  dup.push_back(dup.front());
  EXPECT_THROW(summarize(dup), ConfigError);
  EXPECT_THROW(summarize({}), ConfigError);
}

TEST(Sweep, ConfigValidation) {
  Json j = {{"id", "x"}, {"graphs", {{{"family", "clique"}}}}, {"sizes", {8}}, {"runs_per_cell", 2}};
  const SweepConfig ok = sweep_from_json(j);
  EXPECT_EQ(ok.runs_per_cell, 2);
  EXPECT_EQ(ok.mrai.size(), 2u);
  Json bad = j;
  bad["runs_per_cell"] = 0;
  EXPECT_THROW(sweep_from_json(bad), ConfigError);
  bad = j;
  bad["graphs"] = {{{"family", "torus"}}};
  EXPECT_THROW(sweep_from_json(bad), ConfigError);
  bad = j;
  bad["penetrations"] = {0, 120};
  EXPECT_THROW(sweep_from_json(bad), ConfigError);
  bad = j;
  bad["sizes"] = {1};
  EXPECT_THROW(sweep_from_json(bad), ConfigError);
  bad = j;
  bad["extra"] = true;
  EXPECT_THROW(sweep_from_json(bad), ConfigError);
}
