#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "hybridbgp/error.hpp"
#include "hybridbgp/io.hpp"
#include "hybridbgp/rng.hpp"
#include "hybridbgp/scenario.hpp"

namespace hybridbgp {

struct SweepConfig {
  std::string id = "sweep";
  std::vector<GraphParams> graphs;  // n is taken from `sizes`
  std::vector<int> sizes{8, 16, 32};
  std::vector<int> penetrations{0, 25, 50, 75};
  std::vector<SimTime> mrai{SimTime{}, SimTime::seconds(30)};
  int runs_per_cell = 20;
  std::uint64_t base_seed = 1;
  ScenarioConfig base;  // timers, delays, prepending; graph/penetration/MRAI overridden per cell
  unsigned workers = 0;  // 0: hardware concurrency
  std::string records_path;
  std::string summary_path;
};

inline std::vector<GraphParams> default_families() {
  std::vector<GraphParams> out;
  for (GraphFamily f : {GraphFamily::Clique, GraphFamily::ErdosRenyi, GraphFamily::BarabasiAlbert,
                        GraphFamily::NewmanWattsStrogatz}) {
    GraphParams g;
    g.family = f;
    out.push_back(g);
  }
  return out;
}

inline SweepConfig sweep_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"id", "description", "graphs", "sizes", "penetrations", "mrai_s", "crwi_s",
                          "prepend_count", "runs_per_cell", "base_seed", "timers", "link_delay_s", "collector",
                          "trigger_offset_s", "run_limit_s", "workers", "records", "summary"},
                         "sweep");
  SweepConfig c;
  c.id = detail::get_or<std::string>(j, "id", c.id);
  if (c.id.empty() || c.id.find_first_of(",\"\n") != std::string::npos) {
    throw ConfigError("sweep id must be non-empty and free of commas, quotes and newlines");
  }
  if (j.contains("graphs")) {
    for (const Json& g : j["graphs"]) c.graphs.push_back(graph_from_json(g));
  } else {
    c.graphs = default_families();
  }
  c.sizes = detail::get_or(j, "sizes", c.sizes);
  c.penetrations = detail::get_or(j, "penetrations", c.penetrations);
  if (j.contains("mrai_s")) {
    c.mrai.clear();
    for (const Json& v : j["mrai_s"]) {
      if (!v.is_number() || v.get<double>() < 0) throw ConfigError("mrai_s entries must be non-negative numbers");
      c.mrai.push_back(SimTime::from_seconds(v.get<double>()));
    }
  }
  c.runs_per_cell = detail::get_or(j, "runs_per_cell", c.runs_per_cell);
  c.base_seed = detail::get_or(j, "base_seed", c.base_seed);
  if (j.contains("timers")) c.base.sim = timers_from_json(j["timers"]);
  c.base.sim.controller.crwi = detail::seconds_or(j, "crwi_s", c.base.sim.controller.crwi);
  c.base.prepend_count = detail::get_or(j, "prepend_count", c.base.prepend_count);
  c.base.link_delay = detail::seconds_or(j, "link_delay_s", c.base.link_delay);
  c.base.collector = detail::get_or(j, "collector", c.base.collector);
  c.base.trigger_offset = detail::seconds_or(j, "trigger_offset_s", c.base.trigger_offset);
  c.base.run_limit = detail::seconds_or(j, "run_limit_s", c.base.run_limit);
  c.base.id = c.id;
  c.workers = detail::get_or(j, "workers", c.workers);
  c.records_path = detail::get_or<std::string>(j, "records", "");
  c.summary_path = detail::get_or<std::string>(j, "summary", "");

  if (c.graphs.empty() || c.sizes.empty() || c.penetrations.empty() || c.mrai.empty()) {
    throw ConfigError("sweep needs at least one graph family, size, penetration and MRAI value");
  }
  if (c.runs_per_cell < 1) throw ConfigError("runs_per_cell must be >= 1");
  if (c.base.prepend_count < 1) throw ConfigError("prepend_count must be >= 1");
  if (c.base.sim.controller.crwi <= SimTime{}) throw ConfigError("crwi_s must be positive");
  for (int p : c.penetrations)
    if (p < 0 || p > 100) throw ConfigError("penetration must be within [0, 100]");
  for (int n : c.sizes) {
    for (GraphParams g : c.graphs) {
      g.n = n;
      validate(g);
    }
  }
  return c;
}

inline SweepConfig load_sweep(const std::string& path) {
  return sweep_from_json(detail::parse_json(detail::read_file(path), path));
}

// The seed of one run depends on the graph family and parameters, the size and
// the run index only, so every penetration level and MRAI value of a run index
// sees the same topology and client placement.
inline std::uint64_t paired_seed(std::uint64_t base_seed, const GraphParams& g, int run_index) {
  std::string key = to_string(g.family);
  key += "/" + std::to_string(g.n) + "/" + format_double(g.p) + "/" + std::to_string(g.m) + "/" + std::to_string(g.k);
  return Rng(base_seed).fork(key).fork(static_cast<std::uint64_t>(run_index)).seed();
}

struct SweepJob {
  ScenarioConfig scenario;
  std::uint64_t seed;
  int run_index;
};

// Cells in configuration order: family, size, penetration, MRAI, run.
inline std::vector<SweepJob> enumerate_jobs(const SweepConfig& c) {
  std::vector<SweepJob> jobs;
  for (GraphParams g : c.graphs) {
    for (int n : c.sizes) {
      g.n = n;
      for (int pen : c.penetrations) {
        for (SimTime mrai : c.mrai) {
          for (int r = 0; r < c.runs_per_cell; ++r) {
            ScenarioConfig s = c.base;
            s.graph = g;
            s.penetration = pen;
            s.sim.mrai = mrai;
            jobs.push_back({std::move(s), paired_seed(c.base_seed, g, r), r});
          }
        }
      }
    }
  }
  return jobs;
}

class SweepAborted : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

// Runs every job on a bounded pool. Records come back in job order whatever
// the worker count. The first hard failure (no convergence, or a forwarding
// loop at the end of a run) stops the sweep.
inline std::vector<RunRecord> run_jobs(const std::vector<SweepJob>& jobs, const SweepConfig& c, unsigned workers,
                                       std::ostream* progress = nullptr) {
  std::vector<RunRecord> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::string failure;
  std::size_t done = 0;

  auto work = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= jobs.size()) return;
      const SweepJob& job = jobs[i];
      std::string diag;
      try {
        RunRecord r = run_failover(job.scenario, job.seed).record;
        r.base_seed = c.base_seed;
        r.run_index = job.run_index;
        r.runs_per_cell = c.runs_per_cell;
        if (r.post_convergence_loops) diag = "forwarding loop after convergence";
        out[i] = std::move(r);
      } catch (const Error& e) {
        diag = e.what();
      }
      std::lock_guard lock(mu);
      if (!diag.empty()) {
        if (!failed.exchange(true)) {
          failure = diag + " (" + to_string(job.scenario.graph.family) + " n=" + std::to_string(job.scenario.graph.n) +
                    " penetration=" + std::to_string(job.scenario.penetration) +
                    " mrai=" + job.scenario.sim.mrai.str() + " run=" + std::to_string(job.run_index) +
                    " seed=" + std::to_string(job.seed) + ")";
        }
        return;
      }
      ++done;
      if (progress && (done % 100 == 0 || done == jobs.size())) *progress << done << "/" << jobs.size() << " runs\n";
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(jobs.size(), 1)));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failed) throw SweepAborted("sweep aborted: " + failure);
  return out;
}

inline std::vector<RunRecord> run_sweep(const SweepConfig& c, std::ostream* progress = nullptr) {
  return run_jobs(enumerate_jobs(c), c, c.workers, progress);
}

// --- summaries ---

struct CellKey {
  std::string scenario_id;
  GraphParams graph;
  int penetration = 0;
  SimTime mrai;
  SimTime crwi;

  auto tie() const {
    return std::make_tuple(scenario_id, static_cast<int>(graph.family), graph.n, graph.p, graph.m, graph.k,
                           penetration, mrai, crwi);
  }
  bool operator<(const CellKey& o) const { return tie() < o.tie(); }
  bool operator==(const CellKey& o) const { return tie() == o.tie(); }
};

inline CellKey cell_of(const RunRecord& r) { return {r.scenario_id, r.graph, r.penetration, r.mrai, r.crwi}; }

struct BoxStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double iqr() const { return q3 - q1; }
  bool operator==(const BoxStats&) const = default;
};

// Linear interpolation between closest ranks: position (n - 1) * q.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline BoxStats box_stats(const std::vector<double>& v) {
  return {quantile(v, 0.0), quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75), quantile(v, 1.0)};
}

inline const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> m = {"convergence_time_s", "update_count", "churn_rate", "reachable_fraction"};
  return m;
}

inline double metric_value(const RunRecord& r, const std::string& metric) {
  if (metric == "convergence_time_s") return r.convergence_time.to_seconds();
  if (metric == "update_count") return static_cast<double>(r.update_count);
  if (metric == "churn_rate") return r.churn_rate;
  if (metric == "reachable_fraction") return r.reachable_fraction;
  throw ConfigError("unknown metric '" + metric + "'");
}

struct CellSummary {
  CellKey key;
  std::size_t runs = 0;
  std::map<std::string, BoxStats> metrics;
};

// Groups records by cell. Every cell must hold run indexes 0..runs_per_cell-1
// exactly once; otherwise the error names the missing runs and their seeds.
inline std::vector<CellSummary> summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ConfigError("no records to summarize");
  std::map<CellKey, std::vector<const RunRecord*>> cells;
  for (const auto& r : records) cells[cell_of(r)].push_back(&r);

  std::vector<CellSummary> out;
  for (auto& [key, rs] : cells) {
    const int expected = rs.front()->runs_per_cell;
    std::map<int, const RunRecord*> by_index;
    for (const RunRecord* r : rs) {
      if (r->runs_per_cell != expected) throw ConfigError("cell mixes different runs_per_cell values");
      if (r->run_index < 0 || r->run_index >= expected || !by_index.emplace(r->run_index, r).second) {
        throw ConfigError("cell has a duplicate or out-of-range run index " + std::to_string(r->run_index));
      }
    }
    if (static_cast<int>(by_index.size()) != expected) {
      std::string missing;
      GraphParams g = key.graph;
      for (int i = 0; i < expected; ++i) {
        if (by_index.count(i)) continue;
        missing += (missing.empty() ? "" : ", ") + std::string("run ") + std::to_string(i) + " seed " +
                   std::to_string(paired_seed(rs.front()->base_seed, g, i));
      }
      throw ConfigError(std::string("incomplete cell ") + to_string(g.family) + " n=" + std::to_string(g.n) +
                        " penetration=" + std::to_string(key.penetration) + " mrai=" + key.mrai.str() +
                        ": missing " + missing);
    }
    CellSummary s;
    s.key = key;
    s.runs = by_index.size();
    for (const auto& m : summary_metrics()) {
      std::vector<double> v;
      for (auto& [i, r] : by_index) v.push_back(metric_value(*r, m));
      s.metrics[m] = box_stats(v);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string summary_csv_header() {
  return "scenario_id,family,n,p,m,k,penetration,mrai_s,crwi_s,runs,metric,statistic,value";
}

// Long format: one row per (cell, metric, statistic).
inline void write_summary_csv(std::ostream& os, const std::vector<CellSummary>& cells) {
  os << summary_csv_header() << "\n";
  for (const auto& c : cells) {
    const std::string prefix = c.key.scenario_id + "," + to_string(c.key.graph.family) + "," +
                               std::to_string(c.key.graph.n) + "," + format_double(c.key.graph.p) + "," +
                               std::to_string(c.key.graph.m) + "," + std::to_string(c.key.graph.k) + "," +
                               std::to_string(c.key.penetration) + "," + c.key.mrai.str() + "," + c.key.crwi.str() +
                               "," + std::to_string(c.runs) + ",";
    for (auto& [metric, b] : c.metrics) {
      const std::pair<const char*, double> stats[] = {
          {"min", b.min}, {"q1", b.q1}, {"median", b.median}, {"q3", b.q3}, {"max", b.max}};
      for (auto& [name, v] : stats) os << prefix << metric << "," << name << "," << format_double(v) << "\n";
    }
  }
}

inline void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << csv_header() << "\n";
  for (const auto& r : records) os << to_csv_row(r) << "\n";
}

}  // namespace hybridbgp
