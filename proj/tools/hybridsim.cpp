// hybridsim: batch sweeps, single runs, summaries and the live server.
//
// Exit codes: 0 ok, 1 bad input, 2 invariant violation.

#include <csignal>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "hybridbgp/hybridbgp.hpp"
#include "hybridbgp/live_server.hpp"

namespace hb = hybridbgp;

namespace {

constexpr int kBadInput = 1;
constexpr int kInvariant = 2;

void write_file(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  if (path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hb::ConfigError("cannot write " + path);
  fn(out);
}

int cmd_sweep(const std::string& config, int workers, std::string records, std::string summary, bool quiet) {
  hb::SweepConfig c = hb::load_sweep(config);
  if (workers >= 0) c.workers = static_cast<unsigned>(workers);
  if (!records.empty()) c.records_path = records;
  if (!summary.empty()) c.summary_path = summary;
  if (c.records_path.empty()) c.records_path = c.id + "-records.csv";
  if (c.summary_path.empty()) c.summary_path = c.id + "-summary.csv";

  const auto jobs = hb::enumerate_jobs(c);
  if (!quiet) std::cerr << c.id << ": " << jobs.size() << " runs\n";
  const auto recs = hb::run_jobs(jobs, c, c.workers, quiet ? nullptr : &std::cerr);
  write_file(c.records_path, [&](std::ostream& os) { hb::write_records_csv(os, recs); });
  write_file(c.summary_path, [&](std::ostream& os) { hb::write_summary_csv(os, hb::summarize(recs)); });
  if (!quiet) std::cerr << "records: " << c.records_path << "\nsummary: " << c.summary_path << "\n";
  return 0;
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed, bool csv, const std::string& updates,
            const std::string& events) {
  const hb::ScenarioConfig cfg = hb::load_scenario(scenario);
  const hb::RunResult r = hb::run_failover(cfg, seed.value_or(cfg.seed), !events.empty());
  if (csv) {
    std::cout << hb::csv_header() << "\n" << hb::to_csv_row(r.record) << "\n";
  } else {
    hb::Json j = hb::to_json(r.record);
    j["client"] = r.scenario.client.value;
    j["primary"] = r.scenario.primary.value;
    j["backup"] = r.scenario.backup.value;
    j["final_forwarding"] = hb::to_json(r.final_snapshot);
    std::cout << j.dump(2) << "\n";
  }
  if (!updates.empty()) {
    write_file(updates, [&](std::ostream& os) {
      for (const auto& u : r.trace.updates) {
        hb::Json p = hb::Json::array();
        for (auto a : u.path) p.push_back(a.value);
        os << hb::Json{{"sim_time", u.time.str()},
                       {"sender", u.sender.value},
                       {"receiver", u.receiver.value},
                       {"kind", u.kind == hb::BgpUpdate::Kind::Announce ? "announce" : "withdraw"},
                       {"prefix", u.prefix.str()},
                       {"path", p},
                       {"collector", u.collector_session}}
                  .dump()
           << "\n";
      }
    });
  }
  if (!events.empty()) {
    write_file(events, [&](std::ostream& os) {
      for (const auto& e : r.events)
        os << e.time.str() << " " << hb::to_string(e.kind) << " " << e.label << " " << hb::hex64(e.detail) << "\n";
    });
  }
  if (r.record.post_convergence_loops || r.record.repeated_controller_paths) {
    std::cerr << "invariant violated: forwarding loop or repeated AS in a controller path\n";
    return kInvariant;
  }
  return 0;
}

int cmd_summarize(const std::string& records, const std::string& out) {
  std::ifstream in(records, std::ios::binary);
  if (!in) throw hb::ConfigError("cannot open " + records);
  const auto recs = hb::read_records_csv(in);
  write_file(out, [&](std::ostream& os) { hb::write_summary_csv(os, hb::summarize(recs)); });
  return 0;
}

int cmd_topology(const std::string& scenario, std::optional<std::uint64_t> seed) {
  const hb::ScenarioConfig cfg = hb::load_scenario(scenario);
  const hb::FailoverScenario sc = hb::build_scenario(cfg, seed.value_or(cfg.seed));
  hb::Json j = hb::to_json(sc.topology);
  j["client"] = sc.client.value;
  j["primary"] = sc.primary.value;
  j["backup"] = sc.backup.value;
  j["prefix"] = sc.prefix.str();
  std::cout << j.dump(2) << "\n";
  return 0;
}

hb::LiveServer* g_server = nullptr;

int cmd_serve(const std::string& address, unsigned short port, const std::string& scenarios) {
  hb::ServerConfig sc;
  sc.address = address;
  sc.port = port;
  sc.scenarios_dir = scenarios;
  hb::LiveServer server(sc);
  server.start();
  std::cerr << "listening on http://" << address << ":" << server.port() << "\n";
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  server.wait();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid BGP / multi-AS controller routing simulator"};
  app.require_subcommand(1);

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  std::string sweep_cfg, records, summary;
  int workers = -1;
  bool quiet = false;
  sweep->add_option("config", sweep_cfg, "sweep configuration (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--workers", workers, "worker threads (0 = all cores)");
  sweep->add_option("--records", records, "records CSV path ('-' for stdout)");
  sweep->add_option("--summary", summary, "summary CSV path ('-' for stdout)");
  sweep->add_flag("-q,--quiet", quiet, "no progress output");

  auto* run = app.add_subcommand("run", "run one fail-over scenario");
  std::string scenario, updates, events;
  std::optional<std::uint64_t> seed;
  bool csv = false;
  run->add_option("scenario", scenario, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "run seed (default: the scenario's)");
  run->add_flag("--csv", csv, "print the record as CSV instead of JSON");
  run->add_option("--updates", updates, "write the update log as JSON lines");
  run->add_option("--events", events, "write the processed event trace");

  auto* summ = app.add_subcommand("summarize", "summarize a records CSV");
  std::string rec_in, sum_out = "-";
  summ->add_option("records", rec_in, "records CSV")->required()->check(CLI::ExistingFile);
  summ->add_option("-o,--out", sum_out, "summary CSV path");

  auto* topo = app.add_subcommand("topology", "print the topology a scenario builds");
  std::string topo_scenario;
  std::optional<std::uint64_t> topo_seed;
  topo->add_option("scenario", topo_scenario, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
  topo->add_option("--seed", topo_seed, "run seed");

  auto* serve = app.add_subcommand("serve", "start the live session server");
  std::string address = "127.0.0.1", scen_dir = "scenarios";
  unsigned short port = 8080;
  serve->add_option("--address", address, "listen address");
  serve->add_option("--port", port, "listen port (0 = any)");
  serve->add_option("--scenarios", scen_dir, "directory of bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kBadInput;  // --help is a ParseError too
  }

  try {
    if (*sweep) return cmd_sweep(sweep_cfg, workers, records, summary, quiet);
    if (*run) return cmd_run(scenario, seed, csv, updates, events);
    if (*summ) return cmd_summarize(rec_in, sum_out);
    if (*topo) return cmd_topology(topo_scenario, topo_seed);
    if (*serve) return cmd_serve(address, port, scen_dir);
  } catch (const hb::InvariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }
  return 0;
}
