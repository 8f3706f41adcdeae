// A hand-built five-AS network: the client 100 is dual-homed to 1 (primary)
// and 4 (backup), and ASes 2 and 3 form a two-member cluster. Fails the
// primary link and prints how every AS reaches the client afterwards.

#include <iostream>

#include "hybridbgp/hybridbgp.hpp"

using namespace hybridbgp;

int main() {
  const SimTime d = SimTime::millis(2);
  Topology t;
  t.add_node(AsNumber{1}, Role::Legacy);
  t.add_node(AsNumber{2}, Role::Cluster);
  t.add_node(AsNumber{3}, Role::Cluster);
  t.add_node(AsNumber{4}, Role::Legacy);
  t.add_node(AsNumber{100}, Role::Client);
  t.add_link(AsNumber{1}, AsNumber{2}, d);
  t.add_link(AsNumber{2}, AsNumber{3}, d);
  t.add_link(AsNumber{3}, AsNumber{4}, d);
  t.add_link(AsNumber{4}, AsNumber{1}, d);
  t.add_link(AsNumber{100}, AsNumber{1}, d);
  t.add_link(AsNumber{100}, AsNumber{4}, d);
  const Prefix p = Prefix::parse("198.51.100.0/24");
  t.originate(p, AsNumber{100});

  ScenarioConfig cfg;
  cfg.id = "custom";
  cfg.prepend_count = 3;
  cfg.topology = ScenarioConfig::Explicit{t, AsNumber{100}, AsNumber{1}, AsNumber{4}, p};

  const RunResult r = run_failover(cfg, cfg.seed);
  std::cout << "converged " << r.record.convergence_time << " after the fail-over, " << r.record.update_count
            << " updates\n";
  for (auto& [asn, hop] : r.final_snapshot.next_hops) {
    std::cout << "  AS " << asn.value << ": ";
    if (hop.kind == NextHop::Kind::Deliver) std::cout << "origin";
    if (hop.kind == NextHop::Kind::Forward) std::cout << "via AS " << hop.via.value;
    if (hop.kind == NextHop::Kind::None) std::cout << "no route";
    std::cout << " (" << to_string(r.final_snapshot.verdicts.at(asn)) << ")\n";
  }
}
