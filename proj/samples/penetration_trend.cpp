// Median convergence time per penetration level for one graph family and
// size, using the same paired seeds as the sweep runner.
//
//   sample_penetration_trend [family] [n] [runs]

#include <iostream>
#include <string>

#include "hybridbgp/hybridbgp.hpp"

using namespace hybridbgp;

int main(int argc, char** argv) {
  SweepConfig c;
  GraphParams g;
  g.family = parse_family(argc > 1 ? argv[1] : "barabasi-albert");
  c.graphs = {g};
  c.sizes = {argc > 2 ? std::stoi(argv[2]) : 16};
  c.runs_per_cell = argc > 3 ? std::stoi(argv[3]) : 10;
  c.mrai = {SimTime::seconds(30)};
  c.workers = 1;

  for (const CellSummary& s : summarize(run_sweep(c))) {
    const BoxStats& b = s.metrics.at("convergence_time_s");
    std::cout << s.key.penetration << "%  median " << b.median << " s  (IQR " << b.iqr() << " s)\n";
  }
}
