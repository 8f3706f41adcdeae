#pragma once

// Everything except the network server, which pulls in Boost.Beast
// (include hybridbgp/live_server.hpp for that).

#include "hybridbgp/as_graph.hpp"
#include "hybridbgp/bgp_speaker.hpp"
#include "hybridbgp/controller.hpp"
#include "hybridbgp/error.hpp"
#include "hybridbgp/io.hpp"
#include "hybridbgp/live_session.hpp"
#include "hybridbgp/metrics.hpp"
#include "hybridbgp/network.hpp"
#include "hybridbgp/rng.hpp"
#include "hybridbgp/scenario.hpp"
#include "hybridbgp/sim_time.hpp"
#include "hybridbgp/simulator.hpp"
#include "hybridbgp/sweep.hpp"
#include "hybridbgp/topology.hpp"
#include "hybridbgp/types.hpp"
