#pragma once

#include <cstdint>

#include "bftdc/sim/config.hpp"
#include "bftdc/sim/trace.hpp"

namespace bftdc::sim {

struct RunResult {
  Trace trace;
  bool quiescent = false;
  SimTime end_time = 0;
  std::uint64_t events = 0;
};

// Runs every configured transaction to quiescence or the event cap. A pure
// function of the config: equal configs give byte-identical traces.
// Throws ConfigError if validate(config) fails.
RunResult run(const SimConfig& config);

}  // namespace bftdc::sim
