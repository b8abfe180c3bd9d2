#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bftdc/sim/trace.hpp"

namespace bftdc::sim {

struct Violation {
  int claim = 0;
  std::uint64_t seq = 0;  // record that exposed it
  std::string message;
};

// Commit validity: a correct replica's ba-commit on Commit covers every
// correct participant that completed registration, with a Prepared vote.
std::vector<Violation> check_claim1(const Trace& trace);

// Agreement: correct replicas ba-commit the same outcome per transaction.
std::vector<Violation> check_claim2(const Trace& trace);

// Atomic termination: correct participants (and the initiator) reach the
// same terminal outcome; in bftdc mode a Prepared participant terminates
// only on f+1 matching decisions.
std::vector<Violation> check_claim3(const Trace& trace);

std::vector<Violation> check_all(const Trace& trace);

}  // namespace bftdc::sim
