#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "bftdc/sim/trace.hpp"

namespace bftdc::sim {

struct Metrics {
  // All sends by kind, and sends excluding decision retransmissions.
  std::map<std::string, std::uint64_t> messages;
  std::map<std::string, std::uint64_t> first_round;
  std::uint64_t total_messages = 0;
  // Per transaction; the values below are for the first transaction.
  std::optional<std::string> outcome;
  std::optional<SimTime> commit_latency;     // initiator request -> last correct terminal
  std::optional<SimTime> agreement_latency;  // max over correct replicas
  std::optional<SimTime> end_to_end;         // initiator start -> initiator terminal
  std::uint64_t views = 0;                   // highest installed view
  bool quiescent = false;
  SimTime end_time = 0;
};

Metrics measure(const Trace& trace, std::uint64_t t = 1);

}  // namespace bftdc::sim
