#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bftdc/effects.hpp"
#include "bftdc/ids.hpp"
#include "bftdc/participant.hpp"

namespace bftdc::sim {

enum class Mode : std::uint8_t { Bftdc, Plain2pc };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

struct NetConfig {
  SimTime delay_min = 1;
  SimTime delay_max = 5;
  double drop_probability = 0.0;
};

struct Timeouts {
  SimTime prepare = 10;
  SimTime agreement_base = 50;
  SimTime decision_retransmit = 20;
  SimTime registration = 30;
  SimTime reply = 40;
};

enum class FaultKind : std::uint8_t {
  CrashAt,
  MutePrimary,
  EquivocatePrePrepare,
  StaleRecordReplay,
  ConflictingVotes,
  DropDecisionTo,
  EquivocateDecision,
};

std::string_view to_string(FaultKind k);
std::optional<FaultKind> parse_fault_kind(std::string_view s);
bool targets_replica(FaultKind k);

struct FaultSpec {
  PrincipalId target;
  FaultKind kind = FaultKind::CrashAt;
  SimTime at = 0;
  // Recipients of outcome_a / vote_a (or of nothing, for dropDecisionTo);
  // every other recipient gets outcome_b / vote_b.
  std::vector<PrincipalId> subset;
  Outcome outcome_a = Outcome::Commit;
  Outcome outcome_b = Outcome::Abort;
  Vote vote_a = Vote::Prepared;
  Vote vote_b = Vote::Aborted;

  bool in_subset(PrincipalId p) const;
};

// Behaviour of a correct participant.
struct ParticipantBehaviour {
  bool willing = true;
  UnilateralAbort unilateral_abort = UnilateralAbort::Never;
  SimTime abort_delay = 0;
};

struct SimConfig {
  std::string name;
  std::string description;
  Mode mode = Mode::Bftdc;
  std::uint32_t f = 1;
  // Optional explicit replica count; must equal 3f+1 (1 in plain2pc).
  std::optional<std::uint32_t> replicas;
  std::uint32_t participants = 3;
  std::uint32_t transactions = 1;
  std::uint64_t seed = 1;
  NetConfig net;
  Timeouts timeouts;
  std::vector<FaultSpec> faults;
  std::map<std::uint32_t, ParticipantBehaviour> behaviour;
  // Runs that have not quiesced by either cap end as non-quiescent.
  std::uint64_t max_events = 500000;
  SimTime max_time = 10000;

  std::uint32_t replica_total() const { return replica_count(f); }
  ParticipantBehaviour behaviour_of(ParticipantId p) const;
  // Same network, seed, participants and faults in the other mode; f
  // becomes 0 for plain2pc and at least 1 for bftdc.
  SimConfig as_mode(Mode m) const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ConfigError naming the offending field.
void validate(const SimConfig& config);

}  // namespace bftdc::sim
