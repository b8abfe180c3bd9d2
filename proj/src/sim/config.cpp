#include "bftdc/sim/config.hpp"

#include <algorithm>
#include <set>

namespace bftdc::sim {

std::string_view to_string(Mode m) {
  return m == Mode::Bftdc ? "bftdc" : "plain2pc";
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "bftdc") return Mode::Bftdc;
  if (s == "plain2pc") return Mode::Plain2pc;
  return std::nullopt;
}

namespace {

struct FaultName {
  FaultKind kind;
  std::string_view name;
};

constexpr FaultName kFaultNames[] = {
    {FaultKind::CrashAt, "crashAt"},
    {FaultKind::MutePrimary, "mutePrimary"},
    {FaultKind::EquivocatePrePrepare, "equivocatePrePrepare"},
    {FaultKind::StaleRecordReplay, "staleRecordReplay"},
    {FaultKind::ConflictingVotes, "conflictingVotes"},
    {FaultKind::DropDecisionTo, "dropDecisionTo"},
    {FaultKind::EquivocateDecision, "equivocateDecision"},
};

}  // namespace

std::string_view to_string(FaultKind k) {
  for (const auto& n : kFaultNames) {
    if (n.kind == k) return n.name;
  }
  return "unknown";
}

std::optional<FaultKind> parse_fault_kind(std::string_view s) {
  for (const auto& n : kFaultNames) {
    if (n.name == s) return n.kind;
  }
  return std::nullopt;
}

bool targets_replica(FaultKind k) {
  return k != FaultKind::ConflictingVotes && k != FaultKind::CrashAt;
}

bool FaultSpec::in_subset(PrincipalId p) const {
  return std::find(subset.begin(), subset.end(), p) != subset.end();
}

ParticipantBehaviour SimConfig::behaviour_of(ParticipantId p) const {
  auto it = behaviour.find(p.value());
  return it == behaviour.end() ? ParticipantBehaviour{} : it->second;
}

SimConfig SimConfig::as_mode(Mode m) const {
  SimConfig out = *this;
  out.mode = m;
  out.replicas.reset();
  if (m == Mode::Plain2pc) out.f = 0;
  if (m == Mode::Bftdc && out.f == 0) out.f = 1;
  return out;
}

void validate(const SimConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (c.net.delay_min > c.net.delay_max) fail("net.delay_min exceeds net.delay_max");
  if (!(c.net.drop_probability >= 0.0 && c.net.drop_probability < 1.0)) {
    fail("net.drop_probability must lie in [0, 1)");
  }
  if (c.timeouts.decision_retransmit <= c.net.delay_max) {
    fail("timeouts.decision_retransmit must exceed net.delay_max");
  }
  if (c.timeouts.prepare == 0 || c.timeouts.agreement_base == 0) {
    fail("timeouts must be positive");
  }
  if (c.transactions == 0) fail("transactions must be at least 1");
  if (c.max_events == 0 || c.max_time == 0) fail("max_events and max_time must be positive");
  if (c.participants > 1000) fail("participants: at most 1000");
  if (c.mode == Mode::Bftdc) {
    if (c.f == 0) fail("f must be at least 1 in bftdc mode");
    if (c.f > 20) fail("f: at most 20");
    if (c.replicas && *c.replicas != replica_count(c.f)) {
      fail("replicas: bftdc mode needs exactly 3f+1 = " + std::to_string(replica_count(c.f)) +
           " replicas, got " + std::to_string(*c.replicas));
    }
  } else {
    if (c.f != 0) fail("f must be 0 in plain2pc mode");
    if (c.replicas && *c.replicas != 1) fail("replicas: plain2pc mode has exactly 1 coordinator");
  }

  std::set<std::uint32_t> faulty_replicas;
  for (std::size_t i = 0; i < c.faults.size(); ++i) {
    const auto& fault = c.faults[i];
    auto name = "faults[" + std::to_string(i) + "] " + std::string(to_string(fault.kind));
    const auto& t = fault.target;
    if (t.is_initiator()) fail(name + ": the initiator cannot be a fault target");
    if (t.is_replica()) {
      if (t.index >= c.replica_total()) fail(name + ": no such replica " + to_string(t));
      faulty_replicas.insert(t.index);
    }
    if (t.is_participant() && t.index >= c.participants) {
      fail(name + ": no such participant " + to_string(t));
    }
    if (targets_replica(fault.kind) && !t.is_replica()) fail(name + " must target a replica");
    if (fault.kind == FaultKind::ConflictingVotes && !t.is_participant()) {
      fail(name + " must target a participant");
    }
    if (c.mode == Mode::Plain2pc &&
        (fault.kind == FaultKind::MutePrimary || fault.kind == FaultKind::EquivocatePrePrepare ||
         fault.kind == FaultKind::StaleRecordReplay)) {
      fail(name + " needs bftdc mode");
    }
    for (auto p : fault.subset) {
      if (p.is_replica() && p.index >= c.replica_total()) fail(name + ": bad subset member");
      if (p.is_participant() && p.index >= c.participants) fail(name + ": bad subset member");
    }
  }
  auto limit = c.mode == Mode::Bftdc ? c.f : 1u;
  if (faulty_replicas.size() > limit) {
    fail("faults: " + std::to_string(faulty_replicas.size()) +
         " faulty replicas exceed the bound of " + std::to_string(limit));
  }
  for (const auto& [p, b] : c.behaviour) {
    if (p >= c.participants) fail("behaviour: no such participant p" + std::to_string(p));
  }
}

}  // namespace bftdc::sim
