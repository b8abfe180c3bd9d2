#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bftdc/agreement.hpp"
#include "bftdc/certificate.hpp"
#include "bftdc/coordinator.hpp"
#include "bftdc/crypto.hpp"
#include "bftdc/messages.hpp"
#include "bftdc/participant.hpp"
#include "bftdc/sim/trace.hpp"

namespace bftdc::test {

// Replicas r0..r(3f), participants p0..p(n-1) and initiator i0, all with
// mock keys.
struct World {
  std::uint32_t f = 1;
  std::uint32_t participants = 3;
  TransactionId t{1};
  Keyring keys;

  World(std::uint32_t f_, std::uint32_t participants_, TransactionId t_ = TransactionId{1})
      : f(f_), participants(participants_), t(t_) {
    std::vector<PrincipalId> all;
    for (std::uint32_t i = 0; i < replica_count(f); ++i) all.push_back(PrincipalId::replica(ReplicaId{i}));
    for (std::uint32_t i = 0; i < participants; ++i) {
      all.push_back(PrincipalId::participant(ParticipantId{i}));
    }
    all.push_back(PrincipalId::initiator());
    keys = Keyring::mock(all);
  }

  std::shared_ptr<const Signer> signer(PrincipalId who) const { return keys.signers.at(who); }
  std::shared_ptr<const Signer> replica_signer(std::uint32_t i) const {
    return signer(PrincipalId::replica(ReplicaId{i}));
  }
  const Signer& participant_signer(std::uint32_t i) const {
    return keys.signer(PrincipalId::participant(ParticipantId{i}));
  }
  const KeyDirectory& directory() const { return *keys.directory; }

  std::vector<ReplicaId> replicas() const {
    std::vector<ReplicaId> out;
    for (std::uint32_t i = 0; i < replica_count(f); ++i) out.push_back(ReplicaId{i});
    return out;
  }

  RegistrationRecord registration(std::uint32_t p, TransactionId tx) const {
    return RegistrationRecord::make(tx, ParticipantId{p}, participant_signer(p));
  }
  RegistrationRecord registration(std::uint32_t p) const { return registration(p, t); }
  VoteRecord vote(std::uint32_t p, Vote v, TransactionId tx) const {
    return VoteRecord::make(tx, ParticipantId{p}, v, participant_signer(p));
  }
  VoteRecord vote(std::uint32_t p, Vote v) const { return vote(p, v, t); }

  // Every participant registered; votes[i] for participant i, if present.
  DecisionCertificate certificate(const std::vector<std::optional<Vote>>& votes) const {
    DecisionCertificate c(t);
    for (std::uint32_t p = 0; p < votes.size(); ++p) {
      c.add_registration(registration(p));
      if (votes[p]) c.set_vote(vote(p, *votes[p]));
    }
    return c;
  }
  DecisionCertificate all_prepared() const {
    return certificate(std::vector<std::optional<Vote>>(participants, Vote::Prepared));
  }

  template <typename M>
  SignedEnvelope from_replica(std::uint32_t r, const M& msg) const {
    return seal(*replica_signer(r), msg);
  }
  template <typename M>
  SignedEnvelope from_participant(std::uint32_t p, const M& msg) const {
    return seal(participant_signer(p), msg);
  }
  SignedEnvelope initiator_request(Outcome o) const {
    return seal(keys.signer(PrincipalId::initiator()), InitiatorRequest{t, o});
  }

  AgreementInstance agreement(std::uint32_t r, SimTime base = 50) const {
    return AgreementInstance(ReplicaId{r}, t, AgreementConfig{f, base}, replica_signer(r),
                             keys.directory);
  }
};

inline std::size_t count_notes(const Effects& fx, NoteKind kind, std::string_view event) {
  std::size_t n = 0;
  for (const auto& note : fx.notes) {
    if (note.kind == kind && note.detail.value("event", "") == event) ++n;
  }
  return n;
}

inline std::vector<const sim::TraceRecord*> select(const sim::Trace& trace, sim::RecordKind kind,
                                                   std::string_view event) {
  std::vector<const sim::TraceRecord*> out;
  for (const auto& r : trace) {
    if (r.kind == kind && r.detail.is_object() && r.detail.value("event", "") == event) {
      out.push_back(&r);
    }
  }
  return out;
}

}  // namespace bftdc::test
