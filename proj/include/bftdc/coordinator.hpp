#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "bftdc/agreement.hpp"
#include "bftdc/certificate.hpp"
#include "bftdc/crypto.hpp"
#include "bftdc/effects.hpp"
#include "bftdc/ids.hpp"
#include "bftdc/messages.hpp"

namespace bftdc {

enum class CoordinatorPhase : std::uint8_t { Collecting, Preparing, Agreeing, Decided };

std::string_view to_string(CoordinatorPhase p);

struct CoordinatorConfig {
  std::uint32_t f = 1;
  PrincipalId initiator = PrincipalId::initiator();
  SimTime prepare_timeout = 10;
  SimTime agreement_base = 50;
  SimTime decision_retransmit = 20;
  // Plain 2PC: a single coordinator decides right after the prepare phase.
  bool plain = false;
};

// One coordinator replica's handling of one transaction.
class CoordinatorInstance {
 public:
  CoordinatorInstance(ReplicaId self, TransactionId t, CoordinatorConfig config,
                      std::shared_ptr<const Signer> signer,
                      std::shared_ptr<const KeyDirectory> keys);

  Effects on_message(const SignedEnvelope& env, SimTime now);
  Effects on_timer(const TimerKey& key, SimTime now);

  Effects on_register(const SignedEnvelope& env, SimTime now);
  Effects on_initiator_request(const SignedEnvelope& env, SimTime now);
  Effects on_vote(const SignedEnvelope& env, SimTime now);
  Effects on_prepare_timeout(SimTime now);
  Effects on_endpoint_query(const SignedEnvelope& env);
  Effects on_endpoint_reply(const SignedEnvelope& env);

  ReplicaId self() const { return self_; }
  TransactionId transaction() const { return t_; }
  CoordinatorPhase phase() const { return phase_; }
  // Registrations and votes known locally.
  const DecisionCertificate& local_certificate() const { return local_; }
  const std::map<ParticipantId, std::string>& endpoints() const { return endpoints_; }
  std::optional<Outcome> outcome() const { return outcome_; }
  const AgreementInstance& agreement() const { return agreement_; }
  bool has_initiator_request() const { return request_.has_value(); }

 private:
  void set_phase(Effects& fx, CoordinatorPhase to, std::string_view reason);
  void log(Effects& fx, std::string_view event, std::string_view reason,
           const SignedEnvelope* env) const;
  bool all_voted() const;
  void store_vote(Effects& fx, const VoteRecord& record);
  void finish_prepare(Effects& fx, SimTime now, std::string_view reason);
  void absorb(Effects& fx, AgreementStep step, SimTime now);
  void decide(Effects& fx, Outcome o, SimTime now);
  void notify(Effects& fx, ParticipantId p);
  void broadcast_decision(Effects& fx);
  Detail detail(std::string_view event) const;

  ReplicaId self_;
  TransactionId t_;
  CoordinatorConfig config_;
  std::shared_ptr<const Signer> signer_;
  std::shared_ptr<const KeyDirectory> keys_;

  CoordinatorPhase phase_ = CoordinatorPhase::Collecting;
  DecisionCertificate local_;
  std::map<ParticipantId, std::string> endpoints_;
  std::map<ParticipantId, VoteRecord> early_votes_;
  std::optional<SignedEnvelope> request_;
  std::optional<Outcome> outcome_;
  std::optional<SignedEnvelope> decision_;
  std::set<ParticipantId> queried_;
  AgreementInstance agreement_;
};

// A coordinator replica hosting any number of independent transactions.
class Replica {
 public:
  Replica(ReplicaId id, CoordinatorConfig config, std::shared_ptr<const Signer> signer,
          std::shared_ptr<const KeyDirectory> keys);

  Effects on_message(const SignedEnvelope& env, SimTime now);
  Effects on_timer(const TimerKey& key, SimTime now);

  ReplicaId id() const { return id_; }
  const CoordinatorInstance* find(TransactionId t) const;
  CoordinatorInstance& instance(TransactionId t);

 private:
  ReplicaId id_;
  CoordinatorConfig config_;
  std::shared_ptr<const Signer> signer_;
  std::shared_ptr<const KeyDirectory> keys_;
  std::map<TransactionId, CoordinatorInstance> instances_;
};

}  // namespace bftdc
