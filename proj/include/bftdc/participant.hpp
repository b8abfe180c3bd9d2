#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "bftdc/crypto.hpp"
#include "bftdc/effects.hpp"
#include "bftdc/ids.hpp"
#include "bftdc/messages.hpp"

namespace bftdc {

enum class ParticipantState : std::uint8_t {
  Idle,
  Registering,
  Registered,
  Prepared,
  Committed,
  Aborted,
};

std::string_view to_string(ParticipantState s);
constexpr bool is_terminal(ParticipantState s) {
  return s == ParticipantState::Committed || s == ParticipantState::Aborted;
}

enum class UnilateralAbort : std::uint8_t { Never, Immediate, AfterDelay };

struct ParticipantConfig {
  std::uint32_t f = 1;
  std::vector<ReplicaId> replicas;
  PrincipalId initiator = PrincipalId::initiator();
  std::string endpoint;
  // When false the prepare certificate is not checked.
  bool know_initiator_key = true;
  // Whether the local resource manager can prepare.
  bool willing = true;
  UnilateralAbort unilateral_abort = UnilateralAbort::Never;
  SimTime abort_delay = 0;
  SimTime registration_timeout = 30;
};

// One participant's view of one transaction.
class Participant {
 public:
  Participant(ParticipantId id, TransactionId t, ParticipantConfig config,
              std::shared_ptr<const Signer> signer, std::shared_ptr<const KeyDirectory> keys);

  // Sends Register to every replica. A second call is a no-op; a call after
  // registration has finished is refused with a log note.
  Effects join(SimTime now);

  Effects on_message(const SignedEnvelope& env, SimTime now);
  Effects on_timer(const TimerKey& key, SimTime now);

  Effects on_register_ack(const SignedEnvelope& env, SimTime now);
  Effects on_prepare_request(const SignedEnvelope& env, SimTime now);
  Effects on_decision(const SignedEnvelope& env, SimTime now);

  // Allowed only before a Prepared vote was sent.
  Effects abort_unilaterally(SimTime now, std::string_view reason);

  ParticipantId id() const { return id_; }
  TransactionId transaction() const { return t_; }
  ParticipantState state() const { return state_; }
  std::optional<Vote> vote() const { return vote_; }
  const std::set<ReplicaId>& acks() const { return acks_; }
  const std::map<Outcome, std::set<ReplicaId>>& pending_decisions() const {
    return pending_decisions_;
  }
  bool unilaterally_aborted() const { return unilateral_; }

 private:
  bool from_known_replica(const SignedEnvelope& env) const;
  void transition(Effects& fx, ParticipantState to, SimTime now, std::string_view reason);
  void reply_to_initiator(Effects& fx, ReplyStatus status);
  void send_vote(Effects& fx, Vote v, const std::vector<ReplicaId>& to);
  Effects log(std::string_view reason, const SignedEnvelope* env = nullptr) const;

  ParticipantId id_;
  TransactionId t_;
  ParticipantConfig config_;
  std::shared_ptr<const Signer> signer_;
  std::shared_ptr<const KeyDirectory> keys_;

  ParticipantState state_ = ParticipantState::Idle;
  std::set<ReplicaId> acks_;
  std::optional<Vote> vote_;
  std::set<ReplicaId> prepare_requests_from_;
  std::map<Outcome, std::set<ReplicaId>> pending_decisions_;
  std::set<Outcome> anomalies_reported_;
  bool replied_ = false;
  bool unilateral_ = false;
};

enum class ReplyKind : std::uint8_t { Ok, Exception, Timeout };
std::string_view to_string(ReplyKind k);

struct InitiatorConfig {
  std::uint32_t f = 1;
  std::vector<ReplicaId> replicas;
  std::vector<ParticipantId> participants;
  SimTime reply_timeout = 40;
};

// The initiator starts, propagates and terminates the transaction, and
// learns the outcome like any other participant.
class Initiator {
 public:
  Initiator(std::uint32_t index, TransactionId t, InitiatorConfig config,
            std::shared_ptr<const Signer> signer, std::shared_ptr<const KeyDirectory> keys);

  Effects start(SimTime now);
  Effects on_message(const SignedEnvelope& env, SimTime now);
  Effects on_timer(const TimerKey& key, SimTime now);

  PrincipalId principal() const { return PrincipalId::initiator(index_); }
  TransactionId transaction() const { return t_; }
  std::optional<Outcome> request() const { return request_; }
  std::optional<Outcome> outcome() const { return outcome_; }
  const std::map<ParticipantId, ReplyKind>& replies() const { return replies_; }
  const std::map<Outcome, std::set<ReplicaId>>& outcome_acks() const { return outcome_acks_; }

 private:
  Effects on_reply(const SignedEnvelope& env, SimTime now);
  Effects on_decision(const SignedEnvelope& env, SimTime now);
  void issue(Effects& fx, Outcome requested, SimTime now, std::string_view reason);

  std::uint32_t index_;
  TransactionId t_;
  InitiatorConfig config_;
  std::shared_ptr<const Signer> signer_;
  std::shared_ptr<const KeyDirectory> keys_;

  bool started_ = false;
  std::set<ParticipantId> propagated_;
  std::map<ParticipantId, ReplyKind> replies_;
  std::optional<Outcome> request_;
  std::map<Outcome, std::set<ReplicaId>> outcome_acks_;
  std::optional<Outcome> outcome_;
};

}  // namespace bftdc
