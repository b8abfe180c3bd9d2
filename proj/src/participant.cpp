#include "bftdc/participant.hpp"

#include <algorithm>

namespace bftdc {
namespace {

Detail base_detail(TransactionId t, std::string_view event) {
  Detail d;
  d["t"] = t.value();
  d["event"] = event;
  return d;
}

Detail replica_list(const std::set<ReplicaId>& rs) {
  Detail arr = Detail::array();
  for (auto r : rs) arr.push_back(r.value());
  return arr;
}

}  // namespace

std::string_view to_string(ParticipantState s) {
  switch (s) {
    case ParticipantState::Idle: return "Idle";
    case ParticipantState::Registering: return "Registering";
    case ParticipantState::Registered: return "Registered";
    case ParticipantState::Prepared: return "Prepared";
    case ParticipantState::Committed: return "Committed";
    case ParticipantState::Aborted: return "Aborted";
  }
  return "Unknown";
}

std::string_view to_string(ReplyKind k) {
  switch (k) {
    case ReplyKind::Ok: return "ok";
    case ReplyKind::Exception: return "exception";
    case ReplyKind::Timeout: return "timeout";
  }
  return "unknown";
}

Participant::Participant(ParticipantId id, TransactionId t, ParticipantConfig config,
                         std::shared_ptr<const Signer> signer,
                         std::shared_ptr<const KeyDirectory> keys)
    : id_(id),
      t_(t),
      config_(std::move(config)),
      signer_(std::move(signer)),
      keys_(std::move(keys)) {}

Effects Participant::log(std::string_view reason, const SignedEnvelope* env) const {
  Effects fx;
  auto d = base_detail(t_, "rejected");
  d["reason"] = reason;
  if (env) {
    d["kind"] = to_string(env->kind);
    d["from"] = to_string(env->sender);
  }
  fx.note(NoteKind::Log, std::move(d));
  return fx;
}

bool Participant::from_known_replica(const SignedEnvelope& env) const {
  if (!env.sender.is_replica()) return false;
  auto r = env.sender.as_replica();
  if (std::find(config_.replicas.begin(), config_.replicas.end(), r) == config_.replicas.end()) {
    return false;
  }
  return verify(*keys_, env);
}

void Participant::transition(Effects& fx, ParticipantState to, SimTime, std::string_view reason) {
  auto d = base_detail(t_, "state");
  d["from"] = to_string(state_);
  d["to"] = to_string(to);
  d["reason"] = reason;
  state_ = to;
  fx.note(NoteKind::StateTransition, std::move(d));
}

void Participant::reply_to_initiator(Effects& fx, ReplyStatus status) {
  if (replied_) return;
  replied_ = true;
  fx.send(config_.initiator, seal(*signer_, PropagateReply{t_, status}));
}

void Participant::send_vote(Effects& fx, Vote v, const std::vector<ReplicaId>& to) {
  auto env = seal(*signer_, VoteMsg{VoteRecord::make(t_, id_, v, *signer_)});
  for (auto r : to) fx.send(PrincipalId::replica(r), env);
}

Effects Participant::join(SimTime now) {
  if (state_ == ParticipantState::Registering) return {};
  if (state_ != ParticipantState::Idle) return log("join-out-of-order");
  Effects fx;
  auto env = seal(*signer_, RegisterMsg{RegistrationRecord::make(t_, id_, *signer_),
                                        config_.endpoint});
  for (auto r : config_.replicas) fx.send(PrincipalId::replica(r), env);
  transition(fx, ParticipantState::Registering, now, "join");
  fx.timer({TimerKind::RegistrationDeadline, t_, 0}, now + config_.registration_timeout);
  return fx;
}

Effects Participant::on_message(const SignedEnvelope& env, SimTime now) {
  switch (env.kind) {
    case MessageKind::Propagate: {
      if (env.sender != config_.initiator || !verify(*keys_, env)) {
        return log("bad-propagate", &env);
      }
      return join(now);
    }
    case MessageKind::RegisterAck: return on_register_ack(env, now);
    case MessageKind::PrepareRequest: return on_prepare_request(env, now);
    case MessageKind::DecisionNotification: return on_decision(env, now);
    default: return log("unexpected-kind", &env);
  }
}

Effects Participant::on_timer(const TimerKey& key, SimTime now) {
  switch (key.kind) {
    case TimerKind::RegistrationDeadline: {
      if (state_ != ParticipantState::Registering) return {};
      Effects fx;
      reply_to_initiator(fx, ReplyStatus::Exception);
      fx.merge(abort_unilaterally(now, "registration-timeout"));
      return fx;
    }
    case TimerKind::UnilateralAbort:
      if (state_ != ParticipantState::Registered) return {};
      return abort_unilaterally(now, "unilateral-delay");
    default: return {};
  }
}

Effects Participant::on_register_ack(const SignedEnvelope& env, SimTime now) {
  if (!from_known_replica(env)) return log("bad-signature", &env);
  RegisterAck ack;
  try {
    ack = unseal<RegisterAck>(env);
  } catch (const DecodeError&) {
    return log("malformed", &env);
  }
  if (ack.t != t_ || ack.participant != id_) return log("ack-mismatch", &env);
  if (state_ != ParticipantState::Registering) return {};
  if (!acks_.insert(env.sender.as_replica()).second) return {};
  if (acks_.size() < registration_quorum(config_.f)) return {};

  Effects fx;
  transition(fx, ParticipantState::Registered, now, "registration-quorum");
  reply_to_initiator(fx, ReplyStatus::Ok);
  if (config_.unilateral_abort == UnilateralAbort::Immediate) {
    fx.merge(abort_unilaterally(now, "unilateral-immediate"));
  } else if (config_.unilateral_abort == UnilateralAbort::AfterDelay) {
    fx.timer({TimerKind::UnilateralAbort, t_, 0}, now + config_.abort_delay);
  }
  return fx;
}

Effects Participant::on_prepare_request(const SignedEnvelope& env, SimTime now) {
  if (!from_known_replica(env)) return log("bad-signature", &env);
  PrepareRequest req;
  try {
    req = unseal<PrepareRequest>(env);
  } catch (const DecodeError&) {
    return log("malformed", &env);
  }
  if (req.t != t_) return log("wrong-transaction", &env);

  if (config_.know_initiator_key) {
    const auto& cert = req.prepare_certificate;
    bool ok = cert.kind == MessageKind::InitiatorCommitRequest &&
              cert.sender == config_.initiator && verify(*keys_, cert);
    if (ok) {
      try {
        ok = unseal<InitiatorRequest>(cert).t == t_;
      } catch (const DecodeError&) {
        ok = false;
      }
    }
    if (!ok) return log("bad-prepare-certificate", &env);
  }

  auto from = env.sender.as_replica();
  bool repeated = !prepare_requests_from_.insert(from).second;

  if (vote_) {
    Effects fx;
    if (repeated) send_vote(fx, *vote_, {from});
    return fx;
  }

  Effects fx;
  switch (state_) {
    case ParticipantState::Registered: {
      auto v = config_.willing ? Vote::Prepared : Vote::Aborted;
      vote_ = v;
      send_vote(fx, v, config_.replicas);
      transition(fx, v == Vote::Prepared ? ParticipantState::Prepared : ParticipantState::Aborted,
                 now, v == Vote::Prepared ? "voted-prepared" : "voted-aborted");
      return fx;
    }
    case ParticipantState::Aborted:
      // Unilaterally aborted before any prepare request.
      vote_ = Vote::Aborted;
      send_vote(fx, Vote::Aborted, config_.replicas);
      return fx;
    default:
      prepare_requests_from_.erase(from);
      return log("prepare-before-registration", &env);
  }
}

Effects Participant::on_decision(const SignedEnvelope& env, SimTime now) {
  if (!from_known_replica(env)) return log("bad-signature", &env);
  DecisionNotification msg;
  try {
    msg = unseal<DecisionNotification>(env);
  } catch (const DecodeError&) {
    return log("malformed", &env);
  }
  if (msg.t != t_) return log("wrong-transaction", &env);

  auto& senders = pending_decisions_[msg.o];
  if (!senders.insert(env.sender.as_replica()).second) return {};
  if (senders.size() != decision_quorum(config_.f)) return {};

  Effects fx;
  auto quorum = base_detail(t_, "decision-quorum");
  quorum["outcome"] = to_string(msg.o);
  quorum["senders"] = replica_list(senders);
  quorum["state"] = to_string(state_);

  auto anomaly = [&](std::string_view reason) {
    if (!anomalies_reported_.insert(msg.o).second) return;
    auto d = base_detail(t_, "decision-anomaly");
    d["reason"] = reason;
    d["outcome"] = to_string(msg.o);
    d["state"] = to_string(state_);
    d["senders"] = replica_list(senders);
    fx.note(NoteKind::CheckAnomaly, std::move(d));
  };

  if (is_terminal(state_)) {
    bool matches = (state_ == ParticipantState::Committed) == (msg.o == Outcome::Commit);
    if (!matches) anomaly(unilateral_ ? "commit-after-unilateral-abort" : "conflicting-quorum");
    return fx;
  }

  if (state_ == ParticipantState::Prepared) {
    fx.note(NoteKind::DecisionDelivered, std::move(quorum));
    transition(fx, msg.o == Outcome::Commit ? ParticipantState::Committed
                                            : ParticipantState::Aborted,
               now, "decision-quorum");
    return fx;
  }
  if (msg.o == Outcome::Abort) {
    fx.note(NoteKind::DecisionDelivered, std::move(quorum));
    transition(fx, ParticipantState::Aborted, now, "decision-quorum");
    return fx;
  }
  anomaly("commit-without-prepared-vote");
  return fx;
}

Effects Participant::abort_unilaterally(SimTime now, std::string_view reason) {
  if (is_terminal(state_) || vote_ == Vote::Prepared) return {};
  Effects fx;
  unilateral_ = true;
  transition(fx, ParticipantState::Aborted, now, reason);
  return fx;
}

Initiator::Initiator(std::uint32_t index, TransactionId t, InitiatorConfig config,
                     std::shared_ptr<const Signer> signer,
                     std::shared_ptr<const KeyDirectory> keys)
    : index_(index),
      t_(t),
      config_(std::move(config)),
      signer_(std::move(signer)),
      keys_(std::move(keys)) {}

Effects Initiator::start(SimTime now) {
  if (started_) return {};
  started_ = true;
  Effects fx;
  auto d = base_detail(t_, "start");
  d["participants"] = config_.participants.size();
  fx.note(NoteKind::StateTransition, std::move(d));
  auto env = seal(*signer_, Propagate{t_});
  for (auto p : config_.participants) {
    propagated_.insert(p);
    fx.send(PrincipalId::participant(p), env);
  }
  if (propagated_.empty()) {
    issue(fx, Outcome::Commit, now, "no-participants");
  } else {
    fx.timer({TimerKind::ReplyDeadline, t_, 0}, now + config_.reply_timeout);
  }
  return fx;
}

void Initiator::issue(Effects& fx, Outcome requested, SimTime, std::string_view reason) {
  if (request_) return;
  request_ = requested;
  auto d = base_detail(t_, "request");
  d["outcome"] = to_string(requested);
  d["reason"] = reason;
  fx.note(NoteKind::StateTransition, std::move(d));
  auto env = seal(*signer_, InitiatorRequest{t_, requested});
  for (auto r : config_.replicas) fx.send(PrincipalId::replica(r), env);
}

Effects Initiator::on_message(const SignedEnvelope& env, SimTime now) {
  switch (env.kind) {
    case MessageKind::PropagateReply: return on_reply(env, now);
    case MessageKind::DecisionNotification: return on_decision(env, now);
    default: return {};
  }
}

Effects Initiator::on_reply(const SignedEnvelope& env, SimTime now) {
  if (!env.sender.is_participant() || !verify(*keys_, env)) return {};
  auto p = env.sender.as_participant();
  if (!propagated_.contains(p) || replies_.contains(p)) return {};
  PropagateReply reply;
  try {
    reply = unseal<PropagateReply>(env);
  } catch (const DecodeError&) {
    return {};
  }
  if (reply.t != t_) return {};
  replies_[p] = reply.status == ReplyStatus::Ok ? ReplyKind::Ok : ReplyKind::Exception;

  Effects fx;
  if (reply.status == ReplyStatus::Exception) {
    issue(fx, Outcome::Abort, now, "participant-exception");
  } else if (replies_.size() == propagated_.size() &&
             std::all_of(replies_.begin(), replies_.end(),
                         [](const auto& kv) { return kv.second == ReplyKind::Ok; })) {
    issue(fx, Outcome::Commit, now, "all-replies-ok");
  }
  return fx;
}

Effects Initiator::on_timer(const TimerKey& key, SimTime now) {
  if (key.kind != TimerKind::ReplyDeadline || request_) return {};
  for (auto p : propagated_) replies_.try_emplace(p, ReplyKind::Timeout);
  Effects fx;
  issue(fx, Outcome::Abort, now, "reply-timeout");
  return fx;
}

Effects Initiator::on_decision(const SignedEnvelope& env, SimTime) {
  if (!env.sender.is_replica() || !verify(*keys_, env)) return {};
  auto r = env.sender.as_replica();
  if (std::find(config_.replicas.begin(), config_.replicas.end(), r) == config_.replicas.end()) {
    return {};
  }
  DecisionNotification msg;
  try {
    msg = unseal<DecisionNotification>(env);
  } catch (const DecodeError&) {
    return {};
  }
  if (msg.t != t_ || outcome_) return {};
  auto& senders = outcome_acks_[msg.o];
  senders.insert(r);
  if (senders.size() < decision_quorum(config_.f)) return {};

  outcome_ = msg.o;
  Effects fx;
  auto q = base_detail(t_, "decision-quorum");
  q["outcome"] = to_string(msg.o);
  q["senders"] = replica_list(senders);
  q["state"] = "Waiting";
  fx.note(NoteKind::DecisionDelivered, std::move(q));
  auto d = base_detail(t_, "state");
  d["from"] = "Waiting";
  d["to"] = msg.o == Outcome::Commit ? "Committed" : "Aborted";
  d["reason"] = "decision-quorum";
  fx.note(NoteKind::StateTransition, std::move(d));
  return fx;
}

}  // namespace bftdc
