#include "bftdc/coordinator.hpp"

namespace bftdc {

std::string_view to_string(CoordinatorPhase p) {
  switch (p) {
    case CoordinatorPhase::Collecting: return "Collecting";
    case CoordinatorPhase::Preparing: return "Preparing";
    case CoordinatorPhase::Agreeing: return "Agreeing";
    case CoordinatorPhase::Decided: return "Decided";
  }
  return "Unknown";
}

CoordinatorInstance::CoordinatorInstance(ReplicaId self, TransactionId t,
                                         CoordinatorConfig config,
                                         std::shared_ptr<const Signer> signer,
                                         std::shared_ptr<const KeyDirectory> keys)
    : self_(self),
      t_(t),
      config_(config),
      signer_(signer),
      keys_(keys),
      local_(t),
      agreement_(self, t, AgreementConfig{config.f, config.agreement_base}, signer, keys) {}

Detail CoordinatorInstance::detail(std::string_view event) const {
  Detail d;
  d["t"] = t_.value();
  d["event"] = event;
  return d;
}

void CoordinatorInstance::log(Effects& fx, std::string_view event, std::string_view reason,
                              const SignedEnvelope* env) const {
  auto d = detail(event);
  d["reason"] = reason;
  if (env) {
    d["kind"] = to_string(env->kind);
    d["from"] = to_string(env->sender);
  }
  fx.note(NoteKind::Log, std::move(d));
}

void CoordinatorInstance::set_phase(Effects& fx, CoordinatorPhase to, std::string_view reason) {
  if (to <= phase_) return;
  auto d = detail("phase");
  d["from"] = to_string(phase_);
  d["to"] = to_string(to);
  d["reason"] = reason;
  phase_ = to;
  fx.note(NoteKind::StateTransition, std::move(d));
}

Effects CoordinatorInstance::on_message(const SignedEnvelope& env, SimTime now) {
  Effects fx;
  try {
    switch (env.kind) {
      case MessageKind::Register: return on_register(env, now);
      case MessageKind::InitiatorCommitRequest:
      case MessageKind::InitiatorAbortRequest: return on_initiator_request(env, now);
      case MessageKind::VoteMsg: return on_vote(env, now);
      case MessageKind::EndpointQuery: return on_endpoint_query(env);
      case MessageKind::EndpointReply: return on_endpoint_reply(env);
      case MessageKind::BaPrePrepare:
      case MessageKind::BaPrepare:
      case MessageKind::BaCommit:
      case MessageKind::ViewChange:
      case MessageKind::NewView:
      case MessageKind::ViewChangeFetch:
      case MessageKind::CommitProof:
        if (config_.plain) break;
        absorb(fx, agreement_.on_message(env, local_, now), now);
        return fx;
      default: break;
    }
  } catch (const DecodeError&) {
    log(fx, "rejected", "malformed", &env);
    return fx;
  }
  log(fx, "rejected", "unexpected-kind", &env);
  return fx;
}

Effects CoordinatorInstance::on_timer(const TimerKey& key, SimTime now) {
  Effects fx;
  switch (key.kind) {
    case TimerKind::PrepareDeadline: return on_prepare_timeout(now);
    case TimerKind::DecisionRetransmit:
      if (phase_ != CoordinatorPhase::Decided) return fx;
      broadcast_decision(fx);
      fx.timer({TimerKind::DecisionRetransmit, t_, 0}, now + config_.decision_retransmit);
      return fx;
    case TimerKind::ViewTimer:
      if (!config_.plain) absorb(fx, agreement_.on_timer(key, local_, now), now);
      return fx;
    default: return fx;
  }
}

Effects CoordinatorInstance::on_register(const SignedEnvelope& env, SimTime) {
  Effects fx;
  if (!env.sender.is_participant() || !verify(*keys_, env)) {
    log(fx, "rejected", "unauthenticated-register", &env);
    return fx;
  }
  auto msg = unseal<RegisterMsg>(env);
  auto p = env.sender.as_participant();
  if (msg.record.t != t_ || msg.record.participant != p || !msg.record.verify(*keys_)) {
    log(fx, "rejected", "bad-registration-record", &env);
    return fx;
  }
  if (!local_.contains(p)) {
    if (phase_ != CoordinatorPhase::Collecting) {
      auto d = detail("late-registration");
      d["participant"] = p.value();
      d["phase"] = to_string(phase_);
      fx.note(NoteKind::Log, std::move(d));
      return fx;
    }
    local_.add_registration(msg.record);
    endpoints_[p] = msg.endpoint;
    auto d = detail("registered");
    d["participant"] = p.value();
    fx.note(NoteKind::Log, std::move(d));
  } else {
    endpoints_.try_emplace(p, msg.endpoint);
  }
  fx.send(env.sender, seal(*signer_, RegisterAck{t_, p}));
  return fx;
}

Effects CoordinatorInstance::on_initiator_request(const SignedEnvelope& env, SimTime now) {
  Effects fx;
  if (env.sender != config_.initiator || !verify(*keys_, env)) {
    log(fx, "rejected", "bad-initiator-signature", &env);
    return fx;
  }
  auto req = unseal<InitiatorRequest>(env);
  if (req.t != t_) {
    log(fx, "rejected", "wrong-transaction", &env);
    return fx;
  }
  if (request_) return fx;
  request_ = env;
  if (phase_ != CoordinatorPhase::Collecting) {
    log(fx, "initiator-request-ignored", to_string(phase_), &env);
    return fx;
  }

  if (req.requested == Outcome::Abort) {
    early_votes_.clear();
    set_phase(fx, CoordinatorPhase::Agreeing, "initiator-abort");
    if (config_.plain) {
      decide(fx, Outcome::Abort, now);
    } else {
      absorb(fx, agreement_.start(Outcome::Abort, local_, now), now);
    }
    return fx;
  }

  set_phase(fx, CoordinatorPhase::Preparing, "initiator-commit");
  auto prepare = seal(*signer_, PrepareRequest{t_, env});
  for (const auto& [p, e] : local_.entries()) fx.send(PrincipalId::participant(p), prepare);
  fx.timer({TimerKind::PrepareDeadline, t_, 0}, now + config_.prepare_timeout);
  for (const auto& [p, record] : early_votes_) {
    if (local_.contains(p)) local_.set_vote(record);
  }
  early_votes_.clear();
  if (all_voted()) finish_prepare(fx, now, "all-votes");
  return fx;
}

bool CoordinatorInstance::all_voted() const {
  for (const auto& [p, e] : local_.entries()) {
    if (!e.vote) return false;
  }
  return true;
}

Effects CoordinatorInstance::on_vote(const SignedEnvelope& env, SimTime now) {
  Effects fx;
  if (!env.sender.is_participant() || !verify(*keys_, env)) {
    log(fx, "rejected", "unauthenticated-vote", &env);
    return fx;
  }
  auto msg = unseal<VoteMsg>(env);
  auto p = env.sender.as_participant();
  if (msg.record.t != t_) {
    log(fx, "rejected", "stale-transaction", &env);
    return fx;
  }
  if (msg.record.participant != p || !msg.record.verify(*keys_)) {
    log(fx, "rejected", "bad-vote-record", &env);
    return fx;
  }
  if (!local_.contains(p)) {
    log(fx, "rejected", "unregistered-voter", &env);
    return fx;
  }

  const VoteRecord* first = nullptr;
  if (const auto* e = local_.find(p); e && e->vote) first = &*e->vote;
  if (auto it = early_votes_.find(p); it != early_votes_.end()) first = &it->second;
  if (first) {
    if (first->vote != msg.record.vote) {
      auto d = detail("conflicting-vote");
      d["participant"] = p.value();
      d["kept"] = to_string(first->vote);
      d["ignored"] = to_string(msg.record.vote);
      fx.note(NoteKind::ByzantineEvidence, std::move(d));
    }
    return fx;
  }

  switch (phase_) {
    case CoordinatorPhase::Collecting:
      early_votes_.emplace(p, msg.record);
      return fx;
    case CoordinatorPhase::Preparing:
      local_.set_vote(msg.record);
      if (all_voted()) finish_prepare(fx, now, "all-votes");
      return fx;
    default:
      log(fx, "late-vote", to_string(phase_), &env);
      return fx;
  }
}

Effects CoordinatorInstance::on_prepare_timeout(SimTime now) {
  Effects fx;
  if (phase_ != CoordinatorPhase::Preparing) return fx;
  finish_prepare(fx, now, "prepare-timeout");
  return fx;
}

void CoordinatorInstance::finish_prepare(Effects& fx, SimTime now, std::string_view reason) {
  set_phase(fx, CoordinatorPhase::Agreeing, reason);
  auto o = evaluate_outcome(local_);
  if (config_.plain) {
    decide(fx, o, now);
    return;
  }
  absorb(fx, agreement_.start(o, local_, now), now);
}

void CoordinatorInstance::absorb(Effects& fx, AgreementStep step, SimTime now) {
  fx.merge(std::move(step.fx));
  if (step.adopted) {
    if (phase_ < CoordinatorPhase::Agreeing) {
      set_phase(fx, CoordinatorPhase::Agreeing, "proposal-accepted");
    }
    for (const auto& [p, e] : step.adopted->entries()) {
      if (!local_.contains(p)) local_.add_registration(e.registration);
      if (endpoints_.contains(p) || queried_.contains(p)) continue;
      queried_.insert(p);
      auto query = seal(*signer_, EndpointQuery{t_, p});
      for (auto r : step.sources) {
        if (r != self_) fx.send(PrincipalId::replica(r), query);
      }
    }
  }
  if (step.committed) {
    if (auto o = agreement_.decided()) decide(fx, *o, now);
  }
}

void CoordinatorInstance::decide(Effects& fx, Outcome o, SimTime now) {
  if (outcome_) return;
  outcome_ = o;
  decision_ = seal(*signer_, DecisionNotification{t_, o});
  set_phase(fx, CoordinatorPhase::Decided, to_string(o));
  auto d = detail("decided");
  d["outcome"] = to_string(o);
  fx.note(NoteKind::StateTransition, std::move(d));
  broadcast_decision(fx);
  fx.timer({TimerKind::DecisionRetransmit, t_, 0}, now + config_.decision_retransmit);
}

void CoordinatorInstance::notify(Effects& fx, ParticipantId p) {
  fx.send(PrincipalId::participant(p), *decision_);
}

void CoordinatorInstance::broadcast_decision(Effects& fx) {
  for (const auto& [p, endpoint] : endpoints_) fx.send(PrincipalId::participant(p), *decision_);
  fx.send(config_.initiator, *decision_);
}

Effects CoordinatorInstance::on_endpoint_query(const SignedEnvelope& env) {
  Effects fx;
  if (!env.sender.is_replica() || env.sender.index >= replica_count(config_.f) ||
      !verify(*keys_, env)) {
    log(fx, "rejected", "bad-signature", &env);
    return fx;
  }
  auto q = unseal<EndpointQuery>(env);
  if (q.t != t_) return fx;
  EndpointReply reply{t_, q.participant, std::nullopt, {}};
  auto it = endpoints_.find(q.participant);
  if (const auto* e = local_.find(q.participant); e && it != endpoints_.end()) {
    reply.registration = e->registration;
    reply.endpoint = it->second;
  }
  fx.send(env.sender, seal(*signer_, reply));
  return fx;
}

Effects CoordinatorInstance::on_endpoint_reply(const SignedEnvelope& env) {
  Effects fx;
  if (!env.sender.is_replica() || env.sender.index >= replica_count(config_.f) ||
      !verify(*keys_, env)) {
    log(fx, "rejected", "bad-signature", &env);
    return fx;
  }
  auto reply = unseal<EndpointReply>(env);
  if (reply.t != t_ || endpoints_.contains(reply.participant)) return fx;
  if (!reply.registration) {
    log(fx, "endpoint-unknown", "negative-reply", &env);
    return fx;
  }
  const auto& rec = *reply.registration;
  if (rec.t != t_ || rec.participant != reply.participant || !rec.verify(*keys_)) {
    log(fx, "rejected", "forged-registration", &env);
    return fx;
  }
  local_.add_registration(rec);
  endpoints_[reply.participant] = reply.endpoint;
  auto d = detail("endpoint-learned");
  d["participant"] = reply.participant.value();
  d["from"] = to_string(env.sender);
  fx.note(NoteKind::Log, std::move(d));
  if (outcome_) notify(fx, reply.participant);
  return fx;
}

Replica::Replica(ReplicaId id, CoordinatorConfig config, std::shared_ptr<const Signer> signer,
                 std::shared_ptr<const KeyDirectory> keys)
    : id_(id), config_(config), signer_(std::move(signer)), keys_(std::move(keys)) {}

CoordinatorInstance& Replica::instance(TransactionId t) {
  auto it = instances_.find(t);
  if (it == instances_.end()) {
    it = instances_.try_emplace(t, id_, t, config_, signer_, keys_).first;
  }
  return it->second;
}

const CoordinatorInstance* Replica::find(TransactionId t) const {
  auto it = instances_.find(t);
  return it == instances_.end() ? nullptr : &it->second;
}

Effects Replica::on_message(const SignedEnvelope& env, SimTime now) {
  TransactionId t;
  try {
    t = transaction_of(env);
  } catch (const DecodeError&) {
    Effects fx;
    Detail d;
    d["event"] = "rejected";
    d["reason"] = "malformed";
    d["kind"] = to_string(env.kind);
    fx.note(NoteKind::Log, std::move(d));
    return fx;
  }
  return instance(t).on_message(env, now);
}

Effects Replica::on_timer(const TimerKey& key, SimTime now) {
  auto it = instances_.find(key.t);
  if (it == instances_.end()) return {};
  return it->second.on_timer(key, now);
}

}  // namespace bftdc
