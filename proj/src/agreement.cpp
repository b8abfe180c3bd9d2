#include "bftdc/agreement.hpp"

#include <algorithm>
#include <stdexcept>

namespace bftdc {
namespace {

Detail participant_list(const DecisionCertificate& c, bool prepared_only) {
  Detail arr = Detail::array();
  for (const auto& [p, e] : c.entries()) {
    if (prepared_only && !(e.vote && e.vote->vote == Vote::Prepared)) continue;
    arr.push_back(p.value());
  }
  return arr;
}

Detail vote_map(const DecisionCertificate& c) {
  Detail obj = Detail::object();
  for (const auto& [p, e] : c.entries()) {
    if (e.vote) obj[std::to_string(p.value())] = to_string(e.vote->vote);
  }
  return obj;
}

// Participant votes merged across payloads: Prepared beats Aborted.
void merge_records(DecisionCertificate& into, const DecisionCertificate& from) {
  for (const auto& [p, e] : from.entries()) {
    into.add_registration(e.registration);
    if (!e.vote) continue;
    const auto* have = into.find(p);
    if (!have->vote || (have->vote->vote != Vote::Prepared && e.vote->vote == Vote::Prepared)) {
      into.set_vote(*e.vote);
    }
  }
}

}  // namespace

std::string_view to_string(AgreementStatus s) {
  switch (s) {
    case AgreementStatus::Idle: return "idle";
    case AgreementStatus::BaPrePrepared: return "ba-pre-prepared";
    case AgreementStatus::BaPrepared: return "ba-prepared";
    case AgreementStatus::BaCommitted: return "ba-committed";
  }
  return "unknown";
}

SimTime view_timeout(SimTime base, View v) {
  auto shift = std::min<std::uint64_t>(v.value(), 40);
  return base << shift;
}

NewViewDecision build_new_view(std::span<const ViewChange> view_changes, TransactionId t) {
  // Rule 1: a ba-prepared proof from the highest view.
  const PrePrepareTuple* best = nullptr;
  bool conflict = false;
  for (const auto& vc : view_changes) {
    const auto& p = vc.p;
    if (!p.pre_prepared || p.prepared_proof.empty()) continue;
    const auto& tuple = *p.pre_prepared;
    if (!best || tuple.v > best->v) {
      best = &tuple;
      conflict = false;
    } else if (tuple.v == best->v &&
               (tuple.o != best->o ||
                certificate_digest(tuple.c) != certificate_digest(best->c))) {
      conflict = true;
    }
  }
  if (best && !conflict) return {best->o, best->c, 1};

  // Rule 2: rebuild from the records, in sender order so every replica
  // reconstructs the same certificate.
  std::vector<const ViewChange*> ordered;
  for (const auto& vc : view_changes) ordered.push_back(&vc);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ViewChange* a, const ViewChange* b) { return a->i < b->i; });
  DecisionCertificate c(t);
  for (const auto* vc : ordered) {
    if (vc->p.pre_prepared) merge_records(c, vc->p.pre_prepared->c);
    if (vc->p.fallback) merge_records(c, *vc->p.fallback);
  }
  auto o = evaluate_outcome(c);
  return {o, std::move(c), 2};
}

BuiltNewView build_new_view(std::span<const SignedEnvelope> view_changes, TransactionId t) {
  std::vector<ViewChange> decoded;
  BuiltNewView out;
  for (const auto& env : view_changes) {
    decoded.push_back(unseal<ViewChange>(env));
    out.refs.push_back({decoded.back().i, env.digest()});
  }
  out.decision = build_new_view(decoded, t);
  return out;
}

AgreementInstance::AgreementInstance(ReplicaId self, TransactionId t, AgreementConfig config,
                                     std::shared_ptr<const Signer> signer,
                                     std::shared_ptr<const KeyDirectory> keys)
    : self_(self),
      t_(t),
      config_(config),
      signer_(std::move(signer)),
      keys_(std::move(keys)) {}

Detail AgreementInstance::detail(std::string_view event) const {
  Detail d;
  d["t"] = t_.value();
  d["event"] = event;
  d["view"] = view_.value();
  return d;
}

std::optional<Outcome> AgreementInstance::decided() const {
  if (!committed_) return std::nullopt;
  return committed_->tuple.o;
}

std::optional<PrePrepareTuple> AgreementInstance::committed_tuple() const {
  if (!committed_) return std::nullopt;
  return committed_->tuple;
}

bool AgreementInstance::signed_by_replica(const SignedEnvelope& env) const {
  return env.sender.is_replica() && env.sender.index < replica_count(config_.f) &&
         verify(*keys_, env);
}

std::vector<ReplicaId> AgreementInstance::other_replicas() const {
  std::vector<ReplicaId> out;
  for (std::uint32_t i = 0; i < replica_count(config_.f); ++i) {
    if (ReplicaId{i} != self_) out.push_back(ReplicaId{i});
  }
  return out;
}

std::vector<ReplicaId> AgreementInstance::other_backups(View v) const {
  std::vector<ReplicaId> out;
  auto primary = primary_of(v, config_.f);
  for (auto r : other_replicas()) {
    if (r != primary) out.push_back(r);
  }
  return out;
}

void AgreementInstance::arm_timer(AgreementStep& step, View v, SimTime now) {
  if (!armed_.insert(v).second) return;
  auto duration = timeout_for(v);
  step.fx.timer({TimerKind::ViewTimer, t_, v.value()}, now + duration);
  auto d = detail("view-timer-armed");
  d["view"] = v.value();
  d["duration"] = duration;
  step.fx.note(NoteKind::Log, std::move(d));
}

void AgreementInstance::reject(AgreementStep& step, std::string_view event,
                               std::string_view reason, const SignedEnvelope* env) {
  auto d = detail(event);
  d["reason"] = reason;
  if (env) {
    d["kind"] = to_string(env->kind);
    d["from"] = to_string(env->sender);
  }
  step.fx.note(NoteKind::Log, std::move(d));
}

AgreementStep AgreementInstance::start(Outcome o, const DecisionCertificate& c, SimTime now) {
  AgreementStep step;
  if (started_) return step;
  if (!validate_certificate_consistency(c, o, t_, *keys_)) {
    throw std::invalid_argument("agreement start: certificate inconsistent with outcome");
  }
  started_ = true;
  proposal_ = {o, c};
  auto d = detail("agreement-started");
  d["outcome"] = to_string(o);
  d["primary"] = is_primary();
  step.fx.note(NoteKind::Log, std::move(d));
  if (status_ == AgreementStatus::BaCommitted) return step;
  arm_timer(step, view_, now);
  if (view_active_ && is_primary() && !accepted_) {
    BaPrePrepare msg{view_, t_, o, c};
    auto env = seal(*signer_, msg);
    for (auto r : other_replicas()) step.fx.send(PrincipalId::replica(r), env);
    log_.push_back(env);
    accept_proposal(step, view_, o, c, "ba-pre-prepared");
    check_prepared(step);
  }
  return step;
}

void AgreementInstance::accept_proposal(AgreementStep& step, View v, Outcome o,
                                        const DecisionCertificate& c, std::string_view event) {
  accepted_ = PrePrepareTuple{v, t_, o, c};
  accepted_digest_ = certificate_digest(c);
  last_pre_prepared_ = accepted_;
  status_ = AgreementStatus::BaPrePrepared;
  auto d = detail(event);
  d["outcome"] = to_string(o);
  d["digest"] = accepted_digest_.hex();
  step.fx.note(NoteKind::StateTransition, std::move(d));
}

void AgreementInstance::send_ba_prepare(AgreementStep& step) {
  BaPrepare msg{view_, t_, accepted_digest_, accepted_->o, self_};
  auto env = seal(*signer_, msg);
  for (auto r : other_backups(view_)) step.fx.send(PrincipalId::replica(r), env);
  prepares_[view_][{accepted_digest_, accepted_->o}].emplace(self_, env);
}

std::set<ReplicaId> AgreementInstance::evidence_senders(View v, const VoteKey& key) const {
  std::set<ReplicaId> out;
  auto primary = primary_of(v, config_.f);
  for (const auto* ballots : {&prepares_, &commits_}) {
    auto vit = ballots->find(v);
    if (vit == ballots->end()) continue;
    auto kit = vit->second.find(key);
    if (kit == vit->second.end()) continue;
    for (const auto& [r, env] : kit->second) {
      if (r != primary) out.insert(r);
    }
  }
  return out;
}

void AgreementInstance::check_prepared(AgreementStep& step) {
  if (status_ != AgreementStatus::BaPrePrepared || !accepted_ || !view_active_ ||
      accepted_->v != view_) {
    return;
  }
  VoteKey key{accepted_digest_, accepted_->o};
  auto senders = evidence_senders(view_, key);
  if (senders.size() < prepared_quorum(config_.f)) return;

  PreparedCertificate cert{*accepted_, {}};
  for (auto r : senders) {
    if (cert.proof.size() == prepared_quorum(config_.f)) break;
    const auto& pv = prepares_[view_][key];
    auto it = pv.find(r);
    cert.proof.push_back(it != pv.end() ? it->second : commits_[view_][key].at(r));
  }
  prepared_ = std::move(cert);
  status_ = AgreementStatus::BaPrepared;
  auto d = detail("ba-prepared");
  d["outcome"] = to_string(accepted_->o);
  step.fx.note(NoteKind::StateTransition, std::move(d));

  BaCommit msg{view_, t_, accepted_digest_, accepted_->o, self_};
  auto env = seal(*signer_, msg);
  for (auto r : other_replicas()) step.fx.send(PrincipalId::replica(r), env);
  commits_[view_][key].emplace(self_, env);
  check_committed(step);
}

void AgreementInstance::check_committed(AgreementStep& step) {
  if (status_ != AgreementStatus::BaPrepared) return;
  VoteKey key{accepted_digest_, accepted_->o};
  auto vit = commits_.find(view_);
  if (vit == commits_.end()) return;
  auto kit = vit->second.find(key);
  if (kit == vit->second.end() || kit->second.size() < commit_quorum(config_.f)) return;
  std::vector<SignedEnvelope> commits;
  for (const auto& [r, env] : kit->second) {
    if (commits.size() == commit_quorum(config_.f)) break;
    commits.push_back(env);
  }
  mark_committed(step, *accepted_, std::move(commits), "quorum");
}

void AgreementInstance::mark_committed(AgreementStep& step, PrePrepareTuple tuple,
                                       std::vector<SignedEnvelope> commits,
                                       std::string_view via) {
  status_ = AgreementStatus::BaCommitted;
  auto d = detail("ba-committed");
  d["view"] = tuple.v.value();
  d["outcome"] = to_string(tuple.o);
  d["digest"] = certificate_digest(tuple.c).hex();
  d["via"] = via;
  d["registered"] = participant_list(tuple.c, false);
  d["prepared"] = participant_list(tuple.c, true);
  d["votes"] = vote_map(tuple.c);
  step.fx.note(NoteKind::StateTransition, std::move(d));
  committed_ = CommittedCertificate{std::move(tuple), std::move(commits)};
  step.committed = true;
  pending_new_view_.reset();
}

AgreementStep AgreementInstance::on_message(const SignedEnvelope& env,
                                            const DecisionCertificate& local, SimTime now) {
  try {
    switch (env.kind) {
      case MessageKind::BaPrePrepare: return on_ba_pre_prepare(env, local, now);
      case MessageKind::BaPrepare: return on_ba_prepare(env, now);
      case MessageKind::BaCommit: return on_ba_commit(env, now);
      case MessageKind::ViewChange: return on_view_change(env, local, now);
      case MessageKind::NewView: return on_new_view(env, local, now);
      case MessageKind::ViewChangeFetch: return on_view_change_fetch(env);
      case MessageKind::CommitProof: return on_commit_proof(env, now);
      default: break;
    }
  } catch (const DecodeError& e) {
    AgreementStep step;
    reject(step, "rejected", "malformed", &env);
    return step;
  }
  AgreementStep step;
  reject(step, "rejected", "not-an-agreement-message", &env);
  return step;
}

AgreementStep AgreementInstance::on_ba_pre_prepare(const SignedEnvelope& env,
                                                   const DecisionCertificate& local,
                                                   SimTime now) {
  AgreementStep step;
  if (!signed_by_replica(env)) {
    reject(step, "rejected", "bad-signature", &env);
    return step;
  }
  auto msg = unseal<BaPrePrepare>(env);
  if (msg.t != t_) {
    reject(step, "rejected", "wrong-transaction", &env);
    return step;
  }
  if (status_ == AgreementStatus::BaCommitted) return step;
  if (env.sender.as_replica() != primary_of(msg.v, config_.f)) {
    auto d = detail("byzantine-pre-prepare");
    d["reason"] = "not-primary";
    d["from"] = to_string(env.sender);
    step.fx.note(NoteKind::ByzantineEvidence, std::move(d));
    return step;
  }
  if (msg.v != view_ || !view_active_) {
    reject(step, "rejected", msg.v < view_ ? "stale-view" : "future-view", &env);
    return step;
  }
  if (is_primary()) return step;
  auto d_new = certificate_digest(msg.c);
  if (accepted_ && accepted_->v == msg.v) {
    if (accepted_->o == msg.o && accepted_digest_ == d_new) return step;
    auto d = detail("conflicting-pre-prepare");
    d["from"] = to_string(env.sender);
    step.fx.note(NoteKind::ByzantineEvidence, std::move(d));
    send_view_change(step, next(view_), local, now, "conflicting-pre-prepare");
    return step;
  }

  std::string_view reason;
  for (const auto& [p, e] : local.entries()) {
    if (!msg.c.contains(p)) {
      reason = "missing-local-registration";
      break;
    }
  }
  if (reason.empty()) {
    auto check = check_certificate(msg.c, msg.o, t_, *keys_);
    if (check != CertificateCheck::Ok) reason = to_string(check);
  }
  if (!reason.empty()) {
    auto d = detail("pre-prepare-rejected");
    d["reason"] = reason;
    d["from"] = to_string(env.sender);
    d["outcome"] = to_string(msg.o);
    step.fx.note(NoteKind::ByzantineEvidence, std::move(d));
    send_view_change(step, next(view_), local, now, reason);
    return step;
  }

  log_.push_back(env);
  arm_timer(step, view_, now);
  accept_proposal(step, view_, msg.o, msg.c, "ba-pre-prepared");
  step.adopted = msg.c;
  step.sources = {env.sender.as_replica()};
  send_ba_prepare(step);
  check_prepared(step);
  return step;
}

AgreementStep AgreementInstance::on_ba_prepare(const SignedEnvelope& env, SimTime) {
  AgreementStep step;
  if (!signed_by_replica(env)) {
    reject(step, "rejected", "bad-signature", &env);
    return step;
  }
  auto msg = unseal<BaPrepare>(env);
  if (msg.t != t_ || msg.i != env.sender.as_replica()) {
    reject(step, "rejected", "header-mismatch", &env);
    return step;
  }
  if (status_ == AgreementStatus::BaCommitted) return step;
  if (msg.v < view_) {
    reject(step, "rejected", "stale-view", &env);
    return step;
  }
  if (msg.i == primary_of(msg.v, config_.f)) {
    auto d = detail("byzantine-ba-prepare");
    d["reason"] = "sent-by-primary";
    d["from"] = to_string(env.sender);
    step.fx.note(NoteKind::ByzantineEvidence, std::move(d));
    return step;
  }
  prepares_[msg.v][{msg.d, msg.o}].emplace(msg.i, env);
  check_prepared(step);
  return step;
}

AgreementStep AgreementInstance::on_ba_commit(const SignedEnvelope& env, SimTime) {
  AgreementStep step;
  if (!signed_by_replica(env)) {
    reject(step, "rejected", "bad-signature", &env);
    return step;
  }
  auto msg = unseal<BaCommit>(env);
  if (msg.t != t_ || msg.i != env.sender.as_replica()) {
    reject(step, "rejected", "header-mismatch", &env);
    return step;
  }
  if (status_ == AgreementStatus::BaCommitted) return step;
  if (msg.v < view_) {
    reject(step, "rejected", "stale-view", &env);
    return step;
  }
  commits_[msg.v][{msg.d, msg.o}].emplace(msg.i, env);
  check_prepared(step);
  check_committed(step);
  return step;
}

AgreementStep AgreementInstance::on_timer(const TimerKey& key, const DecisionCertificate& local,
                                          SimTime now) {
  AgreementStep step;
  if (key.kind != TimerKind::ViewTimer || key.t != t_) return step;
  if (status_ == AgreementStatus::BaCommitted || View{key.arg} != view_) return step;
  auto d = detail("view-timer-expired");
  d["view"] = key.arg;
  step.fx.note(NoteKind::Log, std::move(d));
  send_view_change(step, next(view_), local, now, "timeout");
  return step;
}

AgreementStep AgreementInstance::initiate_view_change(const DecisionCertificate& local,
                                                      SimTime now, std::string_view reason) {
  AgreementStep step;
  if (status_ == AgreementStatus::BaCommitted) return step;
  send_view_change(step, next(view_), local, now, reason);
  return step;
}

ViewChangePayload AgreementInstance::view_change_payload(const DecisionCertificate& local) const {
  ViewChangePayload p;
  if (prepared_) {
    p.pre_prepared = prepared_->tuple;
    p.prepared_proof = prepared_->proof;
  } else if (last_pre_prepared_) {
    p.pre_prepared = last_pre_prepared_;
  } else {
    p.fallback = local;
  }
  return p;
}

void AgreementInstance::send_view_change(AgreementStep& step, View target,
                                         const DecisionCertificate& local, SimTime now,
                                         std::string_view reason) {
  if (last_view_change_ && *last_view_change_ >= target) return;
  if (target <= installed_) return;
  auto from = view_;
  last_view_change_ = target;
  view_ = target;
  view_active_ = false;
  accepted_.reset();
  if (status_ != AgreementStatus::BaCommitted) status_ = AgreementStatus::Idle;

  ViewChange msg{target, t_, view_change_payload(local), self_};
  auto env = seal(*signer_, msg);
  for (auto r : other_replicas()) step.fx.send(PrincipalId::replica(r), env);
  store_view_change(env, msg);

  auto d = detail("view-change-sent");
  d["from_view"] = from.value();
  d["to_view"] = target.value();
  d["reason"] = reason;
  d["payload"] = msg.p.prepared_proof.empty() ? (msg.p.pre_prepared ? "pre-prepared" : "local")
                                              : "prepared";
  step.fx.note(NoteKind::StateTransition, std::move(d));

  arm_timer(step, target, now);
  maybe_new_view(step, target, now);
}

void AgreementInstance::store_view_change(const SignedEnvelope& env, const ViewChange& msg) {
  auto d = env.digest();
  auto& by_sender = view_changes_[msg.new_view][msg.i];
  if (by_sender.empty()) arrival_[msg.new_view].push_back({msg.i, d});
  by_sender.emplace(d, StoredViewChange{env, msg});
}

std::optional<std::string_view> AgreementInstance::check_view_change(
    const SignedEnvelope& env, const ViewChange& msg) const {
  if (msg.i != env.sender.as_replica()) return "sender-mismatch";
  if (msg.t != t_) return "wrong-transaction";
  if (msg.new_view == View{0}) return "view-zero";
  const auto& p = msg.p;
  if (!p.pre_prepared && !p.fallback) return "empty-payload";
  if (!p.pre_prepared && !p.prepared_proof.empty()) return "proof-without-tuple";
  if (p.fallback && check_records(*p.fallback, t_, *keys_) != CertificateCheck::Ok) {
    return "bad-fallback-records";
  }
  if (!p.pre_prepared) return std::nullopt;

  const auto& tuple = *p.pre_prepared;
  if (tuple.t != t_) return "tuple-wrong-transaction";
  if (tuple.v >= msg.new_view) return "tuple-view-too-high";
  if (check_certificate(tuple.c, tuple.o, t_, *keys_) != CertificateCheck::Ok) {
    return "tuple-certificate-invalid";
  }
  if (p.prepared_proof.empty()) return std::nullopt;
  if (p.prepared_proof.size() < prepared_quorum(config_.f)) return "proof-too-small";
  auto d = certificate_digest(tuple.c);
  auto primary = primary_of(tuple.v, config_.f);
  std::set<ReplicaId> senders;
  for (const auto& ev : p.prepared_proof) {
    if (!signed_by_replica(ev)) return "proof-bad-signature";
    auto r = ev.sender.as_replica();
    if (r == primary) return "proof-from-primary";
    if (!senders.insert(r).second) return "proof-duplicate-sender";
    PhaseVote<MessageKind::BaPrepare> vote;
    try {
      if (ev.kind == MessageKind::BaPrepare) {
        vote = unseal<BaPrepare>(ev);
      } else if (ev.kind == MessageKind::BaCommit) {
        auto c = unseal<BaCommit>(ev);
        vote = {c.v, c.t, c.d, c.o, c.i};
      } else {
        return "proof-wrong-kind";
      }
    } catch (const DecodeError&) {
      return "proof-malformed";
    }
    if (vote.v != tuple.v || vote.t != t_ || vote.d != d || vote.o != tuple.o || vote.i != r) {
      return "proof-mismatch";
    }
  }
  return std::nullopt;
}

AgreementStep AgreementInstance::on_view_change(const SignedEnvelope& env,
                                                const DecisionCertificate& local, SimTime now) {
  AgreementStep step;
  if (!signed_by_replica(env)) {
    reject(step, "rejected", "bad-signature", &env);
    return step;
  }
  auto msg = unseal<ViewChange>(env);
  if (msg.t != t_) {
    reject(step, "rejected", "wrong-transaction", &env);
    return step;
  }
  if (status_ == AgreementStatus::BaCommitted) {
    auto to = env.sender.as_replica();
    if (to != self_ && proof_sent_to_.insert({to, msg.new_view}).second) {
      CommitProof proof{committed_->tuple, committed_->commits};
      step.fx.send(env.sender, seal(*signer_, proof));
    }
    return step;
  }
  if (msg.new_view <= installed_) {
    reject(step, "rejected", "stale-view-change", &env);
    return step;
  }
  if (auto reason = check_view_change(env, msg)) {
    auto d = detail("invalid-view-change");
    d["reason"] = *reason;
    d["from"] = to_string(env.sender);
    step.fx.note(NoteKind::ByzantineEvidence, std::move(d));
    return step;
  }
  store_view_change(env, msg);
  log_.push_back(env);
  maybe_join(step, local, now);
  maybe_new_view(step, msg.new_view, now);
  try_pending_new_view(step, local, now);
  return step;
}

void AgreementInstance::maybe_join(AgreementStep& step, const DecisionCertificate& local,
                                   SimTime now) {
  auto floor = view_;
  if (last_view_change_ && *last_view_change_ > floor) floor = *last_view_change_;
  for (const auto& [w, senders] : view_changes_) {
    if (w <= floor) continue;
    if (senders.size() >= view_change_join_quorum(config_.f)) {
      send_view_change(step, w, local, now, "join");
      return;
    }
  }
}

void AgreementInstance::maybe_new_view(AgreementStep& step, View w, SimTime now) {
  if (primary_of(w, config_.f) != self_) return;
  if (view_ != w || view_active_ || last_view_change_ != w) return;
  if (status_ == AgreementStatus::BaCommitted) return;
  const auto& order = arrival_[w];
  if (order.size() < commit_quorum(config_.f)) return;

  std::vector<ViewChangeRef> refs;
  std::vector<ViewChange> chosen;
  auto take = [&](const ViewChangeRef& ref) {
    const auto& stored = view_changes_[w][ref.i].at(ref.d);
    refs.push_back(ref);
    chosen.push_back(stored.msg);
  };
  for (const auto& ref : order) {
    if (ref.i == self_) take(ref);
  }
  for (const auto& ref : order) {
    if (refs.size() == commit_quorum(config_.f)) break;
    if (ref.i != self_) take(ref);
  }
  auto decision = build_new_view(chosen, t_);

  NewView nv{w, refs, t_, decision.o, decision.c};
  auto env = seal(*signer_, nv);
  for (auto r : other_replicas()) step.fx.send(PrincipalId::replica(r), env);
  log_.push_back(env);

  view_active_ = true;
  installed_ = w;
  accept_proposal(step, w, decision.o, decision.c, "ba-pre-prepared");
  auto d = detail("new-view-installed");
  d["rule"] = decision.rule;
  d["outcome"] = to_string(decision.o);
  d["primary"] = true;
  d["votes"] = vote_map(decision.c);
  step.fx.note(NoteKind::StateTransition, std::move(d));
  step.adopted = decision.c;
  for (const auto& ref : refs) {
    if (ref.i != self_) step.sources.push_back(ref.i);
  }
  arm_timer(step, w, now);
  check_prepared(step);
}

AgreementStep AgreementInstance::on_new_view(const SignedEnvelope& env,
                                             const DecisionCertificate& local, SimTime now) {
  AgreementStep step;
  if (!signed_by_replica(env)) {
    reject(step, "rejected", "bad-signature", &env);
    return step;
  }
  auto msg = unseal<NewView>(env);
  if (msg.t != t_) {
    reject(step, "rejected", "wrong-transaction", &env);
    return step;
  }
  if (status_ == AgreementStatus::BaCommitted) return step;
  if (env.sender.as_replica() != primary_of(msg.new_view, config_.f)) {
    auto d = detail("byzantine-new-view");
    d["reason"] = "not-primary";
    d["from"] = to_string(env.sender);
    step.fx.note(NoteKind::ByzantineEvidence, std::move(d));
    return step;
  }
  if (msg.new_view <= installed_ || self_ == env.sender.as_replica()) return step;
  if (pending_new_view_) {
    auto pending = unseal<NewView>(*pending_new_view_);
    if (pending.new_view > msg.new_view) return step;
  }
  pending_new_view_ = env;
  arm_timer(step, msg.new_view, now);
  try_pending_new_view(step, local, now);
  return step;
}

void AgreementInstance::try_pending_new_view(AgreementStep& step,
                                             const DecisionCertificate& local, SimTime now) {
  if (!pending_new_view_) return;
  auto env = *pending_new_view_;
  auto msg = unseal<NewView>(env);
  auto w = msg.new_view;
  if (w <= installed_) {
    pending_new_view_.reset();
    return;
  }

  auto fail = [&](std::string_view reason) {
    pending_new_view_.reset();
    auto d = detail("new-view-rejected");
    d["reason"] = reason;
    d["from"] = to_string(env.sender);
    step.fx.note(NoteKind::ByzantineEvidence, std::move(d));
    send_view_change(step, next(w), local, now, reason);
  };

  std::set<ReplicaId> senders;
  for (const auto& ref : msg.view_changes) senders.insert(ref.i);
  if (msg.view_changes.size() != commit_quorum(config_.f) ||
      senders.size() != msg.view_changes.size() ||
      !senders.contains(primary_of(w, config_.f))) {
    fail("bad-view-change-set");
    return;
  }

  std::vector<ViewChange> chosen;
  bool missing = false;
  for (const auto& ref : msg.view_changes) {
    auto vit = view_changes_.find(w);
    const StoredViewChange* stored = nullptr;
    if (vit != view_changes_.end()) {
      auto sit = vit->second.find(ref.i);
      if (sit != vit->second.end()) {
        auto dit = sit->second.find(ref.d);
        if (dit != sit->second.end()) stored = &dit->second;
      }
    }
    if (stored) {
      chosen.push_back(stored->msg);
      continue;
    }
    missing = true;
    if (fetched_.insert({w.value(), ref}).second) {
      step.fx.send(env.sender, seal(*signer_, ViewChangeFetch{t_, w, ref}));
    }
  }
  if (missing) return;

  auto decision = build_new_view(chosen, t_);
  if (decision.o != msg.o || certificate_digest(decision.c) != certificate_digest(msg.c)) {
    fail("new-view-mismatch");
    return;
  }

  pending_new_view_.reset();
  log_.push_back(env);
  if (!last_view_change_ || *last_view_change_ < w) last_view_change_ = w;
  view_ = w;
  view_active_ = true;
  installed_ = w;
  accept_proposal(step, w, msg.o, msg.c, "ba-pre-prepared");
  auto d = detail("new-view-installed");
  d["rule"] = decision.rule;
  d["outcome"] = to_string(msg.o);
  d["primary"] = false;
  d["votes"] = vote_map(msg.c);
  step.fx.note(NoteKind::StateTransition, std::move(d));
  step.adopted = msg.c;
  step.sources = {env.sender.as_replica()};
  arm_timer(step, w, now);
  send_ba_prepare(step);
  check_prepared(step);
}

AgreementStep AgreementInstance::on_view_change_fetch(const SignedEnvelope& env) {
  AgreementStep step;
  if (!signed_by_replica(env)) {
    reject(step, "rejected", "bad-signature", &env);
    return step;
  }
  auto msg = unseal<ViewChangeFetch>(env);
  if (msg.t != t_) return step;
  auto vit = view_changes_.find(msg.new_view);
  if (vit == view_changes_.end()) return step;
  auto sit = vit->second.find(msg.ref.i);
  if (sit == vit->second.end()) return step;
  auto dit = sit->second.find(msg.ref.d);
  if (dit == sit->second.end()) return step;
  step.fx.send(env.sender, dit->second.env);
  return step;
}

AgreementStep AgreementInstance::on_commit_proof(const SignedEnvelope& env, SimTime) {
  AgreementStep step;
  if (status_ == AgreementStatus::BaCommitted) return step;
  if (!signed_by_replica(env)) {
    reject(step, "rejected", "bad-signature", &env);
    return step;
  }
  auto msg = unseal<CommitProof>(env);
  const auto& tuple = msg.committed;
  if (tuple.t != t_ || check_certificate(tuple.c, tuple.o, t_, *keys_) != CertificateCheck::Ok) {
    auto d = detail("invalid-commit-proof");
    d["from"] = to_string(env.sender);
    step.fx.note(NoteKind::ByzantineEvidence, std::move(d));
    return step;
  }
  auto d = certificate_digest(tuple.c);
  std::set<ReplicaId> senders;
  for (const auto& c : msg.commits) {
    if (c.kind != MessageKind::BaCommit || !signed_by_replica(c)) continue;
    BaCommit vote;
    try {
      vote = unseal<BaCommit>(c);
    } catch (const DecodeError&) {
      continue;
    }
    if (vote.v == tuple.v && vote.t == t_ && vote.d == d && vote.o == tuple.o &&
        vote.i == c.sender.as_replica()) {
      senders.insert(vote.i);
    }
  }
  if (senders.size() < commit_quorum(config_.f)) {
    auto e = detail("invalid-commit-proof");
    e["from"] = to_string(env.sender);
    e["reason"] = "too-few-commits";
    step.fx.note(NoteKind::ByzantineEvidence, std::move(e));
    return step;
  }
  step.adopted = tuple.c;
  step.sources = {env.sender.as_replica()};
  mark_committed(step, tuple, msg.commits, "commit-proof");
  return step;
}

}  // namespace bftdc
