#include "bftdc/sim/simulator.hpp"

#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <variant>

#include "bftdc/coordinator.hpp"
#include "bftdc/participant.hpp"

namespace bftdc::sim {
namespace {

struct StartTx {
  TransactionId t;
};

struct Deliver {
  std::uint64_t msg = 0;
  PrincipalId from;
  PrincipalId to;
  SignedEnvelope env;
};

struct Fire {
  PrincipalId who;
  TimerKey key;
};

struct Crash {
  PrincipalId who;
};

struct Event {
  SimTime time = 0;
  std::uint64_t order = 0;
  std::variant<StartTx, Deliver, Fire, Crash> what;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.time != b.time ? a.time > b.time : a.order > b.order;
  }
};

struct Rewritten {
  Outbound out;
  bool injected = false;
};

Detail principal_list(const std::set<PrincipalId>& ps) {
  Detail arr = Detail::array();
  for (auto p : ps) arr.push_back(to_string(p));
  return arr;
}

Detail fault_detail(const FaultSpec& f) {
  Detail d;
  d["target"] = to_string(f.target);
  d["behavior"] = to_string(f.kind);
  switch (f.kind) {
    case FaultKind::CrashAt: d["at"] = f.at; break;
    case FaultKind::EquivocatePrePrepare:
    case FaultKind::EquivocateDecision:
      d["outcome_a"] = to_string(f.outcome_a);
      d["outcome_b"] = to_string(f.outcome_b);
      break;
    case FaultKind::ConflictingVotes:
      d["vote_a"] = to_string(f.vote_a);
      d["vote_b"] = to_string(f.vote_b);
      break;
    default: break;
  }
  if (!f.subset.empty()) {
    Detail arr = Detail::array();
    for (auto p : f.subset) arr.push_back(to_string(p));
    d["subset"] = arr;
  }
  return d;
}

class Simulator {
 public:
  explicit Simulator(const SimConfig& config) : cfg_(config), rng_(config.seed) {
    validate(cfg_);
    build();
  }

  RunResult run();

 private:
  void build();
  void header();
  void record(RecordKind kind, PrincipalId who, Detail detail);
  void push(SimTime at, std::variant<StartTx, Deliver, Fire, Crash> what);
  bool crashed(PrincipalId p) const;
  SimTime draw_delay();
  bool draw_drop();
  void apply(PrincipalId from, Effects fx, bool retransmit);
  std::vector<Rewritten> rewrite(PrincipalId from, const Outbound& out);
  void dispatch(const Deliver& d);
  void fire(const Fire& f);
  bool done() const;

  SimConfig cfg_;
  std::mt19937_64 rng_;
  Keyring ring_;
  std::shared_ptr<const KeyDirectory> keys_;
  Trace trace_;
  std::uint64_t seq_ = 0;
  std::uint64_t order_ = 0;
  std::uint64_t next_msg_ = 0;
  std::uint64_t in_flight_ = 0;
  SimTime now_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;

  std::vector<std::unique_ptr<Replica>> replicas_;
  std::map<std::pair<std::uint32_t, TransactionId>, Participant> participants_;
  std::map<TransactionId, Initiator> initiators_;
  std::map<PrincipalId, SimTime> crash_at_;
  std::set<PrincipalId> down_;
  std::map<PrincipalId, std::vector<FaultSpec>> faults_;
  std::set<PrincipalId> byzantine_;
};

void Simulator::build() {
  const std::uint32_t n = cfg_.mode == Mode::Bftdc ? cfg_.replica_total() : 1;
  const std::uint32_t f = cfg_.mode == Mode::Bftdc ? cfg_.f : 0;
  std::vector<PrincipalId> principals;
  std::vector<ReplicaId> replica_ids;
  for (std::uint32_t i = 0; i < n; ++i) {
    principals.push_back(PrincipalId::replica(ReplicaId{i}));
    replica_ids.push_back(ReplicaId{i});
  }
  std::vector<ParticipantId> participant_ids;
  for (std::uint32_t p = 0; p < cfg_.participants; ++p) {
    principals.push_back(PrincipalId::participant(ParticipantId{p}));
    participant_ids.push_back(ParticipantId{p});
  }
  principals.push_back(PrincipalId::initiator());
  ring_ = Keyring::ed25519(principals, cfg_.seed);
  keys_ = std::make_shared<CachingDirectory>(ring_.directory);

  CoordinatorConfig cc;
  cc.f = f;
  cc.prepare_timeout = cfg_.timeouts.prepare;
  cc.agreement_base = cfg_.timeouts.agreement_base;
  cc.decision_retransmit = cfg_.timeouts.decision_retransmit;
  cc.plain = cfg_.mode == Mode::Plain2pc;
  for (auto r : replica_ids) {
    replicas_.push_back(std::make_unique<Replica>(
        r, cc, ring_.signers.at(PrincipalId::replica(r)), keys_));
  }

  for (std::uint32_t k = 1; k <= cfg_.transactions; ++k) {
    TransactionId t{k};
    for (auto p : participant_ids) {
      auto b = cfg_.behaviour_of(p);
      ParticipantConfig pc;
      pc.f = f;
      pc.replicas = replica_ids;
      pc.endpoint = "sim://" + to_string(PrincipalId::participant(p));
      pc.willing = b.willing;
      pc.unilateral_abort = b.unilateral_abort;
      pc.abort_delay = b.abort_delay;
      pc.registration_timeout = cfg_.timeouts.registration;
      participants_.try_emplace({p.value(), t}, p, t, pc,
                                ring_.signers.at(PrincipalId::participant(p)), keys_);
    }
    InitiatorConfig ic;
    ic.f = f;
    ic.replicas = replica_ids;
    ic.participants = participant_ids;
    ic.reply_timeout = cfg_.timeouts.reply;
    initiators_.try_emplace(t, 0, t, ic, ring_.signers.at(PrincipalId::initiator()), keys_);
  }

  for (const auto& fault : cfg_.faults) {
    if (fault.kind == FaultKind::CrashAt) {
      auto [it, fresh] = crash_at_.emplace(fault.target, fault.at);
      if (!fresh) it->second = std::min(it->second, fault.at);
    } else {
      faults_[fault.target].push_back(fault);
      byzantine_.insert(fault.target);
    }
  }
}

void Simulator::record(RecordKind kind, PrincipalId who, Detail detail) {
  trace_.push_back({seq_++, now_, kind, to_string(who), std::move(detail)});
}

void Simulator::push(SimTime at, std::variant<StartTx, Deliver, Fire, Crash> what) {
  queue_.push(Event{at, order_++, std::move(what)});
}

bool Simulator::crashed(PrincipalId p) const { return down_.contains(p); }

// Portable draws: the standard distributions are implementation-defined, so
// traces would differ between standard libraries.
SimTime Simulator::draw_delay() {
  auto span = cfg_.net.delay_max - cfg_.net.delay_min + 1;
  return cfg_.net.delay_min + rng_() % span;
}

bool Simulator::draw_drop() {
  if (cfg_.net.drop_probability <= 0.0) return false;
  double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return u < cfg_.net.drop_probability;
}

void Simulator::header() {
  Detail d;
  d["event"] = "start";
  d["mode"] = to_string(cfg_.mode);
  d["f"] = cfg_.mode == Mode::Bftdc ? cfg_.f : 0;
  d["replicas"] = replicas_.size();
  d["participants"] = cfg_.participants;
  d["transactions"] = cfg_.transactions;
  d["seed"] = cfg_.seed;
  d["name"] = cfg_.name;
  Detail net;
  net["delay_min"] = cfg_.net.delay_min;
  net["delay_max"] = cfg_.net.delay_max;
  net["drop_probability"] = cfg_.net.drop_probability;
  d["net"] = net;
  Detail to;
  to["prepare"] = cfg_.timeouts.prepare;
  to["agreement_base"] = cfg_.timeouts.agreement_base;
  to["decision_retransmit"] = cfg_.timeouts.decision_retransmit;
  to["registration"] = cfg_.timeouts.registration;
  to["reply"] = cfg_.timeouts.reply;
  d["timeouts"] = to;
  Detail faults = Detail::array();
  for (const auto& f : cfg_.faults) faults.push_back(fault_detail(f));
  d["faults"] = faults;
  std::set<PrincipalId> bad_replicas, bad_participants, crashing;
  for (auto p : byzantine_) (p.is_replica() ? bad_replicas : bad_participants).insert(p);
  for (const auto& [p, at] : crash_at_) crashing.insert(p);
  d["faulty_replicas"] = principal_list(bad_replicas);
  d["faulty_participants"] = principal_list(bad_participants);
  d["crashing"] = principal_list(crashing);
  trace_.push_back({seq_++, 0, RecordKind::Meta, "sim", std::move(d)});
}

std::vector<Rewritten> Simulator::rewrite(PrincipalId from, const Outbound& out) {
  std::vector<Rewritten> result{{out, false}};
  auto it = faults_.find(from);
  if (it == faults_.end()) return result;
  const Signer& signer = ring_.signer(from);

  auto suppress = [&](const FaultSpec& f) {
    Detail d;
    d["event"] = "fault-suppressed";
    d["behavior"] = to_string(f.kind);
    d["kind"] = to_string(out.envelope.kind);
    d["to"] = to_string(out.to);
    record(RecordKind::Log, from, std::move(d));
    result.clear();
  };

  for (const auto& f : it->second) {
    if (result.empty()) break;
    auto& cur = result.front();
    const auto& env = cur.out.envelope;
    switch (f.kind) {
      case FaultKind::MutePrimary:
        if (env.kind == MessageKind::BaPrePrepare) suppress(f);
        break;
      case FaultKind::EquivocatePrePrepare: {
        if (env.kind != MessageKind::BaPrePrepare) break;
        auto msg = unseal<BaPrePrepare>(env);
        auto want = f.in_subset(cur.out.to) ? f.outcome_a : f.outcome_b;
        if (want == msg.o) break;
        if (want == Outcome::Commit) break;  // cannot forge Prepared votes
        auto original = msg.c;
        for (const auto& [p, e] : original.entries()) msg.c.clear_vote(p);
        msg.o = Outcome::Abort;
        cur.out.envelope = seal(signer, msg);
        cur.injected = true;
        break;
      }
      case FaultKind::StaleRecordReplay: {
        auto stale = [&](DecisionCertificate& c) {
          bool changed = false;
          auto original = c;
          for (const auto& [p, e] : original.entries()) {
            TransactionId old{c.transaction().value() - 1};
            c.set_vote(VoteRecord::make(old, p, Vote::Prepared,
                                        ring_.signer(PrincipalId::participant(p))));
            changed = true;
          }
          return changed;
        };
        if (env.kind == MessageKind::BaPrePrepare) {
          auto msg = unseal<BaPrePrepare>(env);
          if (!stale(msg.c)) break;
          msg.o = evaluate_outcome(msg.c);
          cur.out.envelope = seal(signer, msg);
          cur.injected = true;
        } else if (env.kind == MessageKind::NewView) {
          auto msg = unseal<NewView>(env);
          if (!stale(msg.c)) break;
          msg.o = evaluate_outcome(msg.c);
          cur.out.envelope = seal(signer, msg);
          cur.injected = true;
        }
        break;
      }
      case FaultKind::ConflictingVotes: {
        if (env.kind != MessageKind::VoteMsg) break;
        auto msg = unseal<VoteMsg>(env);
        auto want = f.in_subset(cur.out.to) ? f.vote_a : f.vote_b;
        if (want == msg.record.vote) break;
        msg.record = VoteRecord::make(msg.record.t, msg.record.participant, want, signer);
        cur.out.envelope = seal(signer, msg);
        cur.injected = true;
        break;
      }
      case FaultKind::DropDecisionTo:
        if (env.kind == MessageKind::DecisionNotification && f.in_subset(cur.out.to)) suppress(f);
        break;
      case FaultKind::EquivocateDecision: {
        if (env.kind != MessageKind::DecisionNotification) break;
        auto msg = unseal<DecisionNotification>(env);
        auto want = f.in_subset(cur.out.to) ? f.outcome_a : f.outcome_b;
        if (want == msg.o) break;
        msg.o = want;
        cur.out.envelope = seal(signer, msg);
        cur.injected = true;
        break;
      }
      case FaultKind::CrashAt: break;
    }
  }
  return result;
}

void Simulator::apply(PrincipalId from, Effects fx, bool retransmit) {
  for (auto& note : fx.notes) record(record_kind(note.kind), from, std::move(note.detail));
  for (const auto& raw : fx.sends) {
    for (auto& [out, injected] : rewrite(from, raw)) {
      auto id = next_msg_++;
      Detail d;
      d["msg"] = id;
      d["to"] = to_string(out.to);
      d["kind"] = to_string(out.envelope.kind);
      d["t"] = transaction_of(out.envelope).value();
      d["digest"] = out.envelope.digest().hex().substr(0, 16);
      d["size"] = out.envelope.to_bytes().size();
      if (retransmit) d["retransmit"] = true;
      if (injected) d["injected"] = true;
      record(RecordKind::Send, from, std::move(d));
      if (draw_drop()) {
        Detail drop;
        drop["msg"] = id;
        drop["to"] = to_string(out.to);
        drop["kind"] = to_string(out.envelope.kind);
        drop["reason"] = "network";
        record(RecordKind::Drop, from, std::move(drop));
        continue;
      }
      ++in_flight_;
      push(now_ + draw_delay(), Deliver{id, from, out.to, std::move(out.envelope)});
    }
  }
  for (const auto& t : fx.timers) push(t.at, Fire{from, t.key});
}

void Simulator::dispatch(const Deliver& m) {
  --in_flight_;
  if (crashed(m.to)) {
    Detail d;
    d["msg"] = m.msg;
    d["from"] = to_string(m.from);
    d["kind"] = to_string(m.env.kind);
    d["reason"] = "crashed";
    record(RecordKind::Drop, m.to, std::move(d));
    return;
  }
  Detail d;
  d["msg"] = m.msg;
  d["from"] = to_string(m.from);
  d["kind"] = to_string(m.env.kind);
  d["digest"] = m.env.digest().hex().substr(0, 16);
  record(RecordKind::Deliver, m.to, std::move(d));

  if (m.to.is_replica()) {
    apply(m.to, replicas_.at(m.to.index)->on_message(m.env, now_), false);
    return;
  }
  TransactionId t;
  try {
    t = transaction_of(m.env);
  } catch (const DecodeError&) {
    return;
  }
  if (m.to.is_participant()) {
    auto it = participants_.find({m.to.index, t});
    if (it != participants_.end()) apply(m.to, it->second.on_message(m.env, now_), false);
  } else {
    auto it = initiators_.find(t);
    if (it != initiators_.end()) apply(m.to, it->second.on_message(m.env, now_), false);
  }
}

void Simulator::fire(const Fire& f) {
  if (crashed(f.who)) return;
  bool retransmit = f.key.kind == TimerKind::DecisionRetransmit;
  if (f.who.is_replica()) {
    apply(f.who, replicas_.at(f.who.index)->on_timer(f.key, now_), retransmit);
  } else if (f.who.is_participant()) {
    auto it = participants_.find({f.who.index, f.key.t});
    if (it != participants_.end()) apply(f.who, it->second.on_timer(f.key, now_), retransmit);
  } else {
    auto it = initiators_.find(f.key.t);
    if (it != initiators_.end()) apply(f.who, it->second.on_timer(f.key, now_), retransmit);
  }
}

bool Simulator::done() const {
  if (in_flight_ != 0) return false;
  for (const auto& [t, ini] : initiators_) {
    if (!ini.outcome()) return false;
  }
  for (const auto& [key, p] : participants_) {
    auto who = PrincipalId::participant(ParticipantId{key.first});
    if (byzantine_.contains(who) || crashed(who)) continue;
    // Idle: never heard of the transaction, so nothing to terminate.
    if (p.state() != ParticipantState::Idle && !is_terminal(p.state())) return false;
  }
  return true;
}

RunResult Simulator::run() {
  header();
  for (const auto& [who, at] : crash_at_) push(at, Crash{who});
  for (const auto& [t, ini] : initiators_) push(0, StartTx{t});

  RunResult result;
  while (!queue_.empty()) {
    if (result.events >= cfg_.max_events || queue_.top().time > cfg_.max_time) break;
    auto ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ++result.events;
    if (auto* s = std::get_if<StartTx>(&ev.what)) {
      apply(PrincipalId::initiator(), initiators_.at(s->t).start(now_), false);
    } else if (auto* d = std::get_if<Deliver>(&ev.what)) {
      dispatch(*d);
    } else if (auto* f = std::get_if<Fire>(&ev.what)) {
      fire(*f);
    } else if (auto* c = std::get_if<Crash>(&ev.what)) {
      down_.insert(c->who);
      Detail detail;
      detail["event"] = "crashed";
      record(RecordKind::StateTransition, c->who, std::move(detail));
    }
    if (done()) {
      result.quiescent = true;
      break;
    }
  }

  Detail end;
  end["event"] = "end";
  end["quiescent"] = result.quiescent;
  end["end_time"] = now_;
  end["events"] = result.events;
  trace_.push_back({seq_++, now_, RecordKind::Meta, "sim", std::move(end)});
  result.trace = std::move(trace_);
  result.end_time = now_;
  return result;
}

}  // namespace

RunResult run(const SimConfig& config) {
  Simulator sim(config);
  return sim.run();
}

}  // namespace bftdc::sim
