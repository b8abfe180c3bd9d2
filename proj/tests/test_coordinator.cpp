#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace bftdc;
using bftdc::test::count_notes;
using bftdc::test::World;

namespace {

CoordinatorInstance make_coordinator(const World& w, std::uint32_t r, bool plain = false) {
  CoordinatorConfig cfg;
  cfg.f = w.f;
  cfg.plain = plain;
  return CoordinatorInstance(ReplicaId{r}, w.t, cfg, w.replica_signer(r), w.keys.directory);
}

SignedEnvelope register_msg(const World& w, std::uint32_t p) {
  return w.from_participant(p, RegisterMsg{w.registration(p), "p" + std::to_string(p)});
}

SignedEnvelope vote_msg(const World& w, std::uint32_t p, Vote v) {
  return w.from_participant(p, VoteMsg{w.vote(p, v)});
}

void register_all(const World& w, CoordinatorInstance& c) {
  for (std::uint32_t p = 0; p < w.participants; ++p) c.on_message(register_msg(w, p), 0);
}

}  // namespace

TEST_CASE("registrations are acknowledged and recorded") {
  World w(1, 2);
  auto c = make_coordinator(w, 1);
  auto fx = c.on_message(register_msg(w, 0), 0);
  REQUIRE(fx.count_sends(MessageKind::RegisterAck) == 1);
  CHECK(fx.sends[0].to == PrincipalId::participant(ParticipantId{0}));
  CHECK(c.local_certificate().contains(ParticipantId{0}));
  CHECK(c.endpoints().at(ParticipantId{0}) == "p0");

  // A retransmitted registration is acknowledged again.
  CHECK(c.on_message(register_msg(w, 0), 1).count_sends(MessageKind::RegisterAck) == 1);
  CHECK(c.local_certificate().size() == 1);
}

TEST_CASE("a registration signed by someone else is refused") {
  World w(1, 2);
  auto c = make_coordinator(w, 1);
  auto forged = w.from_participant(1, RegisterMsg{w.registration(0), "x"});
  auto fx = c.on_message(forged, 0);
  CHECK(fx.sends.empty());
  CHECK(c.local_certificate().empty());
}

TEST_CASE("commit request starts the prepare phase") {
  World w(1, 3);
  auto c = make_coordinator(w, 2);
  register_all(w, c);
  auto fx = c.on_message(w.initiator_request(Outcome::Commit), 1);
  CHECK(c.phase() == CoordinatorPhase::Preparing);
  CHECK(fx.count_sends(MessageKind::PrepareRequest) == 3);
  REQUIRE(fx.timers.size() == 1);
  CHECK(fx.timers[0].key.kind == TimerKind::PrepareDeadline);
  CHECK(fx.timers[0].at == 11);
}

TEST_CASE("late registrations are logged and not acknowledged") {
  World w(1, 3);
  auto c = make_coordinator(w, 1);
  c.on_message(register_msg(w, 0), 0);
  c.on_message(w.initiator_request(Outcome::Commit), 1);
  auto fx = c.on_message(register_msg(w, 2), 2);
  CHECK(fx.sends.empty());
  CHECK(count_notes(fx, NoteKind::Log, "late-registration") == 1);
  CHECK_FALSE(c.local_certificate().contains(ParticipantId{2}));
}

TEST_CASE("the primary proposes once every vote is in") {
  World w(1, 2);
  auto c = make_coordinator(w, 0);
  register_all(w, c);
  c.on_message(w.initiator_request(Outcome::Commit), 1);
  c.on_message(vote_msg(w, 0, Vote::Prepared), 2);
  CHECK(c.phase() == CoordinatorPhase::Preparing);
  auto fx = c.on_message(vote_msg(w, 1, Vote::Prepared), 3);
  CHECK(c.phase() == CoordinatorPhase::Agreeing);
  REQUIRE(fx.count_sends(MessageKind::BaPrePrepare) == 3);
  auto pp = unseal<BaPrePrepare>(fx.sends[0].envelope);
  CHECK(pp.o == Outcome::Commit);
  CHECK(pp.c == c.local_certificate());
}

TEST_CASE("votes that arrive before the commit request are kept") {
  World w(1, 2);
  auto c = make_coordinator(w, 0);
  register_all(w, c);
  c.on_message(vote_msg(w, 0, Vote::Prepared), 1);
  c.on_message(vote_msg(w, 1, Vote::Prepared), 1);
  CHECK(c.phase() == CoordinatorPhase::Collecting);
  auto fx = c.on_message(w.initiator_request(Outcome::Commit), 2);
  CHECK(c.phase() == CoordinatorPhase::Agreeing);
  CHECK(fx.count_sends(MessageKind::BaPrePrepare) == 3);
}

TEST_CASE("the first vote wins and a conflicting one is evidence") {
  World w(1, 2);
  auto c = make_coordinator(w, 1);
  register_all(w, c);
  c.on_message(w.initiator_request(Outcome::Commit), 1);
  c.on_message(vote_msg(w, 0, Vote::Prepared), 2);
  auto fx = c.on_message(vote_msg(w, 0, Vote::Aborted), 3);
  CHECK(count_notes(fx, NoteKind::ByzantineEvidence, "conflicting-vote") == 1);
  CHECK(c.local_certificate().find(ParticipantId{0})->vote->vote == Vote::Prepared);
}

TEST_CASE("a stale vote is rejected") {
  World w(1, 1);
  auto c = make_coordinator(w, 1);
  register_all(w, c);
  c.on_message(w.initiator_request(Outcome::Commit), 1);
  auto fx = c.on_message(w.from_participant(0, VoteMsg{w.vote(0, Vote::Prepared, TransactionId{0})}), 2);
  CHECK(fx.notes.at(0).detail["reason"] == "stale-transaction");
  CHECK_FALSE(c.local_certificate().find(ParticipantId{0})->vote);
}

TEST_CASE("prepare timeout ends the phase with abort for missing votes") {
  World w(1, 2);
  auto c = make_coordinator(w, 0);
  register_all(w, c);
  auto start = c.on_message(w.initiator_request(Outcome::Commit), 1);
  c.on_message(vote_msg(w, 0, Vote::Prepared), 2);
  auto fx = c.on_timer(start.timers.at(0).key, 11);
  CHECK(c.phase() == CoordinatorPhase::Agreeing);
  REQUIRE(fx.count_sends(MessageKind::BaPrePrepare) == 3);
  CHECK(unseal<BaPrePrepare>(fx.sends[0].envelope).o == Outcome::Abort);
}

TEST_CASE("an abort request skips the prepare phase") {
  World w(1, 2);
  auto c = make_coordinator(w, 0);
  register_all(w, c);
  auto fx = c.on_message(w.initiator_request(Outcome::Abort), 1);
  CHECK(c.phase() == CoordinatorPhase::Agreeing);
  CHECK(fx.count_sends(MessageKind::PrepareRequest) == 0);
  REQUIRE(fx.count_sends(MessageKind::BaPrePrepare) == 3);
  CHECK(unseal<BaPrePrepare>(fx.sends[0].envelope).o == Outcome::Abort);
}

TEST_CASE("plain mode decides right after the prepare phase and retransmits") {
  World w(0, 2);
  auto c = make_coordinator(w, 0, true);
  register_all(w, c);
  c.on_message(w.initiator_request(Outcome::Commit), 1);
  c.on_message(vote_msg(w, 0, Vote::Prepared), 2);
  auto fx = c.on_message(vote_msg(w, 1, Vote::Prepared), 3);
  CHECK(c.phase() == CoordinatorPhase::Decided);
  CHECK(c.outcome() == Outcome::Commit);
  CHECK(fx.count_sends(MessageKind::BaPrePrepare) == 0);
  // Two participants and the initiator.
  CHECK(fx.count_sends(MessageKind::DecisionNotification) == 3);

  const TimerRequest* retransmit = nullptr;
  for (const auto& t : fx.timers) {
    if (t.key.kind == TimerKind::DecisionRetransmit) retransmit = &t;
  }
  REQUIRE(retransmit);
  CHECK(retransmit->at == 23);
  auto again = c.on_timer(retransmit->key, 23);
  CHECK(again.count_sends(MessageKind::DecisionNotification) == 3);
  CHECK(again.sends[0].envelope == fx.sends[0].envelope);
}

TEST_CASE("a replica decides when its agreement instance commits") {
  World w(1, 1);
  auto c = make_coordinator(w, 1);
  register_all(w, c);
  c.on_message(w.initiator_request(Outcome::Commit), 1);
  c.on_message(vote_msg(w, 0, Vote::Prepared), 2);
  auto cert = c.local_certificate();
  auto d = certificate_digest(cert);
  c.on_message(w.from_replica(0, BaPrePrepare{View{0}, w.t, Outcome::Commit, cert}), 3);
  c.on_message(w.from_replica(2, BaPrepare{View{0}, w.t, d, Outcome::Commit, ReplicaId{2}}), 4);
  c.on_message(w.from_replica(0, BaCommit{View{0}, w.t, d, Outcome::Commit, ReplicaId{0}}), 5);
  CHECK_FALSE(c.outcome());
  auto fx = c.on_message(w.from_replica(2, BaCommit{View{0}, w.t, d, Outcome::Commit, ReplicaId{2}}), 6);
  CHECK(c.outcome() == Outcome::Commit);
  CHECK(c.phase() == CoordinatorPhase::Decided);
  CHECK(fx.count_sends(MessageKind::DecisionNotification) == 2);
}

TEST_CASE("a replica that missed a registration queries the proposer for the endpoint") {
  World w(1, 2);
  auto primary = make_coordinator(w, 0);
  register_all(w, primary);
  primary.on_message(w.initiator_request(Outcome::Commit), 1);
  primary.on_message(vote_msg(w, 0, Vote::Prepared), 2);
  auto proposal = primary.on_message(vote_msg(w, 1, Vote::Prepared), 2);

  auto backup = make_coordinator(w, 3);
  backup.on_message(register_msg(w, 0), 0);
  auto fx = backup.on_message(proposal.sends.at(0).envelope, 3);
  CHECK(backup.phase() == CoordinatorPhase::Agreeing);
  CHECK(backup.local_certificate().contains(ParticipantId{1}));
  REQUIRE(fx.count_sends(MessageKind::EndpointQuery) == 1);
  const auto* query = &fx.sends[0];
  for (const auto& s : fx.sends) {
    if (s.envelope.kind == MessageKind::EndpointQuery) query = &s;
  }
  CHECK(query->to == PrincipalId::replica(ReplicaId{0}));

  auto reply = primary.on_message(query->envelope, 4);
  REQUIRE(reply.count_sends(MessageKind::EndpointReply) == 1);
  auto learned = backup.on_message(reply.sends[0].envelope, 5);
  CHECK(count_notes(learned, NoteKind::Log, "endpoint-learned") == 1);
  CHECK(backup.endpoints().at(ParticipantId{1}) == "p1");
}

TEST_CASE("a replica host keeps transactions apart") {
  World w(1, 1);
  Replica host(ReplicaId{1}, CoordinatorConfig{}, w.replica_signer(1), w.keys.directory);
  host.on_message(register_msg(w, 0), 0);
  World other(1, 1, TransactionId{2});
  host.on_message(other.from_participant(0, RegisterMsg{other.registration(0), "p0"}), 0);
  REQUIRE(host.find(TransactionId{1}));
  REQUIRE(host.find(TransactionId{2}));
  CHECK(host.find(TransactionId{1})->local_certificate().size() == 1);
  CHECK_FALSE(host.find(TransactionId{3}));
}
