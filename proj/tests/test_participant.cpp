#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace bftdc;
using bftdc::test::count_notes;
using bftdc::test::World;

namespace {

Participant make_participant(const World& w, std::uint32_t p, ParticipantConfig cfg = {}) {
  cfg.f = w.f;
  cfg.replicas = w.replicas();
  return Participant(ParticipantId{p}, w.t, cfg, w.signer(PrincipalId::participant(ParticipantId{p})),
                     w.keys.directory);
}

SignedEnvelope ack(const World& w, std::uint32_t r, std::uint32_t p) {
  return w.from_replica(r, RegisterAck{w.t, ParticipantId{p}});
}

SignedEnvelope decision(const World& w, std::uint32_t r, Outcome o) {
  return w.from_replica(r, DecisionNotification{w.t, o});
}

SignedEnvelope prepare_request(const World& w, std::uint32_t r) {
  return w.from_replica(r, PrepareRequest{w.t, w.initiator_request(Outcome::Commit)});
}

void register_fully(const World& w, Participant& part) {
  part.join(0);
  for (std::uint32_t r = 0; r < registration_quorum(w.f); ++r) {
    part.on_message(ack(w, r, part.id().value()), 1);
  }
  REQUIRE(part.state() == ParticipantState::Registered);
}

}  // namespace

TEST_CASE("join registers with every replica") {
  World w(1, 2);
  auto part = make_participant(w, 0);
  auto fx = part.join(0);
  CHECK(fx.count_sends(MessageKind::Register) == 4);
  CHECK(part.state() == ParticipantState::Registering);
  REQUIRE(fx.timers.size() == 1);
  CHECK(fx.timers[0].key.kind == TimerKind::RegistrationDeadline);
  CHECK(part.join(1).sends.empty());
}

TEST_CASE("registration completes at exactly 2f+1 acks") {
  for (std::uint32_t f : {1u, 2u}) {
    CAPTURE(f);
    World w(f, 1);
    auto part = make_participant(w, 0);
    part.join(0);
    const std::uint32_t quorum = 2 * f + 1;
    for (std::uint32_t r = 0; r + 1 < quorum; ++r) part.on_message(ack(w, r, 0), 1);
    CHECK(part.acks().size() == quorum - 1);
    CHECK(part.state() == ParticipantState::Registering);

    // A duplicate ack from the same replica does not count twice.
    part.on_message(ack(w, 0, 0), 2);
    CHECK(part.state() == ParticipantState::Registering);

    auto fx = part.on_message(ack(w, quorum - 1, 0), 3);
    CHECK(part.state() == ParticipantState::Registered);
    CHECK(fx.count_sends(MessageKind::PropagateReply) == 1);
  }
}

TEST_CASE("acks for another participant or from a non-replica are refused") {
  World w(1, 2);
  auto part = make_participant(w, 0);
  part.join(0);
  part.on_message(ack(w, 0, 1), 1);
  auto forged = w.from_participant(1, RegisterAck{w.t, ParticipantId{0}});
  part.on_message(forged, 1);
  CHECK(part.acks().empty());
}

TEST_CASE("registration timeout aborts and reports an exception") {
  World w(1, 1);
  auto part = make_participant(w, 0);
  auto fx = part.join(0);
  auto out = part.on_timer(fx.timers[0].key, 30);
  CHECK(part.state() == ParticipantState::Aborted);
  CHECK(part.unilaterally_aborted());
  REQUIRE(out.count_sends(MessageKind::PropagateReply) == 1);
  auto reply = unseal<PropagateReply>(out.sends[0].envelope);
  CHECK(reply.status == ReplyStatus::Exception);
}

TEST_CASE("a willing participant votes prepared to every replica") {
  World w(1, 1);
  auto part = make_participant(w, 0);
  register_fully(w, part);
  auto fx = part.on_message(prepare_request(w, 0), 5);
  CHECK(fx.count_sends(MessageKind::VoteMsg) == 4);
  CHECK(part.state() == ParticipantState::Prepared);
  CHECK(part.vote() == Vote::Prepared);

  // A repeated prepare request from the same replica gets the same vote back.
  auto again = part.on_message(prepare_request(w, 0), 6);
  CHECK(again.count_sends(MessageKind::VoteMsg) == 1);
  // A first request from another replica needs no new vote.
  CHECK(part.on_message(prepare_request(w, 1), 6).sends.empty());
}

TEST_CASE("an unwilling participant votes aborted and aborts") {
  World w(1, 1);
  ParticipantConfig cfg;
  cfg.willing = false;
  auto part = make_participant(w, 0, cfg);
  register_fully(w, part);
  part.on_message(prepare_request(w, 2), 5);
  CHECK(part.vote() == Vote::Aborted);
  CHECK(part.state() == ParticipantState::Aborted);
}

TEST_CASE("prepare request without a valid initiator certificate is refused") {
  World w(1, 1);
  auto part = make_participant(w, 0);
  register_fully(w, part);
  auto abort_cert = w.from_replica(0, PrepareRequest{w.t, w.initiator_request(Outcome::Abort)});
  auto fx = part.on_message(abort_cert, 5);
  CHECK(fx.sends.empty());
  CHECK(part.state() == ParticipantState::Registered);

  auto by_replica = seal(*w.replica_signer(1), InitiatorRequest{w.t, Outcome::Commit});
  fx = part.on_message(w.from_replica(0, PrepareRequest{w.t, by_replica}), 5);
  CHECK(fx.sends.empty());
}

TEST_CASE("decision is delivered at exactly f+1 identical notifications") {
  for (std::uint32_t f : {1u, 2u}) {
    CAPTURE(f);
    World w(f, 1);
    auto part = make_participant(w, 0);
    register_fully(w, part);
    part.on_message(prepare_request(w, 0), 5);
    REQUIRE(part.state() == ParticipantState::Prepared);

    const std::uint32_t quorum = f + 1;
    for (std::uint32_t r = 0; r + 1 < quorum; ++r) {
      part.on_message(decision(w, r, Outcome::Commit), 6);
    }
    // Conflicting notifications from the remaining replicas do not mix in.
    for (std::uint32_t r = quorum; r < replica_count(f) && r < quorum + f; ++r) {
      part.on_message(decision(w, r, Outcome::Abort), 6);
    }
    CHECK(part.state() == ParticipantState::Prepared);
    part.on_message(decision(w, 0, Outcome::Commit), 7);
    CHECK(part.state() == ParticipantState::Prepared);

    auto fx = part.on_message(decision(w, quorum - 1, Outcome::Commit), 8);
    CHECK(part.state() == ParticipantState::Committed);
    CHECK(count_notes(fx, NoteKind::DecisionDelivered, "decision-quorum") == 1);
  }
}

TEST_CASE("a registered participant that has not voted accepts abort but not commit") {
  World w(1, 1);
  auto part = make_participant(w, 0);
  register_fully(w, part);
  part.on_message(decision(w, 0, Outcome::Commit), 5);
  auto fx = part.on_message(decision(w, 1, Outcome::Commit), 5);
  CHECK(part.state() == ParticipantState::Registered);
  CHECK(count_notes(fx, NoteKind::CheckAnomaly, "decision-anomaly") == 1);

  part.on_message(decision(w, 2, Outcome::Abort), 6);
  part.on_message(decision(w, 3, Outcome::Abort), 6);
  CHECK(part.state() == ParticipantState::Aborted);
}

TEST_CASE("a conflicting quorum after termination is reported once") {
  World w(1, 1);
  auto part = make_participant(w, 0);
  register_fully(w, part);
  part.on_message(prepare_request(w, 0), 5);
  part.on_message(decision(w, 0, Outcome::Abort), 6);
  part.on_message(decision(w, 1, Outcome::Abort), 6);
  REQUIRE(part.state() == ParticipantState::Aborted);
  part.on_message(decision(w, 2, Outcome::Commit), 7);
  auto fx = part.on_message(decision(w, 3, Outcome::Commit), 7);
  CHECK(count_notes(fx, NoteKind::CheckAnomaly, "decision-anomaly") == 1);
  CHECK(part.state() == ParticipantState::Aborted);
}

TEST_CASE("unilateral abort is allowed only before a prepared vote") {
  World w(1, 1);
  auto part = make_participant(w, 0);
  register_fully(w, part);
  part.on_message(prepare_request(w, 0), 5);
  CHECK(part.abort_unilaterally(6, "test").notes.empty());
  CHECK(part.state() == ParticipantState::Prepared);

  auto other = make_participant(w, 0);
  register_fully(w, other);
  other.abort_unilaterally(6, "test");
  CHECK(other.state() == ParticipantState::Aborted);
  // Asked to prepare afterwards, it answers with an aborted vote.
  auto fx = other.on_message(prepare_request(w, 0), 7);
  CHECK(fx.count_sends(MessageKind::VoteMsg) == 4);
  CHECK(other.vote() == Vote::Aborted);
}

TEST_CASE("immediate unilateral abort happens on registration") {
  World w(1, 1);
  ParticipantConfig cfg;
  cfg.unilateral_abort = UnilateralAbort::Immediate;
  auto part = make_participant(w, 0, cfg);
  part.join(0);
  for (std::uint32_t r = 0; r < 3; ++r) part.on_message(ack(w, r, 0), 1);
  CHECK(part.state() == ParticipantState::Aborted);
}

TEST_CASE("initiator commits after all ok replies and learns the outcome at f+1") {
  for (std::uint32_t f : {1u, 2u}) {
    CAPTURE(f);
    World w(f, 2);
    InitiatorConfig cfg{f, w.replicas(), {ParticipantId{0}, ParticipantId{1}}, 40};
    Initiator init(0, w.t, cfg, w.signer(PrincipalId::initiator()), w.keys.directory);
    auto fx = init.start(0);
    CHECK(fx.count_sends(MessageKind::Propagate) == 2);

    init.on_message(w.from_participant(0, PropagateReply{w.t, ReplyStatus::Ok}), 1);
    CHECK_FALSE(init.request());
    fx = init.on_message(w.from_participant(1, PropagateReply{w.t, ReplyStatus::Ok}), 2);
    CHECK(init.request() == Outcome::Commit);
    CHECK(fx.count_sends(MessageKind::InitiatorCommitRequest) == replica_count(f));

    for (std::uint32_t r = 0; r < f; ++r) init.on_message(decision(w, r, Outcome::Commit), 3);
    CHECK_FALSE(init.outcome());
    init.on_message(decision(w, f, Outcome::Commit), 4);
    CHECK(init.outcome() == Outcome::Commit);
  }
}

TEST_CASE("initiator aborts on an exception or a missing reply") {
  World w(1, 2);
  InitiatorConfig cfg{1, w.replicas(), {ParticipantId{0}, ParticipantId{1}}, 40};
  Initiator a(0, w.t, cfg, w.signer(PrincipalId::initiator()), w.keys.directory);
  a.start(0);
  auto fx = a.on_message(w.from_participant(0, PropagateReply{w.t, ReplyStatus::Exception}), 1);
  CHECK(a.request() == Outcome::Abort);
  CHECK(fx.count_sends(MessageKind::InitiatorAbortRequest) == 4);

  Initiator b(0, w.t, cfg, w.signer(PrincipalId::initiator()), w.keys.directory);
  auto start = b.start(0);
  b.on_message(w.from_participant(0, PropagateReply{w.t, ReplyStatus::Ok}), 1);
  b.on_timer(start.timers.at(0).key, 40);
  CHECK(b.request() == Outcome::Abort);
  CHECK(b.replies().at(ParticipantId{1}) == ReplyKind::Timeout);
}
