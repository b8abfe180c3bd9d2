#include <catch2/catch_amalgamated.hpp>

#include "bftdc/sim/campaign.hpp"
#include "bftdc/sim/checkers.hpp"
#include "bftdc/sim/metrics.hpp"
#include "bftdc/sim/scenario.hpp"
#include "bftdc/sim/simulator.hpp"
#include "support.hpp"

using namespace bftdc;
using namespace bftdc::sim;
using bftdc::test::select;

namespace {

// Builds small hand-written traces for the checkers.
struct TraceBuilder {
  Trace trace;
  std::uint64_t seq = 0;

  TraceBuilder(std::string mode, std::uint64_t f, std::vector<std::string> faulty_replicas = {},
               std::vector<std::string> faulty_participants = {}) {
    Detail h;
    h["event"] = "start";
    h["mode"] = mode;
    h["f"] = f;
    h["faulty_replicas"] = faulty_replicas;
    h["faulty_participants"] = faulty_participants;
    add(RecordKind::Meta, "sim", h);
  }

  TraceBuilder& add(RecordKind kind, std::string who, Detail d) {
    trace.push_back({seq, seq, kind, std::move(who), std::move(d)});
    ++seq;
    return *this;
  }

  TraceBuilder& state(std::string who, std::string from, std::string to) {
    Detail d;
    d["t"] = 1;
    d["event"] = "state";
    d["from"] = from;
    d["to"] = to;
    return add(RecordKind::StateTransition, std::move(who), d);
  }

  TraceBuilder& committed(std::string who, std::string outcome, std::vector<int> registered,
                          std::vector<int> prepared) {
    Detail d;
    d["t"] = 1;
    d["event"] = "ba-committed";
    d["outcome"] = outcome;
    d["registered"] = registered;
    d["prepared"] = prepared;
    return add(RecordKind::StateTransition, std::move(who), d);
  }

  TraceBuilder& delivered(std::string who, std::vector<int> senders) {
    Detail d;
    d["t"] = 1;
    d["event"] = "decision-quorum";
    d["senders"] = senders;
    return add(RecordKind::DecisionDelivered, std::move(who), d);
  }

  Trace done() {
    Detail e;
    e["event"] = "end";
    add(RecordKind::Meta, "sim", e);
    return trace;
  }
};

SimConfig unit_delay(std::uint32_t f, std::uint32_t participants, Mode mode = Mode::Bftdc) {
  SimConfig c;
  c.mode = mode;
  c.f = f;
  c.participants = participants;
  c.net.delay_min = 1;
  c.net.delay_max = 1;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("claim 1 flags a commit that leaves out a registered participant") {
  auto ok = TraceBuilder("bftdc", 1)
                .state("p0", "Registering", "Registered")
                .committed("r1", "Commit", {0}, {0})
                .done();
  CHECK(check_claim1(ok).empty());

  auto missing = TraceBuilder("bftdc", 1)
                     .state("p0", "Registering", "Registered")
                     .state("p1", "Registering", "Registered")
                     .committed("r1", "Commit", {0}, {0})
                     .done();
  auto v = check_claim1(missing);
  REQUIRE(v.size() == 1);
  CHECK(v[0].claim == 1);
  CHECK(v[0].message.find("registration of p1") != std::string::npos);

  auto unprepared = TraceBuilder("bftdc", 1)
                        .state("p0", "Registering", "Registered")
                        .committed("r2", "Commit", {0}, {})
                        .done();
  REQUIRE(check_claim1(unprepared).size() == 1);

  // Abort is always allowed, and faulty replicas are not held to the claim.
  auto exempt = TraceBuilder("bftdc", 1, {"r3"}, {"p1"})
                    .state("p0", "Registering", "Registered")
                    .state("p1", "Registering", "Registered")
                    .committed("r1", "Abort", {}, {})
                    .committed("r3", "Commit", {}, {})
                    .committed("r2", "Commit", {0}, {0})
                    .done();
  CHECK(check_claim1(exempt).empty());
}

TEST_CASE("claim 2 flags correct replicas committing different outcomes") {
  auto split = TraceBuilder("bftdc", 1)
                   .committed("r1", "Commit", {}, {})
                   .committed("r2", "Abort", {}, {})
                   .done();
  auto v = check_claim2(split);
  REQUIRE(v.size() == 1);
  CHECK(v[0].seq == 2);

  auto byzantine = TraceBuilder("bftdc", 1, {"r2"})
                       .committed("r1", "Commit", {}, {})
                       .committed("r2", "Abort", {}, {})
                       .done();
  CHECK(check_claim2(byzantine).empty());
}

TEST_CASE("claim 3 flags split outcomes, thin quorums and anomalies") {
  auto split = TraceBuilder("plain2pc", 0)
                   .state("p0", "Prepared", "Committed")
                   .state("p1", "Prepared", "Aborted")
                   .done();
  REQUIRE(check_claim3(split).size() == 1);

  auto agreed = TraceBuilder("bftdc", 1)
                    .delivered("p0", {0, 1})
                    .state("p0", "Prepared", "Committed")
                    .delivered("i0", {2, 3})
                    .state("i0", "Waiting", "Committed")
                    .done();
  CHECK(check_claim3(agreed).empty());

  auto thin = TraceBuilder("bftdc", 1).delivered("p0", {0}).state("p0", "Prepared", "Committed").done();
  REQUIRE(check_claim3(thin).size() == 1);
  auto none = TraceBuilder("bftdc", 1).state("p0", "Prepared", "Aborted").done();
  REQUIRE(check_claim3(none).size() == 1);

  // Unilateral abort before voting needs no quorum.
  auto unilateral = TraceBuilder("bftdc", 1).state("p0", "Registered", "Aborted").done();
  CHECK(check_claim3(unilateral).empty());

  Detail anomaly;
  anomaly["t"] = 1;
  anomaly["event"] = "decision-anomaly";
  anomaly["reason"] = "conflicting-quorum";
  auto flagged = TraceBuilder("bftdc", 1).add(RecordKind::CheckAnomaly, "p2", anomaly).done();
  REQUIRE(check_claim3(flagged).size() == 1);

  auto faulty = TraceBuilder("bftdc", 1, {}, {"p1"})
                    .delivered("p0", {0, 1})
                    .state("p0", "Prepared", "Committed")
                    .state("p1", "Prepared", "Aborted")
                    .done();
  CHECK(check_claim3(faulty).empty());
}

TEST_CASE("trace text round-trips and truncation is detected") {
  auto result = run(unit_delay(1, 2));
  auto text = trace_text(result.trace);
  auto parsed = parse_trace(text);
  CHECK(parsed == result.trace);
  CHECK(trace_text(parsed) == text);

  auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  CHECK_THROWS_WITH(parse_trace(cut), Catch::Matchers::ContainsSubstring("truncated"));
  CHECK_THROWS_WITH(parse_trace(text.substr(text.find('\n') + 1)),
                    Catch::Matchers::ContainsSubstring("missing start"));
}

TEST_CASE("trace parse errors carry the line number") {
  auto text = trace_text(run(unit_delay(1, 1)).trace);
  auto second = text.find('\n') + 1;
  auto broken = text.substr(0, second) + "{not json\n" + text.substr(second);
  CHECK_THROWS_WITH(parse_trace(broken), Catch::Matchers::StartsWith("line 2: invalid JSON"));

  auto unknown = text.substr(0, second) +
                 R"({"seq":1,"time":0,"kind":"gossip","principal":"r0","detail":{}})" + "\n" +
                 text.substr(text.find('\n', second) + 1);
  CHECK_THROWS_WITH(parse_trace(unknown), Catch::Matchers::ContainsSubstring("unknown kind"));

  auto repeated = text.substr(0, second) + text.substr(0, second) + text.substr(second);
  CHECK_THROWS_WITH(parse_trace(repeated), Catch::Matchers::ContainsSubstring("strictly increasing"));
}

TEST_CASE("scenario files parse with defaults for omitted fields") {
  auto c = parse_scenario(R"(
name: demo
f: 2
participants: 4
net: {delay_min: 2, delay_max: 3}
faults:
  - target: r1
    behavior: equivocatePrePrepare
    subset: [r2, p0]
    outcome_a: Abort
behaviour:
  - participant: p3
    unilateral_abort: after_delay
    abort_delay: 4
)");
  CHECK(c.name == "demo");
  CHECK(c.replica_total() == 7);
  CHECK(c.net.delay_min == 2);
  CHECK(c.timeouts.agreement_base == 50);
  REQUIRE(c.faults.size() == 1);
  CHECK(c.faults[0].kind == FaultKind::EquivocatePrePrepare);
  CHECK(c.faults[0].outcome_a == Outcome::Abort);
  CHECK(c.faults[0].subset.size() == 2);
  CHECK(c.behaviour_of(ParticipantId{3}).unilateral_abort == UnilateralAbort::AfterDelay);
  CHECK(c.behaviour_of(ParticipantId{0}).willing);
}

TEST_CASE("scenario errors name the line and field") {
  using Catch::Matchers::ContainsSubstring;
  CHECK_THROWS_WITH(parse_scenario("f: 1\nreplicas: 3\n"),
                    ContainsSubstring("line 2, field 'replicas'") && ContainsSubstring("3f+1 = 4"));
  CHECK_THROWS_WITH(parse_scenario("f: 1\nparticipantz: 3\n"),
                    ContainsSubstring("line 2, field 'participantz': unknown field"));
  CHECK_THROWS_WITH(parse_scenario("net:\n  delay_min: 1\n  jitter: 2\n"),
                    ContainsSubstring("line 3, field 'net.jitter'"));
  CHECK_THROWS_WITH(parse_scenario("faults:\n  - target: r9\n    behavior: mutePrimary\n"),
                    ContainsSubstring("no such replica r9"));
  CHECK_THROWS_WITH(parse_scenario("faults:\n  - target: r1\n    behavior: fly\n"),
                    ContainsSubstring("line 3, field 'faults[0].behavior'"));
  CHECK_THROWS_WITH(parse_scenario("participants: lots\n"),
                    ContainsSubstring("line 1, field 'participants'"));
  CHECK_THROWS_WITH(parse_scenario("mode: plain2pc\nfaults:\n  - target: r0\n    behavior: mutePrimary\n"),
                    ContainsSubstring("needs bftdc mode"));
  CHECK_THROWS_WITH(parse_scenario("f: 1\nfaults:\n  - {target: r0, behavior: mutePrimary}\n"
                                   "  - {target: r1, behavior: crashAt, at: 3}\n"),
                    ContainsSubstring("exceed the bound of 1"));
  CHECK_THROWS_WITH(parse_scenario("net: {delay_min: 1, delay_max: 30}\n"),
                    ContainsSubstring("decision_retransmit must exceed"));
  CHECK_THROWS_WITH(parse_scenario("f: [1\n"), Catch::Matchers::StartsWith("line "));
}

TEST_CASE("run is a pure function of the config") {
  auto c = unit_delay(1, 3);
  c.net.delay_max = 5;
  c.net.drop_probability = 0.05;
  c.seed = 99;
  auto a = run(c);
  auto b = run(c);
  CHECK(trace_text(a.trace) == trace_text(b.trace));
  c.seed = 100;
  CHECK(trace_text(run(c).trace) != trace_text(a.trace));
}

TEST_CASE("fault-free runs commit everywhere and quiesce") {
  for (std::uint32_t f : {1u, 2u}) {
    for (std::uint32_t p : {1u, 4u}) {
      CAPTURE(f, p);
      auto c = unit_delay(f, p);
      c.net.delay_max = 4;
      auto r = run(c);
      CHECK(r.quiescent);
      CHECK(check_all(r.trace).empty());
      auto m = measure(r.trace);
      CHECK(m.outcome == "Commit");
      CHECK(m.views == 0);
      std::size_t committed = 0;
      for (const auto* rec : select(r.trace, RecordKind::StateTransition, "state")) {
        if (rec->detail["to"] == "Committed") ++committed;
      }
      // Every participant and the initiator.
      CHECK(committed == p + 1);
    }
  }
}

TEST_CASE("fault-free message counts follow the closed forms") {
  for (std::uint32_t f : {1u, 2u}) {
    for (std::uint32_t p : {1u, 2u, 3u, 6u}) {
      CAPTURE(f, p);
      const std::uint64_t n = 3 * f + 1;
      auto m = measure(run(unit_delay(f, p)).trace);
      const auto& c = m.first_round;
      auto count = [&](const char* kind) {
        auto it = c.find(kind);
        return it == c.end() ? std::uint64_t{0} : it->second;
      };
      CHECK(count("Propagate") == p);
      CHECK(count("PropagateReply") == p);
      CHECK(count("Register") == n * p);
      CHECK(count("RegisterAck") == n * p);
      CHECK(count("InitiatorCommitRequest") == n);
      CHECK(count("PrepareRequest") == n * p);
      CHECK(count("VoteMsg") == n * p);
      CHECK(count("BaPrePrepare") == n - 1);
      CHECK(count("BaPrepare") == (n - 1) * (n - 2));
      CHECK(count("BaCommit") == n * (n - 1));
      CHECK(count("DecisionNotification") == n * (p + 1));
      CHECK(count("ViewChange") == 0);
      CHECK(count("NewView") == 0);
    }
  }
}

TEST_CASE("plain 2PC costs three message delays less than the replicated coordinator") {
  for (std::uint32_t p = 2; p <= 10; ++p) {
    CAPTURE(p);
    auto bft = measure(run(unit_delay(1, p)).trace);
    auto plain = measure(run(unit_delay(1, p).as_mode(Mode::Plain2pc)).trace);
    REQUIRE(bft.commit_latency);
    REQUIRE(plain.commit_latency);
    CHECK(*bft.commit_latency - *plain.commit_latency == 3);
    CHECK(bft.agreement_latency == 3);
  }
}

TEST_CASE("as_mode keeps the schedule and adjusts f") {
  auto c = unit_delay(1, 3);
  auto p = c.as_mode(Mode::Plain2pc);
  CHECK(p.f == 0);
  CHECK(p.replica_total() == 1);
  CHECK(p.seed == c.seed);
  auto back = p.as_mode(Mode::Bftdc);
  CHECK(back.f == 1);
}

TEST_CASE("config validation") {
  auto c = unit_delay(1, 2);
  CHECK_NOTHROW(validate(c));
  auto bad = c;
  bad.replicas = 5;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  bad.f = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  bad.net.drop_probability = 1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  FaultSpec mute;
  mute.target = PrincipalId::participant(ParticipantId{0});
  mute.kind = FaultKind::MutePrimary;
  bad.faults.push_back(mute);
  CHECK_THROWS_AS(validate(bad), ConfigError);
  CHECK_THROWS_AS(run(bad), ConfigError);
}

TEST_CASE("campaign reports do not depend on the thread count") {
  SimConfig base;
  base.net.delay_max = 4;
  CampaignOptions opt;
  auto one = run_campaign(base, 500, 24, opt, 1);
  auto three = run_campaign(base, 500, 24, opt, 3);
  REQUIRE(one.runs.size() == 24);
  REQUIRE(three.runs.size() == 24);
  for (std::size_t i = 0; i < one.runs.size(); ++i) {
    CHECK(one.runs[i].seed == 500 + i);
    CHECK(one.runs[i].seed == three.runs[i].seed);
    CHECK(one.runs[i].quiescent == three.runs[i].quiescent);
    CHECK(one.runs[i].metrics.end_time == three.runs[i].metrics.end_time);
    CHECK(one.runs[i].metrics.total_messages == three.runs[i].metrics.total_messages);
  }
  CHECK(one.violating_runs == 0);
}

TEST_CASE("randomize is deterministic and respects the fault bound") {
  SimConfig base;
  CampaignOptions opt;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto a = randomize(base, seed, opt);
    auto b = randomize(base, seed, opt);
    CHECK(a.faults.size() == b.faults.size());
    CHECK(a.participants == b.participants);
    CHECK(a.participants >= 2);
    CHECK(a.participants <= 10);
    CHECK_NOTHROW(validate(a));
  }
}
