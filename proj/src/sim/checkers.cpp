#include "bftdc/sim/checkers.hpp"

#include <map>
#include <set>

namespace bftdc::sim {
namespace {

struct Context {
  std::string mode;
  std::uint64_t f = 0;
  std::set<std::string> faulty;

  bool correct(const std::string& principal) const { return !faulty.contains(principal); }
};

Context context(const Trace& trace) {
  const auto& h = trace_header(trace);
  Context c;
  c.mode = h.value("mode", "bftdc");
  c.f = h.value("f", std::uint64_t{0});
  for (const char* field : {"faulty_replicas", "faulty_participants"}) {
    if (!h.contains(field)) continue;
    for (const auto& p : h[field]) c.faulty.insert(p.get<std::string>());
  }
  return c;
}

bool is_event(const TraceRecord& r, RecordKind kind, std::string_view event) {
  return r.kind == kind && r.detail.is_object() && r.detail.contains("event") &&
         r.detail["event"] == event;
}

std::uint64_t tx(const TraceRecord& r) { return r.detail.value("t", std::uint64_t{0}); }

bool starts_with(const std::string& s, char c) { return !s.empty() && s.front() == c; }

}  // namespace

std::vector<Violation> check_claim1(const Trace& trace) {
  auto ctx = context(trace);
  std::vector<Violation> out;
  std::map<std::uint64_t, std::set<std::string>> registered;  // t -> participants
  for (const auto& r : trace) {
    if (is_event(r, RecordKind::StateTransition, "state") && starts_with(r.principal, 'p') &&
        ctx.correct(r.principal) && r.detail.value("to", "") == "Registered") {
      registered[tx(r)].insert(r.principal);
    }
  }
  for (const auto& r : trace) {
    if (!is_event(r, RecordKind::StateTransition, "ba-committed")) continue;
    if (!ctx.correct(r.principal) || r.detail.value("outcome", "") != "Commit") continue;
    std::set<std::string> in_cert, prepared;
    for (const auto& p : r.detail["registered"]) in_cert.insert("p" + p.dump());
    for (const auto& p : r.detail["prepared"]) prepared.insert("p" + p.dump());
    for (const auto& p : registered[tx(r)]) {
      if (!in_cert.contains(p)) {
        out.push_back({1, r.seq,
                       r.principal + " ba-committed Commit for t=" + std::to_string(tx(r)) +
                           " without the registration of " + p});
      } else if (!prepared.contains(p)) {
        out.push_back({1, r.seq,
                       r.principal + " ba-committed Commit for t=" + std::to_string(tx(r)) +
                           " without a Prepared vote from " + p});
      }
    }
  }
  return out;
}

std::vector<Violation> check_claim2(const Trace& trace) {
  auto ctx = context(trace);
  std::vector<Violation> out;
  std::map<std::uint64_t, std::pair<std::string, std::string>> first;  // t -> (outcome, who)
  for (const auto& r : trace) {
    if (!is_event(r, RecordKind::StateTransition, "ba-committed") || !ctx.correct(r.principal)) {
      continue;
    }
    auto o = r.detail.value("outcome", "");
    auto [it, fresh] = first.try_emplace(tx(r), o, r.principal);
    if (!fresh && it->second.first != o) {
      out.push_back({2, r.seq,
                     "t=" + std::to_string(tx(r)) + ": " + it->second.second + " ba-committed " +
                         it->second.first + " but " + r.principal + " ba-committed " + o});
    }
  }
  return out;
}

std::vector<Violation> check_claim3(const Trace& trace) {
  auto ctx = context(trace);
  bool bft = ctx.mode == "bftdc";
  std::vector<Violation> out;
  std::map<std::uint64_t, std::pair<std::string, std::string>> first;
  // (principal, t) -> sender count of the decision quorum that was delivered
  std::map<std::pair<std::string, std::uint64_t>, std::size_t> quorum;
  for (const auto& r : trace) {
    bool party = starts_with(r.principal, 'p') || starts_with(r.principal, 'i');
    if (!party || !ctx.correct(r.principal)) continue;
    if (r.kind == RecordKind::DecisionDelivered) {
      quorum[{r.principal, tx(r)}] = r.detail["senders"].size();
      continue;
    }
    if (r.kind == RecordKind::CheckAnomaly) {
      out.push_back({3, r.seq,
                     r.principal + " t=" + std::to_string(tx(r)) + ": " +
                         r.detail.value("reason", "anomaly") + " (" +
                         r.detail.value("outcome", "") + " quorum in state " +
                         r.detail.value("state", "") + ")"});
      continue;
    }
    if (!is_event(r, RecordKind::StateTransition, "state")) continue;
    auto to = r.detail.value("to", "");
    if (to != "Committed" && to != "Aborted") continue;
    auto outcome = to == "Committed" ? "Commit" : "Abort";
    auto t = tx(r);
    if (bft && r.detail.value("from", "") == "Prepared") {
      auto q = quorum.find({r.principal, t});
      if (q == quorum.end() || q->second < ctx.f + 1) {
        out.push_back({3, r.seq,
                       r.principal + " t=" + std::to_string(t) +
                           " left Prepared without an f+1 decision quorum"});
      }
    }
    auto [it, fresh] = first.try_emplace(t, outcome, r.principal);
    if (!fresh && it->second.first != outcome) {
      out.push_back({3, r.seq,
                     "t=" + std::to_string(t) + ": " + it->second.second + " reached " +
                         it->second.first + " but " + r.principal + " reached " + outcome});
    }
  }
  return out;
}

std::vector<Violation> check_all(const Trace& trace) {
  auto out = check_claim1(trace);
  for (auto& v : check_claim2(trace)) out.push_back(std::move(v));
  for (auto& v : check_claim3(trace)) out.push_back(std::move(v));
  return out;
}

}  // namespace bftdc::sim
