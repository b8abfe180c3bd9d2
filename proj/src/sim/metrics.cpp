#include "bftdc/sim/metrics.hpp"

#include <algorithm>
#include <set>

namespace bftdc::sim {

Metrics measure(const Trace& trace, std::uint64_t t) {
  Metrics m;
  std::set<std::string> faulty;
  const auto& h = trace_header(trace);
  for (const char* field : {"faulty_replicas", "faulty_participants"}) {
    if (!h.contains(field)) continue;
    for (const auto& p : h[field]) faulty.insert(p.get<std::string>());
  }
  const auto& footer = trace_footer(trace);
  m.quiescent = footer.value("quiescent", false);
  m.end_time = footer.value("end_time", SimTime{0});

  std::optional<SimTime> start, request, last_terminal, initiator_done;
  std::map<std::string, SimTime> began, committed;
  for (const auto& r : trace) {
    const auto& d = r.detail;
    if (r.kind == RecordKind::Send) {
      auto kind = d.value("kind", "");
      ++m.messages[kind];
      ++m.total_messages;
      if (!d.value("retransmit", false)) ++m.first_round[kind];
      continue;
    }
    if (!d.is_object() || d.value("t", std::uint64_t{0}) != t) continue;
    auto event = d.value("event", "");
    bool correct = !faulty.contains(r.principal);
    bool replica = !r.principal.empty() && r.principal.front() == 'r';
    if (r.principal == "i0") {
      if (event == "start") start = r.time;
      if (event == "request") request = r.time;
    }
    if (event == "state" && correct && r.kind == RecordKind::StateTransition) {
      auto to = d.value("to", "");
      if (to == "Committed" || to == "Aborted") {
        last_terminal = std::max(last_terminal.value_or(0), r.time);
        if (r.principal == "i0") {
          initiator_done = r.time;
          m.outcome = to == "Committed" ? "Commit" : "Abort";
        }
      }
    }
    if (!replica || !correct) continue;
    if (event == "agreement-started" || event == "ba-pre-prepared") {
      began.try_emplace(r.principal, r.time);
    } else if (event == "ba-committed") {
      committed.try_emplace(r.principal, r.time);
    } else if (event == "new-view-installed") {
      m.views = std::max<std::uint64_t>(m.views, d.value("view", std::uint64_t{0}));
    }
  }
  if (request && last_terminal && *last_terminal >= *request) {
    m.commit_latency = *last_terminal - *request;
  }
  if (start && initiator_done) m.end_to_end = *initiator_done - *start;
  for (const auto& [who, at] : committed) {
    auto b = began.find(who);
    if (b == began.end() || at < b->second) continue;
    m.agreement_latency = std::max(m.agreement_latency.value_or(0), at - b->second);
  }
  return m;
}

}  // namespace bftdc::sim
