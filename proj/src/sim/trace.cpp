#include "bftdc/sim/trace.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace bftdc::sim {

namespace {

struct KindName {
  RecordKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {RecordKind::Meta, "meta"},
    {RecordKind::Send, "send"},
    {RecordKind::Deliver, "deliver"},
    {RecordKind::Drop, "drop"},
    {RecordKind::StateTransition, "stateTransition"},
    {RecordKind::DecisionDelivered, "decisionDelivered"},
    {RecordKind::ByzantineEvidence, "byzantineEvidence"},
    {RecordKind::CheckAnomaly, "checkAnomaly"},
    {RecordKind::Log, "log"},
};

}  // namespace

std::string_view to_string(RecordKind k) {
  for (const auto& n : kKindNames) {
    if (n.kind == k) return n.name;
  }
  return "unknown";
}

std::optional<RecordKind> parse_record_kind(std::string_view s) {
  for (const auto& n : kKindNames) {
    if (n.name == s) return n.kind;
  }
  return std::nullopt;
}

RecordKind record_kind(NoteKind k) {
  switch (k) {
    case NoteKind::StateTransition: return RecordKind::StateTransition;
    case NoteKind::DecisionDelivered: return RecordKind::DecisionDelivered;
    case NoteKind::ByzantineEvidence: return RecordKind::ByzantineEvidence;
    case NoteKind::CheckAnomaly: return RecordKind::CheckAnomaly;
    case NoteKind::Log: return RecordKind::Log;
  }
  return RecordKind::Log;
}

std::string to_line(const TraceRecord& r) {
  Detail j;
  j["seq"] = r.seq;
  j["time"] = r.time;
  j["kind"] = to_string(r.kind);
  j["principal"] = r.principal;
  j["detail"] = r.detail;
  return j.dump();
}

void write_trace(std::ostream& out, const Trace& trace) {
  for (const auto& r : trace) out << to_line(r) << '\n';
}

std::string trace_text(const Trace& trace) {
  std::ostringstream out;
  write_trace(out, trace);
  return out.str();
}

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw TraceParseError("line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Detail j;
    try {
      j = Detail::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("invalid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) fail("record is not an object");
    for (const char* field : {"seq", "time", "kind", "principal", "detail"}) {
      if (!j.contains(field)) fail(std::string("missing field '") + field + "'");
    }
    if (!j["seq"].is_number_unsigned() || !j["time"].is_number_unsigned()) {
      fail("seq and time must be unsigned integers");
    }
    if (!j["kind"].is_string() || !j["principal"].is_string()) {
      fail("kind and principal must be strings");
    }
    auto kind = parse_record_kind(j["kind"].get<std::string>());
    if (!kind) fail("unknown kind '" + j["kind"].get<std::string>() + "'");
    TraceRecord r{j["seq"].get<std::uint64_t>(), j["time"].get<SimTime>(), *kind,
                  j["principal"].get<std::string>(), j["detail"]};
    if (!trace.empty() && r.seq <= trace.back().seq) fail("seq not strictly increasing");
    trace.push_back(std::move(r));
  }
  if (trace.empty()) throw TraceParseError("empty trace");
  auto is_meta = [](const TraceRecord& r, std::string_view event) {
    return r.kind == RecordKind::Meta && r.detail.is_object() && r.detail.contains("event") &&
           r.detail["event"] == event;
  };
  if (!is_meta(trace.front(), "start")) throw TraceParseError("line 1: missing start record");
  if (!is_meta(trace.back(), "end")) {
    throw TraceParseError("line " + std::to_string(lineno) + ": truncated trace (no end record)");
  }
  return trace;
}

Trace parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

const Detail& trace_header(const Trace& trace) { return trace.front().detail; }
const Detail& trace_footer(const Trace& trace) { return trace.back().detail; }

}  // namespace bftdc::sim
