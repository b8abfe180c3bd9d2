#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bftdc/effects.hpp"

namespace bftdc::sim {

enum class RecordKind : std::uint8_t {
  Meta,
  Send,
  Deliver,
  Drop,
  StateTransition,
  DecisionDelivered,
  ByzantineEvidence,
  CheckAnomaly,
  Log,
};

std::string_view to_string(RecordKind k);
std::optional<RecordKind> parse_record_kind(std::string_view s);
RecordKind record_kind(NoteKind k);

struct TraceRecord {
  std::uint64_t seq = 0;
  SimTime time = 0;
  RecordKind kind = RecordKind::Log;
  std::string principal;
  Detail detail;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Trace = std::vector<TraceRecord>;

class TraceParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One JSON object per line: {"seq","time","kind","principal","detail"}.
std::string to_line(const TraceRecord& r);
void write_trace(std::ostream& out, const Trace& trace);
std::string trace_text(const Trace& trace);

// Requires the opening and closing meta records and strictly increasing seq.
Trace parse_trace(std::istream& in);
Trace parse_trace(std::string_view text);

// The opening / closing meta records.
const Detail& trace_header(const Trace& trace);
const Detail& trace_footer(const Trace& trace);

}  // namespace bftdc::sim
