#pragma once

#include <compare>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bftdc/ids.hpp"
#include "bftdc/messages.hpp"

namespace bftdc {

using SimTime = std::uint64_t;
using Detail = nlohmann::ordered_json;

enum class TimerKind : std::uint8_t {
  PrepareDeadline,
  ViewTimer,
  DecisionRetransmit,
  ReplyDeadline,
  RegistrationDeadline,
  UnilateralAbort,
};

std::string_view to_string(TimerKind k);

struct TimerKey {
  TimerKind kind = TimerKind::PrepareDeadline;
  TransactionId t;
  std::uint64_t arg = 0;  // view number for view timers

  friend auto operator<=>(const TimerKey&, const TimerKey&) = default;
};

struct TimerRequest {
  TimerKey key;
  SimTime at = 0;
};

struct Outbound {
  PrincipalId to;
  SignedEnvelope envelope;
};

enum class NoteKind : std::uint8_t {
  StateTransition,
  DecisionDelivered,
  ByzantineEvidence,
  CheckAnomaly,
  Log,
};

struct Note {
  NoteKind kind = NoteKind::Log;
  Detail detail;
};

// Everything a state machine wants done after consuming one event.
struct Effects {
  std::vector<Outbound> sends;
  std::vector<TimerRequest> timers;
  std::vector<Note> notes;

  void send(PrincipalId to, SignedEnvelope env) { sends.push_back({to, std::move(env)}); }
  void timer(TimerKey key, SimTime at) { timers.push_back({key, at}); }
  void note(NoteKind kind, Detail detail) { notes.push_back({kind, std::move(detail)}); }

  void merge(Effects&& other) {
    for (auto& s : other.sends) sends.push_back(std::move(s));
    for (auto& t : other.timers) timers.push_back(t);
    for (auto& n : other.notes) notes.push_back(std::move(n));
  }

  std::size_t count_sends(MessageKind kind) const {
    std::size_t n = 0;
    for (const auto& s : sends) n += s.envelope.kind == kind ? 1 : 0;
    return n;
  }
};

}  // namespace bftdc
