#include "bftdc/effects.hpp"

namespace bftdc {

std::string_view to_string(TimerKind k) {
  switch (k) {
    case TimerKind::PrepareDeadline: return "prepare-deadline";
    case TimerKind::ViewTimer: return "view-timer";
    case TimerKind::DecisionRetransmit: return "decision-retransmit";
    case TimerKind::ReplyDeadline: return "reply-deadline";
    case TimerKind::RegistrationDeadline: return "registration-deadline";
    case TimerKind::UnilateralAbort: return "unilateral-abort";
  }
  return "unknown";
}

}  // namespace bftdc
