#include "bftdc/ids.hpp"

#include <charconv>

namespace bftdc {

std::string_view to_string(Outcome o) {
  return o == Outcome::Commit ? "Commit" : "Abort";
}

std::string_view to_string(Vote v) {
  return v == Vote::Prepared ? "Prepared" : "Aborted";
}

std::optional<Outcome> parse_outcome(std::string_view s) {
  if (s == "Commit" || s == "commit") return Outcome::Commit;
  if (s == "Abort" || s == "abort") return Outcome::Abort;
  return std::nullopt;
}

std::optional<Vote> parse_vote(std::string_view s) {
  if (s == "Prepared" || s == "prepared") return Vote::Prepared;
  if (s == "Aborted" || s == "aborted") return Vote::Aborted;
  return std::nullopt;
}

std::string to_string(PrincipalId p) {
  char prefix = 'r';
  switch (p.role) {
    case Role::Replica: prefix = 'r'; break;
    case Role::Participant: prefix = 'p'; break;
    case Role::Initiator: prefix = 'i'; break;
  }
  return prefix + std::to_string(p.index);
}

std::optional<PrincipalId> parse_principal(std::string_view s) {
  if (s.size() < 2) return std::nullopt;
  Role role;
  switch (s.front()) {
    case 'r': role = Role::Replica; break;
    case 'p': role = Role::Participant; break;
    case 'i': role = Role::Initiator; break;
    default: return std::nullopt;
  }
  std::uint32_t index = 0;
  auto digits = s.substr(1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return PrincipalId{role, index};
}

}  // namespace bftdc
