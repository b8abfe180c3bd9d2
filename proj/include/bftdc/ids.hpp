#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace bftdc {

// Thin wrapper that keeps identifiers of different domains from mixing.
template <typename Tag, typename Rep>
class StrongId {
 public:
  using rep_type = Rep;

  constexpr StrongId() = default;
  constexpr explicit StrongId(Rep value) : value_(value) {}

  constexpr Rep value() const { return value_; }

  friend constexpr auto operator<=>(StrongId, StrongId) = default;

 private:
  Rep value_{};
};

using TransactionId = StrongId<struct TransactionTag, std::uint64_t>;
using ReplicaId = StrongId<struct ReplicaTag, std::uint32_t>;
using ParticipantId = StrongId<struct ParticipantTag, std::uint32_t>;
using View = StrongId<struct ViewTag, std::uint64_t>;

constexpr View next(View v) { return View{v.value() + 1}; }

enum class Outcome : std::uint8_t { Commit = 1, Abort = 2 };
enum class Vote : std::uint8_t { Prepared = 1, Aborted = 2 };

constexpr Outcome opposite(Outcome o) {
  return o == Outcome::Commit ? Outcome::Abort : Outcome::Commit;
}

std::string_view to_string(Outcome o);
std::string_view to_string(Vote v);
std::optional<Outcome> parse_outcome(std::string_view s);
std::optional<Vote> parse_vote(std::string_view s);

enum class Role : std::uint8_t { Replica = 1, Participant = 2, Initiator = 3 };

// Any signing principal: coordinator replica, participant, or initiator.
struct PrincipalId {
  Role role = Role::Replica;
  std::uint32_t index = 0;

  static constexpr PrincipalId replica(ReplicaId r) {
    return {Role::Replica, r.value()};
  }
  static constexpr PrincipalId participant(ParticipantId p) {
    return {Role::Participant, p.value()};
  }
  static constexpr PrincipalId initiator(std::uint32_t index = 0) {
    return {Role::Initiator, index};
  }

  bool is_replica() const { return role == Role::Replica; }
  bool is_participant() const { return role == Role::Participant; }
  bool is_initiator() const { return role == Role::Initiator; }
  ReplicaId as_replica() const { return ReplicaId{index}; }
  ParticipantId as_participant() const { return ParticipantId{index}; }

  friend constexpr auto operator<=>(PrincipalId, PrincipalId) = default;
};

// "r0", "p3", "i0".
std::string to_string(PrincipalId p);
std::optional<PrincipalId> parse_principal(std::string_view s);

// Replica count, quorum sizes and primary selection for fault bound f.
constexpr std::uint32_t replica_count(std::uint32_t f) { return 3 * f + 1; }
constexpr std::uint32_t prepared_quorum(std::uint32_t f) { return 2 * f; }
constexpr std::uint32_t commit_quorum(std::uint32_t f) { return 2 * f + 1; }
constexpr std::uint32_t registration_quorum(std::uint32_t f) { return 2 * f + 1; }
constexpr std::uint32_t decision_quorum(std::uint32_t f) { return f + 1; }
constexpr std::uint32_t view_change_join_quorum(std::uint32_t f) { return f + 1; }

constexpr ReplicaId primary_of(View v, std::uint32_t f) {
  return ReplicaId{static_cast<std::uint32_t>(v.value() % replica_count(f))};
}

}  // namespace bftdc
