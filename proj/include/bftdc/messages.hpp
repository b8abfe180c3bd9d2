#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "bftdc/bytes.hpp"
#include "bftdc/certificate.hpp"
#include "bftdc/crypto.hpp"
#include "bftdc/ids.hpp"

namespace bftdc {

// Wire tags. Values are part of the canonical encoding; never renumber.
enum class MessageKind : std::uint8_t {
  Register = 1,
  RegisterAck = 2,
  PrepareRequest = 3,
  VoteMsg = 4,
  BaPrePrepare = 5,
  BaPrepare = 6,
  BaCommit = 7,
  ViewChange = 8,
  NewView = 9,
  DecisionNotification = 10,
  InitiatorCommitRequest = 11,
  InitiatorAbortRequest = 12,
  EndpointQuery = 13,
  EndpointReply = 14,
  // Auxiliary traffic of the simulated application and recovery paths.
  Propagate = 15,
  PropagateReply = 16,
  ViewChangeFetch = 17,
  CommitProof = 18,
};

std::string_view to_string(MessageKind k);
std::optional<MessageKind> parse_message_kind(std::string_view s);
bool is_known_kind(std::uint8_t raw);

struct SignedEnvelope {
  MessageKind kind = MessageKind::Register;
  PrincipalId sender;
  Bytes body;
  Signature sig{};

  // Bytes covered by the signature: kind, sender and body.
  Bytes signed_bytes() const;

  void encode(Writer& w) const;
  static SignedEnvelope decode(Reader& r);
  Bytes to_bytes() const;
  Digest digest() const;

  friend bool operator==(const SignedEnvelope&, const SignedEnvelope&) = default;
};

SignedEnvelope sign(const Signer& signer, MessageKind kind, Bytes body);
bool verify(const KeyDirectory& keys, const SignedEnvelope& env);

struct RegisterMsg {
  static constexpr MessageKind kKind = MessageKind::Register;
  RegistrationRecord record;
  std::string endpoint;

  TransactionId transaction() const { return record.t; }
  void encode(Writer& w) const;
  static RegisterMsg decode(Reader& r);
};

struct RegisterAck {
  static constexpr MessageKind kKind = MessageKind::RegisterAck;
  TransactionId t;
  ParticipantId participant;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static RegisterAck decode(Reader& r);
};

// The initiator's signed commit/abort request. A commit request doubles as
// the prepare certificate.
struct InitiatorRequest {
  TransactionId t;
  Outcome requested = Outcome::Commit;

  MessageKind kind() const {
    return requested == Outcome::Commit ? MessageKind::InitiatorCommitRequest
                                        : MessageKind::InitiatorAbortRequest;
  }
  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static InitiatorRequest decode(Reader& r, MessageKind kind);
};

struct PrepareRequest {
  static constexpr MessageKind kKind = MessageKind::PrepareRequest;
  TransactionId t;
  SignedEnvelope prepare_certificate;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static PrepareRequest decode(Reader& r);
};

struct VoteMsg {
  static constexpr MessageKind kKind = MessageKind::VoteMsg;
  VoteRecord record;

  TransactionId transaction() const { return record.t; }
  void encode(Writer& w) const;
  static VoteMsg decode(Reader& r);
};

struct BaPrePrepare {
  static constexpr MessageKind kKind = MessageKind::BaPrePrepare;
  View v;
  TransactionId t;
  Outcome o = Outcome::Abort;
  DecisionCertificate c;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static BaPrePrepare decode(Reader& r);
};

// Shared layout of ba-prepare and ba-commit: (v, t, d, o, i).
template <MessageKind K>
struct PhaseVote {
  static constexpr MessageKind kKind = K;
  View v;
  TransactionId t;
  Digest d;
  Outcome o = Outcome::Abort;
  ReplicaId i;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static PhaseVote decode(Reader& r);
};

using BaPrepare = PhaseVote<MessageKind::BaPrepare>;
using BaCommit = PhaseVote<MessageKind::BaCommit>;

struct PrePrepareTuple {
  View v;
  TransactionId t;
  Outcome o = Outcome::Abort;
  DecisionCertificate c;

  void encode(Writer& w) const;
  static PrePrepareTuple decode(Reader& r);
};

// The P field of a view change.
struct ViewChangePayload {
  std::optional<PrePrepareTuple> pre_prepared;
  // 2f signed BaPrepare/BaCommit envelopes matching pre_prepared, or empty.
  std::vector<SignedEnvelope> prepared_proof;
  // Local certificate, present when the replica never ba-pre-prepared.
  std::optional<DecisionCertificate> fallback;

  void encode(Writer& w) const;
  static ViewChangePayload decode(Reader& r);
};

struct ViewChange {
  static constexpr MessageKind kKind = MessageKind::ViewChange;
  View new_view;
  TransactionId t;
  ViewChangePayload p;
  ReplicaId i;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static ViewChange decode(Reader& r);
};

struct ViewChangeRef {
  ReplicaId i;
  Digest d;

  friend bool operator==(const ViewChangeRef&, const ViewChangeRef&) = default;
  friend auto operator<=>(const ViewChangeRef&, const ViewChangeRef&) = default;
};

struct NewView {
  static constexpr MessageKind kKind = MessageKind::NewView;
  View new_view;
  std::vector<ViewChangeRef> view_changes;
  TransactionId t;
  Outcome o = Outcome::Abort;
  DecisionCertificate c;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static NewView decode(Reader& r);
};

struct DecisionNotification {
  static constexpr MessageKind kKind = MessageKind::DecisionNotification;
  TransactionId t;
  Outcome o = Outcome::Abort;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static DecisionNotification decode(Reader& r);
};

struct EndpointQuery {
  static constexpr MessageKind kKind = MessageKind::EndpointQuery;
  TransactionId t;
  ParticipantId participant;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static EndpointQuery decode(Reader& r);
};

struct EndpointReply {
  static constexpr MessageKind kKind = MessageKind::EndpointReply;
  TransactionId t;
  ParticipantId participant;
  // Absent for a negative reply.
  std::optional<RegistrationRecord> registration;
  std::string endpoint;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static EndpointReply decode(Reader& r);
};

struct Propagate {
  static constexpr MessageKind kKind = MessageKind::Propagate;
  TransactionId t;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static Propagate decode(Reader& r);
};

enum class ReplyStatus : std::uint8_t { Ok = 1, Exception = 2 };

struct PropagateReply {
  static constexpr MessageKind kKind = MessageKind::PropagateReply;
  TransactionId t;
  ReplyStatus status = ReplyStatus::Ok;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static PropagateReply decode(Reader& r);
};

struct ViewChangeFetch {
  static constexpr MessageKind kKind = MessageKind::ViewChangeFetch;
  TransactionId t;
  View new_view;
  ViewChangeRef ref;

  TransactionId transaction() const { return t; }
  void encode(Writer& w) const;
  static ViewChangeFetch decode(Reader& r);
};

// Sent by a ba-committed replica to a replica still changing views: the
// committed tuple plus 2f+1 matching signed ba-commits.
struct CommitProof {
  static constexpr MessageKind kKind = MessageKind::CommitProof;
  PrePrepareTuple committed;
  std::vector<SignedEnvelope> commits;

  TransactionId transaction() const { return committed.t; }
  void encode(Writer& w) const;
  static CommitProof decode(Reader& r);
};

// Serialise and sign a message in one step.
template <typename M>
SignedEnvelope seal(const Signer& signer, const M& msg) {
  Writer w;
  msg.encode(w);
  if constexpr (std::is_same_v<M, InitiatorRequest>) {
    return sign(signer, msg.kind(), std::move(w).take());
  } else {
    return sign(signer, M::kKind, std::move(w).take());
  }
}

// Decode an envelope body as M. Throws DecodeError on a kind mismatch,
// malformed input, or trailing bytes.
template <typename M>
M unseal(const SignedEnvelope& env) {
  Reader r(env.body);
  if constexpr (std::is_same_v<M, InitiatorRequest>) {
    if (env.kind != MessageKind::InitiatorCommitRequest &&
        env.kind != MessageKind::InitiatorAbortRequest) {
      throw DecodeError("not an initiator request");
    }
    auto m = InitiatorRequest::decode(r, env.kind);
    r.expect_end();
    return m;
  } else {
    if (env.kind != M::kKind) throw DecodeError("unexpected message kind");
    auto m = M::decode(r);
    r.expect_end();
    return m;
  }
}

// Transaction id carried by any envelope body.
TransactionId transaction_of(const SignedEnvelope& env);

}  // namespace bftdc
