#include "bftdc/messages.hpp"

#include <array>
#include <utility>

namespace bftdc {
namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 18> kKindNames{{
    {MessageKind::Register, "Register"},
    {MessageKind::RegisterAck, "RegisterAck"},
    {MessageKind::PrepareRequest, "PrepareRequest"},
    {MessageKind::VoteMsg, "VoteMsg"},
    {MessageKind::BaPrePrepare, "BaPrePrepare"},
    {MessageKind::BaPrepare, "BaPrepare"},
    {MessageKind::BaCommit, "BaCommit"},
    {MessageKind::ViewChange, "ViewChange"},
    {MessageKind::NewView, "NewView"},
    {MessageKind::DecisionNotification, "DecisionNotification"},
    {MessageKind::InitiatorCommitRequest, "InitiatorCommitRequest"},
    {MessageKind::InitiatorAbortRequest, "InitiatorAbortRequest"},
    {MessageKind::EndpointQuery, "EndpointQuery"},
    {MessageKind::EndpointReply, "EndpointReply"},
    {MessageKind::Propagate, "Propagate"},
    {MessageKind::PropagateReply, "PropagateReply"},
    {MessageKind::ViewChangeFetch, "ViewChangeFetch"},
    {MessageKind::CommitProof, "CommitProof"},
}};

void put_principal(Writer& w, PrincipalId p) {
  w.u8(static_cast<std::uint8_t>(p.role));
  w.u32(p.index);
}

PrincipalId get_principal(Reader& r) {
  auto role = r.u8();
  if (role < 1 || role > 3) throw DecodeError("invalid principal role");
  return PrincipalId{static_cast<Role>(role), r.u32()};
}

void put_outcome(Writer& w, Outcome o) { w.u8(static_cast<std::uint8_t>(o)); }

Outcome get_outcome(Reader& r) {
  auto raw = r.u8();
  if (raw != 1 && raw != 2) throw DecodeError("invalid outcome");
  return static_cast<Outcome>(raw);
}

void put_digest(Writer& w, const Digest& d) { w.fixed(d.bytes); }
Digest get_digest(Reader& r) { return Digest{r.fixed<32>()}; }

void put_envelopes(Writer& w, const std::vector<SignedEnvelope>& envs) {
  w.u32(static_cast<std::uint32_t>(envs.size()));
  for (const auto& e : envs) e.encode(w);
}

std::vector<SignedEnvelope> get_envelopes(Reader& r) {
  // kind + principal + empty body + signature
  auto n = r.count(1 + 5 + 4 + 64);
  std::vector<SignedEnvelope> envs;
  envs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) envs.push_back(SignedEnvelope::decode(r));
  return envs;
}

}  // namespace

std::string_view to_string(MessageKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "Unknown";
}

std::optional<MessageKind> parse_message_kind(std::string_view s) {
  for (const auto& [kind, name] : kKindNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

bool is_known_kind(std::uint8_t raw) { return raw >= 1 && raw <= kKindNames.size(); }

Bytes SignedEnvelope::signed_bytes() const {
  Writer w;
  w.str("bftdc-envelope");
  w.u8(static_cast<std::uint8_t>(kind));
  put_principal(w, sender);
  w.bytes(body);
  return std::move(w).take();
}

void SignedEnvelope::encode(Writer& w) const {
  w.u8(static_cast<std::uint8_t>(kind));
  put_principal(w, sender);
  w.bytes(body);
  w.fixed(sig);
}

SignedEnvelope SignedEnvelope::decode(Reader& r) {
  SignedEnvelope env;
  auto raw = r.u8();
  if (!is_known_kind(raw)) throw DecodeError("unknown message kind");
  env.kind = static_cast<MessageKind>(raw);
  env.sender = get_principal(r);
  env.body = r.bytes();
  env.sig = r.fixed<64>();
  return env;
}

Bytes SignedEnvelope::to_bytes() const {
  Writer w;
  encode(w);
  return std::move(w).take();
}

Digest SignedEnvelope::digest() const { return sha256(to_bytes()); }

SignedEnvelope sign(const Signer& signer, MessageKind kind, Bytes body) {
  SignedEnvelope env{kind, signer.principal(), std::move(body), {}};
  env.sig = signer.sign(env.signed_bytes());
  return env;
}

bool verify(const KeyDirectory& keys, const SignedEnvelope& env) {
  return keys.verify(env.sender, env.signed_bytes(), env.sig);
}

void RegisterMsg::encode(Writer& w) const {
  record.encode(w);
  w.str(endpoint);
}

RegisterMsg RegisterMsg::decode(Reader& r) {
  RegisterMsg m;
  m.record = RegistrationRecord::decode(r);
  m.endpoint = r.str();
  return m;
}

void RegisterAck::encode(Writer& w) const {
  w.u64(t.value());
  w.u32(participant.value());
}

RegisterAck RegisterAck::decode(Reader& r) {
  RegisterAck m;
  m.t = TransactionId{r.u64()};
  m.participant = ParticipantId{r.u32()};
  return m;
}

void InitiatorRequest::encode(Writer& w) const { w.u64(t.value()); }

InitiatorRequest InitiatorRequest::decode(Reader& r, MessageKind kind) {
  InitiatorRequest m;
  m.t = TransactionId{r.u64()};
  m.requested =
      kind == MessageKind::InitiatorCommitRequest ? Outcome::Commit : Outcome::Abort;
  return m;
}

void PrepareRequest::encode(Writer& w) const {
  w.u64(t.value());
  prepare_certificate.encode(w);
}

PrepareRequest PrepareRequest::decode(Reader& r) {
  PrepareRequest m;
  m.t = TransactionId{r.u64()};
  m.prepare_certificate = SignedEnvelope::decode(r);
  return m;
}

void VoteMsg::encode(Writer& w) const { record.encode(w); }

VoteMsg VoteMsg::decode(Reader& r) { return VoteMsg{VoteRecord::decode(r)}; }

void BaPrePrepare::encode(Writer& w) const {
  w.u64(v.value());
  w.u64(t.value());
  put_outcome(w, o);
  c.encode(w);
}

BaPrePrepare BaPrePrepare::decode(Reader& r) {
  BaPrePrepare m;
  m.v = View{r.u64()};
  m.t = TransactionId{r.u64()};
  m.o = get_outcome(r);
  m.c = DecisionCertificate::decode(r);
  return m;
}

template <MessageKind K>
void PhaseVote<K>::encode(Writer& w) const {
  w.u64(v.value());
  w.u64(t.value());
  put_digest(w, d);
  put_outcome(w, o);
  w.u32(i.value());
}

template <MessageKind K>
PhaseVote<K> PhaseVote<K>::decode(Reader& r) {
  PhaseVote<K> m;
  m.v = View{r.u64()};
  m.t = TransactionId{r.u64()};
  m.d = get_digest(r);
  m.o = get_outcome(r);
  m.i = ReplicaId{r.u32()};
  return m;
}

template struct PhaseVote<MessageKind::BaPrepare>;
template struct PhaseVote<MessageKind::BaCommit>;

void PrePrepareTuple::encode(Writer& w) const {
  w.u64(v.value());
  w.u64(t.value());
  put_outcome(w, o);
  c.encode(w);
}

PrePrepareTuple PrePrepareTuple::decode(Reader& r) {
  PrePrepareTuple m;
  m.v = View{r.u64()};
  m.t = TransactionId{r.u64()};
  m.o = get_outcome(r);
  m.c = DecisionCertificate::decode(r);
  return m;
}

void ViewChangePayload::encode(Writer& w) const {
  w.u8(pre_prepared ? 1 : 0);
  if (pre_prepared) pre_prepared->encode(w);
  put_envelopes(w, prepared_proof);
  w.u8(fallback ? 1 : 0);
  if (fallback) fallback->encode(w);
}

ViewChangePayload ViewChangePayload::decode(Reader& r) {
  ViewChangePayload p;
  auto has_tuple = r.u8();
  if (has_tuple > 1) throw DecodeError("invalid tuple flag");
  if (has_tuple) p.pre_prepared = PrePrepareTuple::decode(r);
  p.prepared_proof = get_envelopes(r);
  auto has_fallback = r.u8();
  if (has_fallback > 1) throw DecodeError("invalid fallback flag");
  if (has_fallback) p.fallback = DecisionCertificate::decode(r);
  return p;
}

void ViewChange::encode(Writer& w) const {
  w.u64(new_view.value());
  w.u64(t.value());
  p.encode(w);
  w.u32(i.value());
}

ViewChange ViewChange::decode(Reader& r) {
  ViewChange m;
  m.new_view = View{r.u64()};
  m.t = TransactionId{r.u64()};
  m.p = ViewChangePayload::decode(r);
  m.i = ReplicaId{r.u32()};
  return m;
}

void NewView::encode(Writer& w) const {
  w.u64(new_view.value());
  w.u32(static_cast<std::uint32_t>(view_changes.size()));
  for (const auto& ref : view_changes) {
    w.u32(ref.i.value());
    put_digest(w, ref.d);
  }
  w.u64(t.value());
  put_outcome(w, o);
  c.encode(w);
}

NewView NewView::decode(Reader& r) {
  NewView m;
  m.new_view = View{r.u64()};
  auto n = r.count(36);
  for (std::uint32_t k = 0; k < n; ++k) {
    ViewChangeRef ref;
    ref.i = ReplicaId{r.u32()};
    ref.d = get_digest(r);
    m.view_changes.push_back(ref);
  }
  m.t = TransactionId{r.u64()};
  m.o = get_outcome(r);
  m.c = DecisionCertificate::decode(r);
  return m;
}

void DecisionNotification::encode(Writer& w) const {
  w.u64(t.value());
  put_outcome(w, o);
}

DecisionNotification DecisionNotification::decode(Reader& r) {
  DecisionNotification m;
  m.t = TransactionId{r.u64()};
  m.o = get_outcome(r);
  return m;
}

void EndpointQuery::encode(Writer& w) const {
  w.u64(t.value());
  w.u32(participant.value());
}

EndpointQuery EndpointQuery::decode(Reader& r) {
  EndpointQuery m;
  m.t = TransactionId{r.u64()};
  m.participant = ParticipantId{r.u32()};
  return m;
}

void EndpointReply::encode(Writer& w) const {
  w.u64(t.value());
  w.u32(participant.value());
  w.u8(registration ? 1 : 0);
  if (registration) registration->encode(w);
  w.str(endpoint);
}

EndpointReply EndpointReply::decode(Reader& r) {
  EndpointReply m;
  m.t = TransactionId{r.u64()};
  m.participant = ParticipantId{r.u32()};
  auto found = r.u8();
  if (found > 1) throw DecodeError("invalid registration flag");
  if (found) m.registration = RegistrationRecord::decode(r);
  m.endpoint = r.str();
  return m;
}

void Propagate::encode(Writer& w) const { w.u64(t.value()); }

Propagate Propagate::decode(Reader& r) { return Propagate{TransactionId{r.u64()}}; }

void PropagateReply::encode(Writer& w) const {
  w.u64(t.value());
  w.u8(static_cast<std::uint8_t>(status));
}

PropagateReply PropagateReply::decode(Reader& r) {
  PropagateReply m;
  m.t = TransactionId{r.u64()};
  auto raw = r.u8();
  if (raw != 1 && raw != 2) throw DecodeError("invalid reply status");
  m.status = static_cast<ReplyStatus>(raw);
  return m;
}

void ViewChangeFetch::encode(Writer& w) const {
  w.u64(t.value());
  w.u64(new_view.value());
  w.u32(ref.i.value());
  put_digest(w, ref.d);
}

ViewChangeFetch ViewChangeFetch::decode(Reader& r) {
  ViewChangeFetch m;
  m.t = TransactionId{r.u64()};
  m.new_view = View{r.u64()};
  m.ref.i = ReplicaId{r.u32()};
  m.ref.d = get_digest(r);
  return m;
}

void CommitProof::encode(Writer& w) const {
  committed.encode(w);
  put_envelopes(w, commits);
}

CommitProof CommitProof::decode(Reader& r) {
  CommitProof m;
  m.committed = PrePrepareTuple::decode(r);
  m.commits = get_envelopes(r);
  return m;
}

TransactionId transaction_of(const SignedEnvelope& env) {
  switch (env.kind) {
    case MessageKind::Register: return unseal<RegisterMsg>(env).transaction();
    case MessageKind::RegisterAck: return unseal<RegisterAck>(env).transaction();
    case MessageKind::PrepareRequest: return unseal<PrepareRequest>(env).transaction();
    case MessageKind::VoteMsg: return unseal<VoteMsg>(env).transaction();
    case MessageKind::BaPrePrepare: return unseal<BaPrePrepare>(env).transaction();
    case MessageKind::BaPrepare: return unseal<BaPrepare>(env).transaction();
    case MessageKind::BaCommit: return unseal<BaCommit>(env).transaction();
    case MessageKind::ViewChange: return unseal<ViewChange>(env).transaction();
    case MessageKind::NewView: return unseal<NewView>(env).transaction();
    case MessageKind::DecisionNotification:
      return unseal<DecisionNotification>(env).transaction();
    case MessageKind::InitiatorCommitRequest:
    case MessageKind::InitiatorAbortRequest:
      return unseal<InitiatorRequest>(env).transaction();
    case MessageKind::EndpointQuery: return unseal<EndpointQuery>(env).transaction();
    case MessageKind::EndpointReply: return unseal<EndpointReply>(env).transaction();
    case MessageKind::Propagate: return unseal<Propagate>(env).transaction();
    case MessageKind::PropagateReply: return unseal<PropagateReply>(env).transaction();
    case MessageKind::ViewChangeFetch: return unseal<ViewChangeFetch>(env).transaction();
    case MessageKind::CommitProof: return unseal<CommitProof>(env).transaction();
  }
  throw DecodeError("unknown message kind");
}

}  // namespace bftdc
