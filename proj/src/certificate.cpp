#include "bftdc/certificate.hpp"

namespace bftdc {
namespace {

constexpr std::uint8_t kRegistrationTag = 'R';
constexpr std::uint8_t kVoteTag = 'V';

Vote decode_vote(std::uint8_t raw) {
  if (raw != static_cast<std::uint8_t>(Vote::Prepared) &&
      raw != static_cast<std::uint8_t>(Vote::Aborted)) {
    throw DecodeError("invalid vote value");
  }
  return static_cast<Vote>(raw);
}

}  // namespace

Bytes RegistrationRecord::signed_payload(TransactionId t, ParticipantId p) {
  Writer w;
  w.u8(kRegistrationTag);
  w.u64(t.value());
  w.u32(p.value());
  return std::move(w).take();
}

RegistrationRecord RegistrationRecord::make(TransactionId t, ParticipantId p,
                                            const Signer& signer) {
  return {t, p, signer.sign(signed_payload(t, p))};
}

bool RegistrationRecord::verify(const KeyDirectory& keys) const {
  return keys.verify(PrincipalId::participant(participant), signed_payload(t, participant), sig);
}

void RegistrationRecord::encode(Writer& w) const {
  w.u64(t.value());
  w.u32(participant.value());
  w.fixed(sig);
}

RegistrationRecord RegistrationRecord::decode(Reader& r) {
  RegistrationRecord rec;
  rec.t = TransactionId{r.u64()};
  rec.participant = ParticipantId{r.u32()};
  rec.sig = r.fixed<64>();
  return rec;
}

Bytes VoteRecord::signed_payload(TransactionId t, ParticipantId p, Vote v) {
  Writer w;
  w.u8(kVoteTag);
  w.u64(t.value());
  w.u32(p.value());
  w.u8(static_cast<std::uint8_t>(v));
  return std::move(w).take();
}

VoteRecord VoteRecord::make(TransactionId t, ParticipantId p, Vote v, const Signer& signer) {
  return {t, p, v, signer.sign(signed_payload(t, p, v))};
}

bool VoteRecord::verify(const KeyDirectory& keys) const {
  return keys.verify(PrincipalId::participant(participant), signed_payload(t, participant, vote),
                     sig);
}

void VoteRecord::encode(Writer& w) const {
  w.u64(t.value());
  w.u32(participant.value());
  w.u8(static_cast<std::uint8_t>(vote));
  w.fixed(sig);
}

VoteRecord VoteRecord::decode(Reader& r) {
  VoteRecord rec;
  rec.t = TransactionId{r.u64()};
  rec.participant = ParticipantId{r.u32()};
  rec.vote = decode_vote(r.u8());
  rec.sig = r.fixed<64>();
  return rec;
}

void DecisionCertificate::add_registration(const RegistrationRecord& record) {
  entries_.try_emplace(record.participant, CertificateEntry{record, std::nullopt});
}

bool DecisionCertificate::set_vote(const VoteRecord& record) {
  auto it = entries_.find(record.participant);
  if (it == entries_.end()) return false;
  it->second.vote = record;
  return true;
}

void DecisionCertificate::clear_vote(ParticipantId p) {
  if (auto it = entries_.find(p); it != entries_.end()) it->second.vote.reset();
}

const CertificateEntry* DecisionCertificate::find(ParticipantId p) const {
  auto it = entries_.find(p);
  return it == entries_.end() ? nullptr : &it->second;
}

void DecisionCertificate::encode(Writer& w) const {
  w.u64(t_.value());
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [p, entry] : entries_) {
    entry.registration.encode(w);
    w.u8(entry.vote ? 1 : 0);
    if (entry.vote) entry.vote->encode(w);
  }
}

DecisionCertificate DecisionCertificate::decode(Reader& r) {
  DecisionCertificate c(TransactionId{r.u64()});
  auto n = r.count(77);
  for (std::uint32_t i = 0; i < n; ++i) {
    CertificateEntry entry{RegistrationRecord::decode(r), std::nullopt};
    auto has_vote = r.u8();
    if (has_vote > 1) throw DecodeError("invalid vote presence flag");
    if (has_vote) entry.vote = VoteRecord::decode(r);
    auto key = entry.registration.participant;
    if (!c.entries_.emplace(key, std::move(entry)).second) {
      throw DecodeError("duplicate participant in certificate");
    }
  }
  return c;
}

Bytes DecisionCertificate::canonical_bytes() const {
  Writer w;
  encode(w);
  return std::move(w).take();
}

Digest certificate_digest(const DecisionCertificate& c) {
  return sha256(c.canonical_bytes());
}

Outcome evaluate_outcome(const DecisionCertificate& c) {
  for (const auto& [p, entry] : c.entries()) {
    if (!entry.vote || entry.vote->vote != Vote::Prepared) return Outcome::Abort;
  }
  return Outcome::Commit;
}

std::string_view to_string(CertificateCheck c) {
  switch (c) {
    case CertificateCheck::Ok: return "ok";
    case CertificateCheck::WrongTransaction: return "wrong-transaction";
    case CertificateCheck::StaleRecord: return "stale-record";
    case CertificateCheck::MisfiledRecord: return "misfiled-record";
    case CertificateCheck::BadSignature: return "bad-record-signature";
    case CertificateCheck::OutcomeMismatch: return "outcome-inconsistent";
  }
  return "unknown";
}

CertificateCheck check_records(const DecisionCertificate& c, TransactionId t,
                               const KeyDirectory& keys) {
  if (c.transaction() != t) return CertificateCheck::WrongTransaction;
  for (const auto& [p, entry] : c.entries()) {
    if (entry.registration.t != t) return CertificateCheck::StaleRecord;
    if (entry.registration.participant != p) return CertificateCheck::MisfiledRecord;
    if (!entry.registration.verify(keys)) return CertificateCheck::BadSignature;
    if (entry.vote) {
      if (entry.vote->t != t) return CertificateCheck::StaleRecord;
      if (entry.vote->participant != p) return CertificateCheck::MisfiledRecord;
      if (!entry.vote->verify(keys)) return CertificateCheck::BadSignature;
    }
  }
  return CertificateCheck::Ok;
}

CertificateCheck check_certificate(const DecisionCertificate& c, Outcome o, TransactionId t,
                                   const KeyDirectory& keys) {
  auto records = check_records(c, t, keys);
  if (records != CertificateCheck::Ok) return records;
  if (!c.empty() && evaluate_outcome(c) != o) return CertificateCheck::OutcomeMismatch;
  return CertificateCheck::Ok;
}

bool validate_certificate_consistency(const DecisionCertificate& c, Outcome o, TransactionId t,
                                      const KeyDirectory& keys) {
  return check_certificate(c, o, t, keys) == CertificateCheck::Ok;
}

}  // namespace bftdc
