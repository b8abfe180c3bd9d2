#pragma once

#include <map>
#include <optional>
#include <string_view>

#include "bftdc/bytes.hpp"
#include "bftdc/crypto.hpp"
#include "bftdc/ids.hpp"

namespace bftdc {

// Participant-signed (t, participant).
struct RegistrationRecord {
  TransactionId t;
  ParticipantId participant;
  Signature sig{};

  static Bytes signed_payload(TransactionId t, ParticipantId p);
  static RegistrationRecord make(TransactionId t, ParticipantId p, const Signer& signer);
  bool verify(const KeyDirectory& keys) const;

  void encode(Writer& w) const;
  static RegistrationRecord decode(Reader& r);

  friend bool operator==(const RegistrationRecord&, const RegistrationRecord&) = default;
};

// Participant-signed (t, participant, vote).
struct VoteRecord {
  TransactionId t;
  ParticipantId participant;
  Vote vote = Vote::Aborted;
  Signature sig{};

  static Bytes signed_payload(TransactionId t, ParticipantId p, Vote v);
  static VoteRecord make(TransactionId t, ParticipantId p, Vote v, const Signer& signer);
  bool verify(const KeyDirectory& keys) const;

  void encode(Writer& w) const;
  static VoteRecord decode(Reader& r);

  friend bool operator==(const VoteRecord&, const VoteRecord&) = default;
};

struct CertificateEntry {
  RegistrationRecord registration;
  std::optional<VoteRecord> vote;

  friend bool operator==(const CertificateEntry&, const CertificateEntry&) = default;
};

// Registration and vote records backing a proposed outcome. Keyed by
// participant, so there is at most one registration and one vote each, and a
// vote can only sit next to a registration. Records may carry a foreign
// transaction id (a replayed record); that is caught by check_certificate,
// not at construction, because certificates arrive from untrusted senders.
class DecisionCertificate {
 public:
  DecisionCertificate() = default;
  explicit DecisionCertificate(TransactionId t) : t_(t) {}

  TransactionId transaction() const { return t_; }

  // Idempotent; an existing entry for the participant is kept.
  void add_registration(const RegistrationRecord& record);
  // Returns false when the participant has no registration in this certificate.
  bool set_vote(const VoteRecord& record);
  void clear_vote(ParticipantId p);

  bool contains(ParticipantId p) const { return entries_.contains(p); }
  const CertificateEntry* find(ParticipantId p) const;
  const std::map<ParticipantId, CertificateEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  void encode(Writer& w) const;
  static DecisionCertificate decode(Reader& r);
  Bytes canonical_bytes() const;

  friend bool operator==(const DecisionCertificate&, const DecisionCertificate&) = default;

 private:
  TransactionId t_;
  std::map<ParticipantId, CertificateEntry> entries_;
};

Digest certificate_digest(const DecisionCertificate& c);

// Commit iff every registered participant has a Prepared vote.
Outcome evaluate_outcome(const DecisionCertificate& c);

enum class CertificateCheck {
  Ok,
  WrongTransaction,    // certificate itself is for another transaction
  StaleRecord,         // a record embeds another transaction id
  MisfiledRecord,      // record participant differs from its entry key
  BadSignature,
  OutcomeMismatch,
};

std::string_view to_string(CertificateCheck c);

// Signatures, transaction ids and entry keys of every record.
CertificateCheck check_records(const DecisionCertificate& c, TransactionId t,
                               const KeyDirectory& keys);

// check_records plus outcome consistency. A certificate with no registrations
// is consistent with either outcome.
CertificateCheck check_certificate(const DecisionCertificate& c, Outcome o, TransactionId t,
                                   const KeyDirectory& keys);

bool validate_certificate_consistency(const DecisionCertificate& c, Outcome o, TransactionId t,
                                      const KeyDirectory& keys);

}  // namespace bftdc
