#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "bftdc/certificate.hpp"
#include "bftdc/crypto.hpp"
#include "bftdc/effects.hpp"
#include "bftdc/ids.hpp"
#include "bftdc/messages.hpp"

namespace bftdc {

enum class AgreementStatus : std::uint8_t { Idle, BaPrePrepared, BaPrepared, BaCommitted };

std::string_view to_string(AgreementStatus s);

struct AgreementConfig {
  std::uint32_t f = 1;
  SimTime base_timeout = 50;
};

// Timeout of view v: base doubled once per view change.
SimTime view_timeout(SimTime base, View v);

struct NewViewDecision {
  Outcome o = Outcome::Abort;
  DecisionCertificate c;
  // 1: adopted a ba-prepared proof; 2: rebuilt from the records.
  int rule = 2;
};

// New-view construction over 2f+1 already-validated view changes.
// Rule 1 adopts the (o, C) of the ba-prepared proof from the highest view
// when all proofs of that view agree. Otherwise registrations and votes are
// unioned across payloads, a participant with conflicting votes counts as
// Prepared, and o = evaluate_outcome of the rebuilt certificate.
NewViewDecision build_new_view(std::span<const ViewChange> view_changes, TransactionId t);

struct BuiltNewView {
  NewViewDecision decision;
  std::vector<ViewChangeRef> refs;
};

// Same, from signed envelopes; also lists (sender, digest) for each.
BuiltNewView build_new_view(std::span<const SignedEnvelope> view_changes, TransactionId t);

// What the coordinator must act on after one agreement event.
struct AgreementStep {
  Effects fx;
  // A certificate this replica now relies on; its registrations must be
  // merged locally and unknown endpoints fetched from `sources`.
  std::optional<DecisionCertificate> adopted;
  std::vector<ReplicaId> sources;
  bool committed = false;
};

// One replica's Byzantine agreement instance for one transaction.
class AgreementInstance {
 public:
  AgreementInstance(ReplicaId self, TransactionId t, AgreementConfig config,
                    std::shared_ptr<const Signer> signer, std::shared_ptr<const KeyDirectory> keys);

  // Called once the local prepare phase is over. Requires
  // validate_certificate_consistency(c, o, t); throws std::invalid_argument
  // otherwise.
  AgreementStep start(Outcome o, const DecisionCertificate& c, SimTime now);

  // `local` is the replica's own registrations and votes.
  AgreementStep on_message(const SignedEnvelope& env, const DecisionCertificate& local,
                           SimTime now);
  AgreementStep on_timer(const TimerKey& key, const DecisionCertificate& local, SimTime now);

  AgreementStep on_ba_pre_prepare(const SignedEnvelope& env, const DecisionCertificate& local,
                                  SimTime now);
  AgreementStep on_ba_prepare(const SignedEnvelope& env, SimTime now);
  AgreementStep on_ba_commit(const SignedEnvelope& env, SimTime now);
  AgreementStep on_view_change(const SignedEnvelope& env, const DecisionCertificate& local,
                               SimTime now);
  AgreementStep on_new_view(const SignedEnvelope& env, const DecisionCertificate& local,
                            SimTime now);
  AgreementStep on_view_change_fetch(const SignedEnvelope& env);
  AgreementStep on_commit_proof(const SignedEnvelope& env, SimTime now);

  // Start a view change to view_ + 1 (timeout or suspicion).
  AgreementStep initiate_view_change(const DecisionCertificate& local, SimTime now,
                                     std::string_view reason);

  ReplicaId self() const { return self_; }
  TransactionId transaction() const { return t_; }
  View view() const { return view_; }
  bool view_active() const { return view_active_; }
  View installed_view() const { return installed_; }
  AgreementStatus status() const { return status_; }
  bool started() const { return started_; }
  bool is_primary() const { return primary_of(view_, config_.f) == self_; }
  std::optional<Outcome> decided() const;
  const std::optional<PrePrepareTuple>& accepted() const { return accepted_; }
  std::optional<PrePrepareTuple> committed_tuple() const;
  SimTime timeout_for(View v) const { return view_timeout(config_.base_timeout, v); }
  const std::vector<SignedEnvelope>& message_log() const { return log_; }

  // Payload this replica would put in a view change right now.
  ViewChangePayload view_change_payload(const DecisionCertificate& local) const;

  // Validity of a view change for this transaction; returns the reason when
  // invalid.
  std::optional<std::string_view> check_view_change(const SignedEnvelope& env,
                                                    const ViewChange& msg) const;

 private:
  using VoteKey = std::pair<Digest, Outcome>;
  using Ballots = std::map<View, std::map<VoteKey, std::map<ReplicaId, SignedEnvelope>>>;

  struct StoredViewChange {
    SignedEnvelope env;
    ViewChange msg;
  };

  struct PreparedCertificate {
    PrePrepareTuple tuple;
    std::vector<SignedEnvelope> proof;
  };

  struct CommittedCertificate {
    PrePrepareTuple tuple;
    std::vector<SignedEnvelope> commits;
  };

  bool signed_by_replica(const SignedEnvelope& env) const;
  std::vector<ReplicaId> other_replicas() const;
  std::vector<ReplicaId> other_backups(View v) const;
  void arm_timer(AgreementStep& step, View v, SimTime now);
  void reject(AgreementStep& step, std::string_view event, std::string_view reason,
              const SignedEnvelope* env);
  void accept_proposal(AgreementStep& step, View v, Outcome o, const DecisionCertificate& c,
                       std::string_view event);
  void send_ba_prepare(AgreementStep& step);
  void check_prepared(AgreementStep& step);
  void check_committed(AgreementStep& step);
  void mark_committed(AgreementStep& step, PrePrepareTuple tuple,
                      std::vector<SignedEnvelope> commits, std::string_view via);
  void send_view_change(AgreementStep& step, View target, const DecisionCertificate& local,
                        SimTime now, std::string_view reason);
  void store_view_change(const SignedEnvelope& env, const ViewChange& msg);
  void maybe_join(AgreementStep& step, const DecisionCertificate& local, SimTime now);
  void maybe_new_view(AgreementStep& step, View w, SimTime now);
  void try_pending_new_view(AgreementStep& step, const DecisionCertificate& local, SimTime now);
  std::set<ReplicaId> evidence_senders(View v, const VoteKey& key) const;
  Detail detail(std::string_view event) const;

  ReplicaId self_;
  TransactionId t_;
  AgreementConfig config_;
  std::shared_ptr<const Signer> signer_;
  std::shared_ptr<const KeyDirectory> keys_;

  View view_{0};
  bool view_active_ = true;
  View installed_{0};
  std::optional<View> last_view_change_;
  AgreementStatus status_ = AgreementStatus::Idle;
  bool started_ = false;
  std::optional<std::pair<Outcome, DecisionCertificate>> proposal_;

  std::optional<PrePrepareTuple> accepted_;  // in view_
  Digest accepted_digest_;
  std::optional<PrePrepareTuple> last_pre_prepared_;
  std::optional<PreparedCertificate> prepared_;
  std::optional<CommittedCertificate> committed_;

  Ballots prepares_;
  Ballots commits_;
  std::map<View, std::map<ReplicaId, std::map<Digest, StoredViewChange>>> view_changes_;
  std::map<View, std::vector<ViewChangeRef>> arrival_;
  std::set<View> armed_;
  std::optional<SignedEnvelope> pending_new_view_;
  std::set<std::pair<std::uint64_t, ViewChangeRef>> fetched_;
  std::set<std::pair<ReplicaId, View>> proof_sent_to_;
  std::vector<SignedEnvelope> log_;
};

}  // namespace bftdc
