#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "bftdc/bytes.hpp"
#include "bftdc/ids.hpp"

namespace bftdc {

struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const { return to_hex(bytes); }
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

Digest sha256(ByteView data);

using Signature = std::array<std::uint8_t, 64>;

// Holds one principal's private key.
class Signer {
 public:
  virtual ~Signer() = default;
  virtual PrincipalId principal() const = 0;
  virtual Signature sign(ByteView payload) const = 0;
};

// Public-key lookup and verification for every registered principal.
class KeyDirectory {
 public:
  virtual ~KeyDirectory() = default;
  virtual bool knows(PrincipalId who) const = 0;
  virtual bool verify(PrincipalId who, ByteView payload, const Signature& sig) const = 0;
};

using PublicKey = std::array<std::uint8_t, 32>;

class Ed25519Signer final : public Signer {
 public:
  // Deterministic key pair derived from a 32-byte seed.
  Ed25519Signer(PrincipalId who, const std::array<std::uint8_t, 32>& seed);

  PrincipalId principal() const override { return who_; }
  Signature sign(ByteView payload) const override;
  const PublicKey& public_key() const { return public_; }

 private:
  PrincipalId who_;
  PublicKey public_{};
  std::array<std::uint8_t, 64> secret_{};
};

class Ed25519Directory final : public KeyDirectory {
 public:
  void add(PrincipalId who, const PublicKey& key) { keys_[who] = key; }

  bool knows(PrincipalId who) const override { return keys_.contains(who); }
  bool verify(PrincipalId who, ByteView payload, const Signature& sig) const override;

 private:
  std::map<PrincipalId, PublicKey> keys_;
};

// Test double: a keyed hash standing in for a signature. The log records
// every (signer, payload) pair so tests can assert on what was signed.
class MockSignatureLog {
 public:
  void record(PrincipalId who, ByteView payload);
  std::vector<std::pair<PrincipalId, Bytes>> entries() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::pair<PrincipalId, Bytes>> entries_;
};

class MockSigner final : public Signer {
 public:
  explicit MockSigner(PrincipalId who, std::shared_ptr<MockSignatureLog> log = nullptr)
      : who_(who), log_(std::move(log)) {}

  PrincipalId principal() const override { return who_; }
  Signature sign(ByteView payload) const override;

 private:
  PrincipalId who_;
  std::shared_ptr<MockSignatureLog> log_;
};

class MockDirectory final : public KeyDirectory {
 public:
  void add(PrincipalId who) { known_.push_back(who); }

  bool knows(PrincipalId who) const override;
  bool verify(PrincipalId who, ByteView payload, const Signature& sig) const override;

 private:
  std::vector<PrincipalId> known_;
};

Signature mock_signature(PrincipalId who, ByteView payload);

// Remembers verification results. In a simulation every recipient of a
// broadcast verifies the same bytes, so most checks are repeats. Not
// thread-safe: use one per run.
class CachingDirectory final : public KeyDirectory {
 public:
  explicit CachingDirectory(std::shared_ptr<const KeyDirectory> inner)
      : inner_(std::move(inner)) {}

  bool knows(PrincipalId who) const override { return inner_->knows(who); }
  bool verify(PrincipalId who, ByteView payload, const Signature& sig) const override;

 private:
  std::shared_ptr<const KeyDirectory> inner_;
  mutable std::map<Digest, bool> seen_;
};

// A full set of deterministic Ed25519 keys for a run.
struct Keyring {
  std::map<PrincipalId, std::shared_ptr<const Signer>> signers;
  std::shared_ptr<const KeyDirectory> directory;

  static Keyring ed25519(const std::vector<PrincipalId>& principals, std::uint64_t seed);
  static Keyring mock(const std::vector<PrincipalId>& principals);

  const Signer& signer(PrincipalId who) const { return *signers.at(who); }
};

}  // namespace bftdc
