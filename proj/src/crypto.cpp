#include "bftdc/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <stdexcept>

namespace bftdc {
namespace {

void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw std::runtime_error("libsodium initialisation failed");
}

void put_principal(Writer& w, PrincipalId p) {
  w.u8(static_cast<std::uint8_t>(p.role));
  w.u32(p.index);
}

}  // namespace

std::string to_hex(ByteView b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (auto c : b) {
    s.push_back(kDigits[c >> 4]);
    s.push_back(kDigits[c & 0xf]);
  }
  return s;
}

Digest sha256(ByteView data) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
  return d;
}

Ed25519Signer::Ed25519Signer(PrincipalId who, const std::array<std::uint8_t, 32>& seed)
    : who_(who) {
  ensure_sodium();
  crypto_sign_seed_keypair(public_.data(), secret_.data(), seed.data());
}

Signature Ed25519Signer::sign(ByteView payload) const {
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, payload.data(), payload.size(), secret_.data());
  return sig;
}

bool Ed25519Directory::verify(PrincipalId who, ByteView payload, const Signature& sig) const {
  auto it = keys_.find(who);
  if (it == keys_.end()) return false;
  return crypto_sign_verify_detached(sig.data(), payload.data(), payload.size(),
                                     it->second.data()) == 0;
}

void MockSignatureLog::record(PrincipalId who, ByteView payload) {
  std::lock_guard lock(mu_);
  entries_.emplace_back(who, Bytes(payload.begin(), payload.end()));
}

std::vector<std::pair<PrincipalId, Bytes>> MockSignatureLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

Signature mock_signature(PrincipalId who, ByteView payload) {
  Writer w;
  w.str("mock-signature");
  put_principal(w, who);
  w.bytes(payload);
  auto first = sha256(w.data());
  auto second = sha256(first.bytes);
  Signature sig{};
  std::copy(first.bytes.begin(), first.bytes.end(), sig.begin());
  std::copy(second.bytes.begin(), second.bytes.end(), sig.begin() + 32);
  return sig;
}

Signature MockSigner::sign(ByteView payload) const {
  if (log_) log_->record(who_, payload);
  return mock_signature(who_, payload);
}

bool MockDirectory::knows(PrincipalId who) const {
  return std::find(known_.begin(), known_.end(), who) != known_.end();
}

bool MockDirectory::verify(PrincipalId who, ByteView payload, const Signature& sig) const {
  return knows(who) && mock_signature(who, payload) == sig;
}

bool CachingDirectory::verify(PrincipalId who, ByteView payload, const Signature& sig) const {
  Writer w;
  put_principal(w, who);
  w.bytes(payload);
  w.fixed(sig);
  auto key = sha256(w.data());
  if (auto it = seen_.find(key); it != seen_.end()) return it->second;
  bool ok = inner_->verify(who, payload, sig);
  seen_.emplace(key, ok);
  return ok;
}

Keyring Keyring::ed25519(const std::vector<PrincipalId>& principals, std::uint64_t seed) {
  Keyring ring;
  auto directory = std::make_shared<Ed25519Directory>();
  for (auto who : principals) {
    Writer w;
    w.str("bftdc-key-seed");
    w.u64(seed);
    put_principal(w, who);
    auto key_seed = sha256(w.data());
    auto signer = std::make_shared<Ed25519Signer>(who, key_seed.bytes);
    directory->add(who, signer->public_key());
    ring.signers[who] = std::move(signer);
  }
  ring.directory = std::move(directory);
  return ring;
}

Keyring Keyring::mock(const std::vector<PrincipalId>& principals) {
  Keyring ring;
  auto directory = std::make_shared<MockDirectory>();
  for (auto who : principals) {
    directory->add(who);
    ring.signers[who] = std::make_shared<MockSigner>(who);
  }
  ring.directory = std::move(directory);
  return ring;
}

}  // namespace bftdc
