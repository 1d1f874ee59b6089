#pragma once
// Thin wrappers over libsodium: SHA-256, Ed25519, X25519, HKDF-SHA-256
// (expand/extract over libsodium's HMAC), and ChaCha20-Poly1305 (IETF).

#include <sodium.h>

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "chiron/bytes.hpp"
#include "chiron/result.hpp"

namespace chiron::crypto {

inline void ensure_init() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error(Errc::CRYPTO_FAILURE, "sodium_init failed");
}

inline bool ct_equal(ByteSpan a, ByteSpan b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  return sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

struct RandomSource {
  virtual ~RandomSource() = default;
  virtual void fill(std::span<uint8_t> out) = 0;
};

struct SystemRandom final : RandomSource {
  void fill(std::span<uint8_t> out) override {
    ensure_init();
    randombytes_buf(out.data(), out.size());
  }
};

inline SystemRandom& system_random() {
  static SystemRandom rng;
  return rng;
}

// ---- SHA-256 -------------------------------------------------------------

inline std::array<uint8_t, 32> sha256(ByteSpan msg) {
  ensure_init();
  std::array<uint8_t, 32> out{};
  crypto_hash_sha256(out.data(), msg.data(), msg.size());
  return out;
}

// ---- Ed25519 -------------------------------------------------------------

struct SigningKey {
  std::array<uint8_t, 64> secret{};
  std::array<uint8_t, 32> public_key{};

  static SigningKey generate() {
    ensure_init();
    SigningKey k;
    crypto_sign_keypair(k.public_key.data(), k.secret.data());
    return k;
  }

  static SigningKey from_seed(const std::array<uint8_t, 32>& seed) {
    ensure_init();
    SigningKey k;
    crypto_sign_seed_keypair(k.public_key.data(), k.secret.data(), seed.data());
    return k;
  }
};

inline std::array<uint8_t, 64> sign(const SigningKey& key, ByteSpan msg) {
  ensure_init();
  std::array<uint8_t, 64> sig{};
  crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), key.secret.data());
  return sig;
}

inline bool verify(const std::array<uint8_t, 32>& public_key, ByteSpan msg,
                   const std::array<uint8_t, 64>& sig) {
  ensure_init();
  return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), public_key.data()) == 0;
}

// ---- X25519 --------------------------------------------------------------

inline std::array<uint8_t, 32> x25519_base(const std::array<uint8_t, 32>& secret) {
  ensure_init();
  std::array<uint8_t, 32> pub{};
  crypto_scalarmult_base(pub.data(), secret.data());
  return pub;
}

inline std::optional<std::array<uint8_t, 32>> x25519(const std::array<uint8_t, 32>& secret,
                                                     const std::array<uint8_t, 32>& peer_public) {
  ensure_init();
  std::array<uint8_t, 32> shared{};
  if (crypto_scalarmult(shared.data(), secret.data(), peer_public.data()) != 0) {
    return std::nullopt;
  }
  return shared;
}

// ---- HKDF-SHA-256 (RFC 5869) ----------------------------------------------

inline std::array<uint8_t, 32> hmac_sha256(ByteSpan key, ByteSpan msg) {
  ensure_init();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, msg.data(), msg.size());
  std::array<uint8_t, 32> out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  return out;
}

inline Bytes hkdf_sha256(ByteSpan salt, ByteSpan ikm, ByteSpan info, size_t out_len) {
  auto prk = hmac_sha256(salt, ikm);
  Bytes out;
  out.reserve(out_len);
  Bytes block;
  uint8_t counter = 1;
  while (out.size() < out_len) {
    Bytes input = block;
    append(input, info);
    input.push_back(counter++);
    auto t = hmac_sha256(ByteSpan(prk.data(), prk.size()), input);
    block.assign(t.begin(), t.end());
    size_t take_n = std::min(block.size(), out_len - out.size());
    out.insert(out.end(), block.begin(), block.begin() + static_cast<long>(take_n));
  }
  return out;
}

// ---- ChaCha20-Poly1305 (IETF, 12-byte nonce, detached 16-byte tag) ---------

struct AeadSealed {
  Bytes ciphertext;
  std::array<uint8_t, 16> tag{};
};

inline AeadSealed aead_seal(const std::array<uint8_t, 32>& key,
                            const std::array<uint8_t, 12>& nonce, ByteSpan plaintext,
                            ByteSpan aad) {
  ensure_init();
  AeadSealed out;
  out.ciphertext.resize(plaintext.size());
  unsigned long long taglen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt_detached(
      out.ciphertext.data(), out.tag.data(), &taglen, plaintext.data(), plaintext.size(),
      aad.data(), aad.size(), nullptr, nonce.data(), key.data());
  return out;
}

inline std::optional<Bytes> aead_open(const std::array<uint8_t, 32>& key,
                                      const std::array<uint8_t, 12>& nonce, ByteSpan ciphertext,
                                      const std::array<uint8_t, 16>& tag, ByteSpan aad) {
  ensure_init();
  Bytes plain(ciphertext.size());
  if (crypto_aead_chacha20poly1305_ietf_decrypt_detached(
          plain.data(), nullptr, ciphertext.data(), ciphertext.size(), tag.data(), aad.data(),
          aad.size(), nonce.data(), key.data()) != 0) {
    return std::nullopt;
  }
  return plain;
}

}  // namespace chiron::crypto
