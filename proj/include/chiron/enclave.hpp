#pragma once
// Simulated trusted-hardware substrate: enclave instances with deterministic
// code measurement, a per-platform root signing key standing in for the
// hardware vendor's attestation root, and quote generation/verification.
//
// Isolation here is a module-boundary discipline: enclave-internal state is
// private, crossings happen only through declared entry points, and every
// crossing is recorded in the platform's boundary log.

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>

#include "chiron/audit.hpp"
#include "chiron/bytes.hpp"
#include "chiron/crypto.hpp"
#include "chiron/result.hpp"
#include "chiron/testing.hpp"

namespace chiron::enclave {

struct CodeImage {
  Bytes bytes;
};

struct Measurement {
  std::array<uint8_t, 32> digest{};

  bool operator==(const Measurement&) const = default;
  std::string hex() const { return hex_encode(digest); }

  static std::optional<Measurement> from_hex(std::string_view s) {
    auto raw = hex_decode(s);
    if (!raw || raw->size() != 32) return std::nullopt;
    Measurement m;
    std::copy(raw->begin(), raw->end(), m.digest.begin());
    return m;
  }
};

inline Measurement measure(const CodeImage& image) {
  return Measurement{crypto::sha256(image.bytes)};
}

struct Quote {
  static constexpr size_t kWireSize = 32 + 64 + 64;

  Measurement measurement;
  std::array<uint8_t, 64> report_data{};
  std::array<uint8_t, 64> signature{};

  // measurement (32) || report_data (64) || signature (64), no framing.
  Bytes serialize() const {
    Bytes out;
    out.reserve(kWireSize);
    append(out, measurement.digest);
    append(out, report_data);
    append(out, signature);
    return out;
  }

  static std::optional<Quote> parse(ByteSpan b) {
    if (b.size() != kWireSize) return std::nullopt;
    Quote q;
    q.measurement.digest = take<32>(b, 0);
    q.report_data = take<64>(b, 32);
    q.signature = take<64>(b, 96);
    return q;
  }

  Bytes signed_payload() const {
    Bytes msg;
    msg.reserve(96);
    append(msg, measurement.digest);
    append(msg, report_data);
    return msg;
  }
};

enum class QuoteVerdict : uint8_t { ACCEPT, BAD_SIGNATURE, MEASUREMENT_MISMATCH };

inline QuoteVerdict verify_quote(const Quote& quote, const Measurement& expected,
                                 const std::array<uint8_t, 32>& root_public_key) {
  if (!crypto::verify(root_public_key, quote.signed_payload(), quote.signature)) {
    return QuoteVerdict::BAD_SIGNATURE;
  }
  if (!(quote.measurement == expected)) {
    return QuoteVerdict::MEASUREMENT_MISMATCH;
  }
  return QuoteVerdict::ACCEPT;
}

enum class EnclaveState : uint8_t { CREATED, PROVISIONED, TRAINING, SERVING, TERMINATED };

inline std::string_view enclave_state_name(EnclaveState s) {
  switch (s) {
    case EnclaveState::CREATED: return "CREATED";
    case EnclaveState::PROVISIONED: return "PROVISIONED";
    case EnclaveState::TRAINING: return "TRAINING";
    case EnclaveState::SERVING: return "SERVING";
    case EnclaveState::TERMINATED: return "TERMINATED";
  }
  return "?";
}

class Platform;

class Enclave {
 public:
  Enclave(Platform* platform, uint64_t id, Measurement m)
      : platform_(platform), id_(id), measurement_(m) {}

  uint64_t id() const { return id_; }
  const Measurement& measurement() const { return measurement_; }

  EnclaveState state() const {
    std::lock_guard lk(mu_);
    return state_;
  }

  // Transitions only along CREATED -> PROVISIONED -> TRAINING -> SERVING ->
  // TERMINATED; TERMINATED is reachable from anywhere.
  void set_state(EnclaveState next) {
    std::lock_guard lk(mu_);
    if (next == EnclaveState::TERMINATED) {
      state_ = next;
      return;
    }
    if (static_cast<uint8_t>(next) != static_cast<uint8_t>(state_) + 1 ||
        state_ == EnclaveState::TERMINATED) {
      throw Error(Errc::INVALID_STATE_TRANSITION,
                  std::string("enclave state ") + std::string(enclave_state_name(state_)) +
                      " -> " + std::string(enclave_state_name(next)));
    }
    state_ = next;
  }

  void terminate() { set_state(EnclaveState::TERMINATED); }

  Quote generate_quote(const std::array<uint8_t, 64>& report_data) const;

  Platform& platform() const { return *platform_; }
  const std::array<uint8_t, 32>& root_public_key() const;

 private:
  Platform* platform_;
  uint64_t id_;
  Measurement measurement_;
  mutable std::mutex mu_;
  EnclaveState state_ = EnclaveState::CREATED;
};

class Platform {
 public:
  Platform() : root_(crypto::SigningKey::generate()) {}
  explicit Platform(crypto::SigningKey root) : root_(std::move(root)) {}

  std::shared_ptr<Enclave> create_enclave(const CodeImage& image) {
    if (!initialized_.load()) {
      throw Error(Errc::PLATFORM_NOT_INITIALIZED, "platform root key not available");
    }
    uint64_t id = next_id_.fetch_add(1);
    return std::make_shared<Enclave>(this, id, measure(image));
  }

  const std::array<uint8_t, 32>& root_public_key() const { return root_.public_key; }

  std::array<uint8_t, 64> sign_with_root(ByteSpan msg) const {
    if (!initialized_.load()) {
      throw Error(Errc::PLATFORM_NOT_INITIALIZED, "platform root key not available");
    }
    return crypto::sign(root_, msg);
  }

  bool initialized() const { return initialized_.load(); }
  void shutdown() { initialized_.store(false); }

  harness::BoundaryLog& boundary_log() { return boundary_log_; }
  const harness::BoundaryLog& boundary_log() const { return boundary_log_; }

 private:
  crypto::SigningKey root_;
  std::atomic<bool> initialized_{true};
  std::atomic<uint64_t> next_id_{1};
  harness::BoundaryLog boundary_log_;
};

inline Quote Enclave::generate_quote(const std::array<uint8_t, 64>& report_data) const {
  {
    std::lock_guard lk(mu_);
    if (state_ == EnclaveState::TERMINATED) {
      throw Error(Errc::ENCLAVE_TERMINATED, "quote requested from terminated enclave");
    }
  }
  Quote q;
  q.measurement = measurement_;
  q.report_data = report_data;
  q.signature = platform_->sign_with_root(q.signed_payload());
  return q;
}

inline const std::array<uint8_t, 32>& Enclave::root_public_key() const {
  return platform_->root_public_key();
}

}  // namespace chiron::enclave
