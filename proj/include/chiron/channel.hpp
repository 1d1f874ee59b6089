#pragma once
// Attested channel: an X25519 handshake whose server side proves, via a
// quote over the transcript, that specific enclave code is on the other end.
// Traffic protection is ChaCha20-Poly1305 with strict in-order sequencing;
// seal() is the single point where tainted bytes may become wire bytes.
//
// Wire layouts (all integers big-endian, no framing beyond what is shown):
//   hello    = client_nonce(32) || client_eph_pub(32)
//   response = enclave_eph_pub(32) || quote(160)
//   record   = seq(8) || ct_len(4) || ciphertext(ct_len) || tag(16)
//
// Key schedule: salt = SHA-256(hello || response), ikm = X25519 shared
// secret, HKDF-SHA-256 with info "chiron/c2e" (client->enclave) and
// "chiron/e2c" (enclave->client). Record nonce = 4 zero bytes || seq(8).
// AEAD aad = record header || caller aad, so sequencing and message type
// are both authenticated.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "chiron/bytes.hpp"
#include "chiron/crypto.hpp"
#include "chiron/enclave.hpp"
#include "chiron/result.hpp"
#include "chiron/taint.hpp"
#include "chiron/testing.hpp"

namespace chiron::channel {

constexpr std::string_view kInfoClientToEnclave = "chiron/c2e";
constexpr std::string_view kInfoEnclaveToClient = "chiron/e2c";
constexpr std::string_view kE2EAuthContext = "chiron/e2e-auth";
constexpr std::string_view kE2EAuthAad = "e2e/auth";

constexpr size_t kHelloSize = 64;
constexpr size_t kResponseSize = 32 + enclave::Quote::kWireSize;
constexpr size_t kRecordHeaderSize = 12;
constexpr size_t kTagSize = 16;

enum class HandshakeError : uint8_t {
  MALFORMED,
  KEY_EXCHANGE_FAILED,
  BAD_SIGNATURE,
  MEASUREMENT_MISMATCH,
  TRANSCRIPT_MISMATCH,
};

inline std::string_view handshake_error_name(HandshakeError e) {
  switch (e) {
    case HandshakeError::MALFORMED: return "MALFORMED";
    case HandshakeError::KEY_EXCHANGE_FAILED: return "KEY_EXCHANGE_FAILED";
    case HandshakeError::BAD_SIGNATURE: return "BAD_SIGNATURE";
    case HandshakeError::MEASUREMENT_MISMATCH: return "MEASUREMENT_MISMATCH";
    case HandshakeError::TRANSCRIPT_MISMATCH: return "TRANSCRIPT_MISMATCH";
  }
  return "?";
}

enum class ChannelError : uint8_t { MALFORMED, REPLAY, AUTH_FAILED };

inline std::string_view channel_error_name(ChannelError e) {
  switch (e) {
    case ChannelError::MALFORMED: return "MALFORMED";
    case ChannelError::REPLAY: return "REPLAY";
    case ChannelError::AUTH_FAILED: return "AUTH_FAILED";
  }
  return "?";
}

// Half-duplex protected pipe with independent send/receive sequence numbers.
// Receivers accept records only at exactly the next expected sequence, so a
// replayed or reordered record fails before any decryption is attempted.
class SecureChannel {
 public:
  SecureChannel() = default;
  SecureChannel(std::array<uint8_t, 32> send_key, std::array<uint8_t, 32> recv_key,
                Bytes transcript)
      : send_key_(send_key), recv_key_(recv_key), transcript_(std::move(transcript)) {}

  // Declassification point: the label on `payload` is discharged here, and
  // only here, by encryption under the session key.
  Bytes seal(const sandbox::TaintedBytes& payload, ByteSpan caller_aad) {
    if (send_seq_ == UINT64_MAX) {
      throw Error(Errc::SEQUENCE_EXHAUSTED, "send sequence space exhausted");
    }
    const uint64_t seq = send_seq_;
    Bytes wire;
    wire.reserve(kRecordHeaderSize + payload.bytes.size() + kTagSize);
    put_u64be(wire, seq);
    put_u32be(wire, static_cast<uint32_t>(payload.bytes.size()));

    Bytes aad(wire.begin(), wire.end());
    append(aad, caller_aad);

    auto sealed = crypto::aead_seal(send_key_, nonce_for(seq), payload.bytes, aad);
    append(wire, sealed.ciphertext);
    append(wire, sealed.tag);

#ifdef CHIRON_TESTING
    if (testing::knobs().reuse_nonce) return wire;  // sequence deliberately stuck
#endif
    ++send_seq_;
    return wire;
  }

  Result<Bytes, ChannelError> open(ByteSpan record, ByteSpan caller_aad) {
    if (record.size() < kRecordHeaderSize + kTagSize) return ChannelError::MALFORMED;
    const uint64_t seq = get_u64be(record, 0);
    const uint32_t ct_len = get_u32be(record, 8);
    if (record.size() != kRecordHeaderSize + static_cast<size_t>(ct_len) + kTagSize) {
      return ChannelError::MALFORMED;
    }
    if (seq != recv_seq_) return ChannelError::REPLAY;

    Bytes aad(record.begin(), record.begin() + kRecordHeaderSize);
    append(aad, caller_aad);
    const auto ct = record.subspan(kRecordHeaderSize, ct_len);
    const auto tag = take<kTagSize>(record, kRecordHeaderSize + ct_len);

    auto plain = crypto::aead_open(recv_key_, nonce_for(seq), ct, tag, aad);
    if (!plain) return ChannelError::AUTH_FAILED;
    ++recv_seq_;
    return std::move(*plain);
  }

  const Bytes& transcript() const { return transcript_; }
  uint64_t send_seq() const { return send_seq_; }
  uint64_t recv_seq() const { return recv_seq_; }

 private:
  static std::array<uint8_t, 12> nonce_for(uint64_t seq) {
    std::array<uint8_t, 12> n{};
    for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<uint8_t>(seq >> (56 - 8 * i));
    return n;
  }

  std::array<uint8_t, 32> send_key_{};
  std::array<uint8_t, 32> recv_key_{};
  uint64_t send_seq_ = 0;
  uint64_t recv_seq_ = 0;
  Bytes transcript_;
};

// ---- Handshake -------------------------------------------------------------

struct ClientHandshake {
  std::array<uint8_t, 32> nonce{};
  std::array<uint8_t, 32> eph_secret{};
  std::array<uint8_t, 32> eph_public{};
  Bytes hello;
};

inline ClientHandshake client_hello(crypto::RandomSource& rng) {
  ClientHandshake hs;
  rng.fill(hs.nonce);
  rng.fill(hs.eph_secret);
  hs.eph_public = crypto::x25519_base(hs.eph_secret);
  hs.hello.reserve(kHelloSize);
  append(hs.hello, hs.nonce);
  append(hs.hello, hs.eph_public);
  return hs;
}

// report_data = SHA-256(hello || enclave_eph_pub) zero-padded to 64 bytes,
// tying the quote to this handshake and nothing else.
inline std::array<uint8_t, 64> handshake_report_data(ByteSpan hello,
                                                     const std::array<uint8_t, 32>& eph_pub) {
  Bytes input(hello.begin(), hello.end());
  append(input, eph_pub);
  std::array<uint8_t, 64> report{};
  auto digest = crypto::sha256(input);
  std::copy(digest.begin(), digest.end(), report.begin());
  return report;
}

namespace detail {

inline std::array<uint8_t, 32> derive_key(ByteSpan transcript,
                                          const std::array<uint8_t, 32>& shared,
                                          std::string_view info) {
  auto salt = crypto::sha256(transcript);
  auto okm = crypto::hkdf_sha256(salt, shared, to_bytes(info), 32);
  std::array<uint8_t, 32> key{};
  std::copy(okm.begin(), okm.end(), key.begin());
  return key;
}

inline SecureChannel make_channel(Bytes transcript, const std::array<uint8_t, 32>& shared,
                                  bool client_side) {
  auto c2e = derive_key(transcript, shared, kInfoClientToEnclave);
  auto e2c = derive_key(transcript, shared, kInfoEnclaveToClient);
  return client_side ? SecureChannel(c2e, e2c, std::move(transcript))
                     : SecureChannel(e2c, c2e, std::move(transcript));
}

}  // namespace detail

struct ServerAccept {
  Bytes response;
  SecureChannel channel;
};

inline Result<ServerAccept, HandshakeError> enclave_respond(const enclave::Enclave& encl,
                                                            ByteSpan hello,
                                                            crypto::RandomSource& rng) {
  if (hello.size() != kHelloSize) return HandshakeError::MALFORMED;

  std::array<uint8_t, 32> eph_secret{};
  rng.fill(eph_secret);
  const auto eph_public = crypto::x25519_base(eph_secret);

  const auto quote = encl.generate_quote(handshake_report_data(hello, eph_public));

  Bytes response;
  response.reserve(kResponseSize);
  append(response, eph_public);
  append(response, quote.serialize());

  const auto client_eph_pub = take<32>(hello, 32);
  auto shared = crypto::x25519(eph_secret, client_eph_pub);
  if (!shared) return HandshakeError::KEY_EXCHANGE_FAILED;

  Bytes transcript(hello.begin(), hello.end());
  append(transcript, response);

  ServerAccept out;
  out.response = std::move(response);
  out.channel = detail::make_channel(std::move(transcript), *shared, /*client_side=*/false);
  return out;
}

inline Result<SecureChannel, HandshakeError> client_finish(
    const ClientHandshake& hs, ByteSpan response, const enclave::Measurement& expected,
    const std::array<uint8_t, 32>& root_public_key) {
  if (response.size() != kResponseSize) return HandshakeError::MALFORMED;

  const auto eph_public = take<32>(response, 0);
  auto quote = enclave::Quote::parse(response.subspan(32));
  if (!quote) return HandshakeError::MALFORMED;

  bool check_quote = true;
  bool check_binding = true;
#ifdef CHIRON_TESTING
  check_quote = !testing::knobs().skip_quote_verify;
  check_binding = !testing::knobs().skip_transcript_bind;
#endif

  if (check_quote) {
    switch (enclave::verify_quote(*quote, expected, root_public_key)) {
      case enclave::QuoteVerdict::ACCEPT: break;
      case enclave::QuoteVerdict::BAD_SIGNATURE: return HandshakeError::BAD_SIGNATURE;
      case enclave::QuoteVerdict::MEASUREMENT_MISMATCH:
        return HandshakeError::MEASUREMENT_MISMATCH;
    }
  }
  if (check_binding) {
    const auto want = handshake_report_data(hs.hello, eph_public);
    if (!crypto::ct_equal(want, quote->report_data)) return HandshakeError::TRANSCRIPT_MISMATCH;
  }

  auto shared = crypto::x25519(hs.eph_secret, eph_public);
  if (!shared) return HandshakeError::KEY_EXCHANGE_FAILED;

  Bytes transcript = hs.hello;
  append(transcript, response);
  return detail::make_channel(std::move(transcript), *shared, /*client_side=*/true);
}

// ---- Mutual attestation between enclaves ------------------------------------
//
// The standard handshake authenticates only the responder. When two enclaves
// talk to each other, the initiator follows up with one sealed record carrying
// its own quote over report_data = SHA-256("chiron/e2e-auth" || transcript),
// which the responder verifies before trusting anything on the channel.

inline std::array<uint8_t, 64> e2e_report_data(ByteSpan transcript) {
  Bytes input = to_bytes(kE2EAuthContext);
  append(input, transcript);
  std::array<uint8_t, 64> report{};
  auto digest = crypto::sha256(input);
  std::copy(digest.begin(), digest.end(), report.begin());
  return report;
}

inline Bytes e2e_auth_message(SecureChannel& ch, const enclave::Enclave& self) {
  const auto quote = self.generate_quote(e2e_report_data(ch.transcript()));
  return ch.seal(sandbox::TaintedBytes{quote.serialize(), sandbox::TaintLabel::PUBLIC},
                 to_bytes(kE2EAuthAad));
}

inline Result<Ok, HandshakeError> verify_e2e_auth(SecureChannel& ch, ByteSpan record,
                                                  const enclave::Measurement& expected,
                                                  const std::array<uint8_t, 32>& root_public_key) {
  auto opened = ch.open(record, to_bytes(kE2EAuthAad));
  if (!opened.ok()) return HandshakeError::MALFORMED;
  auto quote = enclave::Quote::parse(opened.value());
  if (!quote) return HandshakeError::MALFORMED;

  bool check_quote = true;
  bool check_binding = true;
#ifdef CHIRON_TESTING
  check_quote = !testing::knobs().skip_quote_verify;
  check_binding = !testing::knobs().skip_transcript_bind;
#endif

  if (check_quote) {
    switch (enclave::verify_quote(*quote, expected, root_public_key)) {
      case enclave::QuoteVerdict::ACCEPT: break;
      case enclave::QuoteVerdict::BAD_SIGNATURE: return HandshakeError::BAD_SIGNATURE;
      case enclave::QuoteVerdict::MEASUREMENT_MISMATCH:
        return HandshakeError::MEASUREMENT_MISMATCH;
    }
  }
  if (check_binding &&
      !crypto::ct_equal(e2e_report_data(ch.transcript()), quote->report_data)) {
    return HandshakeError::TRANSCRIPT_MISMATCH;
  }
  return Ok{};
}

}  // namespace chiron::channel
