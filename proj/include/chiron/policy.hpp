#pragma once
// The egress policy judged by the sandbox: provider-controlled logic can only
// emit data through approved channels, and the provider-facing status channel
// is a closed vocabulary (job state byte + epoch counter, nothing else).

#include <cstdint>
#include <string_view>

#include "chiron/bytes.hpp"
#include "chiron/result.hpp"
#include "chiron/taint.hpp"
#include "chiron/testing.hpp"

namespace chiron::sandbox {

// First four values are the egress intents named by the policy text; HANDSHAKE
// and INTER_ENCLAVE additionally tag boundary-log entries for attestation
// exchanges and the aggregator's sealed replies.
enum class IoChannel : uint8_t {
  TO_HOLDER_CHANNEL = 0,
  TO_PARAM_SERVER = 1,
  TO_PROVIDER = 2,
  TO_LOG = 3,
  HANDSHAKE = 4,
  INTER_ENCLAVE = 5,
};

inline std::string_view io_channel_name(IoChannel c) {
  switch (c) {
    case IoChannel::TO_HOLDER_CHANNEL: return "TO_HOLDER_CHANNEL";
    case IoChannel::TO_PARAM_SERVER: return "TO_PARAM_SERVER";
    case IoChannel::TO_PROVIDER: return "TO_PROVIDER";
    case IoChannel::TO_LOG: return "TO_LOG";
    case IoChannel::HANDSHAKE: return "HANDSHAKE";
    case IoChannel::INTER_ENCLAVE: return "INTER_ENCLAVE";
  }
  return "?";
}

enum class JobState : uint8_t {
  PENDING = 0,
  RUNNING = 1,
  SYNCING = 2,
  DONE = 3,
  FAILED = 4,
};

inline std::string_view job_state_name(JobState s) {
  switch (s) {
    case JobState::PENDING: return "PENDING";
    case JobState::RUNNING: return "RUNNING";
    case JobState::SYNCING: return "SYNCING";
    case JobState::DONE: return "DONE";
    case JobState::FAILED: return "FAILED";
  }
  return "?";
}

// Provider-visible status: state byte followed by a 32-bit epoch counter.
inline Bytes encode_status(JobState state, uint32_t epoch) {
  Bytes out;
  out.push_back(static_cast<uint8_t>(state));
  put_u32be(out, epoch);
  return out;
}

struct StatusView {
  JobState state;
  uint32_t epoch;
};

inline std::optional<StatusView> decode_status(ByteSpan b) {
  if (b.size() != 5 || b[0] > static_cast<uint8_t>(JobState::FAILED)) return std::nullopt;
  return StatusView{static_cast<JobState>(b[0]), get_u32be(b, 1)};
}

inline bool is_status_vocabulary(ByteSpan b) {
  return decode_status(b).has_value();
}

struct IoRequest {
  IoChannel channel;
  TaintedBytes payload;
};

enum class PolicyDeny : uint8_t {
  SECRET_EGRESS,
  STATUS_VOCABULARY,
  UNROUTABLE,
};

inline std::string_view policy_deny_name(PolicyDeny d) {
  switch (d) {
    case PolicyDeny::SECRET_EGRESS: return "SECRET_EGRESS";
    case PolicyDeny::STATUS_VOCABULARY: return "STATUS_VOCABULARY";
    case PolicyDeny::UNROUTABLE: return "UNROUTABLE";
  }
  return "?";
}

inline Result<Ok, PolicyDeny> policy_check(const IoRequest& req) {
#ifdef CHIRON_TESTING
  if (testing::knobs().skip_policy_check) return Ok{};
#endif
  switch (req.channel) {
    case IoChannel::TO_HOLDER_CHANNEL:
    case IoChannel::TO_PARAM_SERVER:
      if (!req.payload.is_public()) return PolicyDeny::SECRET_EGRESS;
      return Ok{};
    case IoChannel::TO_PROVIDER:
      if (!req.payload.is_public()) return PolicyDeny::SECRET_EGRESS;
      if (!is_status_vocabulary(req.payload.bytes)) return PolicyDeny::STATUS_VOCABULARY;
      return Ok{};
    case IoChannel::TO_LOG:
      if (!req.payload.is_public()) return PolicyDeny::SECRET_EGRESS;
      return Ok{};
    // Handshake bytes and enclave-to-enclave relays are public by construction
    // (attestation evidence, sealed records); anything else on them is a leak.
    case IoChannel::HANDSHAKE:
    case IoChannel::INTER_ENCLAVE:
      if (!req.payload.is_public()) return PolicyDeny::SECRET_EGRESS;
      return Ok{};
  }
  return PolicyDeny::UNROUTABLE;
}

// Canonical text of the policy rules; part of the enclave code image, so any
// change to the policy changes the measurement clients attest.
inline constexpr std::string_view kPolicyCanonical =
    "egress-policy v1\n"
    "TO_HOLDER_CHANNEL: sealed records only\n"
    "TO_PARAM_SERVER: sealed records only\n"
    "TO_PROVIDER: status vocabulary {state:u8 epoch:u32be}, sealed\n"
    "TO_LOG: public only\n";

}  // namespace chiron::sandbox
