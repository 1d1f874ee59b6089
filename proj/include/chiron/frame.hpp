#pragma once
// Service wire framing: length (4 BE, counts type byte + payload, capped at
// 16 MiB) || msg_type (1) || payload. The decoder is incremental and
// chunking-agnostic: feed it bytes as they arrive, pull frames as they
// complete.

#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>

#include "chiron/bytes.hpp"
#include "chiron/result.hpp"

namespace chiron::service {

inline constexpr uint32_t kMaxFrameLength = 16 * 1024 * 1024;  // type byte + payload

enum class MsgType : uint8_t {
  ATTEST_REQ = 0x01,
  ATTEST_RESP = 0x02,
  PROVISION = 0x03,
  UPLOAD_DATA = 0x04,
  START_TRAIN = 0x05,
  STATUS = 0x06,
  QUERY = 0x07,
  QUERY_RESP = 0x08,
  EXPORT_PARAMS = 0x70,  // honored only by test builds
  ERROR = 0x7F,
};

inline std::string_view msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::ATTEST_REQ: return "ATTEST_REQ";
    case MsgType::ATTEST_RESP: return "ATTEST_RESP";
    case MsgType::PROVISION: return "PROVISION";
    case MsgType::UPLOAD_DATA: return "UPLOAD_DATA";
    case MsgType::START_TRAIN: return "START_TRAIN";
    case MsgType::STATUS: return "STATUS";
    case MsgType::QUERY: return "QUERY";
    case MsgType::QUERY_RESP: return "QUERY_RESP";
    case MsgType::EXPORT_PARAMS: return "EXPORT_PARAMS";
    case MsgType::ERROR: return "ERROR";
  }
  return "?";
}

struct Frame {
  uint8_t msg_type = 0;
  Bytes payload;

  bool operator==(const Frame&) const = default;
};

inline Bytes encode_frame(MsgType type, ByteSpan payload) {
  if (payload.size() > kMaxFrameLength - 1) {
    throw Error(Errc::OVERSIZE, "frame payload exceeds 16 MiB limit");
  }
  Bytes out;
  out.reserve(5 + payload.size());
  put_u32be(out, static_cast<uint32_t>(1 + payload.size()));
  out.push_back(static_cast<uint8_t>(type));
  append(out, payload);
  return out;
}

enum class FrameReject : uint8_t { OVERSIZE, LENGTH_ZERO };

inline std::string_view frame_reject_name(FrameReject r) {
  switch (r) {
    case FrameReject::OVERSIZE: return "OVERSIZE";
    case FrameReject::LENGTH_ZERO: return "LENGTH_ZERO";
  }
  return "?";
}

class FrameDecoder {
 public:
  void feed(ByteSpan chunk) { buf_.insert(buf_.end(), chunk.begin(), chunk.end()); }

  // nullopt: need more bytes. A reject poisons the stream — every later call
  // returns the same reject, since framing can no longer be trusted.
  std::optional<Result<Frame, FrameReject>> next() {
    if (dead_) return Result<Frame, FrameReject>(*dead_);
    if (buf_.size() < 4) return std::nullopt;
    const uint32_t length = (uint32_t{buf_[0]} << 24) | (uint32_t{buf_[1]} << 16) |
                            (uint32_t{buf_[2]} << 8) | uint32_t{buf_[3]};
    if (length == 0) {
      dead_ = FrameReject::LENGTH_ZERO;
      return Result<Frame, FrameReject>(*dead_);
    }
    if (length > kMaxFrameLength) {
      dead_ = FrameReject::OVERSIZE;
      return Result<Frame, FrameReject>(*dead_);
    }
    if (buf_.size() < 4 + static_cast<size_t>(length)) return std::nullopt;

    Frame f;
    f.msg_type = buf_[4];
    f.payload.assign(buf_.begin() + 5, buf_.begin() + 4 + length);
    buf_.erase(buf_.begin(), buf_.begin() + 4 + length);
    return Result<Frame, FrameReject>(std::move(f));
  }

 private:
  std::deque<uint8_t> buf_;
  std::optional<FrameReject> dead_;
};

// Plaintext ERROR frame payloads: a closed vocabulary of machine-readable
// denial codes. The host may emit these (it holds no session keys), so the
// vocabulary deliberately carries no secret-derived detail.
enum class ServiceDeny : uint8_t {
  UNKNOWN_TYPE,
  PROTOCOL_VIOLATION,
  ROLE_VIOLATION,
  NOT_PROVISIONED,
  ATTESTATION_FAILED,
  CHANNEL_REJECT_MALFORMED,
  CHANNEL_REJECT_REPLAY,
  CHANNEL_REJECT_AUTH,
  CONFIG_REJECTED,
  BAD_REQUEST,
  JOB_NOT_DONE,
  AUTH_FAILURE,
  POLICY_DENIAL,
};

inline std::string_view service_deny_name(ServiceDeny d) {
  switch (d) {
    case ServiceDeny::UNKNOWN_TYPE: return "UNKNOWN_TYPE";
    case ServiceDeny::PROTOCOL_VIOLATION: return "PROTOCOL_VIOLATION";
    case ServiceDeny::ROLE_VIOLATION: return "ROLE_VIOLATION";
    case ServiceDeny::NOT_PROVISIONED: return "NOT_PROVISIONED";
    case ServiceDeny::ATTESTATION_FAILED: return "ATTESTATION_FAILED";
    case ServiceDeny::CHANNEL_REJECT_MALFORMED: return "CHANNEL_REJECT_MALFORMED";
    case ServiceDeny::CHANNEL_REJECT_REPLAY: return "CHANNEL_REJECT_REPLAY";
    case ServiceDeny::CHANNEL_REJECT_AUTH: return "CHANNEL_REJECT_AUTH";
    case ServiceDeny::CONFIG_REJECTED: return "CONFIG_REJECTED";
    case ServiceDeny::BAD_REQUEST: return "BAD_REQUEST";
    case ServiceDeny::JOB_NOT_DONE: return "JOB_NOT_DONE";
    case ServiceDeny::AUTH_FAILURE: return "AUTH_FAILURE";
    case ServiceDeny::POLICY_DENIAL: return "POLICY_DENIAL";
  }
  return "?";
}

inline std::optional<ServiceDeny> service_deny_from_name(std::string_view name) {
  for (uint8_t i = 0; i <= static_cast<uint8_t>(ServiceDeny::POLICY_DENIAL); ++i) {
    if (service_deny_name(static_cast<ServiceDeny>(i)) == name) {
      return static_cast<ServiceDeny>(i);
    }
  }
  return std::nullopt;
}

// A session ends (or an enclave entry is denied) for one of these reasons;
// which ones keep the connection open is the session loop's decision.
inline bool deny_keeps_connection(ServiceDeny d) {
  switch (d) {
    case ServiceDeny::UNKNOWN_TYPE:
    case ServiceDeny::JOB_NOT_DONE:
    case ServiceDeny::AUTH_FAILURE:
      return true;
    default:
      return false;
  }
}

}  // namespace chiron::service
