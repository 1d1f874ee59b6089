#pragma once
// Client side of the wire protocol, shared by the holder/provider tools and
// the end-to-end tests. A client attests the serving enclave before anything
// else; afterwards every request and reply rides the established channel.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chiron/app.hpp"
#include "chiron/bytes.hpp"
#include "chiron/channel.hpp"
#include "chiron/dataset_wire.hpp"
#include "chiron/enclave.hpp"
#include "chiron/frame.hpp"
#include "chiron/policy.hpp"
#include "chiron/tcp.hpp"
#include "chiron/trainer.hpp"

namespace chiron::client {

// Exit codes the tools report.
inline constexpr int kExitOk = 0;
inline constexpr int kExitProtocol = 2;
inline constexpr int kExitAttestation = 3;
inline constexpr int kExitPolicy = 4;

struct Failure {
  int exit_code = kExitProtocol;
  std::string message;
};

inline int exit_code_for_deny(std::string_view deny_name) {
  if (deny_name == "POLICY_DENIAL") return kExitPolicy;
  if (deny_name == "ATTESTATION_FAILED") return kExitAttestation;
  return kExitProtocol;
}

class Connection {
 public:
  explicit Connection(net::TcpStream stream) : stream_(std::move(stream)) {}

  bool send(service::MsgType type, ByteSpan payload) {
    try {
      stream_.write_all(service::encode_frame(type, payload));
      return true;
    } catch (const Error&) {
      return false;
    }
  }

  // Blocks for the next whole frame; nullopt on EOF or broken framing.
  std::optional<service::Frame> recv() {
    try {
      while (true) {
        if (auto next = decoder_.next()) {
          if (!next->ok()) return std::nullopt;
          return std::move(next->value());
        }
        Bytes chunk = stream_.read_some();
        if (chunk.empty()) return std::nullopt;
        decoder_.feed(chunk);
      }
    } catch (const Error&) {
      return std::nullopt;
    }
  }

 private:
  net::TcpStream stream_;
  service::FrameDecoder decoder_;
};

class AttestedClient {
 public:
  AttestedClient(Connection conn, channel::SecureChannel ch)
      : conn_(std::move(conn)), ch_(std::move(ch)) {}

  // Sends one sealed request and opens the sealed reply. ERROR frames come
  // back as Failure with the deny name and its mapped exit code.
  Result<Bytes, Failure> request(service::MsgType type, ByteSpan inner,
                                 service::MsgType expected_reply) {
    Bytes sealed = ch_.seal(sandbox::TaintedBytes::make_public(Bytes(inner.begin(), inner.end())),
                            app::type_aad(type));
    if (!conn_.send(type, sealed)) {
      return Failure{kExitProtocol, "connection lost while sending"};
    }
    auto reply = conn_.recv();
    if (!reply) return Failure{kExitProtocol, "connection closed by server"};
    const auto reply_type = static_cast<service::MsgType>(reply->msg_type);
    if (reply_type == service::MsgType::ERROR) {
      std::string name = to_string(reply->payload);
      return Failure{exit_code_for_deny(name), "server denied request: " + name};
    }
    if (reply_type != expected_reply) {
      return Failure{kExitProtocol, "unexpected reply type"};
    }
    auto opened = ch_.open(reply->payload, app::type_aad(reply_type));
    if (!opened.ok()) {
      return Failure{kExitProtocol, std::string("reply rejected: ") +
                                        std::string(channel::channel_error_name(opened.error()))};
    }
    return std::move(opened.value());
  }

  channel::SecureChannel& channel() { return ch_; }
  Connection& connection() { return conn_; }

 private:
  Connection conn_;
  channel::SecureChannel ch_;
};

// Full attestation round-trip: role byte + hello out, quote verified against
// the expected measurement and platform root key on the way back.
inline Result<AttestedClient, Failure> attest(net::TcpStream stream, app::SessionRole role,
                                              const enclave::Measurement& expected_measurement,
                                              const std::array<uint8_t, 32>& root_public_key,
                                              crypto::RandomSource& rng = crypto::system_random()) {
  Connection conn(std::move(stream));
  auto hs = channel::client_hello(rng);
  Bytes payload;
  payload.push_back(static_cast<uint8_t>(role));
  append(payload, hs.hello);
  if (!conn.send(service::MsgType::ATTEST_REQ, payload)) {
    return Failure{kExitProtocol, "connection lost while sending hello"};
  }
  auto reply = conn.recv();
  if (!reply) return Failure{kExitProtocol, "connection closed during attestation"};
  const auto reply_type = static_cast<service::MsgType>(reply->msg_type);
  if (reply_type == service::MsgType::ERROR) {
    std::string name = to_string(reply->payload);
    return Failure{exit_code_for_deny(name), "attestation denied: " + name};
  }
  if (reply_type != service::MsgType::ATTEST_RESP) {
    return Failure{kExitProtocol, "unexpected attestation reply"};
  }
  auto finished =
      channel::client_finish(hs, reply->payload, expected_measurement, root_public_key);
  if (!finished.ok()) {
    return Failure{kExitAttestation, std::string("attestation failed: ") +
                                         std::string(channel::handshake_error_name(
                                             finished.error()))};
  }
  return AttestedClient(std::move(conn), std::move(finished.value()));
}

// ---- Holder operations ------------------------------------------------------

inline Result<uint32_t, Failure> upload_data(AttestedClient& c, const trainer::Dataset& rows) {
  auto reply = c.request(service::MsgType::UPLOAD_DATA, encode_dataset(rows),
                         service::MsgType::UPLOAD_DATA);
  if (!reply.ok()) return reply.error();
  if (reply.value().size() != 4) return Failure{kExitProtocol, "malformed upload ack"};
  return get_u32be(reply.value(), 0);
}

inline Result<uint64_t, Failure> start_train(AttestedClient& c, uint32_t k) {
  Bytes req;
  put_u32be(req, k);
  auto reply = c.request(service::MsgType::START_TRAIN, req, service::MsgType::START_TRAIN);
  if (!reply.ok()) return reply.error();
  if (reply.value().size() != 8) return Failure{kExitProtocol, "malformed train ack"};
  return get_u64be(reply.value(), 0);
}

struct HolderStatus {
  sandbox::JobState state = sandbox::JobState::PENDING;
  uint32_t epoch = 0;
  uint64_t job_id = 0;
};

inline Result<HolderStatus, Failure> holder_status(AttestedClient& c) {
  auto reply = c.request(service::MsgType::STATUS, {}, service::MsgType::STATUS);
  if (!reply.ok()) return reply.error();
  const Bytes& b = reply.value();
  if (b.size() != 13 || b[0] > 4) return Failure{kExitProtocol, "malformed status"};
  return HolderStatus{static_cast<sandbox::JobState>(b[0]), get_u32be(b, 1), get_u64be(b, 5)};
}

inline Result<std::vector<uint32_t>, Failure> query(AttestedClient& c, uint64_t job_id,
                                                    const std::vector<double>& features,
                                                    uint32_t rows, uint32_t dim) {
  Bytes req;
  put_u64be(req, job_id);
  put_u32be(req, rows);
  put_u32be(req, dim);
  for (double v : features) put_f64be(req, v);
  auto reply = c.request(service::MsgType::QUERY, req, service::MsgType::QUERY_RESP);
  if (!reply.ok()) return reply.error();
  const Bytes& b = reply.value();
  if (b.size() < 4) return Failure{kExitProtocol, "malformed query reply"};
  const uint32_t n = get_u32be(b, 0);
  if (b.size() != 4 + static_cast<size_t>(n) * 4) {
    return Failure{kExitProtocol, "malformed query reply"};
  }
  std::vector<uint32_t> ids;
  ids.reserve(n);
  for (uint32_t i = 0; i < n; ++i) ids.push_back(get_u32be(b, 4 + i * 4));
  return ids;
}

#ifdef CHIRON_TESTING
inline Result<trainer::ParameterVector, Failure> export_params(AttestedClient& c) {
  auto reply =
      c.request(service::MsgType::EXPORT_PARAMS, {}, service::MsgType::EXPORT_PARAMS);
  if (!reply.ok()) return reply.error();
  const Bytes& b = reply.value();
  if (b.size() < 4) return Failure{kExitProtocol, "malformed export reply"};
  const uint32_t n = get_u32be(b, 0);
  if (b.size() != 4 + static_cast<size_t>(n) * 8) {
    return Failure{kExitProtocol, "malformed export reply"};
  }
  trainer::ParameterVector params;
  params.reserve(n);
  for (uint32_t i = 0; i < n; ++i) params.push_back(get_f64be(b, 4 + i * 8));
  return params;
}
#endif

// ---- Provider operations ----------------------------------------------------

inline Result<sandbox::StatusView, Failure> provision(AttestedClient& c, ByteSpan config_json) {
  auto reply = c.request(service::MsgType::PROVISION, config_json, service::MsgType::STATUS);
  if (!reply.ok()) return reply.error();
  auto status = sandbox::decode_status(reply.value());
  if (!status) return Failure{kExitProtocol, "malformed provision reply"};
  return *status;
}

inline Result<sandbox::StatusView, Failure> provider_status(AttestedClient& c) {
  auto reply = c.request(service::MsgType::STATUS, {}, service::MsgType::STATUS);
  if (!reply.ok()) return reply.error();
  auto status = sandbox::decode_status(reply.value());
  if (!status) return Failure{kExitProtocol, "malformed status"};
  return *status;
}

}  // namespace chiron::client
