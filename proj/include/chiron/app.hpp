#pragma once
// The enclave programs. ServingApp is the provider-side enclave that holds
// sessions with holders and the provider, confines the ModelConfig, owns
// uploaded data, and drives distributed jobs; TrainerApp is the worker
// enclave that trains on one shard. Every byte buffer entering or leaving
// either app is logged to the platform's boundary log with its taint label,
// and every egress passes the sandbox policy first.
//
// Inter-enclave bytes travel through an InterEnclaveRelay: the seam where
// the untrusted host carries (and, in adversarial tests, tampers with)
// sealed records between enclaves.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "chiron/audit.hpp"
#include "chiron/bytes.hpp"
#include "chiron/channel.hpp"
#include "chiron/config.hpp"
#include "chiron/coordinator.hpp"
#include "chiron/dataset_wire.hpp"
#include "chiron/enclave.hpp"
#include "chiron/frame.hpp"
#include "chiron/policy.hpp"
#include "chiron/result.hpp"
#include "chiron/taint.hpp"
#include "chiron/trainer.hpp"

namespace chiron::app {

inline constexpr std::string_view kRuntimeVersion = "chiron-runtime v1";

// The code identity clients attest: runtime version plus the exact policy
// text, so any change to either changes the measurement.
inline enclave::CodeImage runtime_image() {
  Bytes b = to_bytes(kRuntimeVersion);
  b.push_back('\n');
  append(b, to_bytes(sandbox::kPolicyCanonical));
  return enclave::CodeImage{std::move(b)};
}

inline const enclave::Measurement& runtime_measurement() {
  static const enclave::Measurement m = enclave::measure(runtime_image());
  return m;
}

// Sealed records are bound to their frame type (sessions) or relay stage
// (inter-enclave) through the AEAD associated data.
inline Bytes type_aad(service::MsgType t) {
  return Bytes{static_cast<uint8_t>(t)};
}

inline constexpr std::string_view kAadProvision = "e2e/provision";
inline constexpr std::string_view kAadSync = "e2e/sync";
inline constexpr std::string_view kAadSyncReply = "e2e/sync-reply";

// Host-controlled carrier for inter-enclave bytes. Stages: "hello",
// "response", "auth", "provision", "sync", "sync-reply".
struct InterEnclaveRelay {
  virtual ~InterEnclaveRelay() = default;
  virtual Bytes to_trainer(size_t idx, std::string_view stage, Bytes b) {
    (void)idx;
    (void)stage;
    return b;
  }
  virtual Bytes to_aggregator(size_t idx, std::string_view stage, Bytes b) {
    (void)idx;
    (void)stage;
    return b;
  }
};

inline InterEnclaveRelay& identity_relay() {
  static InterEnclaveRelay r;
  return r;
}

namespace detail {

inline void log_crossing(enclave::Platform& platform, uint64_t enclave_id, harness::FlowDir dir,
                         sandbox::IoChannel channel, sandbox::TaintLabel label, bool sealed_record,
                         size_t size, std::string note) {
  platform.boundary_log().record(
      {enclave_id, dir, channel, label, sealed_record, size, std::move(note)});
}

}  // namespace detail

// The single choke point for bytes leaving an enclave app: policy first,
// then the crossing is logged. Public so adversarial tests can drive rogue
// egress attempts through the same gate the apps use.
inline Result<Bytes, sandbox::PolicyDeny> emit_from_enclave(
    enclave::Platform& platform, uint64_t enclave_id, sandbox::IoChannel channel,
    sandbox::TaintedBytes payload, bool sealed_record, std::string note) {
  auto verdict = sandbox::policy_check({channel, payload});
  if (!verdict.ok()) return verdict.error();
  detail::log_crossing(platform, enclave_id, harness::FlowDir::EGRESS, channel, payload.label,
                       sealed_record, payload.bytes.size(), std::move(note));
  return std::move(payload.bytes);
}

enum class SessionRole : uint8_t { HOLDER = 0, PROVIDER = 1 };

// ---- Trainer enclave --------------------------------------------------------

class TrainerApp {
 public:
  using SyncFn = std::function<Bytes(Bytes sealed_contribution)>;

  explicit TrainerApp(enclave::Platform& platform)
      : platform_(platform), enclave_(platform.create_enclave(runtime_image())) {}

  const enclave::Enclave& enclave() const { return *enclave_; }
  void kill() { enclave_->terminate(); }

  // Responder side of the mutual handshake; the quote in the response is
  // this trainer's own attestation.
  Result<Bytes, service::ServiceDeny> accept_channel(ByteSpan hello,
                                                     crypto::RandomSource& rng) {
    detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::INGRESS,
                         sandbox::IoChannel::HANDSHAKE, sandbox::TaintLabel::PUBLIC, false,
                         hello.size(), "peer hello");
    auto accepted = channel::enclave_respond(*enclave_, hello, rng);
    if (!accepted.ok()) return service::ServiceDeny::ATTESTATION_FAILED;
    ch_ = std::move(accepted.value().channel);
    auto out = emit_from_enclave(platform_, enclave_->id(), sandbox::IoChannel::HANDSHAKE,
                                 sandbox::TaintedBytes::make_public(accepted.value().response),
                                 false, "handshake response");
    if (!out.ok()) return service::ServiceDeny::POLICY_DENIAL;
    return std::move(out.value());
  }

  // Third handshake message: the initiating aggregator proves its own code
  // identity before this trainer will accept anything else from it.
  Result<Ok, service::ServiceDeny> authenticate_peer(ByteSpan record) {
    detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::INGRESS,
                         sandbox::IoChannel::INTER_ENCLAVE, sandbox::TaintLabel::PUBLIC, true,
                         record.size(), "peer auth");
    auto verdict = channel::verify_e2e_auth(ch_, record, runtime_measurement(),
                                            platform_.root_public_key());
    if (!verdict.ok()) return service::ServiceDeny::ATTESTATION_FAILED;
    peer_authenticated_ = true;
    return Ok{};
  }

  Result<Ok, service::ServiceDeny> provision(ByteSpan sealed) {
    detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::INGRESS,
                         sandbox::IoChannel::INTER_ENCLAVE, sandbox::TaintLabel::PUBLIC, true,
                         sealed.size(), "shard provision");
    if (!peer_authenticated_) return service::ServiceDeny::PROTOCOL_VIOLATION;
    auto opened = ch_.open(sealed, to_bytes(kAadProvision));
    if (!opened.ok()) return channel_deny(opened.error());

    // Inside the enclave the payload regains its labels: config is the
    // provider's secret, rows are the holder's.
    ByteSpan body(opened.value());
    if (body.size() < 4) return service::ServiceDeny::BAD_REQUEST;
    const uint32_t cfg_len = get_u32be(body, 0);
    if (body.size() < 4 + static_cast<size_t>(cfg_len)) return service::ServiceDeny::BAD_REQUEST;
    auto cfg = sandbox::validate_config(body.subspan(4, cfg_len));
    if (!cfg.ok()) return service::ServiceDeny::CONFIG_REJECTED;
    auto shard = decode_dataset(body.subspan(4 + cfg_len));
    if (!shard) return service::ServiceDeny::BAD_REQUEST;

    cfg_ = std::move(cfg.value());
    shard_ = std::move(*shard);
    shard_.origin = sandbox::TaintLabel::HOLDER_SECRET;
    enclave_->set_state(enclave::EnclaveState::PROVISIONED);
    return Ok{};
  }

  // Runs the full training loop on the provisioned shard, contributing to
  // every round 0..total_rounds inclusive (idle rounds re-contribute current
  // params so stragglers never stall the barrier; the last round is the
  // terminal sync whose average is the final model).
  trainer::ParameterVector run_training(uint64_t total_rounds, const SyncFn& sync) {
    if (!cfg_) throw Error(Errc::INVALID_STATE_TRANSITION, "trainer not provisioned");
    enclave_->set_state(enclave::EnclaveState::TRAINING);

    auto params = trainer::init_params(*cfg_);
    uint64_t rounds_done = 0;

    trainer::TrainHooks hooks;
    hooks.on_sync = [&](uint64_t round, trainer::ParameterVector& p) {
      p = sync_round(round, p, sync);
      ++rounds_done;
    };
    params = trainer::run_epochs(*cfg_, shard_, std::move(params), hooks);

    while (rounds_done < total_rounds) {
      params = sync_round(rounds_done, params, sync);
      ++rounds_done;
    }
    params = sync_round(total_rounds, params, sync);  // terminal round
    return params;
  }

 private:
  static service::ServiceDeny channel_deny(channel::ChannelError e) {
    switch (e) {
      case channel::ChannelError::REPLAY: return service::ServiceDeny::CHANNEL_REJECT_REPLAY;
      case channel::ChannelError::AUTH_FAILED: return service::ServiceDeny::CHANNEL_REJECT_AUTH;
      case channel::ChannelError::MALFORMED:
        return service::ServiceDeny::CHANNEL_REJECT_MALFORMED;
    }
    return service::ServiceDeny::CHANNEL_REJECT_MALFORMED;
  }

  trainer::ParameterVector sync_round(uint64_t round, const trainer::ParameterVector& params,
                                      const SyncFn& sync) {
    // Parameters mix both parties' secrets; only the sealed form may leave.
    auto payload = sandbox::TaintedBytes::with_label(
        coordinator::encode_sync(round, params),
        sandbox::taint_join(sandbox::TaintLabel::HOLDER_SECRET,
                            sandbox::TaintLabel::PROVIDER_SECRET));
    Bytes sealed = ch_.seal(payload, to_bytes(kAadSync));
    auto out = emit_from_enclave(platform_, enclave_->id(), sandbox::IoChannel::TO_PARAM_SERVER,
                                 sandbox::TaintedBytes::make_public(std::move(sealed)), true,
                                 "sync round " + std::to_string(round));
    if (!out.ok()) {
      throw Error(Errc::INVALID_STATE_TRANSITION,
                  std::string("sync egress denied: ") +
                      std::string(sandbox::policy_deny_name(out.error())));
    }

    Bytes reply = sync(std::move(out.value()));

    detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::INGRESS,
                         sandbox::IoChannel::INTER_ENCLAVE, sandbox::TaintLabel::PUBLIC, true,
                         reply.size(), "round average");
    auto opened = ch_.open(reply, to_bytes(kAadSyncReply));
    if (!opened.ok()) {
      throw Error(Errc::CRYPTO_FAILURE, std::string("sync reply rejected: ") +
                                            std::string(channel_error_name(opened.error())));
    }
    auto msg = coordinator::decode_sync(opened.value());
    if (!msg || msg->round_index != round) {
      throw Error(Errc::INVALID_STATE_TRANSITION, "sync reply round mismatch");
    }
    return std::move(msg->params);
  }

  enclave::Platform& platform_;
  std::shared_ptr<enclave::Enclave> enclave_;
  channel::SecureChannel ch_;
  bool peer_authenticated_ = false;
  std::optional<sandbox::ModelConfig> cfg_;
  trainer::Dataset shard_;
};

// ---- Serving enclave --------------------------------------------------------

struct JobSnapshot {
  sandbox::JobState state = sandbox::JobState::PENDING;
  uint32_t epoch = 0;
};

class ServingApp {
 public:
  explicit ServingApp(enclave::Platform& platform,
                      crypto::RandomSource& rng = crypto::system_random(),
                      InterEnclaveRelay& relay = identity_relay())
      : platform_(platform),
        rng_(rng),
        relay_(relay),
        enclave_(platform.create_enclave(runtime_image())) {}

  ~ServingApp() {
    std::vector<std::shared_ptr<Job>> jobs;
    {
      std::lock_guard lk(mu_);
      for (auto& [id, job] : jobs_) jobs.push_back(job);
    }
    for (auto& job : jobs) {
      if (job->worker.joinable()) job->worker.join();
    }
  }

  const enclave::Enclave& enclave() const { return *enclave_; }

  // Overrides the provisioned config's seed (set from CHIRON_SEED by the
  // server tool) so end-to-end runs can be pinned.
  void set_seed_override(std::optional<uint64_t> seed) {
    std::lock_guard lk(mu_);
    seed_override_ = seed;
  }

  // ATTEST_REQ: role byte || hello. Reply payload is the handshake response.
  Result<Bytes, service::ServiceDeny> open_session(uint64_t session_id, ByteSpan payload) {
    detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::INGRESS,
                         sandbox::IoChannel::HANDSHAKE, sandbox::TaintLabel::PUBLIC, false,
                         payload.size(), "attest request");
    if (payload.size() != 1 + channel::kHelloSize || payload[0] > 1) {
      return service::ServiceDeny::ATTESTATION_FAILED;
    }
    {
      std::lock_guard lk(mu_);
      if (sessions_.count(session_id)) return service::ServiceDeny::PROTOCOL_VIOLATION;
    }
    const auto role = static_cast<SessionRole>(payload[0]);
    auto accepted = channel::enclave_respond(*enclave_, payload.subspan(1), rng_);
    if (!accepted.ok()) return service::ServiceDeny::ATTESTATION_FAILED;

    {
      std::lock_guard lk(mu_);
      Session s;
      s.role = role;
      s.ch = std::move(accepted.value().channel);
      sessions_[session_id] = std::move(s);
    }
    auto out = emit_from_enclave(platform_, enclave_->id(), sandbox::IoChannel::HANDSHAKE,
                                 sandbox::TaintedBytes::make_public(accepted.value().response),
                                 false, "attest response");
    if (!out.ok()) return service::ServiceDeny::POLICY_DENIAL;
    return std::move(out.value());
  }

  struct EntryResult {
    service::MsgType reply_type;
    Bytes payload;
  };

  // Every post-attestation frame lands here; the session state machine and
  // role separation are enforced inside the enclave, not by the host.
  Result<EntryResult, service::ServiceDeny> handle_frame(uint64_t session_id,
                                                         service::MsgType type,
                                                         ByteSpan payload) {
    using service::MsgType;
    using service::ServiceDeny;

    std::unique_lock lk(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return ServiceDeny::PROTOCOL_VIOLATION;
    Session& s = it->second;

    const auto session_channel = s.role == SessionRole::HOLDER
                                     ? sandbox::IoChannel::TO_HOLDER_CHANNEL
                                     : sandbox::IoChannel::TO_PROVIDER;
    detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::INGRESS, session_channel,
                         sandbox::TaintLabel::PUBLIC, true, payload.size(),
                         std::string(service::msg_type_name(type)));

    switch (type) {
      case MsgType::PROVISION: {
        if (s.role != SessionRole::PROVIDER) return ServiceDeny::ROLE_VIOLATION;
        if (s.phase != Phase::ESTABLISHED) return ServiceDeny::PROTOCOL_VIOLATION;
        auto opened = open_on(s, type, payload);
        if (!opened.ok()) return opened.error();
        if (config_.has_value()) return ServiceDeny::PROTOCOL_VIOLATION;

        // Config bytes are the provider's secret from the moment they exist
        // in the clear; validation happens on the labeled buffer.
        auto tainted = sandbox::TaintedBytes::with_label(std::move(opened.value()),
                                                         sandbox::TaintLabel::PROVIDER_SECRET);
        auto cfg = sandbox::validate_config(tainted.bytes);
        if (!cfg.ok()) {
          return seal_reply(s, MsgType::STATUS,
                            sandbox::TaintedBytes::make_public(
                                sandbox::encode_status(sandbox::JobState::FAILED, 0)),
                            "provision reject");
        }
        config_ = std::move(cfg.value());
        if (seed_override_) config_->seed = *seed_override_;
        s.phase = Phase::PROVISIONED;
        if (enclave_->state() == enclave::EnclaveState::CREATED) {
          enclave_->set_state(enclave::EnclaveState::PROVISIONED);
        }
        return seal_reply(s, MsgType::STATUS,
                          sandbox::TaintedBytes::make_public(
                              sandbox::encode_status(sandbox::JobState::PENDING, 0)),
                          "provision ack");
      }

      case MsgType::UPLOAD_DATA: {
        if (s.role != SessionRole::HOLDER) return ServiceDeny::ROLE_VIOLATION;
        if (s.phase != Phase::ESTABLISHED) return ServiceDeny::PROTOCOL_VIOLATION;
        auto opened = open_on(s, type, payload);
        if (!opened.ok()) return opened.error();
        auto rows = decode_dataset(opened.value());
        if (!rows) return ServiceDeny::BAD_REQUEST;
        for (double v : rows->features) {
          if (!std::isfinite(v)) return ServiceDeny::BAD_REQUEST;
        }
        if (s.data.n_rows == 0) {
          s.data = std::move(*rows);
          s.data.origin = sandbox::TaintLabel::HOLDER_SECRET;
        } else {
          if (rows->input_dim != s.data.input_dim) return ServiceDeny::BAD_REQUEST;
          s.data.n_rows += rows->n_rows;
          append_vec(s.data.features, rows->features);
          s.data.labels.insert(s.data.labels.end(), rows->labels.begin(), rows->labels.end());
        }
        Bytes ack;
        put_u32be(ack, static_cast<uint32_t>(s.data.n_rows));
        return seal_reply(s, MsgType::UPLOAD_DATA, sandbox::TaintedBytes::make_public(ack),
                          "upload ack");
      }

      case MsgType::START_TRAIN: {
        if (s.role != SessionRole::HOLDER) return ServiceDeny::ROLE_VIOLATION;
        if (s.phase != Phase::ESTABLISHED) return ServiceDeny::PROTOCOL_VIOLATION;
        auto opened = open_on(s, type, payload);
        if (!opened.ok()) return opened.error();
        if (opened.value().size() != 4) return ServiceDeny::BAD_REQUEST;
        const uint32_t k = get_u32be(opened.value(), 0);
        if (k < 1 || k > 16) return ServiceDeny::BAD_REQUEST;
        if (!config_) return ServiceDeny::NOT_PROVISIONED;
        if (s.data.n_rows == 0) return ServiceDeny::PROTOCOL_VIOLATION;
        if (s.data.input_dim != config_->input_dim() || s.data.n_rows < k) {
          return ServiceDeny::BAD_REQUEST;
        }
        for (uint32_t label : s.data.labels) {
          if (label >= config_->n_classes()) return ServiceDeny::BAD_REQUEST;
        }

        auto job = std::make_shared<Job>();
        job->id = next_job_id_++;
        job->config = *config_;
        jobs_[job->id] = job;
        latest_job_ = job;
        s.job = job;
        s.phase = Phase::TRAIN_STARTED;
        if (enclave_->state() == enclave::EnclaveState::PROVISIONED) {
          enclave_->set_state(enclave::EnclaveState::TRAINING);
        }
        trainer::Dataset data = s.data;
        job->worker = std::thread([this, job, data = std::move(data), k] {
          run_job(*job, data, k);
        });

        Bytes reply;
        put_u64be(reply, job->id);
        return seal_reply(s, MsgType::START_TRAIN, sandbox::TaintedBytes::make_public(reply),
                          "job started");
      }

      case MsgType::STATUS: {
        if (s.phase != Phase::TRAIN_STARTED && s.phase != Phase::PROVISIONED) {
          return ServiceDeny::PROTOCOL_VIOLATION;
        }
        auto opened = open_on(s, type, payload);
        if (!opened.ok()) return opened.error();
        if (!opened.value().empty()) return ServiceDeny::BAD_REQUEST;

        if (s.role == SessionRole::PROVIDER) {
          // Fixed vocabulary: state byte plus epoch counter, nothing else.
          auto job = latest_job_;
          auto status = job ? sandbox::encode_status(job->state.load(), job->epoch.load())
                            : sandbox::encode_status(sandbox::JobState::PENDING, 0);
          return seal_reply(s, MsgType::STATUS,
                            sandbox::TaintedBytes::make_public(std::move(status)),
                            "provider status");
        }
        auto job = s.job;
        if (!job) return ServiceDeny::PROTOCOL_VIOLATION;
        Bytes reply;
        reply.push_back(static_cast<uint8_t>(job->state.load()));
        put_u32be(reply, job->epoch.load());
        put_u64be(reply, job->id);
        return seal_reply(s, MsgType::STATUS, sandbox::TaintedBytes::make_public(reply),
                          "holder status");
      }

      case MsgType::QUERY: {
        if (s.role != SessionRole::HOLDER) return ServiceDeny::ROLE_VIOLATION;
        if (s.phase != Phase::TRAIN_STARTED) return ServiceDeny::PROTOCOL_VIOLATION;
        auto opened = open_on(s, type, payload);
        if (!opened.ok()) return opened.error();
        ByteSpan body(opened.value());
        if (body.size() < 16) return ServiceDeny::BAD_REQUEST;
        const uint64_t job_id = get_u64be(body, 0);
        const uint32_t rows = get_u32be(body, 8);
        const uint32_t dim = get_u32be(body, 12);
        auto job = s.job;
        if (!job || job_id != job->id) return ServiceDeny::AUTH_FAILURE;
        if (job->state.load() != sandbox::JobState::DONE) return ServiceDeny::JOB_NOT_DONE;
        if (rows == 0 || dim != job->config.input_dim() ||
            body.size() != 16 + static_cast<size_t>(rows) * dim * 8) {
          return ServiceDeny::BAD_REQUEST;
        }
        std::vector<double> features;
        features.reserve(static_cast<size_t>(rows) * dim);
        for (size_t i = 0; i < static_cast<size_t>(rows) * dim; ++i) {
          features.push_back(get_f64be(body, 16 + i * 8));
        }

        // Forward pass stays inside; only argmax class ids go out, sealed.
        auto ids = trainer::predict(job->final_params, job->config, features, rows);
        Bytes reply;
        put_u32be(reply, rows);
        for (uint32_t id : ids) put_u32be(reply, id);
        return seal_reply(s, MsgType::QUERY_RESP, sandbox::TaintedBytes::make_public(reply),
                          "query result");
      }

#ifdef CHIRON_TESTING
      case MsgType::EXPORT_PARAMS: {
        if (s.role != SessionRole::HOLDER) return ServiceDeny::ROLE_VIOLATION;
        if (s.phase != Phase::TRAIN_STARTED) return ServiceDeny::PROTOCOL_VIOLATION;
        auto opened = open_on(s, type, payload);
        if (!opened.ok()) return opened.error();
        auto job = s.job;
        if (!job || job->state.load() != sandbox::JobState::DONE) {
          return ServiceDeny::JOB_NOT_DONE;
        }
        Bytes reply;
        put_u32be(reply, static_cast<uint32_t>(job->final_params.size()));
        for (double v : job->final_params) put_f64be(reply, v);
        return seal_reply(s, MsgType::EXPORT_PARAMS, sandbox::TaintedBytes::make_public(reply),
                          "params export");
      }
#endif

      default:
        return ServiceDeny::UNKNOWN_TYPE;
    }
  }

  JobSnapshot job_snapshot(uint64_t job_id) const {
    std::lock_guard lk(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return {};
    return {it->second->state.load(), it->second->epoch.load()};
  }

  // Blocks until the job's worker finishes; test convenience.
  sandbox::JobState wait_job(uint64_t job_id) {
    std::shared_ptr<Job> job;
    {
      std::lock_guard lk(mu_);
      auto it = jobs_.find(job_id);
      if (it == jobs_.end()) return sandbox::JobState::FAILED;
      job = it->second;
    }
    if (job->worker.joinable()) job->worker.join();
    return job->state.load();
  }

 private:
  enum class Phase : uint8_t { ESTABLISHED, PROVISIONED, TRAIN_STARTED };

  struct Job {
    uint64_t id = 0;
    std::atomic<sandbox::JobState> state{sandbox::JobState::PENDING};
    std::atomic<uint32_t> epoch{0};
    sandbox::ModelConfig config;
    trainer::ParameterVector final_params;
    std::thread worker;
  };

  struct Session {
    SessionRole role = SessionRole::HOLDER;
    Phase phase = Phase::ESTABLISHED;
    channel::SecureChannel ch;
    trainer::Dataset data;
    std::shared_ptr<Job> job;
  };

  static void append_vec(std::vector<double>& dst, const std::vector<double>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
  }

  Result<Bytes, service::ServiceDeny> open_on(Session& s, service::MsgType type,
                                              ByteSpan sealed) {
    auto opened = s.ch.open(sealed, type_aad(type));
    if (!opened.ok()) {
      switch (opened.error()) {
        case channel::ChannelError::REPLAY: return service::ServiceDeny::CHANNEL_REJECT_REPLAY;
        case channel::ChannelError::AUTH_FAILED: return service::ServiceDeny::CHANNEL_REJECT_AUTH;
        case channel::ChannelError::MALFORMED: break;
      }
      return service::ServiceDeny::CHANNEL_REJECT_MALFORMED;
    }
    return std::move(opened.value());
  }

  // The two session channels submit different things to the policy, per the
  // egress rules: the holder channel carries sealed records, so the policy
  // judges the sealed (declassified) bytes; the provider channel carries the
  // status vocabulary, so the policy judges the raw status message and the
  // transport seal is applied after the verdict.
  Result<EntryResult, service::ServiceDeny> seal_reply(Session& s, service::MsgType reply_type,
                                                       sandbox::TaintedBytes inner,
                                                       std::string note) {
    if (s.role == SessionRole::PROVIDER) {
      auto verdict =
          sandbox::policy_check({sandbox::IoChannel::TO_PROVIDER, inner});
      if (!verdict.ok()) return service::ServiceDeny::POLICY_DENIAL;
      bool do_seal = true;
#ifdef CHIRON_TESTING
      do_seal = !testing::knobs().skip_status_seal;
#endif
      Bytes wire = do_seal ? s.ch.seal(inner, type_aad(reply_type)) : std::move(inner.bytes);
      detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::EGRESS,
                           sandbox::IoChannel::TO_PROVIDER, sandbox::TaintLabel::PUBLIC, do_seal,
                           wire.size(), std::move(note));
      return EntryResult{reply_type, std::move(wire)};
    }
    Bytes wire = s.ch.seal(inner, type_aad(reply_type));
    auto out = emit_from_enclave(platform_, enclave_->id(),
                                 sandbox::IoChannel::TO_HOLDER_CHANNEL,
                                 sandbox::TaintedBytes::make_public(std::move(wire)), true,
                                 std::move(note));
    if (!out.ok()) return service::ServiceDeny::POLICY_DENIAL;
    return EntryResult{reply_type, std::move(out.value())};
  }

  // ---- Distributed job execution -------------------------------------------

  void run_job(Job& job, const trainer::Dataset& data, size_t k) {
    try {
      job.state.store(sandbox::JobState::RUNNING);
      auto shards = coordinator::partition(data, k);

      std::vector<std::unique_ptr<TrainerApp>> trainers;
      std::vector<channel::SecureChannel> agg_ch(k);
      trainers.reserve(k);
      for (size_t i = 0; i < k; ++i) {
        trainers.push_back(std::make_unique<TrainerApp>(platform_));
      }

      // Mutually attested channel + sealed shard provisioning, per trainer.
      for (size_t i = 0; i < k; ++i) {
        agg_ch[i] = establish_trainer_channel(*trainers[i], i);
        provision_trainer(*trainers[i], agg_ch[i], i, job.config, shards[i]);
      }

      coordinator::SyncBarrier barrier(k);
      std::vector<size_t> shard_rows(k);
      for (size_t i = 0; i < k; ++i) shard_rows[i] = shards[i].n_rows;

      uint64_t total_rounds = 0;
      for (size_t i = 0; i < k; ++i) {
        total_rounds = std::max(total_rounds, coordinator::sync_rounds(shards[i].n_rows,
                                                                       job.config.optimizer,
                                                                       job.config.sync_period));
      }

      barrier.set_round_observer([&](uint64_t round, const trainer::ParameterVector&) {
        uint32_t epoch = UINT32_MAX;
        for (size_t i = 0; i < k; ++i) {
          epoch = std::min(epoch, coordinator::epochs_completed(shard_rows[i],
                                                                job.config.optimizer,
                                                                job.config.sync_period,
                                                                round + 1));
        }
        job.epoch.store(epoch);
      });

      std::mutex result_mu;
      trainer::ParameterVector final_params;
      std::vector<std::thread> threads;
      std::vector<std::exception_ptr> errors(k);

      for (size_t i = 0; i < k; ++i) {
        threads.emplace_back([&, i] {
          try {
            auto sync_fn = [&, i](Bytes sealed) {
              return aggregate_round(barrier, agg_ch[i], i, sealed);
            };
            auto params = trainers[i]->run_training(total_rounds, sync_fn);
            std::lock_guard lk(result_mu);
            final_params = std::move(params);  // identical across trainers by construction
          } catch (...) {
            errors[i] = std::current_exception();
            barrier.fail("trainer " + std::to_string(i) + " failed");
          }
        });
      }
      for (auto& t : threads) t.join();
      for (auto& trainer_app : trainers) trainer_app->kill();

      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      if (barrier.failed()) throw Error(Errc::ENCLAVE_TERMINATED, "sync barrier failed");

      {
        std::lock_guard lk(mu_);
        job.final_params = std::move(final_params);
      }
      job.epoch.store(job.config.optimizer.epochs);
      job.state.store(sandbox::JobState::DONE);
      if (enclave_->state() == enclave::EnclaveState::TRAINING) {
        enclave_->set_state(enclave::EnclaveState::SERVING);
      }
    } catch (...) {
      job.state.store(sandbox::JobState::FAILED);
    }
  }

  channel::SecureChannel establish_trainer_channel(TrainerApp& trainer_app, size_t idx) {
    auto hs = channel::client_hello(rng_);
    auto hello = emit_from_enclave(platform_, enclave_->id(), sandbox::IoChannel::HANDSHAKE,
                                   sandbox::TaintedBytes::make_public(hs.hello), false,
                                   "trainer hello");
    if (!hello.ok()) throw Error(Errc::CRYPTO_FAILURE, "hello egress denied");

    auto response = trainer_app.accept_channel(
        relay_.to_trainer(idx, "hello", std::move(hello.value())), rng_);
    if (!response.ok()) throw Error(Errc::CRYPTO_FAILURE, "trainer refused channel");

    Bytes resp_bytes = relay_.to_aggregator(idx, "response", std::move(response.value()));
    detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::INGRESS,
                         sandbox::IoChannel::HANDSHAKE, sandbox::TaintLabel::PUBLIC, false,
                         resp_bytes.size(), "trainer response");
    auto finished = channel::client_finish(hs, resp_bytes, runtime_measurement(),
                                           platform_.root_public_key());
    if (!finished.ok()) {
      throw Error(Errc::CRYPTO_FAILURE,
                  std::string("trainer attestation failed: ") +
                      std::string(channel::handshake_error_name(finished.error())));
    }
    auto ch = std::move(finished.value());

    // Prove the aggregator's identity back to the trainer.
    Bytes auth = channel::e2e_auth_message(ch, *enclave_);
    auto auth_out = emit_from_enclave(platform_, enclave_->id(), sandbox::IoChannel::INTER_ENCLAVE,
                                      sandbox::TaintedBytes::make_public(std::move(auth)), true,
                                      "aggregator auth");
    if (!auth_out.ok()) throw Error(Errc::CRYPTO_FAILURE, "auth egress denied");
    auto verdict = trainer_app.authenticate_peer(
        relay_.to_trainer(idx, "auth", std::move(auth_out.value())));
    if (!verdict.ok()) {
      throw Error(Errc::CRYPTO_FAILURE, "trainer rejected aggregator identity");
    }
    return ch;
  }

  void provision_trainer(TrainerApp& trainer_app, channel::SecureChannel& ch, size_t idx,
                         const sandbox::ModelConfig& cfg, const trainer::Dataset& shard) {
    Bytes body;
    Bytes cfg_bytes = sandbox::encode_config(cfg);
    put_u32be(body, static_cast<uint32_t>(cfg_bytes.size()));
    append(body, cfg_bytes);
    append(body, encode_dataset(shard));

    auto payload = sandbox::TaintedBytes::with_label(
        std::move(body), sandbox::taint_join(sandbox::TaintLabel::PROVIDER_SECRET,
                                             sandbox::TaintLabel::HOLDER_SECRET));
    Bytes sealed = ch.seal(payload, to_bytes(kAadProvision));
    auto out = emit_from_enclave(platform_, enclave_->id(), sandbox::IoChannel::INTER_ENCLAVE,
                                 sandbox::TaintedBytes::make_public(std::move(sealed)), true,
                                 "shard provision");
    if (!out.ok()) throw Error(Errc::CRYPTO_FAILURE, "provision egress denied");
    auto verdict =
        trainer_app.provision(relay_.to_trainer(idx, "provision", std::move(out.value())));
    if (!verdict.ok()) throw Error(Errc::CRYPTO_FAILURE, "trainer provisioning failed");
  }

  // Aggregator side of one sync round, running on the calling trainer's
  // thread: open, contribute to the barrier (blocks until the round commits),
  // seal the average back.
  Bytes aggregate_round(coordinator::SyncBarrier& barrier, channel::SecureChannel& ch,
                        size_t idx, Bytes sealed) {
    Bytes arrived = relay_.to_aggregator(idx, "sync", std::move(sealed));
    detail::log_crossing(platform_, enclave_->id(), harness::FlowDir::INGRESS,
                         sandbox::IoChannel::TO_PARAM_SERVER, sandbox::TaintLabel::PUBLIC, true,
                         arrived.size(), "sync contribution");
    auto opened = ch.open(arrived, to_bytes(kAadSync));
    if (!opened.ok()) {
      throw Error(Errc::CRYPTO_FAILURE, std::string("sync contribution rejected: ") +
                                            std::string(channel_error_name(opened.error())));
    }
    auto msg = coordinator::decode_sync(opened.value());
    if (!msg) throw Error(Errc::CRYPTO_FAILURE, "malformed sync payload");

    auto averaged = barrier.contribute(idx, msg->round_index, msg->params);

    auto reply = sandbox::TaintedBytes::with_label(
        coordinator::encode_sync(msg->round_index, averaged),
        sandbox::taint_join(sandbox::TaintLabel::HOLDER_SECRET,
                            sandbox::TaintLabel::PROVIDER_SECRET));
    Bytes wire = ch.seal(reply, to_bytes(kAadSyncReply));
    auto out = emit_from_enclave(platform_, enclave_->id(), sandbox::IoChannel::INTER_ENCLAVE,
                                 sandbox::TaintedBytes::make_public(std::move(wire)), true,
                                 "round average");
    if (!out.ok()) throw Error(Errc::CRYPTO_FAILURE, "round average egress denied");
    return relay_.to_trainer(idx, "sync-reply", std::move(out.value()));
  }

  enclave::Platform& platform_;
  crypto::RandomSource& rng_;
  InterEnclaveRelay& relay_;
  std::shared_ptr<enclave::Enclave> enclave_;

  mutable std::mutex mu_;
  std::unordered_map<uint64_t, Session> sessions_;
  std::optional<sandbox::ModelConfig> config_;
  std::optional<uint64_t> seed_override_;
  std::unordered_map<uint64_t, std::shared_ptr<Job>> jobs_;
  std::shared_ptr<Job> latest_job_;
  uint64_t next_job_id_ = 1;
};

}  // namespace chiron::app
