#pragma once
// Adversarial scenario suite. Each scenario scripts one concrete attack from
// one of the three adversary positions (malicious provider, compromised
// host, network adversary) against a fresh serving stack and states the
// denial or rejection the design owes it. A scenario HOLDS only if that
// expectation is met, the boundary audit over everything that crossed the
// enclave boundary is clean, and the provider's config canary never became
// visible to the holder side.
//
// The same suite doubles as a regression tripwire: run_mutations() re-runs
// every scenario under each single-knob weakening of the stack and records
// which scenarios flip to VIOLATED.

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chiron/app.hpp"
#include "chiron/audit.hpp"
#include "chiron/bytes.hpp"
#include "chiron/channel.hpp"
#include "chiron/dataset_wire.hpp"
#include "chiron/enclave.hpp"
#include "chiron/frame.hpp"
#include "chiron/policy.hpp"
#include "chiron/prng.hpp"
#include "chiron/result.hpp"
#include "chiron/taint.hpp"
#include "chiron/testing.hpp"
#include "chiron/trainer.hpp"

namespace chiron::harness {

// Distinctive learning rate: if this substring shows up in any byte stream
// the holder side can observe, the provider's config leaked.
inline constexpr std::string_view kConfigCanary = "0.09170001";

inline std::string canary_config_json() {
  return R"({"schema_version":1,"seed":7,)"
         R"("layers":[{"kind":"DENSE","input_dim":2,"output_dim":4,"activation":"RELU"},)"
         R"({"kind":"DENSE","input_dim":4,"output_dim":2,"activation":"IDENTITY"}],)"
         R"("loss":"SOFTMAX_CROSS_ENTROPY",)"
         R"("optimizer":{"kind":"SGD","learning_rate":0.09170001,"batch_size":8,"epochs":3},)"
         R"("sync_period":2})";
}

// Two gaussian blobs around (-1,-1) and (1,1); enough signal for the tiny
// jobs scenarios run.
inline trainer::Dataset make_blobs(size_t n, uint64_t seed) {
  trainer::SplitMix64 rng(seed);
  trainer::Dataset d;
  d.n_rows = n;
  d.input_dim = 2;
  for (size_t i = 0; i < n; ++i) {
    const uint32_t cls = static_cast<uint32_t>(i % 2);
    const double mean = cls == 0 ? -1.0 : 1.0;
    d.features.push_back(mean + 0.3 * trainer::normal(rng));
    d.features.push_back(mean + 0.3 * trainer::normal(rng));
    d.labels.push_back(cls);
  }
  return d;
}

// Relay that records every inter-enclave byte string the host carries and
// lets a scenario rewrite them in flight.
struct HarnessRelay : app::InterEnclaveRelay {
  using Hook = std::function<Bytes(size_t idx, std::string_view stage, Bytes)>;
  Hook tamper_to_trainer;
  Hook tamper_to_aggregator;
  std::mutex mu;
  std::vector<std::pair<std::string, Bytes>> captures;

  Bytes to_trainer(size_t idx, std::string_view stage, Bytes b) override {
    {
      std::lock_guard lk(mu);
      captures.emplace_back(std::string(stage), b);
    }
    return tamper_to_trainer ? tamper_to_trainer(idx, stage, std::move(b)) : b;
  }
  Bytes to_aggregator(size_t idx, std::string_view stage, Bytes b) override {
    {
      std::lock_guard lk(mu);
      captures.emplace_back(std::string(stage), b);
    }
    return tamper_to_aggregator ? tamper_to_aggregator(idx, stage, std::move(b)) : b;
  }

  std::vector<std::pair<std::string, Bytes>> snapshot() {
    std::lock_guard lk(mu);
    return captures;
  }
};

// One fresh stack per scenario: platform, serving enclave, relay, plus the
// observation ledgers the verdict is computed from.
struct ScenarioEnv {
  ScenarioEnv() : app(platform, crypto::system_random(), relay) {}

  enclave::Platform platform;
  HarnessRelay relay;
  app::ServingApp app;
  uint64_t next_sid = 1;
  std::vector<std::string> denials;          // deny names, in order observed
  std::vector<Bytes> holder_visible;         // every byte string the holder side saw

  void see_as_holder(ByteSpan b) { holder_visible.emplace_back(b.begin(), b.end()); }

  bool canary_visible() const {
    const std::string needle(kConfigCanary);
    for (const auto& b : holder_visible) {
      if (to_string(b).find(needle) != std::string::npos) return true;
    }
    return false;
  }

  bool saw_denial(std::string_view name) const {
    for (const auto& d : denials) {
      if (d == name) return true;
    }
    return false;
  }
};

// A client whose frames the adversary hands to the app directly — in this
// harness the attacker IS the host, so delivery goes straight to the enclave
// entry points.
class InProcClient {
 public:
  static std::optional<InProcClient> attest(ScenarioEnv& env, app::SessionRole role) {
    InProcClient c(env, role);
    auto hs = channel::client_hello(crypto::system_random());
    Bytes payload;
    payload.push_back(static_cast<uint8_t>(role));
    append(payload, hs.hello);
    auto resp = env.app.open_session(c.sid_, payload);
    if (!resp.ok()) {
      env.denials.emplace_back(service::service_deny_name(resp.error()));
      return std::nullopt;
    }
    if (role == app::SessionRole::HOLDER) env.see_as_holder(resp.value());
    auto finished = channel::client_finish(hs, resp.value(), app::runtime_measurement(),
                                           env.platform.root_public_key());
    if (!finished.ok()) return std::nullopt;
    c.ch_ = std::move(finished.value());
    return c;
  }

  uint64_t sid() const { return sid_; }
  channel::SecureChannel& ch() { return ch_; }

  Bytes seal_request(service::MsgType t, ByteSpan inner) {
    return ch_.seal(sandbox::TaintedBytes::make_public(Bytes(inner.begin(), inner.end())),
                    app::type_aad(t));
  }

  // Raw delivery; every reply (and every denial) lands in the env ledgers.
  Result<app::ServingApp::EntryResult, service::ServiceDeny> deliver(service::MsgType t,
                                                                     ByteSpan sealed) {
    auto r = env_->app.handle_frame(sid_, t, sealed);
    if (!r.ok()) {
      env_->denials.emplace_back(service::service_deny_name(r.error()));
    } else if (role_ == app::SessionRole::HOLDER) {
      env_->see_as_holder(r.value().payload);
    }
    return r;
  }

  // Seal, deliver, open. Error string carries the failing stage.
  Result<Bytes, std::string> request(service::MsgType t, ByteSpan inner,
                                     service::MsgType expected_reply) {
    auto r = deliver(t, seal_request(t, inner));
    if (!r.ok()) {
      return std::string("denied: ") + std::string(service::service_deny_name(r.error()));
    }
    if (r.value().reply_type != expected_reply) return std::string("unexpected reply type");
    auto opened = ch_.open(r.value().payload, app::type_aad(r.value().reply_type));
    if (!opened.ok()) {
      return std::string("reply rejected: ") +
             std::string(channel::channel_error_name(opened.error()));
    }
    if (role_ == app::SessionRole::HOLDER) env_->see_as_holder(opened.value());
    return std::move(opened.value());
  }

 private:
  InProcClient(ScenarioEnv& env, app::SessionRole role)
      : env_(&env), role_(role), sid_(env.next_sid++) {}

  ScenarioEnv* env_;
  app::SessionRole role_;
  uint64_t sid_;
  channel::SecureChannel ch_;
};

// ---- Shared flow fragments ----------------------------------------------------

inline bool provision_ok(InProcClient& provider) {
  auto r = provider.request(service::MsgType::PROVISION, to_bytes(canary_config_json()),
                            service::MsgType::STATUS);
  if (!r.ok()) return false;
  auto status = sandbox::decode_status(r.value());
  return status && status->state == sandbox::JobState::PENDING;
}

inline std::optional<uint32_t> upload_rows(InProcClient& holder, const trainer::Dataset& rows) {
  auto r = holder.request(service::MsgType::UPLOAD_DATA, encode_dataset(rows),
                          service::MsgType::UPLOAD_DATA);
  if (!r.ok() || r.value().size() != 4) return std::nullopt;
  return get_u32be(r.value(), 0);
}

inline std::optional<uint64_t> start_job(InProcClient& holder, uint32_t k) {
  Bytes req;
  put_u32be(req, k);
  auto r = holder.request(service::MsgType::START_TRAIN, req, service::MsgType::START_TRAIN);
  if (!r.ok() || r.value().size() != 8) return std::nullopt;
  return get_u64be(r.value(), 0);
}

// Provision + upload + train to completion; the backbone most scenarios
// build on. Returns the job id, or nullopt with the failure already in the
// env ledgers.
inline std::optional<uint64_t> train_to_done(ScenarioEnv& env, InProcClient& provider,
                                             InProcClient& holder, uint32_t k) {
  if (!provision_ok(provider)) return std::nullopt;
  if (!upload_rows(holder, make_blobs(32, 2024))) return std::nullopt;
  auto job = start_job(holder, k);
  if (!job) return std::nullopt;
  if (env.app.wait_job(*job) != sandbox::JobState::DONE) return std::nullopt;
  return job;
}

// ---- Scenario table -----------------------------------------------------------

struct Expectation {
  bool met = false;
  std::string evidence;
};

struct Scenario {
  std::string name;
  std::string adversary;  // PROVIDER | HOST | NETWORK
  std::string attack;
  std::function<Expectation(ScenarioEnv&)> run;
};

struct ScenarioResult {
  std::string name;
  std::string adversary;
  bool held = false;
  std::string evidence;
};

namespace scenarios {

// -- malicious provider --

inline Expectation config_dim_bomb(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  if (!provider) return {false, "provider attestation failed"};
  std::string cfg = canary_config_json();
  auto pos = cfg.find("\"output_dim\":4");
  cfg.replace(pos, 14, "\"output_dim\":5000");
  auto r = provider->request(service::MsgType::PROVISION, to_bytes(cfg),
                             service::MsgType::STATUS);
  if (!r.ok()) return {false, "expected a sealed FAILED status, got: " + r.error()};
  auto status = sandbox::decode_status(r.value());
  if (!status || status->state != sandbox::JobState::FAILED) {
    return {false, "oversized layer was not rejected"};
  }
  return {true, "oversized layer rejected with sealed FAILED status"};
}

inline Expectation double_provision(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  if (!provider) return {false, "provider attestation failed"};
  if (!provision_ok(*provider)) return {false, "first provision failed"};
  auto again = provider->request(service::MsgType::PROVISION, to_bytes(canary_config_json()),
                                 service::MsgType::STATUS);
  if (again.ok()) return {false, "second provision was accepted"};
  if (!env.saw_denial("PROTOCOL_VIOLATION")) return {false, "wrong denial: " + again.error()};
  return {true, "re-provision denied: PROTOCOL_VIOLATION"};
}

inline Expectation provider_uploads_data(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  if (!provider) return {false, "provider attestation failed"};
  auto r = provider->request(service::MsgType::UPLOAD_DATA, encode_dataset(make_blobs(4, 1)),
                             service::MsgType::UPLOAD_DATA);
  if (r.ok()) return {false, "provider was allowed to upload data"};
  if (!env.saw_denial("ROLE_VIOLATION")) return {false, "wrong denial: " + r.error()};
  return {true, "provider upload denied: ROLE_VIOLATION"};
}

inline Expectation provider_queries_model(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!provider || !holder) return {false, "attestation failed"};
  auto job = train_to_done(env, *provider, *holder, 1);
  if (!job) return {false, "training run did not complete"};
  Bytes req;
  put_u64be(req, *job);
  put_u32be(req, 1);
  put_u32be(req, 2);
  put_f64be(req, 1.0);
  put_f64be(req, 1.0);
  auto r = provider->request(service::MsgType::QUERY, req, service::MsgType::QUERY_RESP);
  if (r.ok()) return {false, "provider was allowed to query the model"};
  if (!env.saw_denial("ROLE_VIOLATION")) return {false, "wrong denial: " + r.error()};
  return {true, "provider query denied: ROLE_VIOLATION"};
}

inline Expectation status_vocabulary(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!provider || !holder) return {false, "attestation failed"};
  if (!train_to_done(env, *provider, *holder, 1)) return {false, "training run did not complete"};
  auto r = provider->request(service::MsgType::STATUS, {}, service::MsgType::STATUS);
  if (!r.ok()) return {false, "status reply unusable: " + r.error()};
  auto status = sandbox::decode_status(r.value());
  if (!status) return {false, "status reply outside the fixed vocabulary"};
  return {true, "provider status stayed within the 5-byte vocabulary, sealed"};
}

inline Expectation status_probe(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  if (!provider) return {false, "provider attestation failed"};
  if (!provision_ok(*provider)) return {false, "provision failed"};
  Bytes probe{0x01};
  auto r = provider->request(service::MsgType::STATUS, probe, service::MsgType::STATUS);
  if (r.ok()) return {false, "status accepted a request payload"};
  if (!env.saw_denial("BAD_REQUEST")) return {false, "wrong denial: " + r.error()};
  return {true, "status probe denied: BAD_REQUEST"};
}

inline Expectation backdoor_egress(ScenarioEnv& env) {
  // A provider-planted code path tries to push the raw config out the holder
  // channel, bypassing seal(). The sandbox policy is all that stands in the
  // way; if the bytes get out, the holder can read the canary.
  auto secret = sandbox::TaintedBytes::with_label(to_bytes(canary_config_json()),
                                                  sandbox::TaintLabel::PROVIDER_SECRET);
  auto out = app::emit_from_enclave(env.platform, env.app.enclave().id(),
                                    sandbox::IoChannel::TO_HOLDER_CHANNEL, std::move(secret),
                                    /*sealed_record=*/false, "backdoor");
  if (out.ok()) {
    env.see_as_holder(out.value());
    return {false, "secret egress was allowed onto the holder channel"};
  }
  if (out.error() != sandbox::PolicyDeny::SECRET_EGRESS) {
    return {false, std::string("wrong denial: ") +
                       std::string(sandbox::policy_deny_name(out.error()))};
  }
  return {true, "unsealed secret egress denied: SECRET_EGRESS"};
}

// -- compromised host --

inline Expectation tamper_sync(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!provider || !holder) return {false, "attestation failed"};
  bool tampered = false;
  env.relay.tamper_to_aggregator = [&](size_t, std::string_view stage, Bytes b) {
    if (stage == "sync" && !tampered && b.size() > 20) {
      tampered = true;
      b[20] ^= 0x01;
    }
    return b;
  };
  if (!provision_ok(*provider)) return {false, "provision failed"};
  if (!upload_rows(*holder, make_blobs(32, 2024))) return {false, "upload failed"};
  auto job = start_job(*holder, 2);
  if (!job) return {false, "start_train failed"};
  auto state = env.app.wait_job(*job);
  if (!tampered) return {false, "tamper hook never fired"};
  if (state != sandbox::JobState::FAILED) return {false, "job survived a tampered sync record"};
  return {true, "tampered sync record failed the job closed"};
}

inline Expectation replay_record(ScenarioEnv& env) {
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!holder) return {false, "holder attestation failed"};
  Bytes sealed = holder->seal_request(service::MsgType::UPLOAD_DATA,
                                      encode_dataset(make_blobs(4, 5)));
  auto first = holder->deliver(service::MsgType::UPLOAD_DATA, sealed);
  if (!first.ok()) return {false, "first delivery failed"};
  auto second = holder->deliver(service::MsgType::UPLOAD_DATA, sealed);
  if (second.ok()) return {false, "replayed record was accepted"};
  if (second.error() != service::ServiceDeny::CHANNEL_REJECT_REPLAY) {
    return {false, std::string("wrong denial: ") +
                       std::string(service::service_deny_name(second.error()))};
  }
  return {true, "replayed record denied: CHANNEL_REJECT_REPLAY"};
}

inline Expectation unknown_frame(ScenarioEnv& env) {
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!holder) return {false, "holder attestation failed"};
  Bytes junk{0xde, 0xad};
  auto r = holder->deliver(static_cast<service::MsgType>(0x42), junk);
  if (r.ok()) return {false, "unknown frame type was accepted"};
  if (r.error() != service::ServiceDeny::UNKNOWN_TYPE) {
    return {false, std::string("wrong denial: ") +
                       std::string(service::service_deny_name(r.error()))};
  }
  if (!upload_rows(*holder, make_blobs(4, 6))) {
    return {false, "session unusable after UNKNOWN_TYPE"};
  }
  return {true, "unknown frame denied: UNKNOWN_TYPE; session survived"};
}

inline Expectation unattested_frame(ScenarioEnv& env) {
  const uint64_t sid = env.next_sid++;
  Bytes junk(64, 0xaa);
  auto r = env.app.handle_frame(sid, service::MsgType::START_TRAIN, junk);
  if (r.ok()) return {false, "frame accepted without attestation"};
  env.denials.emplace_back(service::service_deny_name(r.error()));
  if (r.error() != service::ServiceDeny::PROTOCOL_VIOLATION) {
    return {false, std::string("wrong denial: ") +
                       std::string(service::service_deny_name(r.error()))};
  }
  return {true, "unattested frame denied: PROTOCOL_VIOLATION"};
}

inline Expectation boundary_sweep(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!provider || !holder) return {false, "attestation failed"};
  auto job = train_to_done(env, *provider, *holder, 2);
  if (!job) return {false, "training run did not complete"};

  // Everything the host can see: boundary crossings and relay captures.
  for (const auto& c : env.platform.boundary_log().snapshot()) {
    if (c.dir == FlowDir::EGRESS && !c.sealed_record &&
        c.channel != sandbox::IoChannel::HANDSHAKE) {
      return {false, "unsealed egress on " + std::string(sandbox::io_channel_name(c.channel)) +
                         " (" + c.note + ")"};
    }
  }
  const std::string needle(kConfigCanary);
  for (const auto& [stage, bytes] : env.relay.snapshot()) {
    if (to_string(bytes).find(needle) != std::string::npos) {
      return {false, "config canary visible to the host at relay stage " + stage};
    }
  }
  return {true, "all egress sealed or handshake; no plaintext config at the host"};
}

inline Expectation forged_job_id(ScenarioEnv& env) {
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!provider || !holder) return {false, "attestation failed"};
  auto job = train_to_done(env, *provider, *holder, 1);
  if (!job) return {false, "training run did not complete"};
  Bytes req;
  put_u64be(req, *job + 1);
  put_u32be(req, 1);
  put_u32be(req, 2);
  put_f64be(req, 0.0);
  put_f64be(req, 0.0);
  auto r = holder->request(service::MsgType::QUERY, req, service::MsgType::QUERY_RESP);
  if (r.ok()) return {false, "query with a forged job id was answered"};
  if (!env.saw_denial("AUTH_FAILURE")) return {false, "wrong denial: " + r.error()};
  return {true, "forged job id denied: AUTH_FAILURE"};
}

// -- network adversary --

inline Expectation mitm_wrong_enclave(ScenarioEnv& env) {
  // Attacker terminates the connection at an enclave of their own: different
  // code image, different platform root. The client must refuse the quote.
  enclave::Platform mallory_platform;
  auto mallory = mallory_platform.create_enclave(
      enclave::CodeImage{to_bytes(std::string_view("mallory-runtime v0"))});
  auto hs = channel::client_hello(crypto::system_random());
  auto accepted = channel::enclave_respond(*mallory, hs.hello, crypto::system_random());
  if (!accepted.ok()) return {false, "attacker enclave failed to respond"};
  auto finished = channel::client_finish(hs, accepted.value().response,
                                         app::runtime_measurement(),
                                         env.platform.root_public_key());
  if (finished.ok()) return {false, "handshake with a wrong enclave was accepted"};
  if (finished.error() != channel::HandshakeError::BAD_SIGNATURE &&
      finished.error() != channel::HandshakeError::MEASUREMENT_MISMATCH) {
    return {false, std::string("wrong rejection: ") +
                       std::string(channel::handshake_error_name(finished.error()))};
  }
  return {true, std::string("wrong enclave rejected: ") +
                    std::string(channel::handshake_error_name(finished.error()))};
}

inline Expectation tamper_quote(ScenarioEnv& env) {
  auto hs = channel::client_hello(crypto::system_random());
  Bytes payload;
  payload.push_back(static_cast<uint8_t>(app::SessionRole::HOLDER));
  append(payload, hs.hello);
  auto resp = env.app.open_session(env.next_sid++, payload);
  if (!resp.ok()) return {false, "attest request failed"};
  Bytes bent = resp.value();
  bent[150] ^= 0x01;  // inside the quote's signature field
  auto finished = channel::client_finish(hs, bent, app::runtime_measurement(),
                                         env.platform.root_public_key());
  if (finished.ok()) return {false, "tampered quote was accepted"};
  if (finished.error() != channel::HandshakeError::BAD_SIGNATURE) {
    return {false, std::string("wrong rejection: ") +
                       std::string(channel::handshake_error_name(finished.error()))};
  }
  return {true, "tampered quote rejected: BAD_SIGNATURE"};
}

inline Expectation quote_splice(ScenarioEnv& env) {
  // Valid quote lifted from someone else's handshake, spliced onto the
  // attacker's own ephemeral key. Signature and measurement both check out;
  // only the transcript binding can catch it.
  auto hs_victim = channel::client_hello(crypto::system_random());
  Bytes payload;
  payload.push_back(static_cast<uint8_t>(app::SessionRole::HOLDER));
  append(payload, hs_victim.hello);
  auto resp = env.app.open_session(env.next_sid++, payload);
  if (!resp.ok()) return {false, "attest request failed"};

  auto hs = channel::client_hello(crypto::system_random());
  std::array<uint8_t, 32> attacker_secret{};
  crypto::system_random().fill(attacker_secret);
  const auto attacker_pub = crypto::x25519_base(attacker_secret);

  Bytes spliced(attacker_pub.begin(), attacker_pub.end());
  append(spliced, ByteSpan(resp.value()).subspan(32));  // the stolen quote
  auto finished = channel::client_finish(hs, spliced, app::runtime_measurement(),
                                         env.platform.root_public_key());
  if (finished.ok()) return {false, "spliced quote was accepted"};
  if (finished.error() != channel::HandshakeError::TRANSCRIPT_MISMATCH) {
    return {false, std::string("wrong rejection: ") +
                       std::string(channel::handshake_error_name(finished.error()))};
  }
  return {true, "spliced quote rejected: TRANSCRIPT_MISMATCH"};
}

inline Expectation reorder_records(ScenarioEnv& env) {
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!holder) return {false, "holder attestation failed"};
  Bytes a = holder->seal_request(service::MsgType::UPLOAD_DATA, encode_dataset(make_blobs(4, 8)));
  Bytes b = holder->seal_request(service::MsgType::UPLOAD_DATA, encode_dataset(make_blobs(4, 9)));
  auto out_of_order = holder->deliver(service::MsgType::UPLOAD_DATA, b);
  if (out_of_order.ok()) return {false, "out-of-order record was accepted"};
  if (out_of_order.error() != service::ServiceDeny::CHANNEL_REJECT_REPLAY) {
    return {false, std::string("wrong denial: ") +
                       std::string(service::service_deny_name(out_of_order.error()))};
  }
  auto in_order = holder->deliver(service::MsgType::UPLOAD_DATA, a);
  if (!in_order.ok()) return {false, "in-order record rejected after the attempt"};
  return {true, "out-of-order record denied: CHANNEL_REJECT_REPLAY"};
}

inline Expectation truncate_record(ScenarioEnv& env) {
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!holder) return {false, "holder attestation failed"};
  Bytes sealed = holder->seal_request(service::MsgType::UPLOAD_DATA,
                                      encode_dataset(make_blobs(4, 10)));
  sealed.resize(20);
  auto r = holder->deliver(service::MsgType::UPLOAD_DATA, sealed);
  if (r.ok()) return {false, "truncated record was accepted"};
  if (r.error() != service::ServiceDeny::CHANNEL_REJECT_MALFORMED) {
    return {false, std::string("wrong denial: ") +
                       std::string(service::service_deny_name(r.error()))};
  }
  return {true, "truncated record denied: CHANNEL_REJECT_MALFORMED"};
}

inline Expectation nonce_reuse_watch(ScenarioEnv& env) {
  // Passive observer: sequence numbers on the server's sealed replies must
  // be strictly increasing; a duplicate means a reused AEAD nonce, which
  // breaks the whole channel's confidentiality.
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  if (!provider || !holder) return {false, "attestation failed"};
  if (!train_to_done(env, *provider, *holder, 1)) return {false, "training run did not complete"};

  std::vector<uint64_t> seqs;
  for (int i = 0; i < 2; ++i) {
    auto r = holder->deliver(service::MsgType::STATUS,
                             holder->seal_request(service::MsgType::STATUS, {}));
    if (!r.ok()) {
      return {false, std::string("status request rejected: ") +
                         std::string(service::service_deny_name(r.error()))};
    }
    if (r.value().payload.size() < 8) return {false, "reply too short to carry a sequence"};
    seqs.push_back(get_u64be(r.value().payload, 0));
    auto opened = holder->ch().open(r.value().payload, app::type_aad(r.value().reply_type));
    if (!opened.ok()) return {false, "reply failed to open"};
  }
  if (seqs[1] != seqs[0] + 1) {
    return {false, "server reused record sequence " + std::to_string(seqs[0])};
  }
  return {true, "record sequences strictly increasing on the wire"};
}

}  // namespace scenarios

inline const std::vector<Scenario>& all_scenarios() {
  static const std::vector<Scenario> table = {
      {"provider-config-dim-bomb", "PROVIDER", "provision a config with a 5000-wide layer",
       scenarios::config_dim_bomb},
      {"provider-double-provision", "PROVIDER", "provision twice to swap the model config",
       scenarios::double_provision},
      {"provider-uploads-data", "PROVIDER", "push training rows from the provider role",
       scenarios::provider_uploads_data},
      {"provider-queries-model", "PROVIDER", "query the trained model from the provider role",
       scenarios::provider_queries_model},
      {"provider-status-vocabulary", "PROVIDER", "watch job status for anything beyond the vocabulary",
       scenarios::status_vocabulary},
      {"provider-status-probe", "PROVIDER", "attach a probe payload to a status request",
       scenarios::status_probe},
      {"provider-backdoor-egress", "PROVIDER", "planted code path writes raw config to the holder channel",
       scenarios::backdoor_egress},
      {"host-tamper-sync", "HOST", "flip one bit in a sealed sync contribution in transit",
       scenarios::tamper_sync},
      {"host-replay-record", "HOST", "redeliver a captured sealed request",
       scenarios::replay_record},
      {"host-unknown-frame", "HOST", "inject an unknown frame type mid-session",
       scenarios::unknown_frame},
      {"host-unattested-frame", "HOST", "deliver frames for a session that never attested",
       scenarios::unattested_frame},
      {"host-boundary-sweep", "HOST", "watch every boundary crossing during a full run",
       scenarios::boundary_sweep},
      {"host-forged-job-id", "HOST", "query with a guessed job id",
       scenarios::forged_job_id},
      {"net-mitm-wrong-enclave", "NETWORK", "terminate the handshake at an attacker enclave",
       scenarios::mitm_wrong_enclave},
      {"net-tamper-quote", "NETWORK", "flip one bit in the quote signature in transit",
       scenarios::tamper_quote},
      {"net-quote-splice", "NETWORK", "splice a stolen valid quote onto a fresh key exchange",
       scenarios::quote_splice},
      {"net-reorder-records", "NETWORK", "deliver sealed records out of order",
       scenarios::reorder_records},
      {"net-truncate-record", "NETWORK", "truncate a sealed record in transit",
       scenarios::truncate_record},
      {"net-nonce-reuse-watch", "NETWORK", "watch for repeated record sequence numbers",
       scenarios::nonce_reuse_watch},
  };
  return table;
}

inline ScenarioResult run_scenario(const Scenario& s) {
  ScenarioEnv env;
  Expectation e = s.run(env);
  auto audit = audit_boundary(env.platform.boundary_log().snapshot());
  ScenarioResult r;
  r.name = s.name;
  r.adversary = s.adversary;
  r.held = e.met && audit.clean() && !env.canary_visible();
  r.evidence = e.evidence;
  if (!audit.clean()) {
    r.evidence += "; audit: " + audit.violations.front().why + " on " +
                  std::string(sandbox::io_channel_name(audit.violations.front().crossing.channel));
  }
  if (env.canary_visible()) r.evidence += "; config canary visible to holder";
  return r;
}

inline std::vector<ScenarioResult> run_all() {
#ifdef CHIRON_TESTING
  testing::knobs().reset();
#endif
  std::vector<ScenarioResult> results;
  for (const auto& s : all_scenarios()) results.push_back(run_scenario(s));
  return results;
}

#ifdef CHIRON_TESTING

// One deliberately broken build each: a knob weakens one security check and
// the suite must notice.
struct Mutation {
  std::string name;
  std::function<void()> apply;
};

inline const std::vector<Mutation>& all_mutations() {
  static const std::vector<Mutation> table = {
      {"skip_quote_verify", [] { testing::knobs().skip_quote_verify = true; }},
      {"skip_transcript_bind", [] { testing::knobs().skip_transcript_bind = true; }},
      {"skip_policy_check", [] { testing::knobs().skip_policy_check = true; }},
      {"reuse_nonce", [] { testing::knobs().reuse_nonce = true; }},
      {"skip_status_seal", [] { testing::knobs().skip_status_seal = true; }},
  };
  return table;
}

struct MutationResult {
  std::string name;
  bool detected = false;
  std::vector<std::string> caught_by;
};

inline std::vector<MutationResult> run_mutations() {
  std::vector<MutationResult> results;
  for (const auto& m : all_mutations()) {
    testing::knobs().reset();
    m.apply();
    MutationResult r;
    r.name = m.name;
    for (const auto& s : all_scenarios()) {
      auto sr = run_scenario(s);
      if (!sr.held) r.caught_by.push_back(sr.name);
    }
    r.detected = !r.caught_by.empty();
    results.push_back(std::move(r));
  }
  testing::knobs().reset();
  return results;
}

#endif  // CHIRON_TESTING

inline nlohmann::json report_json(const std::vector<ScenarioResult>& scenarios_run) {
  nlohmann::json j;
  j["scenarios"] = nlohmann::json::array();
  bool all_held = true;
  for (const auto& r : scenarios_run) {
    j["scenarios"].push_back({{"name", r.name},
                              {"adversary", r.adversary},
                              {"verdict", r.held ? "HELD" : "VIOLATED"},
                              {"evidence", r.evidence}});
    all_held = all_held && r.held;
  }
  j["all_held"] = all_held;
  return j;
}

#ifdef CHIRON_TESTING
inline nlohmann::json report_json(const std::vector<ScenarioResult>& scenarios_run,
                                  const std::vector<MutationResult>& mutations) {
  nlohmann::json j = report_json(scenarios_run);
  j["mutations"] = nlohmann::json::array();
  bool all_detected = true;
  for (const auto& m : mutations) {
    j["mutations"].push_back(
        {{"name", m.name}, {"detected", m.detected}, {"caught_by", m.caught_by}});
    all_detected = all_detected && m.detected;
  }
  j["all_mutations_detected"] = all_detected;
  return j;
}
#endif

}  // namespace chiron::harness
