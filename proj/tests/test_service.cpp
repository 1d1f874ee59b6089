// Serving enclave session machine and the TCP host around it.

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "chiron/app.hpp"
#include "chiron/client.hpp"
#include "chiron/config.hpp"
#include "chiron/dataset_wire.hpp"
#include "chiron/harness.hpp"
#include "chiron/service.hpp"
#include "chiron/tcp.hpp"
#include "chiron/trainer.hpp"

namespace {

using namespace chiron;
using harness::InProcClient;
using harness::ScenarioEnv;
using service::MsgType;
using service::ServiceDeny;

Bytes raw_hello() {
  auto hs = channel::client_hello(crypto::system_random());
  return hs.hello;
}

Bytes attest_payload(uint8_t role_byte) {
  Bytes p;
  p.push_back(role_byte);
  append(p, raw_hello());
  return p;
}

sandbox::ModelConfig canary_config() {
  auto cfg = sandbox::validate_config(to_bytes(harness::canary_config_json()));
  REQUIRE(cfg.ok());
  return cfg.value();
}

}  // namespace

TEST_CASE("attest entry validates payload and session identity") {
  ScenarioEnv env;

  SECTION("short payload is refused") {
    auto r = env.app.open_session(99, Bytes{0x00, 0x01, 0x02});
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::ATTESTATION_FAILED);
  }

  SECTION("unknown role byte is refused") {
    auto r = env.app.open_session(99, attest_payload(2));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::ATTESTATION_FAILED);
  }

  SECTION("a session id cannot attest twice") {
    auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
    REQUIRE(holder);
    auto again = env.app.open_session(holder->sid(), attest_payload(0));
    REQUIRE_FALSE(again.ok());
    CHECK(again.error() == ServiceDeny::PROTOCOL_VIOLATION);
  }

  SECTION("frames for a never-attested session are refused") {
    auto r = env.app.handle_frame(777, MsgType::UPLOAD_DATA, Bytes{0x01});
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::PROTOCOL_VIOLATION);
  }
}

TEST_CASE("role separation inside the session machine") {
  ScenarioEnv env;

  SECTION("provider cannot upload data") {
    auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
    REQUIRE(provider);
    auto r = provider->deliver(
        MsgType::UPLOAD_DATA,
        provider->seal_request(MsgType::UPLOAD_DATA, encode_dataset(harness::make_blobs(4, 1))));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::ROLE_VIOLATION);
  }

  SECTION("holder cannot provision") {
    auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
    REQUIRE(holder);
    auto r = holder->deliver(
        MsgType::PROVISION,
        holder->seal_request(MsgType::PROVISION, to_bytes(harness::canary_config_json())));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::ROLE_VIOLATION);
  }
}

TEST_CASE("session phases gate every request") {
  ScenarioEnv env;
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  REQUIRE(provider);
  REQUIRE(holder);

  SECTION("start_train before provisioning is refused") {
    REQUIRE(harness::upload_rows(*holder, harness::make_blobs(8, 3)));
    Bytes req;
    put_u32be(req, 1);
    auto r = holder->deliver(MsgType::START_TRAIN, holder->seal_request(MsgType::START_TRAIN, req));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::NOT_PROVISIONED);
  }

  SECTION("start_train with no uploaded rows is refused") {
    REQUIRE(harness::provision_ok(*provider));
    Bytes req;
    put_u32be(req, 1);
    auto r = holder->deliver(MsgType::START_TRAIN, holder->seal_request(MsgType::START_TRAIN, req));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::PROTOCOL_VIOLATION);
  }

  SECTION("config is provisioned at most once, even from a fresh session") {
    REQUIRE(harness::provision_ok(*provider));
    auto provider2 = InProcClient::attest(env, app::SessionRole::PROVIDER);
    REQUIRE(provider2);
    auto r = provider2->deliver(
        MsgType::PROVISION,
        provider2->seal_request(MsgType::PROVISION, to_bytes(harness::canary_config_json())));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::PROTOCOL_VIOLATION);
  }

  SECTION("status needs a provisioned or training session") {
    auto r = holder->deliver(MsgType::STATUS, holder->seal_request(MsgType::STATUS, {}));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::PROTOCOL_VIOLATION);
  }

  SECTION("a rejected config leaves the enclave open for a corrected one") {
    auto bad = provider->request(MsgType::PROVISION, to_bytes("{\"schema_version\":1}"),
                                 MsgType::STATUS);
    REQUIRE(bad.ok());  // the reply is a sealed FAILED status, not a denial
    auto status = sandbox::decode_status(bad.value());
    REQUIRE(status);
    CHECK(status->state == sandbox::JobState::FAILED);
    CHECK(status->epoch == 0);
    CHECK(harness::provision_ok(*provider));
  }
}

TEST_CASE("upload validation") {
  ScenarioEnv env;
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  REQUIRE(holder);

  SECTION("undecodable payload is refused") {
    auto r = holder->deliver(MsgType::UPLOAD_DATA,
                             holder->seal_request(MsgType::UPLOAD_DATA, Bytes{0x01, 0x02}));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::BAD_REQUEST);
  }

  SECTION("non-finite features are refused") {
    trainer::Dataset ds;
    ds.n_rows = 1;
    ds.input_dim = 2;
    ds.features = {1.0, std::numeric_limits<double>::infinity()};
    ds.labels = {0};
    auto r = holder->deliver(MsgType::UPLOAD_DATA,
                             holder->seal_request(MsgType::UPLOAD_DATA, encode_dataset(ds)));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::BAD_REQUEST);
  }

  SECTION("appends accumulate, dimension mismatches do not") {
    auto first = harness::upload_rows(*holder, harness::make_blobs(8, 3));
    REQUIRE(first);
    CHECK(*first == 8);
    auto second = harness::upload_rows(*holder, harness::make_blobs(4, 9));
    REQUIRE(second);
    CHECK(*second == 12);

    trainer::Dataset wide;
    wide.n_rows = 1;
    wide.input_dim = 3;
    wide.features = {1.0, 2.0, 3.0};
    wide.labels = {0};
    auto r = holder->deliver(MsgType::UPLOAD_DATA,
                             holder->seal_request(MsgType::UPLOAD_DATA, encode_dataset(wide)));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::BAD_REQUEST);
  }
}

TEST_CASE("start_train argument checks") {
  ScenarioEnv env;
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  REQUIRE(provider);
  REQUIRE(holder);
  REQUIRE(harness::provision_ok(*provider));
  REQUIRE(harness::upload_rows(*holder, harness::make_blobs(8, 3)));

  auto start_with = [&](Bytes req) {
    return holder->deliver(MsgType::START_TRAIN, holder->seal_request(MsgType::START_TRAIN, req));
  };

  SECTION("shard count zero") {
    Bytes req;
    put_u32be(req, 0);
    auto r = start_with(req);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::BAD_REQUEST);
  }

  SECTION("shard count beyond the cap") {
    Bytes req;
    put_u32be(req, 17);
    auto r = start_with(req);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::BAD_REQUEST);
  }

  SECTION("truncated request") {
    auto r = start_with(Bytes{0x00, 0x00, 0x01});
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::BAD_REQUEST);
  }

  SECTION("more shards than rows") {
    Bytes req;
    put_u32be(req, 16);
    auto r = start_with(req);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::BAD_REQUEST);
  }
}

TEST_CASE("full in-process training session with k=1 matches a local run exactly") {
  ScenarioEnv env;
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  REQUIRE(provider);
  REQUIRE(holder);

  const auto data = harness::make_blobs(32, 2024);
  REQUIRE(harness::provision_ok(*provider));
  REQUIRE(harness::upload_rows(*holder, data));
  auto job = harness::start_job(*holder, 1);
  REQUIRE(job);
  REQUIRE(env.app.wait_job(*job) == sandbox::JobState::DONE);

  const auto cfg = canary_config();

  SECTION("holder status carries state, epoch, and the job id") {
    auto r = holder->request(MsgType::STATUS, {}, MsgType::STATUS);
    REQUIRE(r.ok());
    REQUIRE(r.value().size() == 13);
    CHECK(r.value()[0] == static_cast<uint8_t>(sandbox::JobState::DONE));
    CHECK(get_u32be(r.value(), 1) == cfg.optimizer.epochs);
    CHECK(get_u64be(r.value(), 5) == *job);
  }

  SECTION("provider status stays in the fixed vocabulary") {
    auto r = provider->request(MsgType::STATUS, {}, MsgType::STATUS);
    REQUIRE(r.ok());
    auto status = sandbox::decode_status(r.value());
    REQUIRE(status);
    CHECK(status->state == sandbox::JobState::DONE);
    CHECK(status->epoch == cfg.optimizer.epochs);
  }

  SECTION("queries for a foreign job id are refused") {
    Bytes req;
    put_u64be(req, *job + 1);
    put_u32be(req, 1);
    put_u32be(req, 2);
    put_f64be(req, 1.0);
    put_f64be(req, 1.0);
    auto r = holder->deliver(MsgType::QUERY, holder->seal_request(MsgType::QUERY, req));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::AUTH_FAILURE);
  }

  SECTION("query dimension mismatch is refused") {
    Bytes req;
    put_u64be(req, *job);
    put_u32be(req, 1);
    put_u32be(req, 3);
    for (int i = 0; i < 3; ++i) put_f64be(req, 1.0);
    auto r = holder->deliver(MsgType::QUERY, holder->seal_request(MsgType::QUERY, req));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error() == ServiceDeny::BAD_REQUEST);
  }

  SECTION("exported parameters are bit-identical to a standalone run") {
    // One shard means every barrier round averages a single contribution, so
    // the distributed path must reproduce the plain training loop exactly.
    auto expected = trainer::run_epochs(cfg, data, trainer::init_params(cfg), {});

    auto r = holder->request(MsgType::EXPORT_PARAMS, {}, MsgType::EXPORT_PARAMS);
    REQUIRE(r.ok());
    REQUIRE(r.value().size() == 4 + expected.size() * 8);
    REQUIRE(get_u32be(r.value(), 0) == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) {
      CHECK(get_f64be(r.value(), 4 + i * 8) == expected[i]);
    }
  }

  SECTION("query replies match the local predictor") {
    auto params = trainer::run_epochs(cfg, data, trainer::init_params(cfg), {});
    auto expected_ids =
        trainer::predict(params, cfg, data.features, static_cast<uint32_t>(data.n_rows));

    Bytes req;
    put_u64be(req, *job);
    put_u32be(req, static_cast<uint32_t>(data.n_rows));
    put_u32be(req, static_cast<uint32_t>(data.input_dim));
    for (double v : data.features) put_f64be(req, v);
    auto r = holder->request(MsgType::QUERY, req, MsgType::QUERY_RESP);
    REQUIRE(r.ok());
    REQUIRE(r.value().size() == 4 + expected_ids.size() * 4);
    REQUIRE(get_u32be(r.value(), 0) == expected_ids.size());
    for (size_t i = 0; i < expected_ids.size(); ++i) {
      CHECK(get_u32be(r.value(), 4 + i * 4) == expected_ids[i]);
    }
  }

  SECTION("the boundary transcript of the whole run audits clean") {
    auto report = harness::audit_boundary(env.platform.boundary_log().snapshot());
    CHECK(report.clean());
    CHECK_FALSE(env.canary_visible());
  }
}

TEST_CASE("query before completion is refused without closing the session") {
  ScenarioEnv env;
  auto provider = InProcClient::attest(env, app::SessionRole::PROVIDER);
  auto holder = InProcClient::attest(env, app::SessionRole::HOLDER);
  REQUIRE(provider);
  REQUIRE(holder);
  REQUIRE(harness::provision_ok(*provider));

  // No job was ever started on this holder session, so the export probe hits
  // the phase gate; the job-state race never enters into it.
  auto r = holder->deliver(MsgType::EXPORT_PARAMS, holder->seal_request(MsgType::EXPORT_PARAMS, {}));
  REQUIRE_FALSE(r.ok());
  CHECK(r.error() == ServiceDeny::PROTOCOL_VIOLATION);
}

// ---- TCP host -----------------------------------------------------------------

namespace {

struct LiveServer {
  LiveServer()
      : app(platform), server(app, "127.0.0.1", 0) {
    server.start();
  }
  ~LiveServer() { server.stop(); }

  net::TcpStream connect() { return net::connect_tcp("127.0.0.1", server.port()); }

  enclave::Platform platform;
  app::ServingApp app;
  service::Server server;
};

}  // namespace

TEST_CASE("tcp server starts and stops cleanly") {
  SECTION("with no connections") {
    LiveServer s;
    // Destructor must join everything without hanging.
  }

  SECTION("with an idle connected client") {
    LiveServer s;
    auto stream = s.connect();
    REQUIRE(stream.valid());
    s.server.stop();  // must unblock the worker stuck in read_some
  }

  SECTION("with a client mid-session") {
    LiveServer s;
    auto attested = client::attest(s.connect(), app::SessionRole::HOLDER,
                                   app::runtime_measurement(), s.platform.root_public_key());
    REQUIRE(attested.ok());
    s.server.stop();
  }
}

TEST_CASE("tcp sessions run the same machine as in-process ones") {
  LiveServer s;

  auto attested = client::attest(s.connect(), app::SessionRole::HOLDER,
                                 app::runtime_measurement(), s.platform.root_public_key());
  REQUIRE(attested.ok());
  auto& holder = attested.value();

  SECTION("upload round-trips") {
    auto n = client::upload_data(holder, harness::make_blobs(8, 3));
    REQUIRE(n.ok());
    CHECK(n.value() == 8);
  }

  SECTION("unknown frame types are survivable") {
    // Raw unsealed junk on an unknown type: the reply is an ERROR frame and
    // the connection (and channel) remain usable.
    REQUIRE(holder.connection().send(static_cast<MsgType>(0x42), Bytes{0xde, 0xad}));
    auto reply = holder.connection().recv();
    REQUIRE(reply);
    CHECK(static_cast<MsgType>(reply->msg_type) == MsgType::ERROR);
    CHECK(to_string(reply->payload) == "UNKNOWN_TYPE");

    auto n = client::upload_data(holder, harness::make_blobs(4, 5));
    REQUIRE(n.ok());
    CHECK(n.value() == 4);
  }

  SECTION("protocol violations close the connection") {
    REQUIRE(holder.connection().send(MsgType::ATTEST_REQ, attest_payload(0)));
    auto reply = holder.connection().recv();
    REQUIRE(reply);
    CHECK(static_cast<MsgType>(reply->msg_type) == MsgType::ERROR);
    CHECK(to_string(reply->payload) == "PROTOCOL_VIOLATION");
    CHECK_FALSE(holder.connection().recv());  // server hung up
  }
}

TEST_CASE("tcp server refuses frames before attestation") {
  LiveServer s;
  client::Connection conn(s.connect());
  REQUIRE(conn.send(MsgType::START_TRAIN, Bytes{0x00, 0x00, 0x00, 0x01}));
  auto reply = conn.recv();
  REQUIRE(reply);
  CHECK(static_cast<MsgType>(reply->msg_type) == MsgType::ERROR);
  CHECK(to_string(reply->payload) == "PROTOCOL_VIOLATION");
  CHECK_FALSE(conn.recv());
}

TEST_CASE("tcp server rejects broken framing and hangs up") {
  LiveServer s;
  auto stream = s.connect();
  REQUIRE(stream.valid());
  stream.write_all(Bytes{0x00, 0x00, 0x00, 0x00});  // length zero

  client::Connection probe(std::move(stream));
  // The raw write above bypassed the decoder, so read the ERROR frame back
  // through a fresh Connection wrapper.
  auto reply = probe.recv();
  REQUIRE(reply);
  CHECK(static_cast<MsgType>(reply->msg_type) == MsgType::ERROR);
  CHECK(to_string(reply->payload) == "LENGTH_ZERO");
  CHECK_FALSE(probe.recv());
}
