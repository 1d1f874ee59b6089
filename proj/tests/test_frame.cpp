// Wire framing: layout pin, chunking-agnostic reassembly, and the poisoned
// decoder after a framing violation.

#include <catch2/catch_amalgamated.hpp>

#include "chiron/frame.hpp"

using namespace chiron;
using namespace chiron::service;

TEST_CASE("frame layout: length covers type byte plus payload") {
  auto wire = encode_frame(MsgType::STATUS, Bytes{0xaa, 0xbb});
  CHECK(hex_encode(wire) == "0000000306aabb");

  auto empty = encode_frame(MsgType::ATTEST_REQ, {});
  CHECK(hex_encode(empty) == "0000000101");
}

TEST_CASE("oversize payloads cannot be encoded") {
  Bytes big(kMaxFrameLength, 0);  // one byte too many once the type is added
  CHECK_THROWS_AS(encode_frame(MsgType::UPLOAD_DATA, big), Error);
  Bytes max_ok(kMaxFrameLength - 1, 0);
  CHECK(encode_frame(MsgType::UPLOAD_DATA, max_ok).size() == 4 + kMaxFrameLength);
}

TEST_CASE("decoder reassembles frames regardless of chunking") {
  const Frame f1{static_cast<uint8_t>(MsgType::UPLOAD_DATA), Bytes{1, 2, 3, 4, 5}};
  const Frame f2{static_cast<uint8_t>(MsgType::STATUS), Bytes{}};
  Bytes stream = encode_frame(MsgType::UPLOAD_DATA, f1.payload);
  append(stream, encode_frame(MsgType::STATUS, f2.payload));

  SECTION("one byte at a time") {
    FrameDecoder dec;
    std::vector<Frame> got;
    for (uint8_t b : stream) {
      dec.feed(Bytes{b});
      while (auto next = dec.next()) {
        REQUIRE(next->ok());
        got.push_back(std::move(next->value()));
      }
    }
    REQUIRE(got.size() == 2);
    CHECK(got[0] == f1);
    CHECK(got[1] == f2);
  }

  SECTION("both frames in a single chunk") {
    FrameDecoder dec;
    dec.feed(stream);
    auto a = dec.next();
    REQUIRE(a.has_value());
    REQUIRE(a->ok());
    CHECK(a->value() == f1);
    auto b = dec.next();
    REQUIRE(b.has_value());
    REQUIRE(b->ok());
    CHECK(b->value() == f2);
    CHECK_FALSE(dec.next().has_value());
  }

  SECTION("incomplete frame stays pending") {
    FrameDecoder dec;
    dec.feed(ByteSpan(stream).subspan(0, 6));
    CHECK_FALSE(dec.next().has_value());
  }
}

TEST_CASE("framing violations poison the decoder") {
  SECTION("zero length") {
    FrameDecoder dec;
    dec.feed(Bytes{0, 0, 0, 0, 0xff});
    auto r = dec.next();
    REQUIRE(r.has_value());
    REQUIRE_FALSE(r->ok());
    CHECK(r->error() == FrameReject::LENGTH_ZERO);

    // Feeding a perfectly good frame afterwards cannot revive the stream.
    dec.feed(encode_frame(MsgType::STATUS, {}));
    auto again = dec.next();
    REQUIRE(again.has_value());
    REQUIRE_FALSE(again->ok());
    CHECK(again->error() == FrameReject::LENGTH_ZERO);
  }

  SECTION("length above the cap") {
    FrameDecoder dec;
    Bytes huge;
    put_u32be(huge, kMaxFrameLength + 1);
    dec.feed(huge);
    auto r = dec.next();
    REQUIRE(r.has_value());
    REQUIRE_FALSE(r->ok());
    CHECK(r->error() == FrameReject::OVERSIZE);
  }
}

TEST_CASE("deny vocabulary survives a name round-trip") {
  for (auto d : {ServiceDeny::UNKNOWN_TYPE, ServiceDeny::PROTOCOL_VIOLATION,
                 ServiceDeny::ROLE_VIOLATION, ServiceDeny::NOT_PROVISIONED,
                 ServiceDeny::ATTESTATION_FAILED, ServiceDeny::CHANNEL_REJECT_MALFORMED,
                 ServiceDeny::CHANNEL_REJECT_REPLAY, ServiceDeny::CHANNEL_REJECT_AUTH,
                 ServiceDeny::CONFIG_REJECTED, ServiceDeny::BAD_REQUEST,
                 ServiceDeny::JOB_NOT_DONE, ServiceDeny::AUTH_FAILURE,
                 ServiceDeny::POLICY_DENIAL}) {
    auto name = service_deny_name(d);
    auto back = service_deny_from_name(name);
    REQUIRE(back.has_value());
    CHECK(*back == d);
  }
  CHECK_FALSE(service_deny_from_name("NOT_A_CODE").has_value());
}

TEST_CASE("connection-scoped versus session-fatal denials") {
  CHECK(deny_keeps_connection(ServiceDeny::UNKNOWN_TYPE));
  CHECK(deny_keeps_connection(ServiceDeny::JOB_NOT_DONE));
  CHECK(deny_keeps_connection(ServiceDeny::AUTH_FAILURE));
  CHECK_FALSE(deny_keeps_connection(ServiceDeny::PROTOCOL_VIOLATION));
  CHECK_FALSE(deny_keeps_connection(ServiceDeny::ATTESTATION_FAILED));
  CHECK_FALSE(deny_keeps_connection(ServiceDeny::CHANNEL_REJECT_REPLAY));
}
