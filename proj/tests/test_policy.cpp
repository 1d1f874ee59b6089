// Taint lattice and the egress policy: which labels may cross which
// channels, and the fixed status vocabulary on the provider channel.

#include <catch2/catch_amalgamated.hpp>

#include "chiron/policy.hpp"

using namespace chiron;
using namespace chiron::sandbox;

TEST_CASE("taint labels form the expected join lattice") {
  using L = TaintLabel;
  CHECK(taint_join(L::PUBLIC, L::PUBLIC) == L::PUBLIC);
  CHECK(taint_join(L::PUBLIC, L::HOLDER_SECRET) == L::HOLDER_SECRET);
  CHECK(taint_join(L::HOLDER_SECRET, L::PROVIDER_SECRET) == L::BOTH_SECRET);
  CHECK(taint_join(L::BOTH_SECRET, L::PUBLIC) == L::BOTH_SECRET);
  CHECK(taint_join(L::HOLDER_SECRET, L::HOLDER_SECRET) == L::HOLDER_SECRET);

  CHECK(taint_leq(L::PUBLIC, L::HOLDER_SECRET));
  CHECK(taint_leq(L::PUBLIC, L::BOTH_SECRET));
  CHECK(taint_leq(L::HOLDER_SECRET, L::BOTH_SECRET));
  CHECK_FALSE(taint_leq(L::HOLDER_SECRET, L::PROVIDER_SECRET));
  CHECK_FALSE(taint_leq(L::BOTH_SECRET, L::HOLDER_SECRET));
  CHECK(taint_leq(L::BOTH_SECRET, L::BOTH_SECRET));
}

TEST_CASE("status codec covers only the closed vocabulary") {
  auto wire = encode_status(JobState::RUNNING, 7);
  REQUIRE(wire.size() == 5);
  CHECK(wire[0] == 1);  // RUNNING
  CHECK(is_status_vocabulary(wire));

  auto view = decode_status(wire);
  REQUIRE(view.has_value());
  CHECK(view->state == JobState::RUNNING);
  CHECK(view->epoch == 7);

  CHECK_FALSE(decode_status(Bytes{}).has_value());
  CHECK_FALSE(decode_status(Bytes{0, 0, 0, 0}).has_value());
  CHECK_FALSE(decode_status(Bytes{0, 0, 0, 0, 0, 0}).has_value());
  Bytes bad_state = {9, 0, 0, 0, 0};
  CHECK_FALSE(decode_status(bad_state).has_value());
}

TEST_CASE("policy admits only public payloads on session channels") {
  auto sealed = TaintedBytes::make_public(Bytes{0xde, 0xad});  // post-seal records are PUBLIC
  CHECK(policy_check({IoChannel::TO_HOLDER_CHANNEL, sealed}).ok());
  CHECK(policy_check({IoChannel::TO_PARAM_SERVER, sealed}).ok());
  CHECK(policy_check({IoChannel::HANDSHAKE, sealed}).ok());
  CHECK(policy_check({IoChannel::INTER_ENCLAVE, sealed}).ok());
  CHECK(policy_check({IoChannel::TO_LOG, sealed}).ok());

  for (auto label : {TaintLabel::HOLDER_SECRET, TaintLabel::PROVIDER_SECRET,
                     TaintLabel::BOTH_SECRET}) {
    auto secret = TaintedBytes::with_label(Bytes{1, 2, 3}, label);
    for (auto chan : {IoChannel::TO_HOLDER_CHANNEL, IoChannel::TO_PARAM_SERVER,
                      IoChannel::TO_PROVIDER, IoChannel::TO_LOG, IoChannel::HANDSHAKE,
                      IoChannel::INTER_ENCLAVE}) {
      auto verdict = policy_check({chan, secret});
      REQUIRE_FALSE(verdict.ok());
      CHECK(verdict.error() == PolicyDeny::SECRET_EGRESS);
    }
  }
}

TEST_CASE("provider channel accepts nothing but the status vocabulary") {
  auto status = TaintedBytes::make_public(encode_status(JobState::DONE, 3));
  CHECK(policy_check({IoChannel::TO_PROVIDER, status}).ok());

  auto chatty = TaintedBytes::make_public(to_bytes("epoch=3 loss=0.02"));
  auto verdict = policy_check({IoChannel::TO_PROVIDER, chatty});
  REQUIRE_FALSE(verdict.ok());
  CHECK(verdict.error() == PolicyDeny::STATUS_VOCABULARY);

  // Right length, out-of-range state byte: still outside the vocabulary.
  auto near_miss = TaintedBytes::make_public(Bytes{200, 0, 0, 0, 1});
  auto v2 = policy_check({IoChannel::TO_PROVIDER, near_miss});
  REQUIRE_FALSE(v2.ok());
  CHECK(v2.error() == PolicyDeny::STATUS_VOCABULARY);
}

TEST_CASE("unroutable channel values are denied") {
  auto payload = TaintedBytes::make_public(Bytes{});
  auto verdict = policy_check({static_cast<IoChannel>(250), payload});
  REQUIRE_FALSE(verdict.ok());
  CHECK(verdict.error() == PolicyDeny::UNROUTABLE);
}

TEST_CASE("names are stable for reporting") {
  CHECK(io_channel_name(IoChannel::TO_PROVIDER) == "TO_PROVIDER");
  CHECK(job_state_name(JobState::SYNCING) == "SYNCING");
  CHECK(policy_deny_name(PolicyDeny::SECRET_EGRESS) == "SECRET_EGRESS");
}
