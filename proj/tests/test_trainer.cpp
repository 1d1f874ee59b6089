// MLP trainer: pinned forward losses, analytic gradients against central
// differences, deterministic initialization, and the epoch/sync mechanics
// distributed training depends on.

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "chiron/config.hpp"
#include "chiron/trainer.hpp"

using namespace chiron;
using namespace chiron::trainer;
using sandbox::Activation;
using sandbox::LayerSpec;
using sandbox::ModelConfig;

namespace {

ModelConfig make_config(std::vector<LayerSpec> layers, uint64_t seed = 0,
                        double lr = 0.1, uint32_t batch = 4, uint32_t epochs = 1,
                        uint32_t sync_period = 1) {
  ModelConfig cfg;
  cfg.seed = seed;
  cfg.layers = std::move(layers);
  cfg.optimizer = {lr, batch, epochs};
  cfg.sync_period = sync_period;
  return cfg;
}

Dataset make_rows(size_t n, size_t dim, std::vector<double> features,
                  std::vector<uint32_t> labels) {
  Dataset d;
  d.n_rows = n;
  d.input_dim = dim;
  d.features = std::move(features);
  d.labels = std::move(labels);
  return d;
}

double central_difference(const ParameterVector& params, const ModelConfig& cfg,
                          const Dataset& batch, size_t i, double h) {
  auto lo = params;
  auto hi = params;
  lo[i] -= h;
  hi[i] += h;
  return (forward(hi, cfg, batch).loss - forward(lo, cfg, batch).loss) / (2.0 * h);
}

}  // namespace

TEST_CASE("single-sample forward loss matches the hand computation") {
  auto cfg = make_config({{2, 2, Activation::IDENTITY}});
  ParameterVector params = {0.1, -0.2, 0.3, 0.4, 0.01, -0.01};
  auto batch = make_rows(1, 2, {1.0, 2.0}, {0});
  auto fwd = forward(params, cfg, batch);
  // logits: z0 = 0.1 + 2*0.3 + 0.01 = 0.71, z1 = -0.2 + 2*0.4 - 0.01 = 0.59
  CHECK_THAT(fwd.loss, Catch::Matchers::WithinAbs(0.63494610159561357918, 1e-9));
}

TEST_CASE("zero parameters give the uniform-prediction loss") {
  auto two = make_config({{3, 2, Activation::IDENTITY}});
  ParameterVector p2(two.param_count(), 0.0);
  auto b2 = make_rows(2, 3, {0.5, -1.0, 2.0, 1.0, 1.0, 1.0}, {1, 0});
  CHECK_THAT(forward(p2, two, b2).loss, Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));

  auto five = make_config({{2, 5, Activation::IDENTITY}});
  ParameterVector p5(five.param_count(), 0.0);
  auto b5 = make_rows(1, 2, {3.0, -4.0}, {4});
  CHECK_THAT(forward(p5, five, b5).loss, Catch::Matchers::WithinAbs(std::log(5.0), 1e-12));
}

TEST_CASE("analytic gradient matches central differences") {
  struct Case {
    ModelConfig cfg;
    size_t rows;
  };
  std::vector<Case> cases;
  cases.push_back({make_config({{2, 3, Activation::RELU}, {3, 2, Activation::IDENTITY}}, 11), 4});
  cases.push_back({make_config({{3, 4, Activation::TANH},
                                {4, 4, Activation::RELU},
                                {4, 3, Activation::IDENTITY}},
                               17),
                   3});
  cases.push_back({make_config({{1, 2, Activation::IDENTITY}}, 23), 2});

  for (const auto& c : cases) {
    auto params = init_params(c.cfg);
    SplitMix64 rng(c.cfg.seed + 1);
    Dataset batch;
    batch.n_rows = c.rows;
    batch.input_dim = c.cfg.input_dim();
    for (size_t i = 0; i < c.rows * c.cfg.input_dim(); ++i) {
      batch.features.push_back(2.0 * rng.uniform53() - 1.0);
    }
    for (size_t i = 0; i < c.rows; ++i) {
      batch.labels.push_back(static_cast<uint32_t>(rng.next() % c.cfg.n_classes()));
    }

    auto fwd = forward(params, c.cfg, batch);
    auto grad = backward(params, c.cfg, batch, fwd.cache);
    REQUIRE(grad.size() == params.size());

    for (size_t i = 0; i < params.size(); ++i) {
      const double numeric = central_difference(params, c.cfg, batch, i, 1e-5);
      const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
      REQUIRE(std::abs(grad[i] - numeric) / denom <= 1e-4);
    }
  }
}

TEST_CASE("glorot initialization is bounded, seeded, and leaves biases zero") {
  auto cfg = make_config({{2, 2, Activation::IDENTITY}}, 42);
  auto params = init_params(cfg);
  REQUIRE(params.size() == 6);

  const double bound = 1.224744871391589;  // sqrt(6 / (2 + 2))
  for (size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(params[i]) <= bound);
    CHECK(params[i] != 0.0);
  }
  CHECK(params[4] == 0.0);
  CHECK(params[5] == 0.0);

  // First weight comes straight off uniform53(seed): (2u - 1) * bound.
  SplitMix64 rng(42);
  CHECK(params[0] == (2.0 * rng.uniform53() - 1.0) * bound);

  CHECK(init_params(cfg) == params);
  auto other = cfg;
  other.seed = 43;
  CHECK(init_params(other) != params);
}

TEST_CASE("sgd_step arithmetic and shape check") {
  ParameterVector p = {1.0, -2.0, 0.5};
  ParameterVector g = {0.5, 0.5, -1.0};
  auto next = sgd_step(p, g, 0.1);
  CHECK_THAT(next[0], Catch::Matchers::WithinAbs(0.95, 1e-15));
  CHECK_THAT(next[1], Catch::Matchers::WithinAbs(-2.05, 1e-15));
  CHECK_THAT(next[2], Catch::Matchers::WithinAbs(0.6, 1e-15));

  ParameterVector wrong = {1.0};
  CHECK_THROWS_AS(sgd_step(p, wrong, 0.1), Error);
}

TEST_CASE("run_epochs is deterministic in the config seed") {
  auto cfg = make_config({{2, 4, Activation::RELU}, {4, 2, Activation::IDENTITY}}, 7, 0.05, 4, 3);
  SplitMix64 rng(99);
  Dataset data;
  data.n_rows = 20;
  data.input_dim = 2;
  for (size_t i = 0; i < 20; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    data.features.push_back(sign + 0.1 * (2.0 * rng.uniform53() - 1.0));
    data.features.push_back(sign + 0.1 * (2.0 * rng.uniform53() - 1.0));
    data.labels.push_back(i % 2);
  }

  auto a = run_epochs(cfg, data, init_params(cfg));
  auto b = run_epochs(cfg, data, init_params(cfg));
  CHECK(a == b);

  auto shifted = cfg;
  shifted.seed = 8;
  auto c = run_epochs(shifted, data, init_params(shifted));
  CHECK(a != c);
}

TEST_CASE("on_sync fires every sync_period batches with a global counter") {
  // 10 rows, batch 4 -> 3 batches per epoch (last one short), 2 epochs,
  // sync_period 2 -> rounds commit at global batches 2, 4, 6.
  auto cfg = make_config({{1, 2, Activation::IDENTITY}}, 5, 0.01, 4, 2, 2);
  Dataset data;
  data.n_rows = 10;
  data.input_dim = 1;
  for (size_t i = 0; i < 10; ++i) {
    data.features.push_back(static_cast<double>(i) / 10.0);
    data.labels.push_back(i % 2);
  }

  std::vector<uint64_t> rounds;
  TrainHooks hooks;
  hooks.on_sync = [&](uint64_t round, ParameterVector& params) {
    rounds.push_back(round);
    if (round == 2) std::fill(params.begin(), params.end(), 0.0);
  };
  std::vector<uint32_t> epochs_seen;
  hooks.on_epoch_end = [&](uint32_t epoch, const ParameterVector&) {
    epochs_seen.push_back(epoch);
  };

  auto final_params = run_epochs(cfg, data, init_params(cfg), hooks);
  CHECK(rounds == std::vector<uint64_t>{0, 1, 2});
  CHECK(epochs_seen == std::vector<uint32_t>{0, 1});
  // The hook's replacement at the last batch is the returned parameter set.
  CHECK(final_params == ParameterVector(cfg.param_count(), 0.0));
}

TEST_CASE("trainer failure modes carry the declared error codes") {
  auto cfg = make_config({{2, 2, Activation::IDENTITY}});
  auto params = init_params(cfg);

  SECTION("empty batch") {
    Dataset empty;
    empty.input_dim = 2;
    try {
      forward(params, cfg, empty);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EMPTY_INPUT);
    }
  }

  SECTION("non-finite feature") {
    auto batch = make_rows(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}, {0});
    try {
      forward(params, cfg, batch);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NON_FINITE_INPUT);
    }
  }

  SECTION("empty dataset for run_epochs") {
    Dataset empty;
    empty.input_dim = 2;
    try {
      run_epochs(cfg, empty, params);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EMPTY_INPUT);
    }
  }

  SECTION("divergence is reported, not propagated as inf") {
    auto hot = make_config({{1, 2, Activation::IDENTITY}}, 1, 10.0, 1, 200);
    Dataset data = make_rows(2, 1, {1e3, -1e3}, {0, 1});
    try {
      run_epochs(hot, data, init_params(hot));
      SUCCEED("converged despite hot learning rate");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NON_FINITE_LOSS);
    }
  }
}

TEST_CASE("predict returns per-row argmax class ids") {
  auto cfg = make_config({{2, 2, Activation::IDENTITY}});
  // Identity-ish weights: class 0 scores x0, class 1 scores x1.
  ParameterVector params = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
  std::vector<double> rows = {5.0, -1.0, -2.0, 3.0, 0.5, 0.5};
  auto ids = predict(params, cfg, rows, 3);
  CHECK(ids == std::vector<uint32_t>{0, 1, 0});  // tie breaks to the lower id
}
