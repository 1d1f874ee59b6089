#pragma once
// In-enclave numerics: deterministic Glorot init, dense MLP forward/backward
// with softmax cross-entropy, SGD, and the epoch loop. Everything is plain
// binary64 arithmetic in natural loop order so that identical (config,
// dataset, seed) reproduce bit-identical parameters on any platform.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "chiron/config.hpp"
#include "chiron/prng.hpp"
#include "chiron/result.hpp"
#include "chiron/taint.hpp"

namespace chiron::trainer {

struct Dataset {
  size_t n_rows = 0;
  size_t input_dim = 0;
  std::vector<double> features;  // row-major, n_rows x input_dim
  std::vector<uint32_t> labels;  // class ids < n_classes
  sandbox::TaintLabel origin = sandbox::TaintLabel::HOLDER_SECRET;
};

// Flat layout: per layer in order, weight matrix row-major (in x out, index
// i*out + j) followed by the bias vector.
using ParameterVector = std::vector<double>;

struct LayerOffsets {
  size_t weights;
  size_t biases;
};

inline std::vector<LayerOffsets> param_offsets(const sandbox::ModelConfig& cfg) {
  std::vector<LayerOffsets> offs;
  offs.reserve(cfg.layers.size());
  size_t pos = 0;
  for (const auto& l : cfg.layers) {
    offs.push_back({pos, pos + static_cast<size_t>(l.input_dim) * l.output_dim});
    pos += static_cast<size_t>(l.input_dim) * l.output_dim + l.output_dim;
  }
  return offs;
}

inline ParameterVector init_params(const sandbox::ModelConfig& cfg) {
  ParameterVector params(cfg.param_count(), 0.0);
  SplitMix64 rng(cfg.seed);
  auto offs = param_offsets(cfg);
  for (size_t l = 0; l < cfg.layers.size(); ++l) {
    const auto& spec = cfg.layers[l];
    const double bound = std::sqrt(6.0 / (static_cast<double>(spec.input_dim) + spec.output_dim));
    const size_t n_w = static_cast<size_t>(spec.input_dim) * spec.output_dim;
    for (size_t i = 0; i < n_w; ++i) {
      params[offs[l].weights + i] = (2.0 * rng.uniform53() - 1.0) * bound;
    }
    // biases stay zero
  }
  return params;
}

// Post-activation values per layer; activations[0] is the batch input and
// activations.back() the logits (final activation is IDENTITY by config
// invariant). Enough to rebuild every local derivative.
struct ForwardCache {
  std::vector<std::vector<double>> activations;
  size_t batch_rows = 0;
};

namespace detail {

inline double activate(double z, sandbox::Activation a) {
  switch (a) {
    case sandbox::Activation::RELU: return z > 0.0 ? z : 0.0;
    case sandbox::Activation::TANH: return std::tanh(z);
    case sandbox::Activation::IDENTITY: return z;
  }
  return z;
}

// Derivative expressed in terms of the post-activation value.
inline double activate_grad(double a_val, sandbox::Activation a) {
  switch (a) {
    case sandbox::Activation::RELU: return a_val > 0.0 ? 1.0 : 0.0;
    case sandbox::Activation::TANH: return 1.0 - a_val * a_val;
    case sandbox::Activation::IDENTITY: return 1.0;
  }
  return 1.0;
}

}  // namespace detail

struct ForwardResult {
  double loss = 0.0;
  ForwardCache cache;
};

inline ForwardResult forward(const ParameterVector& params, const sandbox::ModelConfig& cfg,
                             const Dataset& batch) {
  if (batch.n_rows == 0) throw Error(Errc::EMPTY_INPUT, "empty batch");
  for (double x : batch.features) {
    if (!std::isfinite(x)) throw Error(Errc::NON_FINITE_INPUT, "non-finite feature value");
  }

  const auto offs = param_offsets(cfg);
  const size_t n = batch.n_rows;

  ForwardResult out;
  out.cache.batch_rows = n;
  out.cache.activations.reserve(cfg.layers.size() + 1);
  out.cache.activations.push_back(batch.features);

  for (size_t l = 0; l < cfg.layers.size(); ++l) {
    const auto& spec = cfg.layers[l];
    const size_t in = spec.input_dim;
    const size_t width = spec.output_dim;
    const double* w = params.data() + offs[l].weights;
    const double* b = params.data() + offs[l].biases;
    const auto& prev = out.cache.activations.back();

    std::vector<double> next(n * width);
    for (size_t r = 0; r < n; ++r) {
      for (size_t j = 0; j < width; ++j) {
        double z = b[j];
        for (size_t i = 0; i < in; ++i) {
          z += prev[r * in + i] * w[i * width + j];
        }
        next[r * width + j] = detail::activate(z, spec.activation);
      }
    }
    out.cache.activations.push_back(std::move(next));
  }

  // Mean softmax cross-entropy over the batch, max-shifted for stability.
  const size_t classes = cfg.n_classes();
  const auto& logits = out.cache.activations.back();
  double total = 0.0;
  for (size_t r = 0; r < n; ++r) {
    const double* z = logits.data() + r * classes;
    double m = z[0];
    for (size_t j = 1; j < classes; ++j) m = std::max(m, z[j]);
    double sum = 0.0;
    for (size_t j = 0; j < classes; ++j) sum += std::exp(z[j] - m);
    total += m + std::log(sum) - z[batch.labels[r]];
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

inline ParameterVector backward(const ParameterVector& params, const sandbox::ModelConfig& cfg,
                                const Dataset& batch, const ForwardCache& cache) {
  const auto offs = param_offsets(cfg);
  const size_t n = cache.batch_rows;
  const size_t classes = cfg.n_classes();
  ParameterVector grad(params.size(), 0.0);

  // d(loss)/d(logits) = (softmax - onehot) / n
  const auto& logits = cache.activations.back();
  std::vector<double> delta(n * classes);
  for (size_t r = 0; r < n; ++r) {
    const double* z = logits.data() + r * classes;
    double m = z[0];
    for (size_t j = 1; j < classes; ++j) m = std::max(m, z[j]);
    double sum = 0.0;
    for (size_t j = 0; j < classes; ++j) sum += std::exp(z[j] - m);
    for (size_t j = 0; j < classes; ++j) {
      double p = std::exp(z[j] - m) / sum;
      delta[r * classes + j] = (p - (batch.labels[r] == j ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }

  for (size_t l = cfg.layers.size(); l-- > 0;) {
    const auto& spec = cfg.layers[l];
    const size_t in = spec.input_dim;
    const size_t width = spec.output_dim;
    const double* w = params.data() + offs[l].weights;
    const auto& prev = cache.activations[l];
    double* gw = grad.data() + offs[l].weights;
    double* gb = grad.data() + offs[l].biases;

    for (size_t r = 0; r < n; ++r) {
      for (size_t j = 0; j < width; ++j) {
        const double d = delta[r * width + j];
        gb[j] += d;
        for (size_t i = 0; i < in; ++i) {
          gw[i * width + j] += prev[r * in + i] * d;
        }
      }
    }

    if (l > 0) {
      const auto act = cfg.layers[l - 1].activation;
      std::vector<double> prev_delta(n * in, 0.0);
      for (size_t r = 0; r < n; ++r) {
        for (size_t i = 0; i < in; ++i) {
          double s = 0.0;
          for (size_t j = 0; j < width; ++j) {
            s += delta[r * width + j] * w[i * width + j];
          }
          prev_delta[r * in + i] = s * detail::activate_grad(prev[r * in + i], act);
        }
      }
      delta = std::move(prev_delta);
    }
  }
  return grad;
}

inline ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad,
                                double learning_rate) {
  if (params.size() != grad.size()) {
    throw Error(Errc::LENGTH_MISMATCH, "parameter/gradient length mismatch");
  }
  ParameterVector next(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    next[i] = params[i] - learning_rate * grad[i];
  }
  return next;
}

struct TrainHooks {
  // Invoked every sync_period batches (global batch counter); may replace
  // params in place — that is how the coordinator installs round averages.
  std::function<void(uint64_t round_index, ParameterVector& params)> on_sync;
  std::function<void(uint32_t epoch_index, const ParameterVector& params)> on_epoch_end;
};

inline ParameterVector run_epochs(const sandbox::ModelConfig& cfg, const Dataset& dataset,
                                  ParameterVector params, const TrainHooks& hooks = {}) {
  if (dataset.n_rows == 0) throw Error(Errc::EMPTY_INPUT, "empty dataset");

  const size_t batch_size = cfg.optimizer.batch_size;
  uint64_t global_batch = 0;
  uint64_t round = 0;

  for (uint32_t epoch = 0; epoch < cfg.optimizer.epochs; ++epoch) {
    std::vector<size_t> order(dataset.n_rows);
    std::iota(order.begin(), order.end(), size_t{0});
    SplitMix64 rng(cfg.seed ^ static_cast<uint64_t>(epoch));
    fisher_yates_shuffle(order, rng);

    for (size_t start = 0; start < dataset.n_rows; start += batch_size) {
      const size_t end = std::min(dataset.n_rows, start + batch_size);
      Dataset batch;
      batch.n_rows = end - start;
      batch.input_dim = dataset.input_dim;
      batch.origin = dataset.origin;
      batch.features.reserve(batch.n_rows * dataset.input_dim);
      batch.labels.reserve(batch.n_rows);
      for (size_t k = start; k < end; ++k) {
        const size_t row = order[k];
        batch.features.insert(batch.features.end(),
                              dataset.features.begin() +
                                  static_cast<ptrdiff_t>(row * dataset.input_dim),
                              dataset.features.begin() +
                                  static_cast<ptrdiff_t>((row + 1) * dataset.input_dim));
        batch.labels.push_back(dataset.labels[row]);
      }

      auto fwd = forward(params, cfg, batch);
      if (!std::isfinite(fwd.loss)) {
        throw Error(Errc::NON_FINITE_LOSS, "training diverged");
      }
      auto grad = backward(params, cfg, batch, fwd.cache);
      params = sgd_step(params, grad, cfg.optimizer.learning_rate);

      ++global_batch;
      if (hooks.on_sync && cfg.sync_period > 0 && global_batch % cfg.sync_period == 0) {
        hooks.on_sync(round++, params);
      }
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, params);
  }

  for (double p : params) {
    if (!std::isfinite(p)) throw Error(Errc::NON_FINITE_LOSS, "non-finite parameters");
  }
  return params;
}

// Inference: forward pass to logits, argmax per row (lowest index wins ties).
inline std::vector<uint32_t> predict(const ParameterVector& params,
                                     const sandbox::ModelConfig& cfg,
                                     const std::vector<double>& features, size_t n_rows) {
  Dataset batch;
  batch.n_rows = n_rows;
  batch.input_dim = cfg.input_dim();
  batch.features = features;
  batch.labels.assign(n_rows, 0);  // unused by the logits computation
  auto fwd = forward(params, cfg, batch);

  const size_t classes = cfg.n_classes();
  const auto& logits = fwd.cache.activations.back();
  std::vector<uint32_t> out(n_rows);
  for (size_t r = 0; r < n_rows; ++r) {
    const double* z = logits.data() + r * classes;
    uint32_t best = 0;
    for (uint32_t j = 1; j < classes; ++j) {
      if (z[j] > z[best]) best = j;
    }
    out[r] = best;
  }
  return out;
}

}  // namespace chiron::trainer
