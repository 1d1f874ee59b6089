#pragma once
// Distributed-training mechanics that are independent of channels and
// enclaves: round-robin sharding, in-order parameter averaging, the sync
// message codec, round/epoch arithmetic, and the per-round barrier the
// aggregator uses to serialize synchronous rounds.

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chiron/bytes.hpp"
#include "chiron/result.hpp"
#include "chiron/trainer.hpp"

namespace chiron::coordinator {

// Row i of the input goes to shard i mod k; shards keep the original
// relative order, so their union is a permutation-free repartition.
inline std::vector<trainer::Dataset> partition(const trainer::Dataset& dataset, size_t k) {
  if (k < 1) throw Error(Errc::EMPTY_INPUT, "k must be at least 1");
  if (dataset.n_rows < k) throw Error(Errc::TOO_FEW_ROWS, "fewer rows than shards");

  std::vector<trainer::Dataset> shards(k);
  for (auto& s : shards) {
    s.input_dim = dataset.input_dim;
    s.origin = dataset.origin;
  }
  for (size_t i = 0; i < dataset.n_rows; ++i) {
    auto& s = shards[i % k];
    s.features.insert(s.features.end(),
                      dataset.features.begin() + static_cast<ptrdiff_t>(i * dataset.input_dim),
                      dataset.features.begin() +
                          static_cast<ptrdiff_t>((i + 1) * dataset.input_dim));
    s.labels.push_back(dataset.labels[i]);
    ++s.n_rows;
  }
  return shards;
}

// Elementwise mean, summation strictly in list order.
inline trainer::ParameterVector average(const std::vector<trainer::ParameterVector>& contribs) {
  if (contribs.empty()) throw Error(Errc::EMPTY_INPUT, "no contributions");
  const size_t len = contribs.front().size();
  for (const auto& c : contribs) {
    if (c.size() != len) throw Error(Errc::LENGTH_MISMATCH, "contribution length mismatch");
  }
  trainer::ParameterVector out(len, 0.0);
  for (size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    for (const auto& c : contribs) sum += c[i];
    out[i] = sum / static_cast<double>(contribs.size());
  }
  return out;
}

// ---- Sync message codec -----------------------------------------------------
// round_index (8 BE) || param count (4 BE) || binary64 BE values. Always
// transported inside a sealed record.

struct SyncMessage {
  uint64_t round_index = 0;
  trainer::ParameterVector params;
};

inline Bytes encode_sync(uint64_t round_index, const trainer::ParameterVector& params) {
  Bytes out;
  out.reserve(12 + 8 * params.size());
  put_u64be(out, round_index);
  put_u32be(out, static_cast<uint32_t>(params.size()));
  for (double v : params) put_f64be(out, v);
  return out;
}

inline std::optional<SyncMessage> decode_sync(ByteSpan b) {
  if (b.size() < 12) return std::nullopt;
  SyncMessage msg;
  msg.round_index = get_u64be(b, 0);
  const uint32_t count = get_u32be(b, 8);
  if (b.size() != 12 + static_cast<size_t>(count) * 8) return std::nullopt;
  msg.params.reserve(count);
  for (uint32_t i = 0; i < count; ++i) msg.params.push_back(get_f64be(b, 12 + 8 * size_t{i}));
  return msg;
}

// ---- Round arithmetic -------------------------------------------------------

inline uint64_t batches_per_epoch(size_t n_rows, uint32_t batch_size) {
  return (n_rows + batch_size - 1) / batch_size;
}

// Number of on_sync invocations run_epochs makes for a shard of this size.
inline uint64_t sync_rounds(size_t n_rows, const sandbox::OptimizerSpec& opt,
                            uint32_t sync_period) {
  const uint64_t total_batches = batches_per_epoch(n_rows, opt.batch_size) * opt.epochs;
  return total_batches / sync_period;
}

// Epochs a trainer has fully completed after `rounds` accepted sync rounds.
inline uint32_t epochs_completed(size_t n_rows, const sandbox::OptimizerSpec& opt,
                                 uint32_t sync_period, uint64_t rounds) {
  const uint64_t per_epoch = batches_per_epoch(n_rows, opt.batch_size);
  const uint64_t total = per_epoch * opt.epochs;
  const uint64_t done = std::min(rounds * sync_period, total);
  return static_cast<uint32_t>(done / per_epoch);
}

// ---- Round barrier ----------------------------------------------------------
// One instance per job. Each member blocks in contribute() until all k
// contributions for the round arrive; the average (summed in member order,
// not arrival order) is returned to every member. Any failure poisons the
// barrier so every blocked member unblocks by throwing — the job fails
// closed rather than releasing a partial result.

class SyncBarrier {
 public:
  explicit SyncBarrier(size_t k) : k_(k), slots_(k), next_round_(k, 0) {}

  trainer::ParameterVector contribute(size_t member, uint64_t round,
                                      const trainer::ParameterVector& params) {
    std::unique_lock lk(mu_);
    if (failed_) throw Error(Errc::ENCLAVE_TERMINATED, "job failed: " + reason_);
    if (member >= k_ || round != next_round_[member]) {
      throw Error(Errc::INVALID_STATE_TRANSITION, "sync round out of order");
    }
    next_round_[member] = round + 1;
    slots_[member] = params;
    ++arrived_;

    if (arrived_ == k_) {
      result_ = average(slots_);
      arrived_ = 0;
      ++generation_;
      ++rounds_completed_;
      cv_.notify_all();
      if (on_round_) on_round_(round, result_);
      return result_;
    }
    const uint64_t gen = generation_;
    cv_.wait(lk, [&] { return failed_ || generation_ != gen; });
    if (failed_) throw Error(Errc::ENCLAVE_TERMINATED, "job failed: " + reason_);
    return result_;
  }

  void fail(const std::string& reason) {
    std::lock_guard lk(mu_);
    if (!failed_) {
      failed_ = true;
      reason_ = reason;
    }
    cv_.notify_all();
  }

  bool failed() const {
    std::lock_guard lk(mu_);
    return failed_;
  }

  uint64_t rounds_completed() const {
    std::lock_guard lk(mu_);
    return rounds_completed_;
  }

  // Observer invoked (under the barrier lock) when a round commits; used by
  // the job driver to publish progress.
  void set_round_observer(std::function<void(uint64_t, const trainer::ParameterVector&)> fn) {
    std::lock_guard lk(mu_);
    on_round_ = std::move(fn);
  }

 private:
  const size_t k_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<trainer::ParameterVector> slots_;
  std::vector<uint64_t> next_round_;
  size_t arrived_ = 0;
  uint64_t generation_ = 0;
  uint64_t rounds_completed_ = 0;
  trainer::ParameterVector result_;
  bool failed_ = false;
  std::string reason_;
  std::function<void(uint64_t, const trainer::ParameterVector&)> on_round_;
};

}  // namespace chiron::coordinator
