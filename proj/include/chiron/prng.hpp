#pragma once
// splitmix64: the fixed PRNG for every reproducible draw in the system.
// Identical seed must give an identical stream on every platform.

#include <cstdint>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace chiron::trainer {

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Top 53 bits mapped to [0, 1).
  double uniform53() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

// Fisher-Yates from index n-1 downward, j = next() mod (i+1).
template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, SplitMix64& rng) {
  if (v.size() < 2) return;
  for (size_t i = v.size() - 1; i >= 1; --i) {
    size_t j = static_cast<size_t>(rng.next() % (i + 1));
    std::swap(v[i], v[j]);
  }
}

// Standard normal via Box-Muller; one draw per call, u1 kept away from 0.
inline double normal(SplitMix64& rng) {
  double u1 = static_cast<double>((rng.next() >> 11) + 1) * 0x1.0p-53;
  double u2 = rng.uniform53();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Each 64-bit output appended big-endian; used by deterministic test RNGs.
inline void fill_bytes(SplitMix64& rng, std::span<uint8_t> out) {
  size_t i = 0;
  while (i < out.size()) {
    uint64_t v = rng.next();
    for (int shift = 56; shift >= 0 && i < out.size(); shift -= 8) {
      out[i++] = static_cast<uint8_t>(v >> shift);
    }
  }
}

}  // namespace chiron::trainer
