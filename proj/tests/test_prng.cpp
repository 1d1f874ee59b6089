// splitmix64 is the reproducibility anchor: identical seeds must give
// identical streams everywhere, so its outputs are pinned to reference values.

#include <algorithm>
#include <numeric>

#include <catch2/catch_amalgamated.hpp>

#include "chiron/bytes.hpp"
#include "chiron/prng.hpp"

using namespace chiron;
using trainer::SplitMix64;

TEST_CASE("splitmix64 reference outputs") {
  SplitMix64 zero(0);
  CHECK(zero.next() == 0xe220a8397b1dcdafULL);
  CHECK(zero.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(zero.next() == 0x06c45d188009454fULL);
  CHECK(zero.next() == 0xf88bb8a8724c81ecULL);

  SplitMix64 forty_two(42);
  CHECK(forty_two.next() == 0xbdd732262feb6e95ULL);
  CHECK(forty_two.next() == 0x28efe333b266f103ULL);
  CHECK(forty_two.next() == 0x47526757130f9f52ULL);
  CHECK(forty_two.next() == 0x581ce1ff0e4ae394ULL);
}

TEST_CASE("splitmix64 streams overlap by construction") {
  // Seeding with the golden-ratio increment is the same as skipping one draw.
  SplitMix64 a(0);
  a.next();
  SplitMix64 b(0x9E3779B97F4A7C15ULL);
  for (int i = 0; i < 16; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("uniform53 maps the top 53 bits into [0,1)") {
  SplitMix64 rng(42);
  CHECK(rng.uniform53() == 0.7415648787718233);
  CHECK(rng.uniform53() == 0.1599103928769201);
  CHECK(rng.uniform53() == 0.27860113025513866);

  SplitMix64 sweep(7);
  for (int i = 0; i < 10000; ++i) {
    double u = sweep.uniform53();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("fill_bytes appends each output big-endian") {
  SplitMix64 rng(0);
  std::array<uint8_t, 11> buf{};
  trainer::fill_bytes(rng, buf);
  // 0xe220a8397b1dcdaf then the first three bytes of 0x6e789e6aa1b965f4.
  CHECK(hex_encode(buf) == "e220a8397b1dcdaf6e789e");
}

TEST_CASE("fisher_yates_shuffle is a seeded permutation") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  const auto original = v;

  SplitMix64 rng(123);
  trainer::fisher_yates_shuffle(v, rng);
  CHECK(v != original);

  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == original);

  auto again = original;
  SplitMix64 rng2(123);
  trainer::fisher_yates_shuffle(again, rng2);
  CHECK(again == v);
}

TEST_CASE("normal draws have plausible moments") {
  SplitMix64 rng(99);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = trainer::normal(rng);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}
