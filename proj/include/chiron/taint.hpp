#pragma once
// Secrecy labels at byte-buffer granularity. Labels are sticky under
// computation; sealing a buffer into an encrypted record is the one
// declassification point.

#include <cstdint>

#include "chiron/bytes.hpp"

namespace chiron::sandbox {

// Lattice: PUBLIC below both secrets; BOTH_SECRET is the join of the two.
enum class TaintLabel : uint8_t {
  PUBLIC = 0,
  HOLDER_SECRET = 1,
  PROVIDER_SECRET = 2,
  BOTH_SECRET = 3,
};

constexpr TaintLabel taint_join(TaintLabel a, TaintLabel b) {
  return static_cast<TaintLabel>(static_cast<uint8_t>(a) | static_cast<uint8_t>(b));
}

constexpr bool taint_leq(TaintLabel a, TaintLabel b) {
  return taint_join(a, b) == b;
}

struct TaintedBytes {
  Bytes bytes;
  TaintLabel label = TaintLabel::PUBLIC;

  bool is_public() const { return label == TaintLabel::PUBLIC; }

  static TaintedBytes make_public(Bytes b) { return {std::move(b), TaintLabel::PUBLIC}; }
  static TaintedBytes with_label(Bytes b, TaintLabel l) { return {std::move(b), l}; }
};

}  // namespace chiron::sandbox
