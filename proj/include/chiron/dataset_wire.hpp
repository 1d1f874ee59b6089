#pragma once
// Canonical byte form of a dataset, used both for holder uploads and for
// shard provisioning between enclaves (always inside a sealed record):
//   row-count (4 BE) || input_dim (4 BE) || features as binary64 BE
//   row-major || labels as u32 BE each.

#include <cstdint>
#include <optional>

#include "chiron/bytes.hpp"
#include "chiron/trainer.hpp"

namespace chiron {

inline Bytes encode_dataset(const trainer::Dataset& ds) {
  Bytes out;
  out.reserve(8 + 8 * ds.features.size() + 4 * ds.labels.size());
  put_u32be(out, static_cast<uint32_t>(ds.n_rows));
  put_u32be(out, static_cast<uint32_t>(ds.input_dim));
  for (double v : ds.features) put_f64be(out, v);
  for (uint32_t label : ds.labels) put_u32be(out, label);
  return out;
}

inline std::optional<trainer::Dataset> decode_dataset(ByteSpan b) {
  if (b.size() < 8) return std::nullopt;
  const uint32_t rows = get_u32be(b, 0);
  const uint32_t dim = get_u32be(b, 4);
  if (rows == 0 || dim == 0) return std::nullopt;
  const size_t need = 8 + static_cast<size_t>(rows) * dim * 8 + static_cast<size_t>(rows) * 4;
  if (b.size() != need) return std::nullopt;

  trainer::Dataset ds;
  ds.n_rows = rows;
  ds.input_dim = dim;
  ds.features.reserve(static_cast<size_t>(rows) * dim);
  size_t off = 8;
  for (size_t i = 0; i < static_cast<size_t>(rows) * dim; ++i, off += 8) {
    ds.features.push_back(get_f64be(b, off));
  }
  ds.labels.reserve(rows);
  for (size_t i = 0; i < rows; ++i, off += 4) {
    ds.labels.push_back(get_u32be(b, off));
  }
  return ds;
}

}  // namespace chiron
