#pragma once
// ModelConfig: the provider's declarative training specification and its
// validator. The wire form is UTF-8 JSON with exactly the declared fields;
// anything else maps to a coded reject with the offending field path, never
// an abort. Config bytes are provider-confidential — they travel only inside
// sealed records and are never echoed toward a data holder.

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "chiron/bytes.hpp"
#include "chiron/result.hpp"

namespace chiron::sandbox {

inline constexpr size_t kMaxLayers = 8;
inline constexpr uint32_t kMaxLayerDim = 4096;
inline constexpr uint32_t kMaxBatchSize = 4096;
inline constexpr uint32_t kMaxEpochs = 10000;
inline constexpr double kMaxLearningRate = 10.0;
inline constexpr uint32_t kSchemaVersion = 1;

enum class Activation : uint8_t { RELU, TANH, IDENTITY };

struct LayerSpec {
  uint32_t input_dim = 0;
  uint32_t output_dim = 0;
  Activation activation = Activation::IDENTITY;

  bool operator==(const LayerSpec&) const = default;
};

struct OptimizerSpec {
  double learning_rate = 0.0;
  uint32_t batch_size = 0;
  uint32_t epochs = 0;

  bool operator==(const OptimizerSpec&) const = default;
};

struct ModelConfig {
  uint32_t schema_version = kSchemaVersion;
  uint64_t seed = 0;
  std::vector<LayerSpec> layers;  // kind is always DENSE, loss always softmax-CE
  OptimizerSpec optimizer;
  uint32_t sync_period = 1;

  bool operator==(const ModelConfig&) const = default;

  uint32_t input_dim() const { return layers.front().input_dim; }
  uint32_t n_classes() const { return layers.back().output_dim; }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& l : layers) {
      n += static_cast<size_t>(l.input_dim) * l.output_dim + l.output_dim;
    }
    return n;
  }
};

enum class ConfigRejectCode : uint8_t {
  PARSE_ERROR,
  DIM_MISMATCH,
  LIMIT_EXCEEDED,
  UNKNOWN_FIELD,
};

inline std::string_view config_reject_name(ConfigRejectCode c) {
  switch (c) {
    case ConfigRejectCode::PARSE_ERROR: return "PARSE_ERROR";
    case ConfigRejectCode::DIM_MISMATCH: return "DIM_MISMATCH";
    case ConfigRejectCode::LIMIT_EXCEEDED: return "LIMIT_EXCEEDED";
    case ConfigRejectCode::UNKNOWN_FIELD: return "UNKNOWN_FIELD";
  }
  return "?";
}

struct ConfigReject {
  ConfigRejectCode code;
  std::string path;  // e.g. "layers[1].input_dim"; empty for document-level errors
};

namespace detail {

using json = nlohmann::json;

inline bool known_key(std::string_view key, std::initializer_list<std::string_view> allowed) {
  for (auto a : allowed) {
    if (key == a) return true;
  }
  return false;
}

// Integer field constrained to [lo, hi]; wrong JSON type is a parse error,
// right type but out of range is a limit violation.
inline Result<uint64_t, ConfigReject> uint_field(const json& obj, const std::string& path,
                                                 const char* key, uint64_t lo, uint64_t hi) {
  std::string full = path.empty() ? key : path + "." + key;
  if (!obj.contains(key)) return ConfigReject{ConfigRejectCode::PARSE_ERROR, full};
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) return ConfigReject{ConfigRejectCode::PARSE_ERROR, full};
  uint64_t n = v.get<uint64_t>();
  if (n < lo || n > hi) return ConfigReject{ConfigRejectCode::LIMIT_EXCEEDED, full};
  return n;
}

inline Result<std::string, ConfigReject> string_field(const json& obj, const std::string& path,
                                                      const char* key) {
  std::string full = path.empty() ? key : path + "." + key;
  if (!obj.contains(key)) return ConfigReject{ConfigRejectCode::PARSE_ERROR, full};
  const json& v = obj.at(key);
  if (!v.is_string()) return ConfigReject{ConfigRejectCode::PARSE_ERROR, full};
  return v.get<std::string>();
}

}  // namespace detail

inline Result<ModelConfig, ConfigReject> validate_config(ByteSpan raw) {
  using detail::json;
  using R = ConfigReject;
  using C = ConfigRejectCode;

  json doc = json::parse(raw.begin(), raw.end(), /*cb=*/nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) return R{C::PARSE_ERROR, ""};

  for (const auto& item : doc.items()) {
    if (!detail::known_key(item.key(), {"schema_version", "seed", "layers", "loss", "optimizer",
                                        "sync_period"})) {
      return R{C::UNKNOWN_FIELD, item.key()};
    }
  }

  ModelConfig cfg;

  auto version = detail::uint_field(doc, "", "schema_version", kSchemaVersion, kSchemaVersion);
  if (!version.ok()) return version.error();
  cfg.schema_version = static_cast<uint32_t>(version.value());

  if (!doc.contains("seed") || !doc.at("seed").is_number_unsigned()) {
    return R{C::PARSE_ERROR, "seed"};
  }
  cfg.seed = doc.at("seed").get<uint64_t>();

  if (!doc.contains("layers") || !doc.at("layers").is_array()) {
    return R{C::PARSE_ERROR, "layers"};
  }
  const json& layers = doc.at("layers");
  if (layers.empty() || layers.size() > kMaxLayers) return R{C::LIMIT_EXCEEDED, "layers"};

  for (size_t i = 0; i < layers.size(); ++i) {
    const std::string lpath = "layers[" + std::to_string(i) + "]";
    const json& l = layers.at(i);
    if (!l.is_object()) return R{C::PARSE_ERROR, lpath};
    for (const auto& item : l.items()) {
      if (!detail::known_key(item.key(), {"kind", "input_dim", "output_dim", "activation"})) {
        return R{C::UNKNOWN_FIELD, lpath + "." + item.key()};
      }
    }
    auto kind = detail::string_field(l, lpath, "kind");
    if (!kind.ok()) return kind.error();
    if (kind.value() != "DENSE") return R{C::LIMIT_EXCEEDED, lpath + ".kind"};

    auto in_dim = detail::uint_field(l, lpath, "input_dim", 1, kMaxLayerDim);
    if (!in_dim.ok()) return in_dim.error();
    auto out_dim = detail::uint_field(l, lpath, "output_dim", 1, kMaxLayerDim);
    if (!out_dim.ok()) return out_dim.error();

    auto act = detail::string_field(l, lpath, "activation");
    if (!act.ok()) return act.error();
    Activation activation;
    if (act.value() == "RELU") {
      activation = Activation::RELU;
    } else if (act.value() == "TANH") {
      activation = Activation::TANH;
    } else if (act.value() == "IDENTITY") {
      activation = Activation::IDENTITY;
    } else {
      return R{C::LIMIT_EXCEEDED, lpath + ".activation"};
    }

    if (i > 0 && cfg.layers.back().output_dim != in_dim.value()) {
      return R{C::DIM_MISMATCH, lpath + ".input_dim"};
    }
    cfg.layers.push_back(LayerSpec{static_cast<uint32_t>(in_dim.value()),
                                   static_cast<uint32_t>(out_dim.value()), activation});
  }
  if (cfg.layers.back().activation != Activation::IDENTITY) {
    return R{C::LIMIT_EXCEEDED, "layers[" + std::to_string(layers.size() - 1) + "].activation"};
  }

  auto loss = detail::string_field(doc, "", "loss");
  if (!loss.ok()) return loss.error();
  if (loss.value() != "SOFTMAX_CROSS_ENTROPY") return R{C::LIMIT_EXCEEDED, "loss"};

  if (!doc.contains("optimizer") || !doc.at("optimizer").is_object()) {
    return R{C::PARSE_ERROR, "optimizer"};
  }
  const json& opt = doc.at("optimizer");
  for (const auto& item : opt.items()) {
    if (!detail::known_key(item.key(), {"kind", "learning_rate", "batch_size", "epochs"})) {
      return R{C::UNKNOWN_FIELD, "optimizer." + item.key()};
    }
  }
  auto okind = detail::string_field(opt, "optimizer", "kind");
  if (!okind.ok()) return okind.error();
  if (okind.value() != "SGD") return R{C::LIMIT_EXCEEDED, "optimizer.kind"};

  if (!opt.contains("learning_rate") || !opt.at("learning_rate").is_number()) {
    return R{C::PARSE_ERROR, "optimizer.learning_rate"};
  }
  cfg.optimizer.learning_rate = opt.at("learning_rate").get<double>();
  if (!(cfg.optimizer.learning_rate > 0.0 && cfg.optimizer.learning_rate <= kMaxLearningRate)) {
    return R{C::LIMIT_EXCEEDED, "optimizer.learning_rate"};
  }

  auto batch = detail::uint_field(opt, "optimizer", "batch_size", 1, kMaxBatchSize);
  if (!batch.ok()) return batch.error();
  cfg.optimizer.batch_size = static_cast<uint32_t>(batch.value());

  auto epochs = detail::uint_field(opt, "optimizer", "epochs", 1, kMaxEpochs);
  if (!epochs.ok()) return epochs.error();
  cfg.optimizer.epochs = static_cast<uint32_t>(epochs.value());

  auto sync = detail::uint_field(doc, "", "sync_period", 1, UINT32_MAX);
  if (!sync.ok()) return sync.error();
  cfg.sync_period = static_cast<uint32_t>(sync.value());

  return cfg;
}

inline std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::RELU: return "RELU";
    case Activation::TANH: return "TANH";
    case Activation::IDENTITY: return "IDENTITY";
  }
  return "?";
}

// Canonical wire encoding of a config struct (field order fixed, compact).
inline Bytes encode_config(const ModelConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = cfg.schema_version;
  doc["seed"] = cfg.seed;
  doc["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : cfg.layers) {
    nlohmann::ordered_json lj;
    lj["kind"] = "DENSE";
    lj["input_dim"] = l.input_dim;
    lj["output_dim"] = l.output_dim;
    lj["activation"] = std::string(activation_name(l.activation));
    doc["layers"].push_back(std::move(lj));
  }
  doc["loss"] = "SOFTMAX_CROSS_ENTROPY";
  doc["optimizer"] = {{"kind", "SGD"},
                      {"learning_rate", cfg.optimizer.learning_rate},
                      {"batch_size", cfg.optimizer.batch_size},
                      {"epochs", cfg.optimizer.epochs}};
  doc["sync_period"] = cfg.sync_period;
  return to_bytes(doc.dump());
}

}  // namespace chiron::sandbox
