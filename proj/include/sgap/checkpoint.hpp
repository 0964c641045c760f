#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgap/error.hpp"
#include "sgap/model.hpp"
#include "sgap/optim.hpp"

namespace sgap {

// Container layout, all integers little-endian:
//   "SGAP" | u32 version | u64 metadata bytes | metadata JSON
//          | u64 payload bytes | float32 parameters in registry order
inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'A', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::optional<ModelSpec> model_spec;
  std::string optimizer;
  HyperParams hyper;
  std::uint64_t step = 0;
  std::string rng_state;
  std::string dataset;
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
};

inline nlohmann::json layers_to_json(const std::vector<Layer>& layers) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& layer : layers) {
    nlohmann::json j;
    j["kind"] = layer.kind_name();
    if (auto* d = std::get_if<Dense>(&layer.kind)) {
      j["in"] = d->in_dim;
      j["out"] = d->out_dim;
      j["bias"] = d->has_bias;
    } else if (auto* r = std::get_if<ResidualBlock>(&layer.kind)) {
      j["inner"] = layers_to_json(r->inner);
    } else if (auto* s = std::get_if<SoftmaxCrossEntropy>(&layer.kind)) {
      j["classes"] = s->num_classes;
    }
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<Layer> layers_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("checkpoint: layers must be an array");
  std::vector<Layer> out;
  for (const auto& item : j) {
    const auto kind = item.at("kind").get<std::string>();
    if (kind == "dense") {
      out.emplace_back(Dense(item.at("in").get<std::size_t>(),
                             item.at("out").get<std::size_t>(),
                             item.at("bias").get<bool>()));
    } else if (kind == "relu") {
      out.emplace_back(Relu{});
    } else if (kind == "residual") {
      out.emplace_back(ResidualBlock{layers_from_json(item.at("inner"))});
    } else if (kind == "softmax_ce") {
      out.emplace_back(SoftmaxCrossEntropy{item.at("classes").get<std::size_t>()});
    } else {
      throw FormatError("checkpoint: unknown layer kind '" + kind + "'");
    }
  }
  return out;
}

inline nlohmann::json to_json(const HyperParams& h) {
  return {{"mu", h.mu},
          {"beta1", h.beta1},
          {"beta2", h.beta2},
          {"delta", h.delta},
          {"epsilon", h.epsilon},
          {"sampling_rate", h.sampling_rate},
          {"bias_correction", to_string(h.bias_correction)}};
}

inline HyperParams hyper_from_json(const nlohmann::json& j) {
  HyperParams h;
  h.mu = j.at("mu").get<double>();
  h.beta1 = j.at("beta1").get<double>();
  h.beta2 = j.at("beta2").get<double>();
  h.delta = j.at("delta").get<double>();
  h.epsilon = j.at("epsilon").get<double>();
  h.sampling_rate = j.at("sampling_rate").get<double>();
  h.bias_correction =
      parse_bias_correction(j.at("bias_correction").get<std::string>());
  return h;
}

inline nlohmann::json to_json(const ModelSpec& s) {
  return {{"input_dim", s.input_dim},
          {"width", s.width},
          {"blocks", s.blocks},
          {"classes", s.classes}};
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.width = j.at("width").get<std::size_t>();
  s.blocks = j.at("blocks").get<std::size_t>();
  s.classes = j.at("classes").get<std::size_t>();
  return s;
}

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (n > remaining()) {
      throw FormatError(std::string("checkpoint truncated reading ") + what +
                        " at byte offset " + std::to_string(pos_) + ": need " +
                        std::to_string(n) + " bytes, have " +
                        std::to_string(remaining()));
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | s[static_cast<std::size_t>(i)];
    return v;
  }

  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | s[static_cast<std::size_t>(i)];
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const Model& model,
                                                      const CheckpointMeta& meta) {
  nlohmann::json doc;
  doc["layers"] = layers_to_json(model.layers());
  if (meta.model_spec) doc["model_spec"] = to_json(*meta.model_spec);
  doc["optimizer"] = meta.optimizer;
  doc["hyper"] = to_json(meta.hyper);
  doc["step"] = meta.step;
  doc["rng_state"] = meta.rng_state;
  doc["dataset"] = meta.dataset;
  doc["extra"] = meta.extra;
  nlohmann::json params = nlohmann::json::array();
  std::uint64_t count = 0;
  for (const auto& p : model.parameters()) {
    params.push_back({{"name", p.name}, {"shape", p.value->shape()}});
    count += p.value->size();
  }
  doc["parameters"] = params;
  const std::string text = doc.dump();

  std::vector<std::uint8_t> out;
  out.reserve(24 + text.size() + 4 * count);
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  detail::put_u64(out, 4 * count);
  for (const auto& p : model.parameters()) {
    for (float w : p.value->data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &w, 4);
      detail::put_u32(out, bits);
    }
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic at byte offset 0");
  }
  const auto version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto meta_len = in.u64("metadata length");
  const std::size_t meta_offset = in.offset();
  auto meta_bytes = in.take(meta_len, "metadata");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint metadata at byte offset " +
                      std::to_string(meta_offset) + " is not valid JSON: " +
                      e.what());
  }

  Checkpoint ck;
  try {
    ck.model = Model(layers_from_json(doc.at("layers")));
    if (doc.contains("model_spec")) {
      ck.meta.model_spec = model_spec_from_json(doc.at("model_spec"));
    }
    ck.meta.optimizer = doc.at("optimizer").get<std::string>();
    ck.meta.hyper = hyper_from_json(doc.at("hyper"));
    ck.meta.step = doc.at("step").get<std::uint64_t>();
    ck.meta.rng_state = doc.at("rng_state").get<std::string>();
    ck.meta.dataset = doc.at("dataset").get<std::string>();
    ck.meta.extra = doc.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata incomplete: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint describes an invalid model: ") +
                      e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint metadata invalid: ") + e.what());
  }

  auto params = ck.model.parameters();
  const auto& listed = doc.at("parameters");
  if (!listed.is_array() || listed.size() != params.size()) {
    throw FormatError("checkpoint parameter list does not match its layers");
  }
  std::uint64_t count = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (listed[k].at("name").get<std::string>() != params[k].name ||
        listed[k].at("shape").get<Shape>() != params[k].value->shape()) {
      throw FormatError("checkpoint parameter #" + std::to_string(k) +
                        " does not match registry entry " + params[k].name);
    }
    count += params[k].value->size();
  }

  const std::size_t payload_offset = in.offset();
  const auto payload_len = in.u64("payload length");
  if (payload_len != 4 * count) {
    throw FormatError("checkpoint payload length " + std::to_string(payload_len) +
                      " at byte offset " + std::to_string(payload_offset) +
                      " does not match 4 x " + std::to_string(count) +
                      " parameters");
  }
  if (in.remaining() != payload_len) {
    throw FormatError("checkpoint payload at byte offset " +
                      std::to_string(in.offset()) + " declares " +
                      std::to_string(payload_len) + " bytes, file has " +
                      std::to_string(in.remaining()));
  }
  for (auto& p : params) {
    for (float& w : p.value->data()) {
      const std::uint32_t bits = in.u32("payload");
      std::memcpy(&w, &bits, 4);
    }
    if (!p.value->all_finite()) {
      throw FormatError("checkpoint parameter " + p.name + " is not finite");
    }
  }
  return ck;
}

inline void write_bytes(const std::filesystem::path& path,
                        std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const Model& model, const CheckpointMeta& meta) {
  write_bytes(path, serialize_checkpoint(model, meta));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return deserialize_checkpoint(bytes);
}

}  // namespace sgap
