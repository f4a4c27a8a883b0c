#pragma once

// Model container:
//   "NLUM" | u8 version | u32 header_bytes | JSON header | tensor payload
// The header records the model kind, every config, the sparse vocabulary,
// the intent inventory, the tag set, the dense provider's identity and a
// tensor directory (name, shape) in payload order. Tensors are float32 LE.

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "intentkit/trainer.hpp"

namespace intentkit {

namespace model_io {

inline constexpr char kMagic[4] = {'N', 'L', 'U', 'M'};
inline constexpr std::uint8_t kVersion = 0x01;

static_assert(std::endian::native == std::endian::little, "model files are written in native little-endian order");

inline nlohmann::json spec_json(const SparseSpec& s) {
  return {{"token_vocab", s.token_vocab}, {"ngram_vocab", s.ngram_vocab}, {"ngram_min", s.ngram_min},
          {"ngram_max", s.ngram_max},     {"oov_bucket", s.oov_bucket}};
}

inline SparseSpec spec_from_json(const nlohmann::json& j) {
  SparseSpec s;
  s.token_vocab = j.at("token_vocab").get<std::map<std::string, std::uint32_t>>();
  s.ngram_vocab = j.at("ngram_vocab").get<std::map<std::string, std::uint32_t>>();
  s.ngram_min = j.at("ngram_min");
  s.ngram_max = j.at("ngram_max");
  s.oov_bucket = j.at("oov_bucket");
  return s;
}

template <class Model>
nn::ParamList<float> params_of(const Model& m) {
  return const_cast<Model&>(m).params();
}

}  // namespace model_io

inline std::string encode_pipeline(const Pipeline& p) {
  nlohmann::json h;
  h["kind"] = to_string(p.kind);
  h["features"] = to_json(p.feature_config);
  h["sparse_spec"] = model_io::spec_json(p.spec);
  h["provider"] = provider_json(p.dense());
  nn::ParamList<float> params;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        h["intents"] = m.intents;
        if constexpr (std::is_same_v<M, DietModel<float>>) {
          h["config"] = to_json(m.config);
          h["tagset"] = m.tagset;
          h["sparse_dim"] = m.sparse_dim;
          h["dense_dim"] = m.dense_dim;
        } else if constexpr (std::is_same_v<M, TfBaseline<float>>) {
          h["config"] = to_json(m.config);
          h["dense_dim"] = m.dense_dim;
        } else {
          h["config"] = to_json(m.config);
          h["sparse_dim"] = m.sparse_dim;
        }
        params = model_io::params_of(m);
      },
      p.model);
  h["tensors"] = nlohmann::json::array();
  for (const auto* prm : params) h["tensors"].push_back({{"name", prm->name}, {"shape", prm->value.shape}});

  const std::string header = h.dump();
  std::string out(model_io::kMagic, 4);
  out.push_back(static_cast<char>(model_io::kVersion));
  const auto len = static_cast<std::uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
  out += header;
  for (const auto* prm : params)
    out.append(reinterpret_cast<const char*>(prm->value.data.data()), prm->value.size() * sizeof(float));
  return out;
}

/// Rebuilds the pipeline. The dense provider comes from `provider` if given,
/// otherwise from the header (hash parameters or the recorded table path).
/// Its fingerprint must match the one recorded at training time.
inline Pipeline decode_pipeline(std::string_view bytes, std::shared_ptr<const DenseProvider> provider = nullptr) {
  auto fail = [](const std::string& m) { throw DataError("model file: " + m); };
  if (bytes.size() < 9 || std::memcmp(bytes.data(), model_io::kMagic, 4) != 0) fail("bad magic (not a model file)");
  if (static_cast<std::uint8_t>(bytes[4]) != model_io::kVersion) fail("unsupported version");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[5 + i])) << (8 * i);
  if (bytes.size() < 9 + static_cast<std::size_t>(len)) fail("truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(9, len));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("corrupt header: ") + e.what());
  }

  Pipeline p;
  try {
    p.kind = parse_model_kind(h.at("kind").get<std::string>());
    p.feature_config = feature_config_from_json(h.at("features"));
    p.spec = model_io::spec_from_json(h.at("sparse_spec"));
    const auto intents = h.at("intents").get<std::vector<std::string>>();
    const auto& pj = h.at("provider");
    if (!pj.is_null()) {
      const auto kind = pj.at("kind").get<std::string>();
      const auto dim = pj.at("dim").get<std::size_t>();
      if (!provider) {
        if (kind == "hash") {
          provider = std::make_shared<DenseProvider>(DenseProvider::hashed(dim, pj.at("seed").get<std::uint64_t>()));
        } else {
          const auto source = pj.at("source").get<std::string>();
          if (source.empty()) fail("model needs a dense table but records no source path; supply the provider");
          auto loaded = std::make_shared<DenseProvider>(load_dense_file(source));
          provider = std::move(loaded);
        }
      }
      if (provider->dim() != dim)
        fail("dense provider dimension " + std::to_string(provider->dim()) + " does not match the model's " +
             std::to_string(dim));
      if (to_hex(provider->fingerprint()) != pj.at("fingerprint").get<std::string>())
        fail("dense provider fingerprint " + to_hex(provider->fingerprint()) + " does not match the model's " +
             pj.at("fingerprint").get<std::string>());
      p.provider = std::move(provider);
    }
    switch (p.kind) {
      case ModelKind::diet:
        p.model.emplace<DietModel<float>>(DietModel<float>::build(
            diet_config_from_json(h.at("config")), h.at("sparse_dim"), h.at("dense_dim"), intents,
            h.at("tagset").get<std::vector<std::string>>(), 0));
        break;
      case ModelKind::tf_baseline:
        p.model.emplace<TfBaseline<float>>(
            TfBaseline<float>::build(tf_config_from_json(h.at("config")), h.at("dense_dim"), intents, 0));
        break;
      case ModelKind::embed_baseline:
        p.model.emplace<EmbedBaseline<float>>(
            EmbedBaseline<float>::build(embed_config_from_json(h.at("config")), h.at("sparse_dim"), intents, 0));
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    fail(std::string("inconsistent header: ") + e.what());
  }

  const auto params = std::visit([](auto& m) { return m.params(); }, p.model);
  const auto& dir = h.at("tensors");
  if (dir.size() != params.size()) fail("tensor directory does not match the model layout");
  std::size_t offset = 9 + len;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* prm = params[i];
    if (dir[i].at("name").get<std::string>() != prm->name ||
        dir[i].at("shape").get<std::vector<std::size_t>>() != prm->value.shape)
      fail("tensor '" + dir[i].at("name").get<std::string>() + "' does not match the model layout");
    const std::size_t n = prm->value.size() * sizeof(float);
    if (bytes.size() < offset + n) fail("truncated tensor data");
    std::memcpy(prm->value.data.data(), bytes.data() + offset, n);
    offset += n;
  }
  if (offset != bytes.size()) fail("trailing bytes after tensor data");
  return p;
}

inline void save_pipeline(const Pipeline& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  const std::string bytes = encode_pipeline(p);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing model file '" + path + "'");
}

inline Pipeline load_pipeline(const std::string& path, std::shared_ptr<const DenseProvider> provider = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_pipeline(buf.str(), std::move(provider));
}

}  // namespace intentkit
