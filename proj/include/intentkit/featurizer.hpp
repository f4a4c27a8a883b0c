#pragma once

// Sparse (token one-hot + character n-gram multi-hot) and dense features.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "intentkit/common.hpp"
#include "intentkit/text.hpp"

namespace intentkit {

/// Active indices of a multi-hot vector, sorted ascending, all values 1.
using SparseVector = std::vector<std::uint32_t>;

struct FeatureConfig {
  std::size_t ngram_min = 1;
  std::size_t ngram_max = 4;
  std::size_t min_freq = 1;
  bool oov_bucket = true;

  bool operator==(const FeatureConfig&) const = default;
};

/// Contiguous substrings (code points) of the lowercased token, shortest first.
/// Repeats are kept: "aaa" with (2,2) yields "aa" twice.
inline std::vector<std::string> char_ngrams(std::string_view token, std::size_t n_min, std::size_t n_max) {
  const std::u32string cps = text::to_lower(text::decode_utf8(token));
  std::vector<std::string> out;
  for (std::size_t n = std::max<std::size_t>(n_min, 1); n <= n_max && n <= cps.size(); ++n)
    for (std::size_t i = 0; i + n <= cps.size(); ++i) out.push_back(text::encode_utf8(cps.substr(i, n)));
  return out;
}

/// Index layout: [0, |tokens|) tokens, then n-grams, then the OOV bucket if enabled.
struct SparseSpec {
  std::map<std::string, std::uint32_t> token_vocab;
  std::map<std::string, std::uint32_t> ngram_vocab;
  std::size_t ngram_min = 1;
  std::size_t ngram_max = 4;
  bool oov_bucket = true;

  std::size_t dim() const { return token_vocab.size() + ngram_vocab.size() + (oov_bucket ? 1 : 0); }
  std::uint32_t oov_index() const { return static_cast<std::uint32_t>(token_vocab.size() + ngram_vocab.size()); }

  bool operator==(const SparseSpec&) const = default;

  /// Token index (or OOV bucket) plus every known n-gram of the token.
  SparseVector encode_token(std::string_view token) const {
    SparseVector out;
    if (auto it = token_vocab.find(std::string(token)); it != token_vocab.end()) {
      out.push_back(it->second);
    } else if (oov_bucket) {
      out.push_back(oov_index());
    }
    for (const auto& g : char_ngrams(token, ngram_min, ngram_max))
      if (auto it = ngram_vocab.find(g); it != ngram_vocab.end()) out.push_back(it->second);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

/// Vocabulary from training text only. Indices follow lexicographic order.
inline SparseSpec fit_sparse(const std::vector<std::vector<std::string>>& train_tokens, const FeatureConfig& cfg) {
  if (cfg.ngram_min < 1 || cfg.ngram_max < cfg.ngram_min) throw ConfigError("fit_sparse: invalid n-gram range");
  std::map<std::string, std::size_t> token_freq, ngram_freq;
  for (const auto& sentence : train_tokens)
    for (const auto& tok : sentence) {
      if (tok.empty()) continue;
      ++token_freq[tok];
      for (auto& g : char_ngrams(tok, cfg.ngram_min, cfg.ngram_max)) ++ngram_freq[g];
    }
  if (token_freq.empty()) throw DataError("fit_sparse: empty corpus");

  SparseSpec spec;
  spec.ngram_min = cfg.ngram_min;
  spec.ngram_max = cfg.ngram_max;
  spec.oov_bucket = cfg.oov_bucket;
  std::uint32_t next = 0;
  for (const auto& [tok, n] : token_freq)
    if (n >= cfg.min_freq) spec.token_vocab.emplace(tok, next++);
  for (const auto& [g, n] : ngram_freq)
    if (n >= cfg.min_freq) spec.ngram_vocab.emplace(g, next++);
  return spec;
}

// ---------------------------------------------------------------------------
// Dense providers

enum class DenseKind : std::uint8_t { token_table = 0, sentence_table = 1, hash = 2 };

inline const char* to_string(DenseKind k) {
  switch (k) {
    case DenseKind::token_table: return "token-table";
    case DenseKind::sentence_table: return "sentence-table";
    case DenseKind::hash: return "hash";
  }
  return "?";
}

/// Deterministic unit vector for `key`.
///
/// Component i is FNV-1a 64 over: key bytes, seed as u64 LE, i as u32 LE.
/// The top 53 bits map to u in [0,1), then x = 2u - 1. The vector is
/// normalized in double precision and rounded to float32.
inline std::vector<float> hash_embed(std::string_view key, std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("hash_embed: dim must be >= 1");
  const Fnv1a64 prefix = Fnv1a64{}.update(key).update_u64(seed);
  std::vector<double> raw(dim);
  double norm2 = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    Fnv1a64 h = prefix;
    h.update_u32(static_cast<std::uint32_t>(i));
    const double u = static_cast<double>(h.digest() >> 11) * 0x1.0p-53;
    raw[i] = 2.0 * u - 1.0;
    norm2 += raw[i] * raw[i];
  }
  std::vector<float> out(dim);
  if (norm2 == 0) {
    out[0] = 1.0f;
    return out;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(raw[i] * inv);
  return out;
}

class DenseProvider {
 public:
  using Table = std::map<std::string, std::vector<float>>;

  static DenseProvider hashed(std::size_t dim, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("hash provider: dim must be >= 1");
    DenseProvider p;
    p.kind_ = DenseKind::hash;
    p.dim_ = dim;
    p.seed_ = seed;
    return p;
  }

  /// Keys are expected in normalized form; all vectors must have `dim` entries.
  static DenseProvider table(DenseKind kind, std::size_t dim, Table entries) {
    if (kind == DenseKind::hash) throw ConfigError("table provider cannot have kind 'hash'");
    if (dim < 1) throw ConfigError("dense table: dim must be >= 1");
    for (const auto& [key, vec] : entries)
      if (vec.size() != dim) throw DataError("dense table: vector for '" + key + "' has wrong dimension");
    DenseProvider p;
    p.kind_ = kind;
    p.dim_ = dim;
    p.table_ = std::move(entries);
    return p;
  }

  DenseKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const Table& entries() const { return table_; }
  const std::string& source() const { return source_; }
  void set_source(std::string s) { source_ = std::move(s); }

  std::optional<std::span<const float>> lookup(const std::string& key) const {
    auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    return std::span<const float>(it->second);
  }

  bool has_token_vectors() const { return kind_ != DenseKind::sentence_table; }

  /// Token vector; zero vector on a table miss.
  std::vector<float> token_vector(const std::string& token) const {
    if (kind_ == DenseKind::hash) return hash_embed(token, dim_, seed_);
    if (auto v = lookup(token)) return {v->begin(), v->end()};
    return std::vector<float>(dim_, 0.0f);
  }

  /// Sentence vector for sentence-table providers. A miss is a DataError.
  std::vector<float> sentence_vector(std::string_view raw_text) const {
    const std::string key = text::normalize_key(raw_text);
    if (auto v = lookup(key)) return {v->begin(), v->end()};
    throw DataError("sentence embedding missing for \"" + key + "\"");
  }

  /// Identifies the embedding content: kind, dim and table bytes (or hash seed).
  std::uint64_t fingerprint() const {
    Fnv1a64 h;
    h.update_byte(static_cast<std::uint8_t>(kind_)).update_u64(dim_);
    if (kind_ == DenseKind::hash) {
      h.update_u64(seed_);
    } else {
      for (const auto& [key, vec] : table_) {
        h.update_u32(static_cast<std::uint32_t>(key.size())).update(key);
        for (float f : vec) {
          std::uint32_t bits;
          std::memcpy(&bits, &f, sizeof bits);
          h.update_u32(bits);
        }
      }
    }
    return h.digest();
  }

 private:
  DenseKind kind_ = DenseKind::hash;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  Table table_;
  std::string source_;
};

// DNSE: "DNSE" | 0x01 | kind | u32 dim | u32 count | count x (u16 len, key, dim x f32), all LE.
namespace dnse {

inline constexpr char kMagic[4] = {'D', 'N', 'S', 'E'};
inline constexpr std::uint8_t kVersion = 0x01;

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace dnse

inline std::string encode_dense(const DenseProvider& p) {
  if (p.kind() == DenseKind::hash) throw ConfigError("hash providers have no table to serialize");
  std::string out(dnse::kMagic, 4);
  out.push_back(static_cast<char>(dnse::kVersion));
  out.push_back(static_cast<char>(p.kind()));
  dnse::put_u32(out, static_cast<std::uint32_t>(p.dim()));
  dnse::put_u32(out, static_cast<std::uint32_t>(p.entries().size()));
  for (const auto& [key, vec] : p.entries()) {
    if (key.size() > 0xFFFF) throw DataError("dense key longer than 65535 bytes");
    dnse::put_u16(out, static_cast<std::uint16_t>(key.size()));
    out += key;
    for (float f : vec) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      dnse::put_u32(out, bits);
    }
  }
  return out;
}

inline DenseProvider decode_dense(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 14 || std::memcmp(p, dnse::kMagic, 4) != 0) throw DataError("dense file: bad magic");
  if (p[4] != dnse::kVersion) throw DataError("dense file: unsupported version " + std::to_string(p[4]));
  if (p[5] > 1) throw DataError("dense file: unknown kind byte " + std::to_string(p[5]));
  const auto kind = static_cast<DenseKind>(p[5]);
  const std::uint32_t dim = dnse::get_u32(p + 6);
  const std::uint32_t count = dnse::get_u32(p + 10);
  if (dim == 0) throw DataError("dense file: dim is zero");
  std::size_t pos = 14;
  DenseProvider::Table table;
  std::string previous;
  for (std::uint32_t r = 0; r < count; ++r) {
    if (pos + 2 > n) throw DataError("dense file: truncated payload");
    const std::size_t len = p[pos] | (static_cast<std::size_t>(p[pos + 1]) << 8);
    pos += 2;
    if (pos + len + 4ull * dim > n) throw DataError("dense file: truncated payload");
    std::string key(bytes.substr(pos, len));
    pos += len;
    if (r > 0 && !(previous < key)) {
      throw DataError("dense file: keys not strictly ascending at '" + key + "'");
    }
    std::vector<float> vec(dim);
    for (std::uint32_t i = 0; i < dim; ++i, pos += 4) {
      const std::uint32_t bits = dnse::get_u32(p + pos);
      std::memcpy(&vec[i], &bits, sizeof bits);
    }
    previous = key;
    table.emplace(std::move(key), std::move(vec));
  }
  if (pos != n) throw DataError("dense file: trailing bytes after last record");
  return DenseProvider::table(kind, dim, std::move(table));
}

inline DenseProvider load_dense_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dense file '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    DenseProvider p = decode_dense(bytes);
    p.set_source(path);
    return p;
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_dense_file(const DenseProvider& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dense file '" + path + "'");
  const std::string bytes = encode_dense(p);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Token-table of hash embeddings for the given keys (normalized, deduplicated).
inline DenseProvider hash_table(const std::vector<std::string>& keys, std::size_t dim, std::uint64_t seed) {
  DenseProvider::Table table;
  for (const auto& k : keys) {
    std::string key = text::normalize_key(k);
    if (key.empty()) continue;
    if (!table.contains(key)) table.emplace(key, hash_embed(key, dim, seed));
  }
  return DenseProvider::table(DenseKind::token_table, dim, std::move(table));
}

// ---------------------------------------------------------------------------
// Featurization

struct FeatureBundle {
  std::vector<SparseVector> token_sparse;
  std::vector<std::vector<float>> token_dense;  // empty when absent
  SparseVector cls_sparse;
  std::vector<float> cls_dense;                 // empty when absent
  std::size_t sparse_dim = 0;
  std::size_t dense_dim = 0;                    // 0 when no provider

  std::size_t length() const { return token_sparse.size(); }
  bool has_dense() const { return dense_dim > 0; }
};

/// Union of the token vectors: the elementwise sum clipped to 1.
inline SparseVector clipped_sum(const std::vector<SparseVector>& rows) {
  SparseVector out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// `bound_dense_dim`, when given, is the dense width a model was built with.
inline FeatureBundle featurize(const SparseSpec& spec, const DenseProvider* provider,
                               const std::vector<std::string>& tokens, std::string_view raw_text,
                               std::optional<std::size_t> bound_dense_dim = std::nullopt) {
  if (tokens.empty()) throw DataError("featurize: utterance has no tokens");
  const std::size_t provider_dim = provider ? provider->dim() : 0;
  if (bound_dense_dim && *bound_dense_dim != provider_dim) {
    throw DataError("dense provider dimension " + std::to_string(provider_dim) +
                    " does not match the model's " + std::to_string(*bound_dense_dim));
  }
  FeatureBundle b;
  b.sparse_dim = spec.dim();
  b.dense_dim = provider_dim;
  b.token_sparse.reserve(tokens.size());
  for (const auto& t : tokens) b.token_sparse.push_back(spec.encode_token(t));
  b.cls_sparse = clipped_sum(b.token_sparse);
  if (provider) {
    if (provider->kind() == DenseKind::sentence_table) {
      b.cls_dense = provider->sentence_vector(raw_text);
    } else {
      std::vector<double> mean(provider_dim, 0.0);
      for (const auto& t : tokens) {
        auto v = provider->token_vector(t);
        for (std::size_t i = 0; i < provider_dim; ++i) mean[i] += v[i];
        b.token_dense.push_back(std::move(v));
      }
      b.cls_dense.resize(provider_dim);
      for (std::size_t i = 0; i < provider_dim; ++i)
        b.cls_dense[i] = static_cast<float>(mean[i] / static_cast<double>(tokens.size()));
    }
  }
  return b;
}

}  // namespace intentkit
