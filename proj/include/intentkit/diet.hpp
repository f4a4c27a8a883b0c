#pragma once

// DIET: sparse/dense fusion, shared transformer, similarity intent head and
// CRF entity head.
//
// Sequence layout per utterance: tokens at positions [0, T), the CLS slot at
// position T (its own positional row), padding after. The CLS input uses the
// utterance-level sparse bag and the sentence dense vector.

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intentkit/crf.hpp"
#include "intentkit/featurizer.hpp"
#include "intentkit/nn/optim.hpp"
#include "intentkit/nn/transformer.hpp"
#include "intentkit/similarity.hpp"
#include "intentkit/text.hpp"

namespace intentkit {

struct DietConfig {
  std::size_t transformer_dim = 128;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ff_dim = 256;
  double dropout = 0.1;
  std::size_t n_negatives = 10;  // clamped to |intents| - 1
  std::size_t embed_dim = 32;
  bool use_sparse = true;
  bool use_dense = true;
  bool entity_head = true;
  std::size_t max_len = 64;
  double loss_temperature = 1.0;
  double entity_weight = 1.0;

  void validate() const {
    if (layers < 1) throw ConfigError("diet: layers must be >= 1");
    if (n_negatives < 1) throw ConfigError("diet: n_negatives must be >= 1");
    if (!use_sparse && !use_dense) throw ConfigError("diet: at least one of use_sparse/use_dense is required");
    if (transformer_dim == 0 || heads == 0 || transformer_dim % heads != 0)
      throw ConfigError("diet: transformer_dim must be a positive multiple of heads");
    if (embed_dim == 0 || ff_dim == 0 || max_len == 0) throw ConfigError("diet: dimensions must be positive");
    if (!(dropout >= 0 && dropout < 1)) throw ConfigError("diet: dropout must be in [0, 1)");
    if (!(loss_temperature > 0)) throw ConfigError("diet: loss_temperature must be positive");
  }

  bool operator==(const DietConfig&) const = default;
};

/// One training example: features plus gold intent index and (optional) tag indices.
struct Example {
  const FeatureBundle* features = nullptr;
  std::size_t intent = 0;
  std::vector<std::size_t> tags;  // empty unless the entity head is trained
};

// ---------------------------------------------------------------------------
// BIO conversion

/// Gold BIO tags for tokens: first token overlapping a span gets B-, later ones I-.
template <class Span>
std::vector<std::size_t> bio_tags(const std::vector<text::Token>& tokens, const std::vector<Span>& spans,
                                  const std::vector<std::string>& tagset) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < tagset.size(); ++i) index[tagset[i]] = i;
  std::vector<std::size_t> tags(tokens.size(), index.at("O"));
  for (const auto& span : spans) {
    bool first = true;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (tokens[t].end <= span.start || tokens[t].start >= span.end) continue;
      auto it = index.find((first ? "B-" : "I-") + span.entity);
      if (it != index.end()) tags[t] = it->second;
      first = false;
    }
  }
  return tags;
}

/// Decoded tags back to character spans. A stray I- starts a new entity.
inline std::vector<EntityPrediction> spans_from_bio(const std::vector<text::Token>& tokens,
                                                    const std::vector<std::string>& tags, std::string_view raw) {
  std::vector<EntityPrediction> out;
  const std::u32string cps = text::decode_utf8(raw);
  auto close = [&](EntityPrediction& e) {
    e.value = text::encode_utf8(cps.substr(e.start, e.end - e.start));
    out.push_back(e);
  };
  std::optional<EntityPrediction> open;
  for (std::size_t t = 0; t < tags.size() && t < tokens.size(); ++t) {
    const std::string& tag = tags[t];
    const bool inside = tag.rfind("I-", 0) == 0;
    const bool begin = tag.rfind("B-", 0) == 0;
    const std::string label = (inside || begin) ? tag.substr(2) : std::string();
    if (inside && open && open->entity == label) {
      open->end = tokens[t].end;
      continue;
    }
    if (open) {
      close(*open);
      open.reset();
    }
    if (inside || begin) open = EntityPrediction{tokens[t].start, tokens[t].end, label, {}};
  }
  if (open) close(*open);
  return out;
}

// ---------------------------------------------------------------------------

template <class Real>
struct DietActivations {
  std::size_t batch = 0;
  std::size_t steps = 0;             // padded sequence length (tokens + CLS)
  std::vector<std::size_t> lengths;  // kept tokens per item; CLS sits at this index
  bool truncated = false;
  std::vector<const SparseVector*> sparse_rows;
  nn::Tensor<Real> fused_in;  // [B*S, sparse_width + dense_width]
  nn::Tensor<Real> x0;        // [B, S, D]
  nn::Mask mask;
  nn::EncoderCache<Real> encoder;
  nn::Tensor<Real> hidden;      // [B, S, D]
  nn::Tensor<Real> cls_hidden;  // [B, D]
  nn::Tensor<Real> cls_vec;     // [B, E]
  nn::Tensor<Real> emissions;   // [B, S, L] when the entity head is on
};

template <class Real>
struct DietEncoding {
  std::vector<Real> cls_vec;
  nn::Tensor<Real> token_vecs;  // [T, D]
  bool truncated = false;
};

template <class Real>
class DietModel {
 public:
  DietConfig config;
  std::size_t sparse_dim = 0;
  std::size_t dense_dim = 0;
  std::vector<std::string> intents;
  std::vector<std::string> tagset;

  nn::SparseLinear<Real> sparse_proj;
  nn::Linear<Real> fusion_proj;
  nn::Param<Real> positional;
  nn::TransformerEncoder<Real> encoder;
  nn::Linear<Real> intent_out_proj;
  nn::Param<Real> label_table;
  nn::Linear<Real> crf_emission;
  nn::Param<Real> crf_transitions;

  static DietModel build(const DietConfig& cfg, std::size_t sparse_dim, std::size_t dense_dim,
                         std::vector<std::string> intents, std::vector<std::string> tagset, std::uint64_t seed) {
    cfg.validate();
    if (cfg.use_dense && dense_dim == 0) throw ConfigError("diet: use_dense requires a dense dimension > 0");
    if (cfg.use_sparse && sparse_dim == 0) throw ConfigError("diet: use_sparse requires a sparse dimension > 0");
    if (intents.empty()) throw ConfigError("diet: empty intent inventory");
    if (cfg.entity_head && tagset.empty()) tagset = {"O"};
    DietModel m;
    m.config = cfg;
    m.sparse_dim = cfg.use_sparse ? sparse_dim : 0;
    m.dense_dim = cfg.use_dense ? dense_dim : 0;
    m.intents = std::move(intents);
    m.tagset = cfg.entity_head ? std::move(tagset) : std::vector<std::string>{};
    Rng rng(seed);
    const std::size_t D = cfg.transformer_dim;
    if (cfg.use_sparse) m.sparse_proj = nn::SparseLinear<Real>("sparse_proj", m.sparse_dim, D, rng);
    m.fusion_proj = nn::Linear<Real>("fusion_proj", m.sparse_width() + m.dense_dim, D, rng);
    m.positional = nn::Param<Real>("positional", {cfg.max_len + 1, D});
    nn::xavier_uniform(m.positional, cfg.max_len + 1, D, rng);
    m.encoder = nn::TransformerEncoder<Real>("encoder", cfg.layers, D, cfg.heads, cfg.ff_dim, cfg.dropout, rng);
    m.intent_out_proj = nn::Linear<Real>("intent_out_proj", D, cfg.embed_dim, rng);
    m.label_table = nn::Param<Real>("label_table", {m.intents.size(), cfg.embed_dim});
    nn::xavier_uniform(m.label_table, m.intents.size(), cfg.embed_dim, rng);
    if (cfg.entity_head) {
      const std::size_t L = m.tagset.size();
      m.crf_emission = nn::Linear<Real>("crf_emission", D, L, rng);
      m.crf_transitions = nn::Param<Real>("crf_transitions", {L + 2, L + 2});
    }
    return m;
  }

  std::size_t sparse_width() const { return config.use_sparse ? config.transformer_dim : 0; }
  std::size_t n_negatives() const { return std::min(config.n_negatives, intents.size() - 1); }

  nn::ParamList<Real> params() {
    nn::ParamList<Real> out;
    if (config.use_sparse) sparse_proj.collect(out);
    fusion_proj.collect(out);
    out.push_back(&positional);
    encoder.collect(out);
    intent_out_proj.collect(out);
    out.push_back(&label_table);
    if (config.entity_head) {
      crf_emission.collect(out);
      out.push_back(&crf_transitions);
    }
    return out;
  }

  // -------------------------------------------------------------------------
  // Forward

  /// Batched forward pass; rng == nullptr selects evaluation mode.
  DietActivations<Real> forward(std::span<const FeatureBundle* const> batch, Rng* rng) const {
    DietActivations<Real> a;
    const std::size_t B = batch.size(), D = config.transformer_dim;
    a.batch = B;
    a.lengths.resize(B);
    std::size_t S = 0;
    for (std::size_t b = 0; b < B; ++b) {
      check_bundle(*batch[b]);
      a.lengths[b] = std::min(batch[b]->length(), config.max_len);
      a.truncated = a.truncated || batch[b]->length() > config.max_len;
      S = std::max(S, a.lengths[b] + 1);
    }
    a.steps = S;
    a.mask.assign(B * S, 0);
    a.sparse_rows.assign(B * S, nullptr);
    const std::size_t Wsp = sparse_width(), Wd = dense_dim;
    a.fused_in = nn::Tensor<Real>({B * S, Wsp + Wd});
    for (std::size_t b = 0; b < B; ++b) {
      const FeatureBundle& f = *batch[b];
      const std::size_t n = a.lengths[b];
      for (std::size_t t = 0; t <= n; ++t) {
        const std::size_t r = b * S + t;
        a.mask[r] = 1;
        const bool cls = t == n;
        if (config.use_sparse) a.sparse_rows[r] = cls ? &f.cls_sparse : &f.token_sparse[t];
        if (Wd > 0) {
          const std::vector<float>* dense = nullptr;
          if (cls) {
            dense = &f.cls_dense;
          } else if (!f.token_dense.empty()) {
            dense = &f.token_dense[t];
          }
          if (dense && !dense->empty())
            for (std::size_t i = 0; i < Wd; ++i) a.fused_in.row(r)[Wsp + i] = static_cast<Real>((*dense)[i]);
        }
      }
    }
    if (config.use_sparse) {
      nn::Tensor<Real> sp = sparse_proj.forward(a.sparse_rows);
      for (std::size_t r = 0; r < B * S; ++r) std::copy_n(sp.row(r), Wsp, a.fused_in.row(r));
    }
    nn::Tensor<Real> fused = fusion_proj.forward(a.fused_in);
    a.x0 = nn::Tensor<Real>({B, S, D});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t <= a.lengths[b]; ++t) {
        const std::size_t r = b * S + t;
        const Real* pos = positional.value.row(t == a.lengths[b] ? config.max_len : t);
        for (std::size_t i = 0; i < D; ++i) a.x0.row(r)[i] = fused.row(r)[i] + pos[i];
      }
    a.hidden = encoder.forward(a.x0, a.mask, rng, a.encoder);
    a.cls_hidden = nn::Tensor<Real>({B, D});
    for (std::size_t b = 0; b < B; ++b) std::copy_n(a.hidden.row(b * S + a.lengths[b]), D, a.cls_hidden.row(b));
    a.cls_vec = intent_out_proj.forward(a.cls_hidden);
    if (config.entity_head) a.emissions = crf_emission.forward(a.hidden);
    return a;
  }

  /// Accumulates parameter gradients given dL/d cls_vec [B, E] and dL/d emissions [B, S, L] (may be empty).
  void backward(const DietActivations<Real>& a, const nn::Tensor<Real>& d_cls_vec, const nn::Tensor<Real>& d_emissions) {
    const std::size_t B = a.batch, S = a.steps, D = config.transformer_dim;
    nn::Tensor<Real> d_hidden({B, S, D});
    if (config.entity_head && d_emissions.size() > 0) d_hidden = crf_emission.backward(a.hidden, d_emissions);
    nn::Tensor<Real> d_cls_hidden = intent_out_proj.backward(a.cls_hidden, d_cls_vec);
    for (std::size_t b = 0; b < B; ++b) {
      Real* dst = d_hidden.row(b * S + a.lengths[b]);
      for (std::size_t i = 0; i < D; ++i) dst[i] += d_cls_hidden.row(b)[i];
    }
    nn::Tensor<Real> dx0 = encoder.backward(a.encoder, d_hidden);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t <= a.lengths[b]; ++t) {
        Real* dpos = positional.grad.row(t == a.lengths[b] ? config.max_len : t);
        nn::kernel::axpy(dpos, dx0.row(b * S + t), Real(1), D);
      }
    for (std::size_t r = 0; r < B * S; ++r)
      if (!a.mask[r]) std::fill_n(dx0.row(r), D, Real(0));
    nn::Tensor<Real> d_fused = fusion_proj.backward(a.fused_in, dx0, config.use_sparse);
    if (config.use_sparse) {
      const std::size_t Wsp = sparse_width(), W = d_fused.cols();
      nn::Tensor<Real> d_sparse({B * S, Wsp});
      for (std::size_t r = 0; r < B * S; ++r) std::copy_n(d_fused.data.data() + r * W, Wsp, d_sparse.row(r));
      sparse_proj.backward(a.sparse_rows, d_sparse);
    }
  }

  // -------------------------------------------------------------------------
  // Single-utterance operations

  DietEncoding<Real> encode(const FeatureBundle& f) const {
    const FeatureBundle* one[] = {&f};
    auto a = forward(one, nullptr);
    DietEncoding<Real> out;
    out.cls_vec.assign(a.cls_vec.row(0), a.cls_vec.row(0) + config.embed_dim);
    out.token_vecs = nn::Tensor<Real>({a.lengths[0], config.transformer_dim});
    std::copy_n(a.hidden.data.data(), a.lengths[0] * config.transformer_dim, out.token_vecs.data.data());
    out.truncated = a.truncated;
    return out;
  }

  std::vector<double> intent_similarities(std::span<const Real> cls_vec) const {
    return similarity::scores(cls_vec, label_table.value);
  }

  std::vector<double> intent_confidences(std::span<const Real> cls_vec) const {
    return similarity::confidences(intent_similarities(cls_vec), config.loss_temperature);
  }

  double intent_loss(std::span<const Real> cls_vec, std::size_t gold, Rng& rng) const {
    if (intents.size() < 2) throw ConfigError("intent_loss: single-intent inventory has no negatives");
    const auto negatives = similarity::sample_negatives(intents.size(), gold, n_negatives(), rng);
    return similarity::sampled_softmax_loss(cls_vec, label_table.value, gold, negatives, config.loss_temperature);
  }

  crf::Scores crf_scores(const nn::Tensor<Real>& token_vecs) const {
    if (!config.entity_head) throw ConfigError("crf: entity head disabled");
    nn::Tensor<Real> em = crf_emission.forward(token_vecs);
    return crf_scores_from(em.data.data(), token_vecs.rows());
  }

  double crf_nll(const nn::Tensor<Real>& token_vecs, std::span<const std::size_t> gold) const {
    return crf::nll(crf_scores(token_vecs), gold);
  }

  std::vector<std::size_t> crf_decode(const nn::Tensor<Real>& token_vecs) const {
    return crf::viterbi(crf_scores(token_vecs));
  }

  /// Ranking plus decoded entities. Pass the utterance's tokens and text to get character spans.
  Prediction predict(const FeatureBundle& f, const std::vector<text::Token>& tokens = {},
                     std::string_view raw = {}) const {
    const FeatureBundle* one[] = {&f};
    auto a = forward(one, nullptr);
    std::span<const Real> cls(a.cls_vec.row(0), config.embed_dim);
    Prediction p;
    p.ranking = rank_intents(intents, intent_confidences(cls));
    p.cls_embedding.assign(cls.begin(), cls.end());
    if (config.entity_head) {
      auto scores = crf_scores_from(a.emissions.data.data(), a.lengths[0]);
      for (auto t : crf::viterbi(scores)) p.tags.push_back(tagset[t]);
      if (!tokens.empty()) p.entities = spans_from_bio(tokens, p.tags, raw);
    }
    return p;
  }

  /// intent_loss + entity_weight * crf_nll for one utterance (no gradients).
  double total_loss(const FeatureBundle& f, std::size_t gold, std::span<const std::size_t> gold_tags, Rng& rng) const {
    if (config.entity_head && gold_tags.empty()) throw ConfigError("total_loss: entity head requires gold tags");
    auto enc = encode(f);
    double loss = intent_loss(enc.cls_vec, gold, rng);
    if (config.entity_head) loss += config.entity_weight * crf_nll(enc.token_vecs, truncate_tags(gold_tags, enc.token_vecs.rows()));
    return loss;
  }

  /// Mean loss over the batch; accumulates gradients when `with_grad`.
  /// `rng` drives dropout and negative sampling; null means eval mode with
  /// negatives drawn from a fixed stream.
  double batch_loss(std::span<const Example> batch, Rng* rng, bool with_grad = true) {
    if (intents.size() < 2) throw ConfigError("intent_loss: single-intent inventory has no negatives");
    std::vector<const FeatureBundle*> feats;
    for (const auto& e : batch) feats.push_back(e.features);
    auto a = forward(feats, rng);
    const std::size_t B = batch.size(), S = a.steps, E = config.embed_dim;
    const double w = 1.0 / static_cast<double>(B);
    nn::Tensor<Real> d_cls({B, E});
    nn::Tensor<Real> d_em;
    const bool use_crf = config.entity_head && config.entity_weight != 0.0;
    if (use_crf) d_em = nn::Tensor<Real>({B, S, tagset.size()});
    Rng fallback(0);
    Rng& neg_rng = rng ? *rng : fallback;
    double total = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const auto negatives = similarity::sample_negatives(intents.size(), batch[b].intent, n_negatives(), neg_rng);
      std::span<const Real> cls(a.cls_vec.row(b), E);
      total += w * similarity::sampled_softmax_loss(cls, label_table.value, batch[b].intent, negatives,
                                                    config.loss_temperature, with_grad ? d_cls.row(b) : nullptr,
                                                    with_grad ? &label_table.grad : nullptr, w);
      if (use_crf) {
        if (batch[b].tags.empty()) throw ConfigError("batch_loss: entity head requires gold tags");
        const std::size_t T = a.lengths[b];
        auto scores = crf_scores_from(a.emissions.row(b * S), T);
        auto g = crf::nll_with_grad(scores, truncate_tags(batch[b].tags, T));
        total += w * config.entity_weight * g.nll;
        if (with_grad) {
          const double cw = w * config.entity_weight;
          const std::size_t L = tagset.size();
          for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < L; ++j) d_em.row(b * S + t)[j] = static_cast<Real>(cw * g.d_emissions[t * L + j]);
          for (std::size_t i = 0; i < crf_transitions.size(); ++i)
            crf_transitions.grad[i] += static_cast<Real>(cw * g.d_transitions[i]);
        }
      }
    }
    if (with_grad) backward(a, d_cls, d_em);
    return total;
  }

 private:
  void check_bundle(const FeatureBundle& f) const {
    if (f.length() == 0) throw DataError("diet: empty token sequence");
    if (config.use_sparse && f.sparse_dim != sparse_dim)
      throw DataError("diet: sparse dimension " + std::to_string(f.sparse_dim) + " != model's " +
                      std::to_string(sparse_dim));
    if (dense_dim > 0 && f.dense_dim != dense_dim)
      throw DataError("diet: dense dimension " + std::to_string(f.dense_dim) + " != model's " +
                      std::to_string(dense_dim));
  }

  crf::Scores crf_scores_from(const Real* emissions, std::size_t T) const {
    const std::size_t L = tagset.size();
    crf::Scores s(T, L);
    for (std::size_t i = 0; i < T * L; ++i) s.emissions[i] = emissions[i];
    for (std::size_t i = 0; i < s.transitions.size(); ++i) s.transitions[i] = crf_transitions.value[i];
    return s;
  }

  static std::span<const std::size_t> truncate_tags(std::span<const std::size_t> tags, std::size_t T) {
    if (tags.size() < T) throw ShapeError("crf: fewer gold tags than tokens");
    return tags.first(T);
  }
};

}  // namespace intentkit
