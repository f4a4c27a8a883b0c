#pragma once

// Comparison models.
//
// EmbedBaseline: bag of sparse features -> 2-layer feed-forward -> the same
// dot-product similarity head as DIET (StarSpace-style supervised embeddings).
//
// TfBaseline: dense features only -> 2-block transformer -> softmax
// classifier on the CLS output.

#include <span>
#include <string>
#include <vector>

#include "intentkit/diet.hpp"

namespace intentkit {

struct EmbedBaselineConfig {
  std::size_t hidden_dim = 64;
  std::size_t embed_dim = 32;
  std::size_t n_negatives = 10;
  double loss_temperature = 1.0;

  bool operator==(const EmbedBaselineConfig&) const = default;
};

template <class Real>
class EmbedBaseline {
 public:
  EmbedBaselineConfig config;
  std::size_t sparse_dim = 0;
  std::vector<std::string> intents;

  nn::SparseLinear<Real> hidden;
  nn::Linear<Real> output;
  nn::Param<Real> label_table;

  static EmbedBaseline build(const EmbedBaselineConfig& cfg, std::size_t sparse_dim, std::vector<std::string> intents,
                             std::uint64_t seed) {
    if (sparse_dim == 0) throw ConfigError("embed baseline: requires sparse features");
    if (cfg.hidden_dim == 0 || cfg.embed_dim == 0 || cfg.n_negatives == 0)
      throw ConfigError("embed baseline: dimensions must be positive");
    if (intents.empty()) throw ConfigError("embed baseline: empty intent inventory");
    EmbedBaseline m;
    m.config = cfg;
    m.sparse_dim = sparse_dim;
    m.intents = std::move(intents);
    Rng rng(seed);
    m.hidden = nn::SparseLinear<Real>("sentence_ff.hidden", sparse_dim, cfg.hidden_dim, rng);
    m.output = nn::Linear<Real>("sentence_ff.output", cfg.hidden_dim, cfg.embed_dim, rng);
    m.label_table = nn::Param<Real>("label_table", {m.intents.size(), cfg.embed_dim});
    nn::xavier_uniform(m.label_table, m.intents.size(), cfg.embed_dim, rng);
    return m;
  }

  std::size_t n_negatives() const { return std::min(config.n_negatives, intents.size() - 1); }

  nn::ParamList<Real> params() {
    nn::ParamList<Real> out;
    hidden.collect(out);
    output.collect(out);
    out.push_back(&label_table);
    return out;
  }

  struct Activations {
    std::vector<const SparseVector*> rows;
    nn::Tensor<Real> pre, act, embedding;
  };

  Activations forward(std::span<const FeatureBundle* const> batch) const {
    Activations a;
    for (const auto* f : batch) {
      if (f->sparse_dim != sparse_dim)
        throw DataError("embed baseline: missing or mismatched sparse features");
      a.rows.push_back(&f->cls_sparse);
    }
    a.pre = hidden.forward(a.rows);
    a.act = nn::relu(a.pre);
    a.embedding = output.forward(a.act);
    return a;
  }

  std::vector<Real> embed(const FeatureBundle& f) const {
    const FeatureBundle* one[] = {&f};
    auto a = forward(one);
    return {a.embedding.row(0), a.embedding.row(0) + config.embed_dim};
  }

  Prediction predict(const FeatureBundle& f, const std::vector<text::Token>& = {}, std::string_view = {}) const {
    auto e = embed(f);
    Prediction p;
    p.ranking = rank_intents(
        intents, similarity::confidences(similarity::scores<Real>(e, label_table.value), config.loss_temperature));
    p.cls_embedding.assign(e.begin(), e.end());
    return p;
  }

  double batch_loss(std::span<const Example> batch, Rng* rng, bool with_grad = true) {
    if (intents.size() < 2) throw ConfigError("intent_loss: single-intent inventory has no negatives");
    std::vector<const FeatureBundle*> feats;
    for (const auto& e : batch) feats.push_back(e.features);
    auto a = forward(feats);
    const std::size_t B = batch.size(), E = config.embed_dim;
    const double w = 1.0 / static_cast<double>(B);
    nn::Tensor<Real> d_emb({B, E});
    Rng fallback(0);
    Rng& neg_rng = rng ? *rng : fallback;
    double total = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const auto negatives = similarity::sample_negatives(intents.size(), batch[b].intent, n_negatives(), neg_rng);
      std::span<const Real> emb(a.embedding.row(b), E);
      total += w * similarity::sampled_softmax_loss(emb, label_table.value, batch[b].intent, negatives,
                                                    config.loss_temperature, with_grad ? d_emb.row(b) : nullptr,
                                                    with_grad ? &label_table.grad : nullptr, w);
    }
    if (with_grad) {
      auto d_act = output.backward(a.act, d_emb);
      auto d_pre = nn::relu_backward(a.pre, d_act);
      hidden.backward(a.rows, d_pre);
    }
    return total;
  }

  /// One optimizer-free training step: loss with gradients for a single utterance.
  double train_step(const FeatureBundle& f, std::size_t gold, Rng& rng) {
    Example e{&f, gold, {}};
    return batch_loss(std::span<const Example>(&e, 1), &rng, true);
  }
};

// ---------------------------------------------------------------------------

struct TfBaselineConfig {
  std::size_t transformer_dim = 128;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ff_dim = 256;
  double dropout = 0.1;
  std::size_t max_len = 64;

  bool operator==(const TfBaselineConfig&) const = default;
};

template <class Real>
class TfBaseline {
 public:
  TfBaselineConfig config;
  std::size_t dense_dim = 0;
  std::vector<std::string> intents;

  nn::Linear<Real> input_proj;
  nn::Param<Real> positional;
  nn::TransformerEncoder<Real> encoder;
  nn::Linear<Real> classifier;

  static TfBaseline build(const TfBaselineConfig& cfg, std::size_t dense_dim, std::vector<std::string> intents,
                          std::uint64_t seed) {
    if (dense_dim == 0) throw ConfigError("tf baseline: requires dense features (a dense provider)");
    if (cfg.layers < 1 || cfg.transformer_dim == 0 || cfg.heads == 0 || cfg.transformer_dim % cfg.heads != 0 ||
        cfg.ff_dim == 0 || cfg.max_len == 0)
      throw ConfigError("tf baseline: invalid transformer dimensions");
    if (intents.empty()) throw ConfigError("tf baseline: empty intent inventory");
    TfBaseline m;
    m.config = cfg;
    m.dense_dim = dense_dim;
    m.intents = std::move(intents);
    Rng rng(seed);
    const std::size_t D = cfg.transformer_dim;
    m.input_proj = nn::Linear<Real>("input_proj", dense_dim, D, rng);
    m.positional = nn::Param<Real>("positional", {cfg.max_len + 1, D});
    nn::xavier_uniform(m.positional, cfg.max_len + 1, D, rng);
    m.encoder = nn::TransformerEncoder<Real>("encoder", cfg.layers, D, cfg.heads, cfg.ff_dim, cfg.dropout, rng);
    m.classifier = nn::Linear<Real>("classifier", D, m.intents.size(), rng);
    return m;
  }

  nn::ParamList<Real> params() {
    nn::ParamList<Real> out;
    input_proj.collect(out);
    out.push_back(&positional);
    encoder.collect(out);
    classifier.collect(out);
    return out;
  }

  struct Activations {
    std::size_t batch = 0, steps = 0;
    std::vector<std::size_t> lengths;
    nn::Tensor<Real> dense_in;  // [B, S, dense]
    nn::Mask mask;
    nn::EncoderCache<Real> enc;
    nn::Tensor<Real> cls_hidden;  // [B, D]
    nn::Tensor<Real> logits;      // [B, |intents|]
  };

  Activations forward(std::span<const FeatureBundle* const> batch, Rng* rng) const {
    Activations a;
    const std::size_t B = batch.size(), D = config.transformer_dim;
    a.batch = B;
    a.lengths.resize(B);
    std::size_t S = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const auto& f = *batch[b];
      if (f.dense_dim != dense_dim || f.cls_dense.size() != dense_dim)
        throw DataError("tf baseline: missing or mismatched dense features");
      a.lengths[b] = std::min(f.length(), config.max_len);
      S = std::max(S, a.lengths[b] + 1);
    }
    a.steps = S;
    a.mask.assign(B * S, 0);
    a.dense_in = nn::Tensor<Real>({B, S, dense_dim});
    for (std::size_t b = 0; b < B; ++b) {
      const auto& f = *batch[b];
      for (std::size_t t = 0; t <= a.lengths[b]; ++t) {
        const std::size_t r = b * S + t;
        a.mask[r] = 1;
        const std::vector<float>* src = nullptr;
        if (t == a.lengths[b]) {
          src = &f.cls_dense;
        } else if (!f.token_dense.empty()) {
          src = &f.token_dense[t];
        }
        if (src)
          for (std::size_t i = 0; i < dense_dim; ++i) a.dense_in.row(r)[i] = static_cast<Real>((*src)[i]);
      }
    }
    nn::Tensor<Real> x = input_proj.forward(a.dense_in);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t <= a.lengths[b]; ++t) {
        const Real* pos = positional.value.row(t == a.lengths[b] ? config.max_len : t);
        for (std::size_t i = 0; i < D; ++i) x.row(b * S + t)[i] += pos[i];
      }
    nn::Tensor<Real> h = encoder.forward(x, a.mask, rng, a.enc);
    a.cls_hidden = nn::Tensor<Real>({B, D});
    for (std::size_t b = 0; b < B; ++b) std::copy_n(h.row(b * S + a.lengths[b]), D, a.cls_hidden.row(b));
    a.logits = classifier.forward(a.cls_hidden);
    return a;
  }

  void backward(const Activations& a, const nn::Tensor<Real>& d_logits) {
    const std::size_t B = a.batch, S = a.steps, D = config.transformer_dim;
    nn::Tensor<Real> d_cls = classifier.backward(a.cls_hidden, d_logits);
    nn::Tensor<Real> dh({B, S, D});
    for (std::size_t b = 0; b < B; ++b) std::copy_n(d_cls.row(b), D, dh.row(b * S + a.lengths[b]));
    nn::Tensor<Real> dx = encoder.backward(a.enc, dh);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t <= a.lengths[b]; ++t)
        nn::kernel::axpy(positional.grad.row(t == a.lengths[b] ? config.max_len : t), dx.row(b * S + t), Real(1), D);
    for (std::size_t r = 0; r < B * S; ++r)
      if (!a.mask[r]) std::fill_n(dx.row(r), D, Real(0));
    input_proj.backward(a.dense_in, dx, false);
  }

  std::vector<double> confidences(const FeatureBundle& f) const {
    const FeatureBundle* one[] = {&f};
    auto a = forward(one, nullptr);
    std::vector<double> p(a.logits.row(0), a.logits.row(0) + intents.size());
    nn::softmax_inplace(p);
    return p;
  }

  Prediction predict(const FeatureBundle& f, const std::vector<text::Token>& = {}, std::string_view = {}) const {
    const FeatureBundle* one[] = {&f};
    auto a = forward(one, nullptr);
    std::vector<double> p(a.logits.row(0), a.logits.row(0) + intents.size());
    nn::softmax_inplace(p);
    Prediction out;
    out.ranking = rank_intents(intents, p);
    out.cls_embedding.assign(a.cls_hidden.row(0), a.cls_hidden.row(0) + config.transformer_dim);
    return out;
  }

  /// Mean softmax cross-entropy over the batch.
  double batch_loss(std::span<const Example> batch, Rng* rng, bool with_grad = true) {
    std::vector<const FeatureBundle*> feats;
    for (const auto& e : batch) feats.push_back(e.features);
    auto a = forward(feats, rng);
    const std::size_t B = batch.size(), C = intents.size();
    const double w = 1.0 / static_cast<double>(B);
    nn::Tensor<Real> d_logits({B, C});
    double total = 0;
    std::vector<double> p(C);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) p[c] = a.logits.row(b)[c];
      total += w * (nn::log_sum_exp(p) - p[batch[b].intent]);
      nn::softmax_inplace(p);
      for (std::size_t c = 0; c < C; ++c)
        d_logits.row(b)[c] = static_cast<Real>(w * (p[c] - (c == batch[b].intent ? 1.0 : 0.0)));
    }
    if (with_grad) backward(a, d_logits);
    return total;
  }

  double train_step(const FeatureBundle& f, std::size_t gold, Rng* rng) {
    Example e{&f, gold, {}};
    return batch_loss(std::span<const Example>(&e, 1), rng, true);
  }
};

}  // namespace intentkit
