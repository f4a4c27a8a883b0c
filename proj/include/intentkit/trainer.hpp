#pragma once

// Training loops, class-balanced batching, the runs x k-fold cross-validation
// protocol and the train-on-one-corpus / test-on-another protocol.

#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentkit/baselines.hpp"
#include "intentkit/corpus.hpp"
#include "intentkit/diet.hpp"
#include "intentkit/evaluation.hpp"
#include "intentkit/featurizer.hpp"
#include "intentkit/nn/optim.hpp"

namespace intentkit {

enum class ModelKind { diet, tf_baseline, embed_baseline };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::diet: return "diet";
    case ModelKind::tf_baseline: return "tf_baseline";
    case ModelKind::embed_baseline: return "embed_baseline";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "diet") return ModelKind::diet;
  if (s == "tf_baseline") return ModelKind::tf_baseline;
  if (s == "embed_baseline") return ModelKind::embed_baseline;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected diet, tf_baseline or embed_baseline)");
}

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool balanced_batching = true;
  std::optional<std::size_t> early_stop_patience;  // epochs without training-loss improvement
  ModelKind model_kind = ModelKind::diet;
  double learning_rate = 1e-3;
  DietConfig diet;
  TfBaselineConfig tf;
  EmbedBaselineConfig embed;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (early_stop_patience && *early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (model_kind == ModelKind::diet) diet.validate();
  }
};

inline nlohmann::json to_json(const DietConfig& c) {
  return {{"transformer_dim", c.transformer_dim}, {"heads", c.heads},
          {"layers", c.layers},                   {"ff_dim", c.ff_dim},
          {"dropout", c.dropout},                 {"n_negatives", c.n_negatives},
          {"embed_dim", c.embed_dim},             {"use_sparse", c.use_sparse},
          {"use_dense", c.use_dense},             {"entity_head", c.entity_head},
          {"max_len", c.max_len},                 {"loss_temperature", c.loss_temperature},
          {"entity_weight", c.entity_weight}};
}

inline DietConfig diet_config_from_json(const nlohmann::json& j) {
  DietConfig c;
  c.transformer_dim = j.at("transformer_dim");
  c.heads = j.at("heads");
  c.layers = j.at("layers");
  c.ff_dim = j.at("ff_dim");
  c.dropout = j.at("dropout");
  c.n_negatives = j.at("n_negatives");
  c.embed_dim = j.at("embed_dim");
  c.use_sparse = j.at("use_sparse");
  c.use_dense = j.at("use_dense");
  c.entity_head = j.at("entity_head");
  c.max_len = j.at("max_len");
  c.loss_temperature = j.at("loss_temperature");
  c.entity_weight = j.at("entity_weight");
  return c;
}

inline nlohmann::json to_json(const TfBaselineConfig& c) {
  return {{"transformer_dim", c.transformer_dim}, {"heads", c.heads},     {"layers", c.layers},
          {"ff_dim", c.ff_dim},                   {"dropout", c.dropout}, {"max_len", c.max_len}};
}

inline TfBaselineConfig tf_config_from_json(const nlohmann::json& j) {
  TfBaselineConfig c;
  c.transformer_dim = j.at("transformer_dim");
  c.heads = j.at("heads");
  c.layers = j.at("layers");
  c.ff_dim = j.at("ff_dim");
  c.dropout = j.at("dropout");
  c.max_len = j.at("max_len");
  return c;
}

inline nlohmann::json to_json(const EmbedBaselineConfig& c) {
  return {{"hidden_dim", c.hidden_dim},
          {"embed_dim", c.embed_dim},
          {"n_negatives", c.n_negatives},
          {"loss_temperature", c.loss_temperature}};
}

inline EmbedBaselineConfig embed_config_from_json(const nlohmann::json& j) {
  EmbedBaselineConfig c;
  c.hidden_dim = j.at("hidden_dim");
  c.embed_dim = j.at("embed_dim");
  c.n_negatives = j.at("n_negatives");
  c.loss_temperature = j.at("loss_temperature");
  return c;
}

inline nlohmann::json to_json(const FeatureConfig& c) {
  return {{"ngram_min", c.ngram_min}, {"ngram_max", c.ngram_max}, {"min_freq", c.min_freq},
          {"oov_bucket", c.oov_bucket}};
}

inline FeatureConfig feature_config_from_json(const nlohmann::json& j) {
  FeatureConfig c;
  c.ngram_min = j.at("ngram_min");
  c.ngram_max = j.at("ngram_max");
  c.min_freq = j.at("min_freq");
  c.oov_bucket = j.at("oov_bucket");
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"epochs", c.epochs},
                      {"batch_size", c.batch_size},
                      {"seed", c.seed},
                      {"balanced_batching", c.balanced_batching},
                      {"early_stop_patience", nullptr},
                      {"model_kind", to_string(c.model_kind)},
                      {"learning_rate", c.learning_rate}};
  if (c.early_stop_patience) j["early_stop_patience"] = *c.early_stop_patience;
  switch (c.model_kind) {
    case ModelKind::diet: j["diet"] = to_json(c.diet); break;
    case ModelKind::tf_baseline: j["tf_baseline"] = to_json(c.tf); break;
    case ModelKind::embed_baseline: j["embed_baseline"] = to_json(c.embed); break;
  }
  return j;
}

inline nlohmann::json provider_json(const DenseProvider* p) {
  if (!p) return nullptr;
  return {{"kind", to_string(p->kind())},
          {"dim", p->dim()},
          {"seed", p->seed()},
          {"source", p->source()},
          {"fingerprint", to_hex(p->fingerprint())}};
}

/// Hash of every configuration value and seed that influences a result.
inline std::uint64_t config_fingerprint(const nlohmann::json& canonical) { return fnv1a64(canonical.dump()); }

// ---------------------------------------------------------------------------
// Pipeline: fitted featurizer + frozen model

using AnyModel = std::variant<DietModel<float>, TfBaseline<float>, EmbedBaseline<float>>;

inline bool model_uses_dense(ModelKind kind, const DietConfig& diet) {
  return kind == ModelKind::tf_baseline || (kind == ModelKind::diet && diet.use_dense);
}

/// Engine tokenization; falls back to lowercased whitespace words for punctuation-only text.
inline std::vector<text::Token> utterance_tokens(std::string_view raw) {
  auto toks = text::tokenize_with_offsets(raw);
  if (!toks.empty()) return toks;
  std::size_t pos = 0;
  const std::u32string cps = text::decode_utf8(raw);
  while (pos < cps.size()) {
    while (pos < cps.size() && text::is_space(cps[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < cps.size() && !text::is_space(cps[pos])) ++pos;
    if (pos > start) toks.push_back({text::encode_utf8(text::to_lower(cps.substr(start, pos - start))), start, pos});
  }
  return toks;
}

inline std::vector<std::string> token_texts(const std::vector<text::Token>& toks) {
  std::vector<std::string> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

struct Pipeline {
  ModelKind kind = ModelKind::diet;
  FeatureConfig feature_config;
  SparseSpec spec;
  std::shared_ptr<const DenseProvider> provider;  // null when the model uses no dense features
  AnyModel model;

  const DenseProvider* dense() const { return provider.get(); }

  FeatureBundle features(std::string_view raw) const {
    const auto toks = utterance_tokens(raw);
    if (toks.empty()) throw DataError("utterance has no tokens: \"" + std::string(raw) + "\"");
    return featurize(spec, dense(), token_texts(toks), raw);
  }

  std::vector<std::string> intents() const {
    return std::visit([](const auto& m) { return m.intents; }, model);
  }

  Prediction predict(std::string_view raw) const {
    const auto toks = utterance_tokens(raw);
    if (toks.empty()) throw DataError("utterance has no tokens: \"" + std::string(raw) + "\"");
    const FeatureBundle f = featurize(spec, dense(), token_texts(toks), raw);
    return std::visit([&](const auto& m) { return m.predict(f, toks, raw); }, model);
  }
};

// ---------------------------------------------------------------------------
// Batching

/// Batches of dataset positions for one epoch, ceil(N / batch_size) of them.
/// Balanced mode gives every class at least one slot per batch when
/// batch_size >= C (classes take turns otherwise) and splits the remaining
/// slots in proportion to class size; each class is drawn from its own
/// shuffled queue that is reshuffled when exhausted, so minority classes are
/// oversampled.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& labels,
                                                          std::size_t n_classes, std::size_t batch_size,
                                                          bool balanced, Rng& rng) {
  const std::size_t N = labels.size();
  std::vector<std::vector<std::size_t>> batches;
  if (N == 0) return batches;
  const std::size_t bs = std::min(batch_size, N);
  const std::size_t n_batches = (N + bs - 1) / bs;
  if (!balanced) {
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < n_batches; ++b)
      batches.emplace_back(order.begin() + b * bs, order.begin() + std::min(N, (b + 1) * bs));
    return batches;
  }

  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < N; ++i) members.at(labels[i]).push_back(i);
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (!members[c].empty()) present.push_back(c);
  const std::size_t C = present.size();
  std::vector<std::size_t> cursor(n_classes, 0);
  for (auto c : present) std::shuffle(members[c].begin(), members[c].end(), rng);
  auto draw = [&](std::size_t c) {
    if (cursor[c] == members[c].size()) {
      std::shuffle(members[c].begin(), members[c].end(), rng);
      cursor[c] = 0;
    }
    return members[c][cursor[c]++];
  };

  // Fixed per-batch quota (largest remainder for the proportional part).
  std::vector<std::size_t> quota(C, 0);
  if (bs >= C) {
    const std::size_t extra = bs - C;
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t given = 0;
    for (std::size_t k = 0; k < C; ++k) {
      const double share = static_cast<double>(extra) * members[present[k]].size() / static_cast<double>(N);
      quota[k] = 1 + static_cast<std::size_t>(share);
      given += static_cast<std::size_t>(share);
      rem.push_back({share - std::floor(share), k});
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; given < extra; ++r, ++given) ++quota[rem[r].second];
  }

  std::vector<std::size_t> rotation(present);
  std::shuffle(rotation.begin(), rotation.end(), rng);
  std::size_t turn = 0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    std::vector<std::size_t> batch;
    if (bs >= C) {
      for (std::size_t k = 0; k < C; ++k)
        for (std::size_t q = 0; q < quota[k]; ++q) batch.push_back(draw(present[k]));
    } else {
      for (std::size_t q = 0; q < bs; ++q) batch.push_back(draw(rotation[turn++ % C]));
    }
    std::shuffle(batch.begin(), batch.end(), rng);
    batches.push_back(std::move(batch));
  }
  return batches;
}

/// Trailing moving average of the loss history.
inline std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window) {
  std::vector<double> out;
  if (window == 0) return out;
  double sum = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    if (i >= window) sum -= xs[i - window];
    out.push_back(sum / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  Pipeline pipeline;
  std::vector<double> loss_history;  // mean batch loss per epoch
  std::vector<std::string> warnings;
};

namespace detail {

template <class Model>
void fit_model(Model& model, const std::vector<Example>& examples, const std::vector<std::size_t>& labels,
               std::size_t n_classes, const TrainConfig& cfg, TrainResult& result) {
  auto params = model.params();
  nn::AdamState<float> adam(nn::AdamConfig{.lr = cfg.learning_rate}, params);
  Rng batch_rng(derive_seed(cfg.seed, 2));
  Rng train_rng(derive_seed(cfg.seed, 3));
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = make_batches(labels, n_classes, cfg.batch_size, cfg.balanced_batching, batch_rng);
    double epoch_loss = 0;
    std::vector<Example> batch;
    for (const auto& idx : batches) {
      batch.clear();
      for (auto i : idx) batch.push_back(examples[i]);
      const double loss = model.batch_loss(batch, &train_rng, true);
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
      nn::adam_step(adam, params);
      epoch_loss += loss;
    }
    epoch_loss /= static_cast<double>(batches.size());
    result.loss_history.push_back(epoch_loss);
    if (cfg.early_stop_patience) {
      if (epoch_loss < best) {
        best = epoch_loss;
        stale = 0;
      } else if (++stale >= *cfg.early_stop_patience) {
        break;
      }
    }
  }
}

}  // namespace detail

/// Fits the featurizer on `ds` only, builds the configured model and trains it.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, const FeatureConfig& feat_cfg,
                         std::shared_ptr<const DenseProvider> provider) {
  cfg.validate();
  if (ds.empty()) throw DataError("train: empty dataset");
  if (ds.intents().size() < 2)
    throw DataError("train: dataset has a single intent ('" + *ds.intents().begin() + "'); at least two are required");
  const bool dense = model_uses_dense(cfg.model_kind, cfg.diet);
  if (dense && !provider)
    throw ConfigError(std::string(to_string(cfg.model_kind)) + " requires a dense provider (got none)");

  TrainResult result;
  Pipeline& pipe = result.pipeline;
  pipe.kind = cfg.model_kind;
  pipe.feature_config = feat_cfg;
  pipe.provider = dense ? std::move(provider) : nullptr;

  std::vector<std::vector<text::Token>> tokens;
  std::vector<std::vector<std::string>> token_strings;
  for (const auto& u : ds.utterances()) {
    tokens.push_back(utterance_tokens(u.text));
    if (tokens.back().empty()) throw DataError("utterance '" + u.id + "' has no tokens");
    token_strings.push_back(token_texts(tokens.back()));
  }
  pipe.spec = fit_sparse(token_strings, feat_cfg);
  if (cfg.model_kind != ModelKind::embed_baseline) {
    const std::size_t max_len = cfg.model_kind == ModelKind::diet ? cfg.diet.max_len : cfg.tf.max_len;
    const auto longer = std::count_if(token_strings.begin(), token_strings.end(),
                                      [&](const auto& t) { return t.size() > max_len; });
    if (longer > 0)
      result.warnings.push_back(std::to_string(longer) + " utterance(s) exceed max_len=" + std::to_string(max_len) +
                                " tokens and are truncated");
  }

  std::vector<FeatureBundle> bundles;
  bundles.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    bundles.push_back(featurize(pipe.spec, pipe.dense(), token_strings[i], ds[i].text));

  const std::vector<std::string> intents(ds.intents().begin(), ds.intents().end());
  std::map<std::string, std::size_t> intent_index;
  for (std::size_t i = 0; i < intents.size(); ++i) intent_index[intents[i]] = i;
  std::vector<std::size_t> labels;
  for (const auto& u : ds.utterances()) labels.push_back(intent_index.at(u.intent));

  std::vector<Example> examples(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) examples[i] = {&bundles[i], labels[i], {}};

  const std::uint64_t model_seed = derive_seed(cfg.seed, 1);
  switch (cfg.model_kind) {
    case ModelKind::diet: {
      DietConfig dc = cfg.diet;
      std::vector<std::string> tagset;
      if (dc.entity_head) {
        if (ds.has_entities()) {
          tagset = crf::bio_tagset({ds.entity_types().begin(), ds.entity_types().end()});
        } else {
          dc.entity_head = false;
          result.warnings.push_back("training data has no entity annotations; entity head disabled");
        }
      }
      pipe.model.emplace<DietModel<float>>(DietModel<float>::build(
          dc, pipe.spec.dim(), pipe.dense() ? pipe.dense()->dim() : 0, intents, tagset, model_seed));
      auto& m = std::get<DietModel<float>>(pipe.model);
      if (dc.entity_head)
        for (std::size_t i = 0; i < ds.size(); ++i) examples[i].tags = bio_tags(tokens[i], ds[i].entities, m.tagset);
      detail::fit_model(m, examples, labels, intents.size(), cfg, result);
      break;
    }
    case ModelKind::tf_baseline: {
      pipe.model.emplace<TfBaseline<float>>(TfBaseline<float>::build(cfg.tf, pipe.dense()->dim(), intents, model_seed));
      detail::fit_model(std::get<TfBaseline<float>>(pipe.model), examples, labels, intents.size(), cfg, result);
      break;
    }
    case ModelKind::embed_baseline: {
      pipe.model.emplace<EmbedBaseline<float>>(
          EmbedBaseline<float>::build(cfg.embed, pipe.spec.dim(), intents, model_seed));
      detail::fit_model(std::get<EmbedBaseline<float>>(pipe.model), examples, labels, intents.size(), cfg, result);
      break;
    }
  }
  return result;
}

inline std::vector<std::string> predict_labels(const Pipeline& p, const Dataset& ds) {
  std::vector<std::string> out;
  out.reserve(ds.size());
  for (const auto& u : ds.utterances()) out.push_back(p.predict(u.text).top_intent());
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CVRun {
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold_of;       // dataset index -> fold
  std::vector<double> fold_scores;        // micro-F1 per test fold
  std::vector<std::string> predictions;   // dataset index -> predicted intent
  std::vector<std::size_t> predicted_by;  // dataset index -> fold whose model predicted it
  double micro_f1 = 0;                    // over the pooled predictions
};

struct CVReport {
  ModelKind model_kind = ModelKind::diet;
  std::size_t folds = 0;
  std::size_t runs = 0;
  std::uint64_t base_seed = 0;
  std::vector<CVRun> run_results;
  double mean_micro_f1 = 0;
  double std_micro_f1 = 0;    // population std over the per-run scores
  double std_over_folds = 0;  // population std over every fold score, for reference
  std::uint64_t config_fingerprint = 0;
  std::uint64_t dataset_fingerprint = 0;
  EvalReport pooled;  // every run's predictions concatenated
  std::vector<std::string> warnings;
};

/// Runs per-fold jobs on up to `threads` workers; results are stored by index.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < n;) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline nlohmann::json cv_canonical(const Dataset& ds, std::size_t k, std::size_t runs, const TrainConfig& cfg,
                                   const FeatureConfig& feat_cfg, const DenseProvider* provider) {
  return {{"protocol", "cross_validate"}, {"folds", k},
          {"runs", runs},                 {"train", to_json(cfg)},
          {"features", to_json(feat_cfg)}, {"provider", provider_json(provider)},
          {"dataset", to_hex(ds.fingerprint())}};
}

/// Run r uses seed cfg.seed + r for its folds; fold f trains with derive_seed(cfg.seed + r, f + 1).
inline CVReport cross_validate(const Dataset& ds, std::size_t k, std::size_t runs, const TrainConfig& cfg,
                               const FeatureConfig& feat_cfg, std::shared_ptr<const DenseProvider> provider,
                               std::size_t threads = 1) {
  if (k < 2) throw ConfigError("cross_validate: folds must be >= 2");
  if (runs < 1) throw ConfigError("cross_validate: runs must be >= 1");
  cfg.validate();
  const bool dense = model_uses_dense(cfg.model_kind, cfg.diet);
  if (dense && !provider)
    throw ConfigError(std::string(to_string(cfg.model_kind)) + " requires a dense provider (got none)");

  CVReport report;
  report.model_kind = cfg.model_kind;
  report.folds = k;
  report.runs = runs;
  report.base_seed = cfg.seed;
  report.dataset_fingerprint = ds.fingerprint();
  report.config_fingerprint =
      config_fingerprint(cv_canonical(ds, k, runs, cfg, feat_cfg, dense ? provider.get() : nullptr));

  std::vector<std::string> gold;
  for (const auto& u : ds.utterances()) gold.push_back(u.intent);
  std::vector<std::string> all_gold, all_pred, all_text;
  std::vector<double> every_fold;
  std::set<std::string> warnings;

  for (std::size_t r = 0; r < runs; ++r) {
    CVRun run;
    run.seed = cfg.seed + r;
    const FoldPlan plan = stratified_kfold(ds, k, run.seed);
    warnings.insert(plan.warnings.begin(), plan.warnings.end());
    run.fold_of = plan.fold_of;
    run.predictions.assign(ds.size(), {});
    run.predicted_by.assign(ds.size(), k);
    run.fold_scores.assign(k, 0.0);
    std::vector<std::vector<std::string>> fold_warnings(k);
    parallel_for(k, threads, [&](std::size_t f) {
      const auto train_idx = plan.train_indices(f);
      const auto test_idx = plan.test_indices(f);
      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = derive_seed(run.seed, f + 1);
      auto trained = train(ds.subset(train_idx), fold_cfg, feat_cfg, provider);
      fold_warnings[f] = trained.warnings;
      std::vector<std::string> g, p;
      for (auto i : test_idx) {
        run.predictions[i] = trained.pipeline.predict(ds[i].text).top_intent();
        run.predicted_by[i] = f;
        g.push_back(gold[i]);
        p.push_back(run.predictions[i]);
      }
      run.fold_scores[f] = g.empty() ? 0.0 : micro_f1(g, p);
    });
    for (const auto& w : fold_warnings) warnings.insert(w.begin(), w.end());
    run.micro_f1 = micro_f1(gold, run.predictions);
    every_fold.insert(every_fold.end(), run.fold_scores.begin(), run.fold_scores.end());
    all_gold.insert(all_gold.end(), gold.begin(), gold.end());
    all_pred.insert(all_pred.end(), run.predictions.begin(), run.predictions.end());
    for (const auto& u : ds.utterances()) all_text.push_back(u.text);
    report.run_results.push_back(std::move(run));
  }

  std::vector<double> run_scores;
  for (const auto& r : report.run_results) run_scores.push_back(r.micro_f1);
  std::tie(report.mean_micro_f1, report.std_micro_f1) = mean_std(run_scores);
  report.std_over_folds = mean_std(every_fold).second;
  report.pooled = evaluate(all_gold, all_pred, all_text);
  report.warnings.assign(warnings.begin(), warnings.end());
  return report;
}

inline nlohmann::json to_json(const CVReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.run_results)
    runs.push_back({{"seed", run.seed}, {"micro_f1", run.micro_f1}, {"fold_scores", run.fold_scores}});
  return {{"model_kind", to_string(r.model_kind)},
          {"folds", r.folds},
          {"runs", r.runs},
          {"base_seed", r.base_seed},
          {"mean_micro_f1", r.mean_micro_f1},
          {"std_micro_f1", r.std_micro_f1},
          {"std_over_folds", r.std_over_folds},
          {"per_run", runs},
          {"config_fingerprint", to_hex(r.config_fingerprint)},
          {"dataset_fingerprint", to_hex(r.dataset_fingerprint)},
          {"pooled", to_json(r.pooled)},
          {"warnings", r.warnings}};
}

// ---------------------------------------------------------------------------
// Train on one corpus, test on another

struct TrainTestReport {
  ModelKind model_kind = ModelKind::diet;
  std::size_t runs = 0;
  std::vector<EvalReport> per_run;
  double mean_micro_f1 = 0;
  double std_micro_f1 = 0;
  std::uint64_t config_fingerprint = 0;
  std::uint64_t train_fingerprint = 0;
  std::uint64_t test_fingerprint = 0;
  std::vector<std::string> unseen_test_intents;  // gold labels outside the train inventory
  std::vector<std::string> warnings;
};

/// Run r trains with seed cfg.seed + r. Test rows whose gold intent is unknown
/// to the model stay in and count as errors.
inline TrainTestReport train_test(const Dataset& train_ds, const Dataset& test_ds, std::size_t runs,
                                  const TrainConfig& cfg, const FeatureConfig& feat_cfg,
                                  std::shared_ptr<const DenseProvider> provider, std::size_t threads = 1) {
  if (test_ds.empty()) throw DataError("train_test: empty test set");
  if (runs < 1) throw ConfigError("train_test: runs must be >= 1");
  TrainTestReport report;
  report.model_kind = cfg.model_kind;
  report.runs = runs;
  report.train_fingerprint = train_ds.fingerprint();
  report.test_fingerprint = test_ds.fingerprint();
  const bool dense = model_uses_dense(cfg.model_kind, cfg.diet);
  report.config_fingerprint = config_fingerprint({{"protocol", "train_test"},
                                                  {"runs", runs},
                                                  {"train", to_json(cfg)},
                                                  {"features", to_json(feat_cfg)},
                                                  {"provider", provider_json(dense ? provider.get() : nullptr)},
                                                  {"train_dataset", to_hex(report.train_fingerprint)},
                                                  {"test_dataset", to_hex(report.test_fingerprint)}});
  std::set_difference(test_ds.intents().begin(), test_ds.intents().end(), train_ds.intents().begin(),
                      train_ds.intents().end(), std::back_inserter(report.unseen_test_intents));
  std::vector<std::string> gold, texts;
  for (const auto& u : test_ds.utterances()) {
    gold.push_back(u.intent);
    texts.push_back(u.text);
  }
  report.per_run.resize(runs);
  std::vector<std::vector<std::string>> run_warnings(runs);
  parallel_for(runs, threads, [&](std::size_t r) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + r;
    auto trained = train(train_ds, run_cfg, feat_cfg, provider);
    run_warnings[r] = trained.warnings;
    report.per_run[r] = evaluate(gold, predict_labels(trained.pipeline, test_ds), texts);
  });
  std::set<std::string> warnings;
  for (const auto& w : run_warnings) warnings.insert(w.begin(), w.end());
  report.warnings.assign(warnings.begin(), warnings.end());
  std::vector<double> scores;
  for (const auto& e : report.per_run) scores.push_back(e.micro_f1);
  std::tie(report.mean_micro_f1, report.std_micro_f1) = mean_std(scores);
  return report;
}

inline nlohmann::json to_json(const TrainTestReport& r) {
  nlohmann::json per_run = nlohmann::json::array();
  for (const auto& e : r.per_run) per_run.push_back(to_json(e));
  return {{"model_kind", to_string(r.model_kind)},
          {"runs", r.runs},
          {"mean_micro_f1", r.mean_micro_f1},
          {"std_micro_f1", r.std_micro_f1},
          {"per_run", per_run},
          {"unseen_test_intents", r.unseen_test_intents},
          {"config_fingerprint", to_hex(r.config_fingerprint)},
          {"train_fingerprint", to_hex(r.train_fingerprint)},
          {"test_fingerprint", to_hex(r.test_fingerprint)},
          {"warnings", r.warnings}};
}

}  // namespace intentkit
