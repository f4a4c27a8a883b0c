// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "intentkit/crf.hpp"
#include "intentkit/diet.hpp"
#include "intentkit/evaluation.hpp"
#include "intentkit/synthetic.hpp"
#include "intentkit/trainer.hpp"

using namespace intentkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Dataset counted(const std::string& name, const std::vector<std::pair<std::string, std::size_t>>& counts) {
  std::vector<Utterance> u;
  for (const auto& [intent, n] : counts)
    for (std::size_t i = 0; i < n; ++i) u.push_back({name + std::to_string(u.size()), "word " + intent, intent, {}});
  return Dataset(name, std::move(u));
}

/// n samples over `intents` labels, holding `words` whitespace words in total.
Dataset word_fixture(std::size_t n, std::size_t intents, std::size_t words) {
  std::vector<Utterance> u;
  const std::size_t base = words / n, extra = words % n;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (std::size_t w = 0; w < base + (i < extra ? 1 : 0); ++w) text += (w ? " w" : "w") + std::to_string(w);
    u.push_back({"s" + std::to_string(i), text, "intent" + std::to_string(i % intents), {}});
  }
  return Dataset("words", std::move(u));
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

Outcome c1_stats() {
  const auto poc = compute_stats(word_fixture(1927, 14, 10141));
  const auto dep = compute_stats(word_fixture(2115, 12, 10469));
  const bool ok = round_to(poc.avg_words_per_sample, 2) == 5.26 && round_to(dep.avg_words_per_sample, 2) == 4.95 &&
                  round_to(poc.avg_samples_per_intent, 1) == 137.6;
  return {ok, "avg words " + fmt(round_to(poc.avg_words_per_sample, 2)) + " / " +
                  fmt(round_to(dep.avg_words_per_sample, 2)) + ", avg samples " +
                  fmt(round_to(poc.avg_samples_per_intent, 1))};
}

Outcome c2_gains() {
  const auto poc = format_gain(compare_reports({0.9050, 0, 1}, {0.9588, 0, 1}).gain);
  const auto dep = format_gain(compare_reports({0.9243, 0, 2}, {0.9769, 0, 2}).gain);
  return {poc == "+5.38" && dep == "+5.26", poc + " " + dep};
}

Outcome c3_shift() {
  const std::vector<std::string> names = {"intro-meadow", "answer-flowers", "answer-valid", "answer-invalid",
                                          "intro-game",   "help-affirm",    "everyone-understand",
                                          "oscar-understand", "ask-number", "counting", "affirm", "deny",
                                          "next-step",    "out-of-scope"};
  const std::vector<std::size_t> poc = {23, 110, 176, 95, 134, 41, 22, 25, 34, 418, 144, 125, 25, 555};
  const std::vector<std::size_t> dep = {7, 13, 17, 0, 78, 4, 11, 15, 18, 581, 370, 54, 0, 1005};
  std::vector<std::pair<std::string, std::size_t>> a, b;
  for (std::size_t i = 0; i < names.size(); ++i) {
    a.emplace_back(names[i], poc[i]);
    b.emplace_back(names[i], dep[i]);
  }
  const auto r = shift_report(counted("poc", a), counted("dep", b));
  const bool ok = std::abs(r.a.oos_share - 0.288) <= 1e-4 && std::abs(r.b.oos_share - 0.4625) <= 1e-4 &&
                  r.unseen_a_to_b == std::vector<std::string>{"answer-invalid", "next-step"};
  return {ok, "oos " + fmt(r.a.oos_share) + " -> " + fmt(r.b.oos_share) + ", unseen " +
                  std::to_string(r.unseen_a_to_b.size())};
}

Outcome c4_grad() {
  const std::vector<std::vector<std::string>> tokens = {{"yes", "please"}, {"no"}, {"three", "red", "flowers"}};
  const auto spec = fit_sparse(tokens, FeatureConfig{});
  const auto provider = DenseProvider::hashed(4, 9);
  std::vector<FeatureBundle> feats;
  for (const auto& t : tokens) feats.push_back(featurize(spec, &provider, t, ""));
  DietConfig c;
  c.transformer_dim = 8;
  c.heads = 2;
  c.layers = 2;
  c.ff_dim = 8;
  c.embed_dim = 4;
  c.n_negatives = 1;
  c.max_len = 3;
  c.dropout = 0.0;
  const std::vector<Example> batch = {{&feats[0], 0, {0, 0}}, {&feats[1], 1, {0}}, {&feats[2], 2, {1, 2, 0}}};
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = DietModel<double>::build(c, spec.dim(), 4, {"affirm", "deny", "counting"}, {"O", "B-number", "I-number"},
                                      seed);
    auto r = nn::grad_check<double>([&](bool g) { return m.batch_loss(batch, nullptr, g); }, m.params(), 1e-5, 1e-3);
    worst = std::max(worst, r.max_rel_error);
  }
  return {worst < 1e-3, "max rel error " + fmt(worst, 3)};
}

Outcome c5_crf() {
  Rng rng(5);
  std::normal_distribution<double> normal(0.0, 1.5);
  double worst_z = 0, worst_sum = 0;
  bool argmax_ok = true;
  for (std::size_t T = 1; T <= 4; ++T)
    for (std::size_t L = 1; L <= 3; ++L)
      for (int trial = 0; trial < 50; ++trial) {
        crf::Scores s(T, L);
        for (auto& v : s.emissions) v = normal(rng);
        for (auto& v : s.transitions) v = normal(rng);
        std::vector<double> all;
        std::vector<std::vector<std::size_t>> paths;
        std::vector<std::size_t> path(T, 0);
        for (;;) {
          double score = s.trans(s.bos(), path[0]) + s.trans(path[T - 1], s.eos());
          for (std::size_t t = 0; t < T; ++t) score += s.emit(t, path[t]);
          for (std::size_t t = 1; t < T; ++t) score += s.trans(path[t - 1], path[t]);
          all.push_back(score);
          paths.push_back(path);
          std::size_t t = 0;
          while (t < T && ++path[t] == L) path[t++] = 0;
          if (t == T) break;
        }
        const double mx = *std::max_element(all.begin(), all.end());
        double sum = 0;
        for (double v : all) sum += std::exp(v - mx);
        const double z = mx + std::log(sum);
        const double log_z = crf::log_partition(s);
        worst_z = std::max(worst_z, std::abs(log_z - z));
        double psum = 0;
        for (double v : all) psum += std::exp(v - log_z);
        worst_sum = std::max(worst_sum, std::abs(psum - 1.0));
        const auto best = static_cast<std::size_t>(std::max_element(all.begin(), all.end()) - all.begin());
        argmax_ok = argmax_ok && crf::viterbi(s) == paths[best];
      }
  return {worst_z < 1e-6 && worst_sum < 1e-6 && argmax_ok,
          "log Z err " + fmt(worst_z, 2) + ", sum err " + fmt(worst_sum, 2) + ", viterbi " + (argmax_ok ? "exact" : "MISMATCH")};
}

Outcome c6_negatives() {
  Rng rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_intents = 2 + trial % 9, E = 3 + trial % 5;
    std::vector<std::string> intents;
    for (std::size_t i = 0; i < n_intents; ++i) intents.push_back("i" + std::to_string(i));
    DietConfig c;
    c.transformer_dim = 8;
    c.heads = 2;
    c.ff_dim = 8;
    c.embed_dim = E;
    c.n_negatives = n_intents - 1;
    c.loss_temperature = trial % 2 ? 1.0 : 0.5;
    c.use_dense = false;
    auto m = DietModel<double>::build(c, 4, 0, intents, {"O"}, trial);
    for (auto& v : m.label_table.value.data) v = normal(rng);
    std::vector<double> cls(E);
    for (auto& v : cls) v = normal(rng);
    const std::size_t gold = rng() % n_intents;
    std::vector<double> z(n_intents, 0.0);
    for (std::size_t i = 0; i < n_intents; ++i)
      for (std::size_t k = 0; k < E; ++k) z[i] += cls[k] * m.label_table.value.row(i)[k] / c.loss_temperature;
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double v : z) sum += std::exp(v - mx);
    const double ce = mx + std::log(sum) - z[gold];
    worst = std::max(worst, std::abs(m.intent_loss(cls, gold, rng) - ce));
  }
  return {worst < 1e-6, "max abs diff " + fmt(worst, 2)};
}

Outcome c7_metrics() {
  Rng rng(7);
  double worst = 0, worst_trace = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 60, C = 1 + rng() % 8;
    std::vector<std::string> gold(n), pred(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = "c" + std::to_string(rng() % C);
      pred[i] = "c" + std::to_string(rng() % (C + 1));
      hits += gold[i] == pred[i];
    }
    const double f1 = micro_f1(gold, pred);
    worst = std::max(worst, std::abs(f1 - static_cast<double>(hits) / static_cast<double>(n)));
    const auto cm = confusion_matrix(gold, pred);
    worst_trace = std::max(worst_trace, std::abs(static_cast<double>(cm.trace()) / static_cast<double>(cm.total()) - f1));
  }
  return {worst <= 1e-12 && worst_trace <= 1e-12, "f1-accuracy " + fmt(worst, 2) + ", trace/total " + fmt(worst_trace, 2)};
}

TrainConfig embed_small() {
  TrainConfig c;
  c.model_kind = ModelKind::embed_baseline;
  c.epochs = 3;
  c.batch_size = 16;
  c.embed.hidden_dim = 16;
  c.embed.embed_dim = 8;
  return c;
}

Outcome c8_cv() {
  const auto ds = synthetic::clean_corpus(3, 13);
  const std::size_t k = 4;
  bool ok = true;
  std::string why;
  auto fail = [&](const std::string& w) {
    ok = false;
    if (why.empty()) why = w;
  };
  const auto a = cross_validate(ds, k, 2, embed_small(), FeatureConfig{}, nullptr);
  const auto b = cross_validate(ds, k, 2, embed_small(), FeatureConfig{}, nullptr);
  if (to_json(a).dump() != to_json(b).dump()) fail("reports differ");
  for (const auto& run : a.run_results) {
    std::map<std::string, std::vector<std::size_t>> per_class;  // class -> per-fold count
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (run.fold_of[i] >= k) fail("fold out of range");
      if (run.predicted_by[i] != run.fold_of[i] || run.predictions[i].empty()) fail("pooled predictions");
      auto& counts = per_class[ds[i].intent];
      counts.resize(k, 0);
      ++counts[run.fold_of[i]];
    }
    for (const auto& [_, counts] : per_class)
      if (*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) > 1)
        fail("stratification");
    std::size_t covered = 0;
    for (std::size_t f = 0; f < k; ++f) covered += std::count(run.fold_of.begin(), run.fold_of.end(), f);
    if (covered != ds.size()) fail("coverage");
  }
  if (a.pooled.confusion.total() != 2 * ds.size()) fail("pooled size");
  if (cross_validate(ds, k, 1, embed_small(), FeatureConfig{}, nullptr).std_micro_f1 != 0.0) fail("std for one run");
  return {ok, ok ? "disjoint, covering, stratified, byte-identical" : why};
}

TrainConfig bench_config(ModelKind kind) {
  TrainConfig c;
  c.model_kind = kind;
  c.epochs = 30;
  c.learning_rate = 3e-3;
  c.diet.transformer_dim = c.tf.transformer_dim = 48;
  c.diet.ff_dim = c.tf.ff_dim = 96;
  return c;
}

std::shared_ptr<const DenseProvider> bench_provider() {
  return std::make_shared<DenseProvider>(DenseProvider::hashed(32, 42));
}

double diet_cv_mean = -1;

Outcome c9_benchmark() {
  const auto ds = synthetic::clean_corpus(7);
  const auto r = cross_validate(ds, 10, 3, bench_config(ModelKind::diet), FeatureConfig{}, bench_provider());
  diet_cv_mean = r.mean_micro_f1;
  return {r.mean_micro_f1 >= 0.90, "micro-F1 " + format_mean_std(r.mean_micro_f1, r.std_micro_f1)};
}

Outcome c10_trend() {
  const auto ds = synthetic::clean_corpus(7);
  auto provider = std::make_shared<DenseProvider>(synthetic::centroid_sentence_provider({&ds}, 16, 1.0, 0.35, 5));
  double diet = 0, tf = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto plan = stratified_kfold(ds, 5, seed);
    const auto train_ds = ds.subset(plan.train_indices(0)), test_ds = ds.subset(plan.test_indices(0));
    auto cfg = bench_config(ModelKind::diet);
    cfg.seed = seed;
    diet += train_test(train_ds, test_ds, 1, cfg, FeatureConfig{}, provider).mean_micro_f1 / 3;
    cfg.model_kind = ModelKind::tf_baseline;
    tf += train_test(train_ds, test_ds, 1, cfg, FeatureConfig{}, provider).mean_micro_f1 / 3;
  }
  return {diet - tf >= 0.02, "DIET " + format_percent(diet) + " vs TF " + format_percent(tf) + " (" +
                                 format_gain(diet - tf) + ")"};
}

Outcome c11_degradation() {
  const auto ds = synthetic::clean_corpus(7);
  const auto shifted = synthetic::shifted_corpus(11);
  bool ok = true;
  std::string detail;
  for (auto kind : {ModelKind::diet, ModelKind::tf_baseline, ModelKind::embed_baseline}) {
    const auto cfg = bench_config(kind);
    const double in_dist = kind == ModelKind::diet && diet_cv_mean >= 0
                               ? diet_cv_mean
                               : cross_validate(ds, 10, 1, cfg, FeatureConfig{}, bench_provider()).mean_micro_f1;
    const double out = train_test(ds, shifted, 1, cfg, FeatureConfig{}, bench_provider()).mean_micro_f1;
    ok = ok && out < in_dist;
    detail += std::string(detail.empty() ? "" : ", ") + to_string(kind) + " " + format_percent(in_dist) + " -> " +
              format_percent(out);
  }
  return {ok, detail};
}

Outcome c12_padding() {
  const auto ds = synthetic::clean_corpus(12, 4);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& u : ds.utterances()) tokens.push_back(text::tokenize(u.text));
  const auto spec = fit_sparse(tokens, FeatureConfig{});
  const auto provider = DenseProvider::hashed(16, 42);
  std::vector<FeatureBundle> feats;
  for (std::size_t i = 0; i < tokens.size(); ++i) feats.push_back(featurize(spec, &provider, tokens[i], ds[i].text));
  std::vector<std::string> intents(ds.intents().begin(), ds.intents().end());
  DietConfig c;
  c.transformer_dim = 32;
  c.ff_dim = 64;
  c.embed_dim = 16;
  auto m = DietModel<float>::build(c, spec.dim(), 16, intents, {"O", "B-number", "I-number"}, 12);
  std::size_t longest = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].size() > tokens[longest].size()) longest = i;
  double worst = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto solo = m.encode(feats[i]);
    const FeatureBundle* batch[] = {&feats[longest], &feats[i], &feats[(i + 7) % feats.size()]};
    const auto a = m.forward(batch, nullptr);
    std::span<const float> cls(a.cls_vec.row(1), c.embed_dim);
    for (std::size_t k = 0; k < c.embed_dim; ++k) worst = std::max(worst, std::abs(double(cls[k]) - solo.cls_vec[k]));
    const auto p = m.intent_confidences(cls), q = m.intent_confidences(solo.cls_vec);
    for (std::size_t k = 0; k < p.size(); ++k) worst = std::max(worst, std::abs(p[k] - q[k]));
  }
  return {worst < 1e-5, "max diff " + fmt(worst, 2) + " over " + std::to_string(feats.size()) + " utterances"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dataset statistics", c1_stats},          {"score gains", c2_gains},
      {"shift metrics", c3_shift},               {"DIET gradient check", c4_grad},
      {"CRF brute-force oracle", c5_crf},        {"negative sampling equivalence", c6_negatives},
      {"metric identities", c7_metrics},         {"CV protocol invariants", c8_cv},
      {"synthetic benchmark", c9_benchmark},     {"DIET over TF with informative dense", c10_trend},
      {"shift degradation", c11_degradation},    {"padding invariance", c12_padding},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s criterion %zu: %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
