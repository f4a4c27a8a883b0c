#include <gtest/gtest.h>

#include <cmath>

#include "intentkit/baselines.hpp"

using namespace intentkit;

namespace {

struct Toy {
  SparseSpec spec;
  DenseProvider provider = DenseProvider::hashed(8, 1);
  std::vector<std::vector<std::string>> tokens = {
      {"yes"}, {"yeah", "sure"}, {"no"}, {"nope", "never"}, {"three", "stars"}, {"four", "birds"}};
  std::vector<std::size_t> labels = {0, 0, 1, 1, 2, 2};
  std::vector<FeatureBundle> feats;

  explicit Toy(bool dense = true) {
    spec = fit_sparse(tokens, FeatureConfig{});
    for (const auto& t : tokens) feats.push_back(featurize(spec, dense ? &provider : nullptr, t, ""));
  }

  std::vector<Example> batch() const {
    std::vector<Example> out;
    for (std::size_t i = 0; i < feats.size(); ++i) out.push_back({&feats[i], labels[i], {}});
    return out;
  }
};

const std::vector<std::string> kIntents = {"affirm", "deny", "counting"};

TfBaselineConfig small_tf() { return {.transformer_dim = 8, .heads = 2, .layers = 1, .ff_dim = 16, .dropout = 0.0, .max_len = 8}; }

}  // namespace

TEST(TfBaseline, EqualLogitsGiveLogIntentCount) {
  Toy toy;
  auto m = TfBaseline<double>::build(small_tf(), 8, kIntents, 1);
  m.classifier.weight.value.fill(0);
  m.classifier.bias.value.fill(0);
  auto batch = toy.batch();
  EXPECT_NEAR(m.batch_loss(batch, nullptr, false), std::log(3.0), 1e-12);
  for (const auto& r : m.predict(toy.feats[0]).ranking) EXPECT_NEAR(r.confidence, 1.0 / 3, 1e-12);
}

TEST(TfBaseline, IgnoresSparseFeatures) {
  Toy toy;
  auto m = TfBaseline<double>::build(small_tf(), 8, kIntents, 1);
  FeatureBundle f = toy.feats[1];
  auto before = m.confidences(f);
  for (auto& row : f.token_sparse) row.clear();
  f.cls_sparse = {0, 1, 2};
  EXPECT_EQ(m.confidences(f), before);
}

TEST(TfBaseline, RequiresDenseFeatures) {
  Toy sparse_only(false);
  auto m = TfBaseline<double>::build(small_tf(), 8, kIntents, 1);
  EXPECT_THROW(m.predict(sparse_only.feats[0]), DataError);
  EXPECT_THROW(TfBaseline<double>::build(small_tf(), 0, kIntents, 1), ConfigError);
}

TEST(TfBaseline, GradientMatchesFiniteDifferences) {
  Toy toy;
  auto m = TfBaseline<double>::build(small_tf(), 8, kIntents, 2);
  auto batch = toy.batch();
  auto params = m.params();
  auto r = nn::grad_check<double>([&](bool g) { return m.batch_loss(batch, nullptr, g); }, params, 1e-5, 1e-4);
  EXPECT_TRUE(r.passed) << r.worst_param << " " << r.worst_analytic << " vs " << r.worst_numeric;
}

TEST(TfBaseline, LearnsToy) {
  Toy toy;
  auto m = TfBaseline<float>::build(small_tf(), 8, kIntents, 3);
  auto params = m.params();
  nn::AdamState<float> opt(nn::AdamConfig{.lr = 0.01}, params);
  auto batch = toy.batch();
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    m.batch_loss(batch, &rng, true);
    nn::adam_step(opt, params);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < toy.feats.size(); ++i) correct += m.predict(toy.feats[i]).top_intent() == kIntents[toy.labels[i]];
  EXPECT_GE(correct, 6u * 9 / 10);
}

TEST(EmbedBaseline, BagOfFeaturesIsOrderInvariant) {
  Toy toy;
  auto m = EmbedBaseline<double>::build({}, toy.spec.dim(), kIntents, 4);
  auto a = featurize(toy.spec, nullptr, {"three", "stars"}, "");
  auto b = featurize(toy.spec, nullptr, {"stars", "three"}, "");
  EXPECT_EQ(m.embed(a), m.embed(b));
}

TEST(EmbedBaseline, RequiresSparseFeatures) {
  Toy toy;
  EXPECT_THROW(EmbedBaseline<double>::build({}, 0, kIntents, 4), ConfigError);
  auto m = EmbedBaseline<double>::build({}, toy.spec.dim() + 3, kIntents, 4);
  EXPECT_THROW(m.predict(toy.feats[0]), DataError);
}

TEST(EmbedBaseline, GradientMatchesFiniteDifferences) {
  Toy toy;
  auto m = EmbedBaseline<double>::build({.hidden_dim = 6, .embed_dim = 4, .n_negatives = 2}, toy.spec.dim(), kIntents, 5);
  auto batch = toy.batch();
  auto r = nn::grad_check<double>([&](bool g) { return m.batch_loss(batch, nullptr, g); }, m.params(), 1e-6, 1e-4);
  EXPECT_TRUE(r.passed) << r.worst_param << " " << r.worst_analytic << " vs " << r.worst_numeric;
}

TEST(EmbedBaseline, LearnsToy) {
  Toy toy;
  auto m = EmbedBaseline<float>::build({}, toy.spec.dim(), kIntents, 6);
  auto params = m.params();
  nn::AdamState<float> opt(nn::AdamConfig{.lr = 0.01}, params);
  auto batch = toy.batch();
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    m.batch_loss(batch, &rng, true);
    nn::adam_step(opt, params);
  }
  for (std::size_t i = 0; i < toy.feats.size(); ++i) EXPECT_EQ(m.predict(toy.feats[i]).top_intent(), kIntents[toy.labels[i]]);
}
