#include <gtest/gtest.h>

#include <filesystem>

#include <unistd.h>

#include "intentkit/model_io.hpp"
#include "intentkit/synthetic.hpp"

using namespace intentkit;

namespace {

TrainConfig small(ModelKind kind) {
  TrainConfig c;
  c.model_kind = kind;
  c.epochs = 3;
  c.batch_size = 16;
  c.diet.transformer_dim = c.tf.transformer_dim = 16;
  c.diet.heads = c.tf.heads = 2;
  c.diet.layers = c.tf.layers = 1;
  c.diet.ff_dim = c.tf.ff_dim = 16;
  c.diet.embed_dim = 8;
  c.embed.hidden_dim = 8;
  c.embed.embed_dim = 8;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("intentkit_mio_" + std::to_string(::getpid()) + "_" + name)).string();
}

const std::vector<std::string> kProbe = {"yes please", "i see 7 stars!", "the red flower", "where is my snack",
                                         "zzz unknown words"};

}  // namespace

TEST(ModelIo, ReloadIsBitIdenticalForEveryKind) {
  const auto ds = synthetic::clean_corpus(2, 6);
  auto provider = std::make_shared<DenseProvider>(DenseProvider::hashed(8, 42));
  for (auto kind : {ModelKind::diet, ModelKind::tf_baseline, ModelKind::embed_baseline}) {
    auto res = train(ds, small(kind), FeatureConfig{}, provider);
    const auto path = temp_path(std::string(to_string(kind)) + ".nlum");
    save_pipeline(res.pipeline, path);
    auto back = load_pipeline(path);
    std::filesystem::remove(path);
    EXPECT_EQ(encode_pipeline(back), encode_pipeline(res.pipeline));
    for (const auto& text : kProbe) {
      auto a = res.pipeline.predict(text), b = back.predict(text);
      ASSERT_EQ(a.ranking.size(), b.ranking.size());
      for (std::size_t i = 0; i < a.ranking.size(); ++i) {
        EXPECT_EQ(a.ranking[i].intent, b.ranking[i].intent);
        EXPECT_EQ(a.ranking[i].confidence, b.ranking[i].confidence);  // bit-identical
      }
      EXPECT_EQ(a.entities, b.entities);
    }
  }
}

TEST(ModelIo, TableProviderReloadedFromSource) {
  const auto ds = synthetic::clean_corpus(3, 4);
  auto table = synthetic::centroid_sentence_provider({&ds}, 4, 1.0, 0.3, 5);
  const auto dense_path = temp_path("sent.dnse");
  write_dense_file(table, dense_path);
  auto provider = std::make_shared<DenseProvider>(load_dense_file(dense_path));
  auto res = train(ds, small(ModelKind::tf_baseline), FeatureConfig{}, provider);
  const auto bytes = encode_pipeline(res.pipeline);
  auto back = decode_pipeline(bytes);
  EXPECT_EQ(back.predict(ds[0].text).ranking[0].confidence, res.pipeline.predict(ds[0].text).ranking[0].confidence);
  std::filesystem::remove(dense_path);
  EXPECT_THROW(decode_pipeline(bytes), DataError);  // source gone
}

TEST(ModelIo, RejectsMismatchedProvider) {
  const auto ds = synthetic::clean_corpus(2, 4);
  auto res = train(ds, small(ModelKind::diet), FeatureConfig{}, std::make_shared<DenseProvider>(DenseProvider::hashed(8, 42)));
  const auto bytes = encode_pipeline(res.pipeline);
  auto other_seed = std::make_shared<DenseProvider>(DenseProvider::hashed(8, 43));
  auto other_dim = std::make_shared<DenseProvider>(DenseProvider::hashed(9, 42));
  try {
    decode_pipeline(bytes, other_seed);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("fingerprint"), std::string::npos);
  }
  try {
    decode_pipeline(bytes, other_dim);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension"), std::string::npos);
  }
}

TEST(ModelIo, RejectsCorruptFiles) {
  const auto ds = synthetic::clean_corpus(2, 4);
  auto res = train(ds, small(ModelKind::embed_baseline), FeatureConfig{}, nullptr);
  const auto good = encode_pipeline(res.pipeline);
  EXPECT_NO_THROW(decode_pipeline(good));
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_pipeline(bad), DataError);
  bad = good;
  bad[4] = 9;
  EXPECT_THROW(decode_pipeline(bad), DataError);
  EXPECT_THROW(decode_pipeline(good.substr(0, good.size() - 3)), DataError);
  EXPECT_THROW(decode_pipeline(good + "!"), DataError);
  EXPECT_THROW(decode_pipeline(good.substr(0, 20)), DataError);
  bad = good;
  bad[10] = '#';  // inside the JSON header
  EXPECT_THROW(decode_pipeline(bad), DataError);
  EXPECT_THROW(load_pipeline("/nonexistent/model.nlum"), DataError);
}
