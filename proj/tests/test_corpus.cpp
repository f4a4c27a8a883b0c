#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "intentkit/corpus.hpp"

using namespace intentkit;

namespace {

Dataset parse(const std::string& s) {
  std::istringstream in(s);
  return parse_dataset(in, "test");
}

Dataset make(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::vector<Utterance> u;
  for (std::size_t i = 0; i < rows.size(); ++i) u.push_back({"u" + std::to_string(i), rows[i].first, rows[i].second, {}});
  return Dataset("made", std::move(u));
}

std::string error_of(const std::string& s) {
  try {
    parse(s);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadDataset, ParsesTwoLines) {
  auto ds = parse(R"({"id":"u1","text":"yes","intent":"affirm"}
{"id":"u2","text":"no","intent":"deny"}
)");
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.intents(), (std::set<std::string>{"affirm", "deny"}));
  EXPECT_FALSE(ds.has_entities());
}

TEST(LoadDataset, EmptyFileIsAnError) {
  EXPECT_EQ(error_of(""), "empty dataset");
  EXPECT_EQ(error_of("\n  \n"), "empty dataset");
}

TEST(LoadDataset, SpanOutOfBoundsNamesLine) {
  const auto msg = error_of(R"({"id":"u1","text":"hello","intent":"greet"}
{"id":"u2","text":"hello","intent":"greet","entities":[{"start":0,"end":99,"entity":"x"}]})");
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("out of bounds"), std::string::npos) << msg;
}

TEST(LoadDataset, RejectsBadInput) {
  EXPECT_NE(error_of("{not json}").find("line 1"), std::string::npos);
  EXPECT_NE(error_of(R"({"id":"u1","intent":"a"})").find("\"text\""), std::string::npos);
  EXPECT_NE(error_of(R"({"id":"u1","text":"  ","intent":"a"})").find("empty"), std::string::npos);
  EXPECT_NE(error_of("{\"id\":\"u1\",\"text\":\"a\",\"intent\":\"x\"}\n{\"id\":\"u1\",\"text\":\"b\",\"intent\":\"y\"}")
                .find("duplicate"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"id":"u1","text":"abcdef","intent":"a","entities":[{"start":0,"end":3,"entity":"x"},{"start":2,"end":4,"entity":"y"}]})")
                .find("overlapping"),
            std::string::npos);
}

TEST(LoadDataset, MissingFileNamesPath) {
  try {
    load_dataset("/nonexistent/data.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/data.jsonl"), std::string::npos);
  }
}

TEST(LoadDataset, EntityValueDefaultsToSubstringAndRoundTrips) {
  auto ds = parse(R"({"id":"u1","text":"i see 5 stars","intent":"counting","entities":[{"start":6,"end":7,"entity":"number"}]})");
  ASSERT_EQ(ds[0].entities.size(), 1u);
  EXPECT_EQ(ds[0].entities[0].value, "5");
  std::ostringstream out;
  write_dataset(ds, out);
  auto again = parse(out.str());
  EXPECT_EQ(again.utterances(), ds.utterances());
  EXPECT_EQ(again.fingerprint(), ds.fingerprint());
}

TEST(Stats, SingleUtterance) {
  auto s = compute_stats(make({{"hi", "greet"}}));
  EXPECT_EQ(s.n_samples, 1u);
  EXPECT_EQ(s.vocab_size, 1u);
  EXPECT_EQ(s.min_samples_per_intent, 1u);
  EXPECT_EQ(s.max_samples_per_intent, 1u);
  EXPECT_DOUBLE_EQ(s.avg_samples_per_intent, 1.0);
  EXPECT_EQ(s.min_words_per_sample, 1u);
  EXPECT_EQ(s.max_words_per_sample, 1u);
  EXPECT_DOUBLE_EQ(s.avg_words_per_sample, 1.0);
}

TEST(Stats, RawWordsAndLowercasedVocab) {
  auto s = compute_stats(make({{"Yes yes!", "affirm"}, {"YES", "affirm"}, {"no", "deny"}}));
  EXPECT_EQ(s.total_words, 4u);
  EXPECT_EQ(s.vocab_size, 3u);  // yes, yes!, no
  EXPECT_EQ(s.max_samples_per_intent, 2u);
}

TEST(Stats, PaperRatios) {
  EXPECT_DOUBLE_EQ(round_to(10141.0 / 1927.0, 2), 5.26);
  EXPECT_DOUBLE_EQ(round_to(1927.0 / 14.0, 1), 137.6);
}

TEST(Stats, PermutationInvariantAndConsistent) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words = {"a", "b", "Cc", "dd!", "e"};
  const std::vector<std::string> labels = {"x", "y", "z"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<std::string, std::string>> rows;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) {
      std::string t;
      const int w = 1 + static_cast<int>(rng() % 5);
      for (int k = 0; k < w; ++k) t += words[rng() % words.size()] + " ";
      rows.push_back({t, labels[rng() % labels.size()]});
    }
    const auto a = compute_stats(make(rows));
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto b = compute_stats(make(rows));
    EXPECT_EQ(a, b);
    std::size_t sum = 0;
    for (const auto& [_, c] : class_distribution(make(rows))) sum += c;
    EXPECT_EQ(sum, a.n_samples);
    EXPECT_LE(a.vocab_size, a.total_words);
    EXPECT_LE(static_cast<double>(a.min_words_per_sample), a.avg_words_per_sample);
    EXPECT_LE(a.avg_words_per_sample, static_cast<double>(a.max_words_per_sample));
    EXPECT_LE(static_cast<double>(a.min_samples_per_intent), a.avg_samples_per_intent);
    EXPECT_LE(a.avg_samples_per_intent, static_cast<double>(a.max_samples_per_intent));
  }
}

TEST(Stats, JsonRoundTrip) {
  auto s = compute_stats(make({{"one two", "a"}, {"three", "b"}, {"four five six", "b"}}));
  EXPECT_EQ(stats_from_json(nlohmann::json::parse(to_json(s).dump())), s);
}

TEST(ClassDistribution, Counts) {
  auto d = class_distribution(make({{"y", "affirm"}, {"y", "affirm"}, {"y", "affirm"}, {"n", "deny"}}));
  EXPECT_EQ(d, (std::map<std::string, std::size_t>{{"affirm", 3}, {"deny", 1}}));
}

TEST(Folds, TwoByTwo) {
  auto ds = make({{"a", "x"}, {"b", "x"}, {"c", "y"}, {"d", "y"}});
  auto plan = stratified_kfold(ds, 2, 5);
  for (std::size_t f = 0; f < 2; ++f) {
    auto test = plan.test_indices(f);
    ASSERT_EQ(test.size(), 2u);
    EXPECT_NE(ds[test[0]].intent, ds[test[1]].intent);
  }
  EXPECT_TRUE(plan.warnings.empty());
}

TEST(Folds, Deterministic) {
  auto ds = make({{"a", "x"}, {"b", "x"}, {"c", "y"}, {"d", "y"}, {"e", "y"}, {"f", "x"}});
  EXPECT_EQ(stratified_kfold(ds, 3, 9).assignment, stratified_kfold(ds, 3, 9).assignment);
}

TEST(Folds, RareClassRoundRobin) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({"c" + std::to_string(i), "common"});
  for (int i = 0; i < 3; ++i) rows.push_back({"r" + std::to_string(i), "rare"});
  auto ds = make(rows);
  auto plan = stratified_kfold(ds, 10, 1);
  std::vector<std::size_t> sizes(10, 0);
  std::set<std::size_t> rare_folds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ++sizes[plan.fold_of[i]];
    if (ds[i].intent == "rare") rare_folds.insert(plan.fold_of[i]);
  }
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 2u), 3);
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 1u), 7);
  EXPECT_EQ(rare_folds.size(), 3u);
  ASSERT_EQ(plan.warnings.size(), 1u);
  EXPECT_NE(plan.warnings[0].find("rare"), std::string::npos);
}

TEST(Folds, InvalidK) {
  auto ds = make({{"a", "x"}, {"b", "y"}});
  EXPECT_THROW(stratified_kfold(ds, 1, 0), ConfigError);
  EXPECT_THROW(stratified_kfold(ds, 3, 0), ConfigError);
}

TEST(Folds, PartitionAndBalanceProperty) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng() % 60;
    const std::size_t classes = 1 + rng() % 6;
    std::vector<std::pair<std::string, std::string>> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back({"t", "c" + std::to_string(rng() % classes)});
    auto ds = make(rows);
    const std::size_t k = 2 + rng() % std::min<std::size_t>(9, n - 1);
    auto plan = stratified_kfold(ds, k, rng());
    std::vector<std::size_t> seen(n, 0);
    std::vector<std::size_t> total(k, 0);
    std::map<std::string, std::vector<std::size_t>> per_class;
    for (std::size_t f = 0; f < k; ++f) {
      auto test = plan.test_indices(f);
      auto train = plan.train_indices(f);
      EXPECT_EQ(test.size() + train.size(), n);
      for (auto i : test) {
        ++seen[i];
        EXPECT_EQ(std::find(train.begin(), train.end(), i), train.end());
      }
      total[f] = test.size();
    }
    for (auto c : seen) EXPECT_EQ(c, 1u);
    EXPECT_LE(*std::max_element(total.begin(), total.end()) - *std::min_element(total.begin(), total.end()), 1u);
    for (std::size_t i = 0; i < n; ++i) {
      auto& v = per_class[ds[i].intent];
      v.resize(k, 0);
      ++v[plan.fold_of[i]];
    }
    for (const auto& [_, v] : per_class)
      EXPECT_LE(*std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()), 1u);
  }
}

TEST(Dataset, DuplicateIdsRejected) {
  EXPECT_THROW(Dataset("d", {{"a", "x", "i", {}}, {"a", "y", "i", {}}}), DataError);
}
