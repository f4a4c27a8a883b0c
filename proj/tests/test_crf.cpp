#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "intentkit/crf.hpp"

using namespace intentkit;
using namespace intentkit::crf;

namespace {

Scores random_scores(std::size_t T, std::size_t L, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Scores s(T, L);
  for (auto& v : s.emissions) v = g(rng);
  for (auto& v : s.transitions) v = g(rng);
  return s;
}

// Every tag sequence of length T over L tags.
std::vector<std::vector<std::size_t>> all_paths(std::size_t T, std::size_t L) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> p(T, 0);
  while (true) {
    out.push_back(p);
    std::size_t i = 0;
    while (i < T && ++p[i] == L) p[i++] = 0;
    if (i == T) break;
  }
  return out;
}

}  // namespace

TEST(Crf, PartitionMatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t T = 1 + rng() % 4, L = 1 + rng() % 4;
    auto s = random_scores(T, L, rng);
    double z = 0;
    for (const auto& p : all_paths(T, L)) z += std::exp(path_score(s, p));
    EXPECT_NEAR(log_partition(s), std::log(z), 1e-9);
  }
}

TEST(Crf, SingleStepIsSoftmax) {
  Scores s(1, 3);
  s.emit(0, 0) = 2;
  s.emit(0, 1) = 1;
  s.emit(0, 2) = 0;
  const std::size_t gold = 0;
  EXPECT_NEAR(std::exp(-nll(s, std::span(&gold, 1))), 0.665, 1e-3);
}

TEST(Crf, ViterbiMatchesBruteForceArgmax) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t T = 1 + rng() % 4, L = 1 + rng() % 4;
    auto s = random_scores(T, L, rng);
    double best = -1e300;
    std::vector<std::size_t> arg;
    for (const auto& p : all_paths(T, L))
      if (const double v = path_score(s, p); v > best) {
        best = v;
        arg = p;
      }
    EXPECT_EQ(viterbi(s), arg);
  }
}

TEST(Crf, ViterbiTiesResolveToOutsideTag) {
  Scores s(4, 5);  // all-zero scores: every path ties
  EXPECT_EQ(viterbi(s), (std::vector<std::size_t>(4, 0)));
}

TEST(Crf, NllIsNonNegative) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 1 + rng() % 6, L = 1 + rng() % 5;
    auto s = random_scores(T, L, rng);
    std::vector<std::size_t> gold(T);
    for (auto& y : gold) y = rng() % L;
    EXPECT_GE(nll(s, gold), -1e-12);
  }
}

TEST(Crf, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t T = 1 + rng() % 5, L = 2 + rng() % 3;
    auto s = random_scores(T, L, rng);
    std::vector<std::size_t> gold(T);
    for (auto& y : gold) y = rng() % L;
    const auto g = nll_with_grad(s, gold);
    EXPECT_NEAR(g.nll, nll(s, gold), 1e-12);
    const double h = 1e-6;
    for (std::size_t i = 0; i < s.emissions.size(); ++i) {
      auto up = s, down = s;
      up.emissions[i] += h;
      down.emissions[i] -= h;
      EXPECT_NEAR(g.d_emissions[i], (nll(up, gold) - nll(down, gold)) / (2 * h), 1e-6);
    }
    for (std::size_t i = 0; i < s.transitions.size(); ++i) {
      auto up = s, down = s;
      up.transitions[i] += h;
      down.transitions[i] -= h;
      EXPECT_NEAR(g.d_transitions[i], (nll(up, gold) - nll(down, gold)) / (2 * h), 1e-6);
    }
  }
}

TEST(Crf, RejectsBadPaths) {
  Scores s(2, 3);
  std::vector<std::size_t> short_path{0};
  std::vector<std::size_t> bad_tag{0, 3};
  EXPECT_THROW(nll(s, short_path), ShapeError);
  EXPECT_THROW(nll(s, bad_tag), ShapeError);
}

TEST(Crf, BioTagset) {
  EXPECT_EQ(bio_tagset({"number", "color"}),
            (std::vector<std::string>{"O", "B-number", "I-number", "B-color", "I-color"}));
}
