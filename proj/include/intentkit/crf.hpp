#pragma once

// Linear-chain CRF over L tags with explicit BOS/EOS boundary states.
// Transition matrix is (L+2) x (L+2), row = from, column = to; index L is
// BOS and L+1 is EOS. All arithmetic is in log space, in double.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "intentkit/common.hpp"
#include "intentkit/nn/layers.hpp"

namespace intentkit::crf {

struct Scores {
  std::size_t length = 0;            // T
  std::size_t tags = 0;              // L
  std::vector<double> emissions;     // [T, L]
  std::vector<double> transitions;   // [L+2, L+2]

  Scores() = default;
  Scores(std::size_t t, std::size_t l)
      : length(t), tags(l), emissions(t * l, 0.0), transitions((l + 2) * (l + 2), 0.0) {}

  std::size_t bos() const { return tags; }
  std::size_t eos() const { return tags + 1; }
  double emit(std::size_t t, std::size_t j) const { return emissions[t * tags + j]; }
  double& emit(std::size_t t, std::size_t j) { return emissions[t * tags + j]; }
  double trans(std::size_t from, std::size_t to) const { return transitions[from * (tags + 2) + to]; }
  double& trans(std::size_t from, std::size_t to) { return transitions[from * (tags + 2) + to]; }
};

inline void check_path(const Scores& s, std::span<const std::size_t> path) {
  if (path.size() != s.length)
    throw ShapeError("crf: tag sequence length " + std::to_string(path.size()) + " != sequence length " +
                     std::to_string(s.length));
  for (auto y : path)
    if (y >= s.tags) throw ShapeError("crf: tag index out of range");
}

/// Emissions plus transitions including the BOS and EOS boundaries.
inline double path_score(const Scores& s, std::span<const std::size_t> path) {
  check_path(s, path);
  if (s.length == 0) return s.trans(s.bos(), s.eos());
  double score = s.trans(s.bos(), path[0]);
  for (std::size_t t = 0; t < s.length; ++t) {
    score += s.emit(t, path[t]);
    if (t > 0) score += s.trans(path[t - 1], path[t]);
  }
  return score + s.trans(path.back(), s.eos());
}

namespace detail {

inline std::vector<double> forward_alpha(const Scores& s) {
  const std::size_t T = s.length, L = s.tags;
  std::vector<double> alpha(T * L);
  std::vector<double> buf(L);
  for (std::size_t j = 0; j < L; ++j) alpha[j] = s.trans(s.bos(), j) + s.emit(0, j);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t i = 0; i < L; ++i) buf[i] = alpha[(t - 1) * L + i] + s.trans(i, j);
      alpha[t * L + j] = nn::log_sum_exp(buf) + s.emit(t, j);
    }
  return alpha;
}

inline std::vector<double> backward_beta(const Scores& s) {
  const std::size_t T = s.length, L = s.tags;
  std::vector<double> beta(T * L);
  std::vector<double> buf(L);
  for (std::size_t i = 0; i < L; ++i) beta[(T - 1) * L + i] = s.trans(i, s.eos());
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) buf[j] = s.trans(i, j) + s.emit(t + 1, j) + beta[(t + 1) * L + j];
      beta[t * L + i] = nn::log_sum_exp(buf);
    }
  return beta;
}

inline double final_lse(const Scores& s, const std::vector<double>& alpha) {
  const std::size_t T = s.length, L = s.tags;
  std::vector<double> buf(L);
  for (std::size_t j = 0; j < L; ++j) buf[j] = alpha[(T - 1) * L + j] + s.trans(j, s.eos());
  return nn::log_sum_exp(buf);
}

}  // namespace detail

/// log Z via the forward algorithm.
inline double log_partition(const Scores& s) {
  if (s.tags == 0) throw ShapeError("crf: empty tag set");
  if (s.length == 0) return s.trans(s.bos(), s.eos());
  return detail::final_lse(s, detail::forward_alpha(s));
}

inline double nll(const Scores& s, std::span<const std::size_t> gold) { return log_partition(s) - path_score(s, gold); }

struct NllGradient {
  double nll = 0;
  std::vector<double> d_emissions;    // [T, L]
  std::vector<double> d_transitions;  // [L+2, L+2]
};

/// NLL and its gradient (expected counts minus gold counts) via forward-backward.
inline NllGradient nll_with_grad(const Scores& s, std::span<const std::size_t> gold) {
  check_path(s, gold);
  const std::size_t T = s.length, L = s.tags, W = L + 2;
  NllGradient g;
  g.d_emissions.assign(T * L, 0.0);
  g.d_transitions.assign(W * W, 0.0);
  if (T == 0) return g;
  const auto alpha = detail::forward_alpha(s);
  const auto beta = detail::backward_beta(s);
  const double log_z = detail::final_lse(s, alpha);
  g.nll = log_z - path_score(s, gold);

  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < L; ++j) {
      const double marginal = std::exp(alpha[t * L + j] + beta[t * L + j] - log_z);
      g.d_emissions[t * L + j] += marginal;
      if (t == 0) g.d_transitions[s.bos() * W + j] += marginal;
      if (t == T - 1) g.d_transitions[j * W + s.eos()] += marginal;
    }
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j)
        g.d_transitions[i * W + j] +=
            std::exp(alpha[(t - 1) * L + i] + s.trans(i, j) + s.emit(t, j) + beta[t * L + j] - log_z);

  g.d_transitions[s.bos() * W + gold[0]] -= 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    g.d_emissions[t * L + gold[t]] -= 1.0;
    if (t > 0) g.d_transitions[gold[t - 1] * W + gold[t]] -= 1.0;
  }
  g.d_transitions[gold[T - 1] * W + s.eos()] -= 1.0;
  return g;
}

/// Highest-scoring path. Ties go to the lower tag index at every step.
inline std::vector<std::size_t> viterbi(const Scores& s) {
  const std::size_t T = s.length, L = s.tags;
  if (T == 0) return {};
  if (L == 0) throw ShapeError("crf: empty tag set");
  std::vector<double> best(T * L);
  std::vector<std::size_t> back(T * L, 0);
  for (std::size_t j = 0; j < L; ++j) best[j] = s.trans(s.bos(), j) + s.emit(0, j);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t arg = 0;
      double top = best[(t - 1) * L] + s.trans(0, j);
      for (std::size_t i = 1; i < L; ++i) {
        const double v = best[(t - 1) * L + i] + s.trans(i, j);
        if (v > top) {
          top = v;
          arg = i;
        }
      }
      best[t * L + j] = top + s.emit(t, j);
      back[t * L + j] = arg;
    }
  std::size_t last = 0;
  double top = best[(T - 1) * L] + s.trans(0, s.eos());
  for (std::size_t j = 1; j < L; ++j) {
    const double v = best[(T - 1) * L + j] + s.trans(j, s.eos());
    if (v > top) {
      top = v;
      last = j;
    }
  }
  std::vector<std::size_t> path(T);
  path[T - 1] = last;
  for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = back[t * L + path[t]];
  return path;
}

// ---------------------------------------------------------------------------
// BIO tag set

/// "O" first, then B-/I- pairs per entity type in the given order.
inline std::vector<std::string> bio_tagset(const std::vector<std::string>& entity_types) {
  std::vector<std::string> tags{"O"};
  for (const auto& e : entity_types) {
    tags.push_back("B-" + e);
    tags.push_back("I-" + e);
  }
  return tags;
}

}  // namespace intentkit::crf
