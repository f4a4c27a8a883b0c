#pragma once

// Dot-product similarity head shared by DIET and the embedding baseline,
// plus the Prediction type every model returns.

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentkit/nn/layers.hpp"

namespace intentkit {

struct RankedIntent {
  std::string intent;
  double confidence = 0;
};

struct EntityPrediction {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string entity;
  std::string value;

  bool operator==(const EntityPrediction&) const = default;
};

struct Prediction {
  std::vector<RankedIntent> ranking;  // non-increasing confidence
  std::vector<EntityPrediction> entities;
  std::vector<std::string> tags;      // per-token BIO tags (DIET with entity head only)
  std::vector<double> cls_embedding;

  const std::string& top_intent() const { return ranking.front().intent; }
  double top_confidence() const { return ranking.front().confidence; }
};

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json j;
  j["intent"] = p.ranking.empty() ? nlohmann::json(nullptr) : nlohmann::json(p.top_intent());
  j["ranking"] = nlohmann::json::array();
  for (const auto& r : p.ranking) j["ranking"].push_back({{"intent", r.intent}, {"confidence", r.confidence}});
  j["entities"] = nlohmann::json::array();
  for (const auto& e : p.entities)
    j["entities"].push_back({{"start", e.start}, {"end", e.end}, {"entity", e.entity}, {"value", e.value}});
  return j;
}

/// Sorts labels by confidence, keeping inventory order among ties.
inline std::vector<RankedIntent> rank_intents(const std::vector<std::string>& inventory,
                                              const std::vector<double>& confidences) {
  std::vector<std::size_t> order(inventory.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidences[a] > confidences[b]; });
  std::vector<RankedIntent> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back({inventory[i], confidences[i]});
  return out;
}

namespace similarity {

/// score(i) = dot(embedding, table[i]).
template <class Real>
std::vector<double> scores(std::span<const Real> embedding, const nn::Tensor<Real>& table) {
  std::vector<double> out(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    double s = 0;
    for (std::size_t d = 0; d < table.cols(); ++d) s += static_cast<double>(embedding[d]) * table.row(i)[d];
    out[i] = s;
  }
  return out;
}

/// softmax(scores / temperature).
inline std::vector<double> confidences(std::vector<double> scores, double temperature) {
  for (auto& s : scores) s /= temperature;
  nn::softmax_inplace(scores);
  return scores;
}

/// `count` distinct labels drawn uniformly from everything except `gold`.
inline std::vector<std::size_t> sample_negatives(std::size_t n_labels, std::size_t gold, std::size_t count, Rng& rng) {
  if (n_labels < 2) throw ConfigError("negative sampling needs at least two intents");
  if (count > n_labels - 1) throw ConfigError("more negatives requested than non-gold intents");
  std::vector<std::size_t> pool;
  pool.reserve(n_labels - 1);
  for (std::size_t i = 0; i < n_labels; ++i)
    if (i != gold) pool.push_back(i);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

/// -log softmax over [gold, negatives...] of score / temperature, at the gold slot.
/// When d_embedding / table_grad are given, adds `weight` * gradient into them.
template <class Real>
double sampled_softmax_loss(std::span<const Real> embedding, const nn::Tensor<Real>& table, std::size_t gold,
                            std::span<const std::size_t> negatives, double temperature, Real* d_embedding = nullptr,
                            nn::Tensor<Real>* table_grad = nullptr, double weight = 1.0) {
  const std::size_t E = table.cols();
  std::vector<std::size_t> cand;
  cand.reserve(negatives.size() + 1);
  cand.push_back(gold);
  cand.insert(cand.end(), negatives.begin(), negatives.end());
  std::vector<double> s(cand.size());
  for (std::size_t c = 0; c < cand.size(); ++c) {
    double v = 0;
    for (std::size_t d = 0; d < E; ++d) v += static_cast<double>(embedding[d]) * table.row(cand[c])[d];
    s[c] = v / temperature;
  }
  const double loss = nn::log_sum_exp(s) - s[0];
  if (d_embedding || table_grad) {
    nn::softmax_inplace(s);
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const double g = weight * (s[c] - (c == 0 ? 1.0 : 0.0)) / temperature;
      if (d_embedding)
        for (std::size_t d = 0; d < E; ++d) d_embedding[d] += static_cast<Real>(g * table.row(cand[c])[d]);
      if (table_grad)
        for (std::size_t d = 0; d < E; ++d) table_grad->row(cand[c])[d] += static_cast<Real>(g * embedding[d]);
    }
  }
  return loss;
}

/// Cross-entropy over all labels (reference for the sampled loss).
inline double full_softmax_cross_entropy(std::vector<double> scores, std::size_t gold, double temperature) {
  for (auto& s : scores) s /= temperature;
  return nn::log_sum_exp(scores) - scores[gold];
}

}  // namespace similarity
}  // namespace intentkit
