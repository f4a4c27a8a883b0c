#pragma once

// Labeled utterance datasets: JSONL loading, validation, statistics and
// stratified cross-validation folds.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentkit/common.hpp"
#include "intentkit/text.hpp"

namespace intentkit {

struct EntitySpan {
  std::size_t start = 0;  // code-point offset
  std::size_t end = 0;    // exclusive
  std::string entity;
  std::string value;

  bool operator==(const EntitySpan&) const = default;
};

struct Utterance {
  std::string id;
  std::string text;
  std::string intent;
  std::vector<EntitySpan> entities;

  bool operator==(const Utterance&) const = default;
};

/// Checks the per-utterance invariants. Throws DataError with `where` as context.
inline void validate_utterance(const Utterance& u, const std::string& where = {}) {
  const std::string ctx = where.empty() ? "utterance '" + u.id + "'" : where;
  if (u.id.empty()) throw DataError(ctx + ": empty id");
  if (text::is_blank(u.text)) throw DataError(ctx + ": text is empty");
  if (u.intent.empty()) throw DataError(ctx + ": intent is empty");
  const std::size_t len = text::code_point_length(u.text);
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& e : u.entities) {
    if (e.start >= e.end || e.end > len) {
      throw DataError(ctx + ": entity span [" + std::to_string(e.start) + ", " + std::to_string(e.end) +
                      ") out of bounds for text of length " + std::to_string(len));
    }
    if (e.entity.empty()) throw DataError(ctx + ": entity label is empty");
    spans.emplace_back(e.start, e.end);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) throw DataError(ctx + ": overlapping entity spans");
  }
}

class Dataset {
 public:
  Dataset() = default;

  Dataset(std::string name, std::vector<Utterance> utterances)
      : name_(std::move(name)), utterances_(std::move(utterances)) {
    std::unordered_set<std::string> ids;
    for (const auto& u : utterances_) {
      validate_utterance(u);
      if (!ids.insert(u.id).second) throw DataError("duplicate utterance id '" + u.id + "'");
      intents_.insert(u.intent);
      for (const auto& e : u.entities) entity_types_.insert(e.entity);
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<Utterance>& utterances() const { return utterances_; }
  const Utterance& operator[](std::size_t i) const { return utterances_[i]; }
  std::size_t size() const { return utterances_.size(); }
  bool empty() const { return utterances_.empty(); }
  const std::set<std::string>& intents() const { return intents_; }
  const std::set<std::string>& entity_types() const { return entity_types_; }
  bool has_entities() const { return !entity_types_.empty(); }

  /// Subset by index, preserving the given order.
  Dataset subset(const std::vector<std::size_t>& indices, std::string name = {}) const {
    std::vector<Utterance> picked;
    picked.reserve(indices.size());
    for (auto i : indices) picked.push_back(utterances_.at(i));
    return Dataset(name.empty() ? name_ : std::move(name), std::move(picked));
  }

  /// Content hash over ids, texts, intents and spans in order.
  std::uint64_t fingerprint() const {
    Fnv1a64 h;
    for (const auto& u : utterances_) {
      h.update(u.id).update_byte(0).update(u.text).update_byte(0).update(u.intent).update_byte(0);
      for (const auto& e : u.entities) h.update_u64(e.start).update_u64(e.end).update(e.entity).update_byte(0);
      h.update_byte(0xFF);
    }
    return h.digest();
  }

 private:
  std::string name_;
  std::vector<Utterance> utterances_;
  std::set<std::string> intents_;
  std::set<std::string> entity_types_;
};

inline Utterance utterance_from_json(const nlohmann::json& j) {
  auto require_string = [&](const char* key) -> std::string {
    if (!j.contains(key)) throw DataError(std::string("missing required field \"") + key + "\"");
    if (!j[key].is_string()) throw DataError(std::string("field \"") + key + "\" must be a string");
    return j[key].get<std::string>();
  };
  if (!j.is_object()) throw DataError("line is not a JSON object");
  Utterance u;
  u.id = require_string("id");
  u.text = require_string("text");
  u.intent = require_string("intent");
  if (j.contains("entities")) {
    if (!j["entities"].is_array()) throw DataError("field \"entities\" must be an array");
    const std::u32string cps = text::decode_utf8(u.text);
    for (const auto& e : j["entities"]) {
      if (!e.is_object() || !e.contains("start") || !e.contains("end") || !e.contains("entity"))
        throw DataError("entity requires \"start\", \"end\" and \"entity\"");
      if (!e["start"].is_number_integer() || !e["end"].is_number_integer())
        throw DataError("entity offsets must be integers");
      const auto start = e["start"].get<long long>();
      const auto end = e["end"].get<long long>();
      if (start < 0 || end < 0) throw DataError("entity offsets must be non-negative");
      EntitySpan span{static_cast<std::size_t>(start), static_cast<std::size_t>(end), e["entity"].get<std::string>(), {}};
      if (e.contains("value")) {
        span.value = e["value"].get<std::string>();
      } else if (span.start < span.end && span.end <= cps.size()) {
        span.value = text::encode_utf8(cps.substr(span.start, span.end - span.start));
      }
      u.entities.push_back(std::move(span));
    }
  }
  return u;
}

inline nlohmann::json utterance_to_json(const Utterance& u) {
  nlohmann::json j = {{"id", u.id}, {"text", u.text}, {"intent", u.intent}};
  if (!u.entities.empty()) {
    j["entities"] = nlohmann::json::array();
    for (const auto& e : u.entities)
      j["entities"].push_back({{"start", e.start}, {"end", e.end}, {"entity", e.entity}, {"value", e.value}});
  }
  return j;
}

/// Parses JSONL content. Blank lines are skipped; errors carry the 1-based line number.
inline Dataset parse_dataset(std::istream& in, std::string name) {
  std::vector<Utterance> utterances;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    try {
      auto j = nlohmann::json::parse(line);
      Utterance u = utterance_from_json(j);
      validate_utterance(u, where);
      if (!ids.insert(u.id).second) throw DataError(where + ": duplicate id '" + u.id + "'");
      utterances.push_back(std::move(u));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw DataError(where + ": " + msg);
    }
  }
  if (utterances.empty()) throw DataError("empty dataset");
  return Dataset(std::move(name), std::move(utterances));
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  try {
    return parse_dataset(in, path);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_dataset(const Dataset& ds, std::ostream& out) {
  for (const auto& u : ds.utterances()) out << utterance_to_json(u).dump() << '\n';
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file '" + path + "'");
  write_dataset(ds, out);
}

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStats {
  std::size_t n_intents = 0;
  std::size_t n_samples = 0;
  std::size_t min_samples_per_intent = 0;
  std::size_t max_samples_per_intent = 0;
  double avg_samples_per_intent = 0;
  std::size_t vocab_size = 0;
  std::size_t total_words = 0;
  std::size_t min_words_per_sample = 0;
  std::size_t max_words_per_sample = 0;
  double avg_words_per_sample = 0;

  bool operator==(const DatasetStats&) const = default;
};

inline std::map<std::string, std::size_t> class_distribution(const Dataset& ds) {
  std::map<std::string, std::size_t> counts;
  for (const auto& u : ds.utterances()) ++counts[u.intent];
  return counts;
}

/// Word counts use raw whitespace words; vocabulary is their lowercased set.
inline DatasetStats compute_stats(const Dataset& ds) {
  if (ds.empty()) throw DataError("empty dataset");
  DatasetStats s;
  const auto dist = class_distribution(ds);
  s.n_intents = dist.size();
  s.n_samples = ds.size();
  s.min_samples_per_intent = s.n_samples;
  for (const auto& [_, n] : dist) {
    s.min_samples_per_intent = std::min(s.min_samples_per_intent, n);
    s.max_samples_per_intent = std::max(s.max_samples_per_intent, n);
  }
  s.avg_samples_per_intent = static_cast<double>(s.n_samples) / static_cast<double>(s.n_intents);

  std::unordered_set<std::string> vocab;
  s.min_words_per_sample = static_cast<std::size_t>(-1);
  for (const auto& u : ds.utterances()) {
    const auto words = text::whitespace_words(u.text);
    s.total_words += words.size();
    s.min_words_per_sample = std::min(s.min_words_per_sample, words.size());
    s.max_words_per_sample = std::max(s.max_words_per_sample, words.size());
    for (const auto& w : words) vocab.insert(text::lower_utf8(w));
  }
  s.vocab_size = vocab.size();
  s.avg_words_per_sample = static_cast<double>(s.total_words) / static_cast<double>(s.n_samples);
  return s;
}

inline nlohmann::json to_json(const DatasetStats& s) {
  return {{"n_intents", s.n_intents},
          {"n_samples", s.n_samples},
          {"min_samples_per_intent", s.min_samples_per_intent},
          {"max_samples_per_intent", s.max_samples_per_intent},
          {"avg_samples_per_intent", s.avg_samples_per_intent},
          {"vocab_size", s.vocab_size},
          {"total_words", s.total_words},
          {"min_words_per_sample", s.min_words_per_sample},
          {"max_words_per_sample", s.max_words_per_sample},
          {"avg_words_per_sample", s.avg_words_per_sample}};
}

inline DatasetStats stats_from_json(const nlohmann::json& j) {
  DatasetStats s;
  s.n_intents = j.at("n_intents").get<std::size_t>();
  s.n_samples = j.at("n_samples").get<std::size_t>();
  s.min_samples_per_intent = j.at("min_samples_per_intent").get<std::size_t>();
  s.max_samples_per_intent = j.at("max_samples_per_intent").get<std::size_t>();
  s.avg_samples_per_intent = j.at("avg_samples_per_intent").get<double>();
  s.vocab_size = j.at("vocab_size").get<std::size_t>();
  s.total_words = j.at("total_words").get<std::size_t>();
  s.min_words_per_sample = j.at("min_words_per_sample").get<std::size_t>();
  s.max_words_per_sample = j.at("max_words_per_sample").get<std::size_t>();
  s.avg_words_per_sample = j.at("avg_words_per_sample").get<double>();
  return s;
}

// Half-away-from-zero rounding to `decimals` places, as used in rendered tables.
inline double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

// ---------------------------------------------------------------------------
// Stratified folds

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> assignment;  // utterance id -> fold
  std::vector<std::size_t> fold_of;               // dataset index -> fold
  std::vector<std::string> warnings;

  std::vector<std::size_t> test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] != fold) out.push_back(i);
    return out;
  }
};

/// Shuffles each class (seeded), concatenates classes in label order and deals
/// position p to fold p mod k. Consecutive dealing keeps every class balanced
/// to within one sample per fold and the fold totals to within one overall.
inline FoldPlan stratified_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be at least 2");
  if (k > ds.size())
    throw ConfigError("stratified_kfold: k=" + std::to_string(k) + " exceeds the number of samples (" +
                      std::to_string(ds.size()) + ")");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds[i].intent].push_back(i);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold_of.assign(ds.size(), 0);
  Rng rng(seed);
  std::size_t position = 0;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    if (members.size() < k) {
      plan.warnings.push_back("intent '" + label + "' has " + std::to_string(members.size()) +
                              " samples, fewer than k=" + std::to_string(k) + "; some folds will lack it");
    }
    for (auto idx : members) plan.fold_of[idx] = position++ % k;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) plan.assignment[ds[i].id] = plan.fold_of[i];
  return plan;
}

}  // namespace intentkit
