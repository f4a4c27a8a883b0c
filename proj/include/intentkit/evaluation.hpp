#pragma once

// Metrics, confusion matrices, error listings, score comparison and paired
// corpus shift reports. Scores are fractions; rendering to percent happens
// only in format_percent.

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentkit/corpus.hpp"

namespace intentkit {

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;  // gold count
};

struct ErrorRow {
  std::string utterance_text;
  std::string gold;
  std::string predicted;

  bool operator==(const ErrorRow&) const = default;
};

struct Confusion {
  std::vector<std::string> labels;               // sorted union of gold and predicted labels
  std::vector<std::vector<std::size_t>> counts;  // [gold][predicted]

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
      for (auto c : row) n += c;
    return n;
  }
  std::size_t trace() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
    return n;
  }
};

struct EvalReport {
  double micro_f1 = 0;
  double macro_f1 = 0;
  std::map<std::string, Prf> per_intent;
  Confusion confusion;
  std::vector<ErrorRow> errors;
};

namespace detail {
inline void check_pair(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  if (gold.size() != pred.size())
    throw DataError("gold/prediction length mismatch: " + std::to_string(gold.size()) + " vs " +
                    std::to_string(pred.size()));
  if (gold.empty()) throw DataError("no predictions to score");
}
}  // namespace detail

/// Micro-averaged F1. With one label per sample every miss is one FP and one FN,
/// so this equals accuracy.
inline double micro_f1(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  detail::check_pair(gold, pred);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) tp += gold[i] == pred[i];
  const double fp = static_cast<double>(gold.size() - tp);
  const double fn = fp;
  const double t = static_cast<double>(tp);
  return 2 * t / (2 * t + fp + fn);
}

/// Per-label precision/recall/F1; 0/0 is 0. Labels never seen on either side are absent.
inline std::map<std::string, Prf> per_intent_prf(const std::vector<std::string>& gold,
                                                  const std::vector<std::string>& pred) {
  detail::check_pair(gold, pred);
  std::map<std::string, std::size_t> tp, n_gold, n_pred;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++n_gold[gold[i]];
    ++n_pred[pred[i]];
    if (gold[i] == pred[i]) ++tp[gold[i]];
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; };
  std::map<std::string, Prf> out;
  std::set<std::string> labels;
  for (const auto& [l, _] : n_gold) labels.insert(l);
  for (const auto& [l, _] : n_pred) labels.insert(l);
  for (const auto& l : labels) {
    Prf p;
    p.support = n_gold[l];
    p.precision = ratio(tp[l], n_pred[l]);
    p.recall = ratio(tp[l], n_gold[l]);
    p.f1 = p.precision + p.recall == 0 ? 0.0 : 2 * p.precision * p.recall / (p.precision + p.recall);
    out[l] = p;
  }
  return out;
}

inline Confusion confusion_matrix(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  detail::check_pair(gold, pred);
  std::set<std::string> labels(gold.begin(), gold.end());
  labels.insert(pred.begin(), pred.end());
  Confusion c;
  c.labels.assign(labels.begin(), labels.end());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < c.labels.size(); ++i) index[c.labels[i]] = i;
  c.counts.assign(c.labels.size(), std::vector<std::size_t>(c.labels.size(), 0));
  for (std::size_t i = 0; i < gold.size(); ++i) ++c.counts[index[gold[i]]][index[pred[i]]];
  return c;
}

/// Mismatched rows in input order.
inline std::vector<ErrorRow> error_listing(const std::vector<std::string>& texts, const std::vector<std::string>& gold,
                                           const std::vector<std::string>& pred) {
  if (texts.size() != gold.size() || gold.size() != pred.size()) throw DataError("error_listing: length mismatch");
  std::vector<ErrorRow> rows;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i] != pred[i]) rows.push_back({texts[i], gold[i], pred[i]});
  return rows;
}

inline std::vector<ErrorRow> error_listing(const Dataset& ds, const std::vector<std::string>& pred) {
  std::vector<std::string> texts, gold;
  for (const auto& u : ds.utterances()) {
    texts.push_back(u.text);
    gold.push_back(u.intent);
  }
  return error_listing(texts, gold, pred);
}

inline std::string render_error_row(const ErrorRow& r) {
  return r.utterance_text + " | " + r.gold + " | " + r.predicted;
}

/// Plain-text table with a header row; columns padded to their widest cell (in code points).
inline std::string render_error_table(const std::vector<ErrorRow>& rows) {
  std::size_t w0 = text::code_point_length("Sample Utterance"), w1 = text::code_point_length("Intent");
  for (const auto& r : rows) {
    w0 = std::max(w0, text::code_point_length(r.utterance_text));
    w1 = std::max(w1, text::code_point_length(r.gold));
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w - text::code_point_length(s), ' ');
  };
  std::string out = pad("Sample Utterance", w0) + " | " + pad("Intent", w1) + " | Prediction\n";
  for (const auto& r : rows) out += pad(r.utterance_text, w0) + " | " + pad(r.gold, w1) + " | " + r.predicted + "\n";
  return out;
}

inline EvalReport evaluate(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                           const std::vector<std::string>& texts) {
  EvalReport r;
  r.micro_f1 = micro_f1(gold, pred);
  r.per_intent = per_intent_prf(gold, pred);
  double sum = 0;
  std::size_t n = 0;
  for (const auto& [label, prf] : r.per_intent)
    if (prf.support > 0) {
      sum += prf.f1;
      ++n;
    }
  r.macro_f1 = n == 0 ? 0.0 : sum / static_cast<double>(n);
  r.confusion = confusion_matrix(gold, pred);
  r.errors = error_listing(texts, gold, pred);
  return r;
}

// ---------------------------------------------------------------------------
// Score comparison

struct ScoreSummary {
  double mean = 0;
  double std = 0;
  std::uint64_t dataset_fingerprint = 0;
};

struct Gain {
  double gain = 0;  // b.mean - a.mean
  double std_a = 0;
  double std_b = 0;
};

inline Gain compare_reports(const ScoreSummary& a, const ScoreSummary& b) {
  if (a.dataset_fingerprint != b.dataset_fingerprint)
    throw DataError("compare_reports: reports were computed on different datasets (" +
                    to_hex(a.dataset_fingerprint) + " vs " + to_hex(b.dataset_fingerprint) + ")");
  return {b.mean - a.mean, a.std, b.std};
}

/// Population mean and standard deviation.
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double m = 0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

/// Percent with two decimals: 0.9588 -> "95.88".
inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0 + 0.0);
  return buf;
}

/// "95.88 ± 0.42"
inline std::string format_mean_std(double mean, double std) {
  return format_percent(mean) + " ± " + format_percent(std);
}

inline std::string format_gain(double gain) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", gain * 100.0);
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset shift

struct CorpusProfile {
  std::size_t n_samples = 0;
  std::size_t vocab_size = 0;
  double avg_words = 0;
  double oos_share = 0;
};

struct ShiftReport {
  std::string oos_label;
  CorpusProfile a, b;
  std::vector<std::string> unseen_a_to_b;  // labels in A absent from B
  std::vector<std::string> unseen_b_to_a;  // labels in B absent from A
  double class_divergence = 0;             // total variation distance
};

inline CorpusProfile corpus_profile(const Dataset& ds, const std::string& oos_label) {
  const auto s = compute_stats(ds);
  CorpusProfile p;
  p.n_samples = s.n_samples;
  p.vocab_size = s.vocab_size;
  p.avg_words = s.avg_words_per_sample;
  const auto dist = class_distribution(ds);
  auto it = dist.find(oos_label);
  p.oos_share = it == dist.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(s.n_samples);
  return p;
}

/// 0.5 * sum |p_a(c) - p_b(c)| over the union of labels.
inline double total_variation(const Dataset& a, const Dataset& b) {
  const auto da = class_distribution(a), db = class_distribution(b);
  std::set<std::string> labels;
  for (const auto& [l, _] : da) labels.insert(l);
  for (const auto& [l, _] : db) labels.insert(l);
  double tv = 0;
  for (const auto& l : labels) {
    const double pa = da.contains(l) ? static_cast<double>(da.at(l)) / a.size() : 0.0;
    const double pb = db.contains(l) ? static_cast<double>(db.at(l)) / b.size() : 0.0;
    tv += std::abs(pa - pb);
  }
  return 0.5 * tv;
}

inline ShiftReport shift_report(const Dataset& a, const Dataset& b, const std::string& oos_label = "out-of-scope") {
  if (a.empty() || b.empty()) throw DataError("shift_report: both datasets must be non-empty");
  ShiftReport r;
  r.oos_label = oos_label;
  r.a = corpus_profile(a, oos_label);
  r.b = corpus_profile(b, oos_label);
  std::set_difference(a.intents().begin(), a.intents().end(), b.intents().begin(), b.intents().end(),
                      std::back_inserter(r.unseen_a_to_b));
  std::set_difference(b.intents().begin(), b.intents().end(), a.intents().begin(), a.intents().end(),
                      std::back_inserter(r.unseen_b_to_a));
  r.class_divergence = total_variation(a, b);
  return r;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}, {"support", p.support}};
}

inline nlohmann::json to_json(const ErrorRow& r) {
  return {{"utterance_text", r.utterance_text}, {"gold", r.gold}, {"predicted", r.predicted}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["micro_f1"] = r.micro_f1;
  j["macro_f1"] = r.macro_f1;
  j["per_intent"] = nlohmann::json::object();
  for (const auto& [label, prf] : r.per_intent) j["per_intent"][label] = to_json(prf);
  j["confusion"] = {{"labels", r.confusion.labels}, {"matrix", r.confusion.counts}};
  j["errors"] = nlohmann::json::array();
  for (const auto& e : r.errors) j["errors"].push_back(to_json(e));
  return j;
}

inline nlohmann::json to_json(const CorpusProfile& p) {
  return {{"n_samples", p.n_samples}, {"vocab_size", p.vocab_size}, {"avg_words", p.avg_words},
          {"oos_share", p.oos_share}};
}

inline nlohmann::json to_json(const ShiftReport& r) {
  return {{"oos_label", r.oos_label},
          {"a", to_json(r.a)},
          {"b", to_json(r.b)},
          {"unseen_intents_a_to_b", r.unseen_a_to_b},
          {"unseen_intents_b_to_a", r.unseen_b_to_a},
          {"class_divergence", r.class_divergence}};
}

inline nlohmann::json to_json(const Gain& g) { return {{"gain", g.gain}, {"std_a", g.std_a}, {"std_b", g.std_b}}; }

}  // namespace intentkit
