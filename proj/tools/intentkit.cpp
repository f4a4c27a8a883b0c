// intentkit command-line tool.
// Exit codes: 0 success, 1 usage/config error, 2 data/format error, 3 numeric failure.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "intentkit/evaluation.hpp"
#include "intentkit/model_io.hpp"
#include "intentkit/synthetic.hpp"
#include "intentkit/trainer.hpp"

namespace ik = intentkit;

namespace {

struct TrainFlags {
  std::string model = "diet";
  std::string dense = "hash:64:42";
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  std::size_t dim = 128;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ff = 256;
  std::size_t embed_dim = 32;
  std::size_t negatives = 10;
  double dropout = 0.1;
  bool no_balanced = false;
  bool no_sparse = false;
  bool no_entities = false;
  std::size_t patience = 0;
  std::size_t threads = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model, "diet | tf_baseline | embed_baseline")->capture_default_str();
    cmd->add_option("--dense", dense, "hash:DIM:SEED | file:PATH | none")->capture_default_str();
    cmd->add_option("--epochs", epochs)->capture_default_str();
    cmd->add_option("--batch-size", batch_size)->capture_default_str();
    cmd->add_option("--seed", seed)->capture_default_str();
    cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--dim", dim, "transformer width")->capture_default_str();
    cmd->add_option("--heads", heads)->capture_default_str();
    cmd->add_option("--layers", layers)->capture_default_str();
    cmd->add_option("--ff", ff, "feed-forward width")->capture_default_str();
    cmd->add_option("--embed-dim", embed_dim)->capture_default_str();
    cmd->add_option("--negatives", negatives)->capture_default_str();
    cmd->add_option("--dropout", dropout)->capture_default_str();
    cmd->add_option("--patience", patience, "early-stop patience in epochs (0 = off)")->capture_default_str();
    cmd->add_option("--threads", threads, "parallel folds/runs (0 = all cores)")->capture_default_str();
    cmd->add_flag("--no-balanced", no_balanced, "uniform instead of class-balanced batches");
    cmd->add_flag("--no-sparse", no_sparse, "DIET without sparse features");
    cmd->add_flag("--no-entities", no_entities, "DIET without the CRF entity head");
  }

  ik::TrainConfig config() const {
    ik::TrainConfig c;
    c.model_kind = ik::parse_model_kind(model);
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.seed = seed;
    c.learning_rate = lr;
    c.balanced_batching = !no_balanced;
    if (patience > 0) c.early_stop_patience = patience;
    c.diet.transformer_dim = c.tf.transformer_dim = dim;
    c.diet.heads = c.tf.heads = heads;
    c.diet.layers = c.tf.layers = layers;
    c.diet.ff_dim = c.tf.ff_dim = ff;
    c.diet.dropout = c.tf.dropout = dropout;
    c.diet.embed_dim = c.embed.embed_dim = embed_dim;
    c.diet.n_negatives = c.embed.n_negatives = negatives;
    c.diet.use_sparse = !no_sparse;
    c.diet.entity_head = !no_entities;
    c.diet.use_dense = dense != "none";
    return c;
  }
};

/// Parses hash:DIM:SEED, file:PATH or none.
std::shared_ptr<const ik::DenseProvider> parse_dense(const std::string& spec) {
  if (spec == "none") return nullptr;
  if (spec.rfind("hash:", 0) == 0) {
    const auto rest = spec.substr(5);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw ik::ConfigError("--dense hash:DIM:SEED expected, got '" + spec + "'");
    std::size_t dim = 0;
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      dim = std::stoull(rest.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("dim");
      const auto seed_str = rest.substr(colon + 1);
      seed = std::stoull(seed_str, &used);
      if (used != seed_str.size()) throw std::invalid_argument("seed");
    } catch (const std::logic_error&) {
      throw ik::ConfigError("--dense hash:DIM:SEED expects integers, got '" + spec + "'");
    }
    return std::make_shared<ik::DenseProvider>(ik::DenseProvider::hashed(dim, seed));
  }
  if (spec.rfind("file:", 0) == 0) {
    auto p = ik::load_dense_file(spec.substr(5));
    p.set_source(spec.substr(5));
    return std::make_shared<ik::DenseProvider>(std::move(p));
  }
  throw ik::ConfigError("--dense must be hash:DIM:SEED, file:PATH or none (got '" + spec + "')");
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ik::DataError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw ik::DataError("failed writing '" + path + "'");
}

void print_stats(const ik::Dataset& ds) {
  const auto s = ik::compute_stats(ds);
  std::printf("%-26s %zu\n", "n_intents", s.n_intents);
  std::printf("%-26s %zu\n", "n_samples", s.n_samples);
  std::printf("%-26s %zu\n", "min_samples_per_intent", s.min_samples_per_intent);
  std::printf("%-26s %zu\n", "max_samples_per_intent", s.max_samples_per_intent);
  std::printf("%-26s %.2f\n", "avg_samples_per_intent", s.avg_samples_per_intent);
  std::printf("%-26s %zu\n", "vocab_size", s.vocab_size);
  std::printf("%-26s %zu\n", "total_words", s.total_words);
  std::printf("%-26s %zu\n", "min_words_per_sample", s.min_words_per_sample);
  std::printf("%-26s %zu\n", "max_words_per_sample", s.max_words_per_sample);
  std::printf("%-26s %.2f\n", "avg_words_per_sample", s.avg_words_per_sample);
  std::printf("\n%-26s %s\n", "intent", "count");
  for (const auto& [intent, n] : ik::class_distribution(ds)) std::printf("%-26s %zu\n", intent.c_str(), n);
}

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"intentkit: intent recognition engine and evaluation harness"};
  app.require_subcommand(1);

  // stats
  std::string stats_data;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "dataset statistics and class distribution");
  stats->add_option("--data", stats_data)->required();
  stats->add_flag("--json", stats_json, "machine-readable output");

  // train
  std::string train_data, train_out;
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train a model and write the model file");
  train->add_option("--data", train_data)->required();
  train->add_option("--out", train_out, "model file")->required();
  train_flags.attach(train);

  // crossval
  std::string cv_data, cv_out;
  std::size_t cv_folds = 10, cv_runs = 3;
  TrainFlags cv_flags;
  auto* crossval = app.add_subcommand("crossval", "runs x k-fold stratified cross-validation");
  crossval->add_option("--data", cv_data)->required();
  crossval->add_option("--out", cv_out, "CV report JSON")->required();
  crossval->add_option("--folds", cv_folds)->capture_default_str();
  crossval->add_option("--runs", cv_runs)->capture_default_str();
  cv_flags.attach(crossval);

  // eval
  std::string eval_model, eval_data, eval_out, eval_dense;
  bool eval_errors = false;
  auto* eval = app.add_subcommand("eval", "evaluate a model file on a dataset");
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--out", eval_out, "EvalReport JSON")->required();
  eval->add_option("--dense", eval_dense, "override the recorded dense provider");
  eval->add_flag("--errors", eval_errors, "print the error listing table");

  // predict
  std::string pred_model, pred_text, pred_dense;
  auto* predict = app.add_subcommand("predict", "rank intents for one utterance");
  predict->add_option("--model", pred_model)->required();
  predict->add_option("--text", pred_text)->required();
  predict->add_option("--dense", pred_dense, "override the recorded dense provider");

  // shift
  std::string shift_a, shift_b, shift_out, shift_oos = "out-of-scope";
  auto* shift = app.add_subcommand("shift", "distribution shift report between two corpora");
  shift->add_option("--a", shift_a)->required();
  shift->add_option("--b", shift_b)->required();
  shift->add_option("--oos", shift_oos)->capture_default_str();
  shift->add_option("--out", shift_out, "ShiftReport JSON")->required();

  // synth
  std::string synth_out;
  std::uint64_t synth_seed = 7;
  std::size_t synth_per_intent = 60;
  bool synth_shifted = false;
  auto* synth = app.add_subcommand("synth", "write the synthetic corpus (JSONL)");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--per-intent", synth_per_intent)->capture_default_str();
  synth->add_flag("--shifted", synth_shifted, "the shifted deployment-style counterpart");

  // hash-dense
  std::string hd_keys, hd_out;
  std::size_t hd_dim = 64;
  std::uint64_t hd_seed = 42;
  auto* hash_dense = app.add_subcommand("hash-dense", "write a DNSE token table of hash embeddings");
  hash_dense->add_option("--keys", hd_keys, "newline-delimited UTF-8 keys")->required();
  hash_dense->add_option("--dim", hd_dim)->capture_default_str();
  hash_dense->add_option("--seed", hd_seed)->capture_default_str();
  hash_dense->add_option("--out", hd_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*stats) {
    const auto ds = ik::load_dataset(stats_data);
    if (stats_json) {
      nlohmann::json j = ik::to_json(ik::compute_stats(ds));
      j["class_distribution"] = ik::class_distribution(ds);
      std::cout << j.dump(2) << "\n";
    } else {
      print_stats(ds);
    }
  } else if (*train) {
    const auto cfg = train_flags.config();
    auto provider = parse_dense(train_flags.dense);
    const auto ds = ik::load_dataset(train_data);
    auto result = ik::train(ds, cfg, ik::FeatureConfig{}, provider);
    warn_all(result.warnings);
    ik::save_pipeline(result.pipeline, train_out);
    nlohmann::json j = {{"model_kind", ik::to_string(cfg.model_kind)},
                        {"epochs_run", result.loss_history.size()},
                        {"final_loss", result.loss_history.back()},
                        {"out", train_out}};
    std::cout << j.dump(2) << "\n";
  } else if (*crossval) {
    const auto cfg = cv_flags.config();
    auto provider = parse_dense(cv_flags.dense);
    const auto ds = ik::load_dataset(cv_data);
    const auto report = ik::cross_validate(ds, cv_folds, cv_runs, cfg, ik::FeatureConfig{}, provider, cv_flags.threads);
    warn_all(report.warnings);
    write_json(ik::to_json(report), cv_out);
    std::cout << ik::to_string(cfg.model_kind) << ": " << ik::format_mean_std(report.mean_micro_f1, report.std_micro_f1)
              << " (micro-F1 %, " << cv_runs << " runs x " << cv_folds << "-fold CV)\n";
  } else if (*eval) {
    auto pipe = ik::load_pipeline(eval_model, eval_dense.empty() ? nullptr : parse_dense(eval_dense));
    const auto ds = ik::load_dataset(eval_data);
    std::vector<std::string> gold, texts;
    for (const auto& u : ds.utterances()) {
      gold.push_back(u.intent);
      texts.push_back(u.text);
    }
    const auto report = ik::evaluate(gold, ik::predict_labels(pipe, ds), texts);
    write_json(ik::to_json(report), eval_out);
    std::cout << "micro-F1 " << ik::format_percent(report.micro_f1) << "  macro-F1 "
              << ik::format_percent(report.macro_f1) << "  errors " << report.errors.size() << "/" << ds.size()
              << "\n";
    if (eval_errors) std::cout << "\n" << ik::render_error_table(report.errors);
  } else if (*predict) {
    auto pipe = ik::load_pipeline(pred_model, pred_dense.empty() ? nullptr : parse_dense(pred_dense));
    std::cout << ik::to_json(pipe.predict(pred_text)).dump(2) << "\n";
  } else if (*shift) {
    const auto report = ik::shift_report(ik::load_dataset(shift_a), ik::load_dataset(shift_b), shift_oos);
    write_json(ik::to_json(report), shift_out);
    std::cout << "oos_share " << report.a.oos_share << " -> " << report.b.oos_share << "; class divergence "
              << report.class_divergence << "\n";
    for (const auto& l : report.unseen_a_to_b) std::cout << "only in a: " << l << "\n";
    for (const auto& l : report.unseen_b_to_a) std::cout << "only in b: " << l << "\n";
  } else if (*synth) {
    const auto ds = synth_shifted ? ik::synthetic::shifted_corpus(synth_seed, synth_per_intent)
                                  : ik::synthetic::clean_corpus(synth_seed, synth_per_intent);
    ik::save_dataset(ds, synth_out);
    std::cout << ds.size() << " utterances written to " << synth_out << "\n";
  } else if (*hash_dense) {
    std::ifstream in(hd_keys);
    if (!in) throw ik::DataError("cannot open keys file '" + hd_keys + "'");
    std::vector<std::string> keys;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) keys.push_back(line);
    }
    const auto table = ik::hash_table(keys, hd_dim, hd_seed);
    ik::write_dense_file(table, hd_out);
    std::cout << nlohmann::json{{"kind", "token"},
                                {"dim", hd_dim},
                                {"key_count", table.entries().size()},
                                {"content_hash", ik::to_hex(ik::fnv1a64(ik::encode_dense(table)))}}
                     .dump(2)
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ik::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ik::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const ik::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
