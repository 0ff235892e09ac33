// Command-line front end: transform, detransform, train, parse, eval, bench
// and synth. Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "charparse/charparse.hpp"

namespace cp = charparse;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cp::DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Output paths are checked up front so a long run never fails at the end.
void check_output_path(const std::string& path) {
  if (path.empty() || path == "-") return;
  const fs::path parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) throw cp::UsageError("output directory does not exist: " + parent.string());
  if (fs::is_directory(path)) throw cp::UsageError("output path is a directory: " + path);
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw cp::DataError("cannot write '" + path + "'");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

cp::Corpus read_trees(const std::string& path) {
  try {
    return cp::parse_bracketed(read_text(path), path);
  } catch (const cp::ParseError& e) {
    throw cp::DataError(path + ": " + e.what());
  }
}

std::vector<std::vector<std::string>> read_sentences(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<std::string>> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    std::string compact;
    for (const char c : line) {
      if (c != ' ' && c != '\t' && c != '\r') compact += c;
    }
    if (compact.empty()) throw cp::DataError(path + " line " + std::to_string(line_no) + ": empty sentence");
    try {
      out.push_back(cp::utf8::split_chars(compact));
    } catch (const std::exception& e) {
      throw cp::DataError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (k) out += ' ';
    out += words[k];
  }
  return out;
}

struct DecodeFlags {
  bool no_char_constraint = false;
  bool allow_null_root = false;

  void add(CLI::App* cmd) {
    cmd->add_flag("--no-char-constraint", no_char_constraint, "Do not restrict @1-final labels to single characters");
    cmd->add_flag("--allow-null-root", allow_null_root, "Allow the null label at the root span");
  }
  cp::DecodeConfig apply(cp::DecodeConfig base) const {
    if (no_char_constraint) base.constrain_char_labels = false;
    if (allow_null_root) base.require_nonnull_root = false;
    return base;
  }
};

// ---- transform / detransform ----------------------------------------------

struct TransformArgs {
  std::string in, out;
  bool keep_tags = false;
};

int run_transform(const TransformArgs& a) {
  check_output_path(a.out);
  cp::Corpus corpus = read_trees(a.in);
  if (!a.keep_tags) corpus = cp::strip_function_tags(corpus);
  std::vector<std::string> lines;
  lines.reserve(corpus.trees.size());
  for (std::size_t k = 0; k < corpus.trees.size(); ++k) {
    try {
      lines.push_back(cp::serialize_char_tree(cp::to_char_tree(corpus.trees[k])));
    } catch (const cp::DataError& e) {
      throw cp::DataError(a.in + " tree " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  Output out(a.out);
  for (const auto& l : lines) out.stream() << l << '\n';
  return 0;
}

struct DetransformArgs {
  std::string in, out_trees, out_segs;
};

int run_detransform(const DetransformArgs& a) {
  check_output_path(a.out_trees);
  check_output_path(a.out_segs);
  const cp::Corpus corpus = read_trees(a.in);
  std::vector<cp::RecoveredTree> recovered;
  recovered.reserve(corpus.trees.size());
  for (std::size_t k = 0; k < corpus.trees.size(); ++k) {
    try {
      recovered.push_back(cp::from_char_tree(cp::char_tree_from_syntax(corpus.trees[k])));
    } catch (const cp::DataError& e) {
      throw cp::DataError(a.in + " tree " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  Output trees(a.out_trees);
  for (const auto& r : recovered) trees.stream() << cp::serialize_bracketed(r.tree) << '\n';
  if (!a.out_segs.empty()) {
    Output segs(a.out_segs);
    for (const auto& r : recovered) segs.stream() << join_words(r.segmentation.words) << '\n';
  }
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string train, dev, config, out, log;
  std::string preset = "feature";
  std::vector<std::string> settings;
  std::optional<double> lr;
  std::optional<int> batch_size, max_epochs, label_loss_epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scorer, margin_mode;
  bool quiet = false;
};

cp::TrainConfig build_config(const TrainArgs& a) {
  cp::TrainConfig c = a.preset == "encoder" ? cp::TrainConfig::encoder_preset() : cp::TrainConfig::feature_preset();
  if (!a.config.empty()) {
    std::istringstream in(read_text(a.config));
    c.read(in);
  }
  for (const auto& kv : a.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cp::UsageError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.lr) c.learning_rate = *a.lr;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.max_epochs) c.max_epochs = *a.max_epochs;
  if (a.label_loss_epochs) c.label_loss_epochs = *a.label_loss_epochs;
  if (a.seed) c.seed = *a.seed;
  if (a.scorer) c.set("scorer", *a.scorer);
  if (a.margin_mode) c.set("margin_mode", *a.margin_mode);
  c.validate();
  return c;
}

template <cp::SpanScorer S>
void train_and_save(const std::vector<cp::Example>& train, const std::vector<cp::Example>& dev,
                    const cp::TrainConfig& config, const std::function<S(const cp::LabelVocab&)>& make,
                    const TrainArgs& a) {
  std::ofstream log_file;
  if (!a.log.empty()) {
    log_file.open(a.log);
    if (!log_file) throw cp::DataError("cannot write '" + a.log + "'");
  }
  const auto on_epoch = [&](const cp::EpochLog& e) {
    const std::string line = cp::format_epoch_log(e);
    if (!a.quiet) std::cerr << line << '\n';
    if (log_file) log_file << line << '\n' << std::flush;
  };
  const cp::TrainResult<S> result = cp::train<S>(train, dev, config, make, on_epoch);
  Output out(a.out);
  cp::save_checkpoint(out.stream(), result.best);
  if (!a.quiet) {
    std::cerr << "best epoch " << result.best.epoch << " dev_par_f1=" << cp::format_metric(result.best.best_dev_f1)
              << " epochs_run=" << result.epochs_run << '\n';
  }
}

int run_train(const TrainArgs& a) {
  check_output_path(a.out);
  check_output_path(a.log);
  const cp::TrainConfig config = build_config(a);
  const auto load = [](const std::string& path) {
    try {
      return cp::make_examples(read_trees(path));
    } catch (const cp::DataError& e) {
      throw cp::DataError(path + ": " + e.what());
    }
  };
  const auto train = load(a.train);
  const auto dev = load(a.dev);
  try {
    if (config.scorer == cp::ScorerKind::kLinear) {
      train_and_save<cp::LinearScorer>(
          train, dev, config, [&](const cp::LabelVocab& v) { return cp::make_linear_scorer(config, v); }, a);
    } else {
      train_and_save<cp::MLPHead>(
          train, dev, config, [&](const cp::LabelVocab& v) { return cp::make_mlp_head(config, v); }, a);
    }
  } catch (const cp::TrainingDiverged& e) {
    throw cp::DataError(e.what());
  }
  return 0;
}

// ---- parse ------------------------------------------------------------------

struct ParseArgs {
  std::string checkpoint, scores, input, out, out_segs;
  int threads = 1;
  DecodeFlags decode;
};

cp::AnyCheckpoint read_checkpoint(const std::string& path) {
  std::istringstream in(read_text(path));
  try {
    return cp::load_checkpoint(in);
  } catch (const cp::DataError& e) {
    throw cp::DataError(path + ": " + e.what());
  }
}

std::vector<cp::ScoredSentence> read_score_sentences(const std::string& path) {
  std::istringstream in(read_text(path));
  try {
    return cp::read_score_file(in);
  } catch (const cp::DataError& e) {
    throw cp::DataError(path + ": " + e.what());
  }
}

int run_parse(const ParseArgs& a) {
  check_output_path(a.out);
  check_output_path(a.out_segs);
  const auto sentences = read_sentences(a.input);
  std::vector<cp::RecoveredTree> results(sentences.size());

  if (!a.scores.empty()) {
    const auto scored = read_score_sentences(a.scores);
    if (scored.size() != sentences.size()) {
      throw cp::DataError("score file has " + std::to_string(scored.size()) + " sentences, input has " +
                          std::to_string(sentences.size()));
    }
    for (std::size_t k = 0; k < scored.size(); ++k) {
      if (scored[k].scores.n() != static_cast<int>(sentences[k].size())) {
        throw cp::DataError("sentence " + std::to_string(k + 1) + " ('" + scored[k].id + "'): score file has n=" +
                            std::to_string(scored[k].scores.n()) + " but the input has " +
                            std::to_string(sentences[k].size()) + " characters");
      }
    }
    const cp::DecodeConfig config = a.decode.apply({});
    cp::parallel_for(sentences.size(), a.threads, [&](std::size_t k) {
      try {
        const auto decoded = cp::cky_decode(scored[k].scores, scored[k].vocab, config, sentences[k]);
        results[k] = cp::from_char_tree(decoded.tree);
      } catch (const cp::DataError& e) {
        throw cp::DataError("sentence " + std::to_string(k + 1) + ": " + e.what());
      }
    });
  } else {
    const cp::AnyCheckpoint ckpt = read_checkpoint(a.checkpoint);
    std::visit(
        [&](const auto& c) {
          const cp::DecodeConfig config = a.decode.apply(c.decode);
          cp::parallel_for(sentences.size(), a.threads, [&](std::size_t k) {
            results[k] = cp::parse_chars(c.scorer, c.vocab, sentences[k], config);
          });
        },
        ckpt);
  }

  Output out(a.out);
  for (const auto& r : results) out.stream() << cp::serialize_bracketed(r.tree) << '\n';
  if (!a.out_segs.empty()) {
    Output segs(a.out_segs);
    for (const auto& r : results) segs.stream() << join_words(r.segmentation.words) << '\n';
  }
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string gold, pred, out;
  bool table = false;
};

int run_eval(const EvalArgs& a) {
  check_output_path(a.out);
  const auto gold = cp::strip_function_tags(read_trees(a.gold)).trees;
  const auto pred = cp::strip_function_tags(read_trees(a.pred)).trees;
  const cp::JointReport report = cp::joint_report(gold, pred);
  const std::string line = cp::report_keyvalues(report);
  std::cout << line << '\n';
  if (a.table) std::cerr << cp::report_table(report);
  if (!a.out.empty()) {
    Output out(a.out);
    out.stream() << line << '\n';
  }
  return 0;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
  std::string checkpoint, corpus;
  int repeats = 10;
  int threads = 1;
  bool include_scoring = false;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
};

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  for (const double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (const double x : xs) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = xs.size() > 1 ? std::sqrt(s.stddev / static_cast<double>(xs.size() - 1)) : 0.0;
  return s;
}

template <class Fn>
double sentences_per_second(std::size_t count, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return static_cast<double>(count) / std::max(elapsed.count(), 1e-9);
}

void print_summary(const std::string& name, const std::vector<double>& samples, std::size_t sentences, int threads) {
  const Summary s = summarize(samples);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s_sents_per_sec=%.2f %s_std=%.2f repeats=%zu sentences=%zu threads=%d",
                name.c_str(), s.mean, name.c_str(), s.stddev, samples.size(), sentences, threads);
  std::cout << buf << '\n';
}

int run_bench(const BenchArgs& a) {
  const auto corpus = cp::make_examples(read_trees(a.corpus));
  if (corpus.empty()) throw cp::DataError(a.corpus + ": corpus is empty");
  const cp::AnyCheckpoint ckpt = read_checkpoint(a.checkpoint);
  std::visit(
      [&](const auto& c) {
        std::vector<cp::SpanScores> scores(corpus.size());
        cp::parallel_for(corpus.size(), a.threads,
                         [&](std::size_t k) { scores[k] = c.scorer.score(corpus[k].chars, {}); });
        std::vector<double> decode_only, end_to_end;
        std::vector<cp::RecoveredTree> sink(corpus.size());
        for (int r = 1; r <= a.repeats; ++r) {
          const double rate = sentences_per_second(corpus.size(), [&] {
            cp::parallel_for(corpus.size(), a.threads, [&](std::size_t k) {
              sink[k] = cp::from_char_tree(cp::cky_decode(scores[k], c.vocab, c.decode, corpus[k].chars).tree);
            });
          });
          decode_only.push_back(rate);
          std::printf("repeat %d decode_only %.2f sents/sec\n", r, rate);
          if (a.include_scoring) {
            const double full = sentences_per_second(corpus.size(), [&] {
              cp::parallel_for(corpus.size(), a.threads, [&](std::size_t k) {
                sink[k] = cp::parse_chars(c.scorer, c.vocab, corpus[k].chars, c.decode);
              });
            });
            end_to_end.push_back(full);
            std::printf("repeat %d score_and_decode %.2f sents/sec\n", r, full);
          }
        }
        std::fflush(stdout);
        print_summary("decode_only", decode_only, corpus.size(), a.threads);
        if (a.include_scoring) print_summary("score_and_decode", end_to_end, corpus.size(), a.threads);
      },
      ckpt);
  return 0;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  int count = 100;
  std::uint64_t seed = 7;
  double mean_words = cp::SynthOptions{}.mean_words;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  check_output_path(a.out);
  cp::SynthOptions opts;
  opts.seed = a.seed;
  opts.mean_words = a.mean_words;
  Output out(a.out);
  cp::write_corpus(out.stream(), cp::synthetic_treebank(a.count, opts));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint Chinese word segmentation and constituency parsing over characters"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TransformArgs transform;
  auto* transform_cmd = app.add_subcommand("transform", "Convert word-level trees to character-level binary trees");
  transform_cmd->add_option("input", transform.in, "Bracketed word-level trees")->required()->check(CLI::ExistingFile);
  transform_cmd->add_option("output", transform.out, "One character tree per line (default: stdout)");
  transform_cmd->add_flag("--keep-function-tags", transform.keep_tags, "Do not strip function tags");

  DetransformArgs detransform;
  auto* detransform_cmd =
      app.add_subcommand("detransform", "Recover word-level trees and segmentations from character trees");
  detransform_cmd->add_option("input", detransform.in, "Character trees")->required()->check(CLI::ExistingFile);
  detransform_cmd->add_option("--out-trees", detransform.out_trees, "Word-level trees (default: stdout)");
  detransform_cmd->add_option("--out-segs", detransform.out_segs, "Space-separated words, one sentence per line");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a span scorer");
  train_cmd->add_option("--train", train.train, "Training trees")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dev", train.dev, "Development trees")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Checkpoint file")->required();
  train_cmd->add_option("--config", train.config, "key=value configuration file")->check(CLI::ExistingFile);
  train_cmd->add_option("--preset", train.preset, "Starting hyper-parameters")
      ->check(CLI::IsMember({"feature", "encoder"}));
  train_cmd->add_option("--set", train.settings, "Override one config key (key=value); repeatable");
  train_cmd->add_option("--log", train.log, "Also write the per-epoch log here");
  train_cmd->add_option("--lr", train.lr, "Learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", train.batch_size, "Sentences per batch")->check(CLI::PositiveNumber);
  train_cmd->add_option("--max-epochs", train.max_epochs, "Epoch cap")->check(CLI::PositiveNumber);
  train_cmd->add_option("--label-loss-epochs", train.label_loss_epochs, "Epochs trained with the label loss");
  train_cmd->add_option("--seed", train.seed, "Shuffling and initialization seed");
  train_cmd->add_option("--scorer", train.scorer, "Scorer type")->check(CLI::IsMember({"linear", "mlp"}));
  train_cmd->add_option("--margin-mode", train.margin_mode, "Tree-loss margin")
      ->check(CLI::IsMember({"flat", "hamming"}));
  train_cmd->add_flag("--quiet", train.quiet, "Do not log to standard error");

  ParseArgs parse;
  auto* parse_cmd = app.add_subcommand("parse", "Segment and parse raw sentences");
  auto* ckpt_opt = parse_cmd->add_option("--checkpoint", parse.checkpoint, "Trained checkpoint")
                       ->check(CLI::ExistingFile);
  auto* scores_opt = parse_cmd->add_option("--scores", parse.scores, "Precomputed span score file")
                         ->check(CLI::ExistingFile);
  ckpt_opt->excludes(scores_opt);
  parse_cmd->add_option("--input", parse.input, "One sentence per line; whitespace is ignored")
      ->required()
      ->check(CLI::ExistingFile);
  parse_cmd->add_option("--out", parse.out, "Word-level trees (default: stdout)");
  parse_cmd->add_option("--out-segs", parse.out_segs, "Space-separated words, one sentence per line");
  parse_cmd->add_option("--threads", parse.threads, "Worker threads")->check(CLI::PositiveNumber);
  parse.decode.add(parse_cmd);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Segmentation and parsing F1");
  eval_cmd->add_option("--gold", eval.gold, "Gold trees")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", eval.pred, "Predicted trees")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval.out, "Also write the key=value line here");
  eval_cmd->add_flag("--table", eval.table, "Print a table to standard error");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Measure decoding throughput");
  bench_cmd->add_option("--checkpoint", bench.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--corpus", bench.corpus, "Trees whose sentences are decoded")
      ->required()
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--repeats", bench.repeats, "Timing samples")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--threads", bench.threads, "Worker threads")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--include-scoring", bench.include_scoring, "Also time scoring plus decoding");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic CTB-style treebank");
  synth_cmd->add_option("--count", synth.count, "Number of trees")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--mean-words", synth.mean_words, "Mean sentence length in words")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth.out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*transform_cmd) return run_transform(transform);
    if (*detransform_cmd) return run_detransform(detransform);
    if (*train_cmd) return run_train(train);
    if (*parse_cmd) {
      if (parse.checkpoint.empty() && parse.scores.empty()) {
        throw cp::UsageError("parse needs --checkpoint or --scores");
      }
      return run_parse(parse);
    }
    if (*eval_cmd) return run_eval(eval);
    if (*bench_cmd) return run_bench(bench);
    if (*synth_cmd) return run_synth(synth);
  } catch (const cp::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
