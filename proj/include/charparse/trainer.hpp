#pragma once

// Mini-batch training with a two-phase loss schedule (label loss, then tree
// loss) and learning-rate decay driven by dev parse F1.

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "charparse/chartransform.hpp"
#include "charparse/decoder.hpp"
#include "charparse/error.hpp"
#include "charparse/eval.hpp"
#include "charparse/features.hpp"
#include "charparse/losses.hpp"
#include "charparse/parallel.hpp"
#include "charparse/random.hpp"
#include "charparse/scorer.hpp"
#include "charparse/treebank.hpp"

namespace charparse {

enum class LossKind { kLabel, kTree };

inline const char* to_string(LossKind k) { return k == LossKind::kLabel ? "label" : "tree"; }
inline const char* to_string(MarginMode m) { return m == MarginMode::kFlat ? "flat" : "hamming"; }

enum class ScorerKind { kLinear, kMlp };

struct TrainConfig {
  double learning_rate = 1e-5;
  double decay_factor = 0.5;
  int decay_patience = 3;
  int max_decay = 10;
  int batch_size = 250;
  int label_loss_epochs = 10;
  int mlp_hidden = 250;
  double dropout = 0.2;
  std::uint64_t seed = 1;
  MarginMode margin_mode = MarginMode::kFlat;
  int max_epochs = 100;
  bool label_loss_gold_only = false;
  std::uint32_t feature_dim = kDefaultFeatureDim;
  ScorerKind scorer = ScorerKind::kMlp;
  DecodeConfig decode;

  // Hyperparameters as used with a fine-tuned contextual encoder.
  static TrainConfig encoder_preset() { return {}; }

  // The hashed-feature linear scorer learns at a much larger step size.
  static TrainConfig feature_preset() {
    TrainConfig c;
    c.learning_rate = 0.1;
    c.scorer = ScorerKind::kLinear;
    return c;
  }

  void validate() const {
    const auto require = [](bool ok, const char* what) {
      if (!ok) throw UsageError(std::string("invalid training config: ") + what);
    };
    require(learning_rate > 0, "learning_rate must be positive");
    require(decay_factor > 0 && decay_factor < 1, "decay_factor must be in (0, 1)");
    require(decay_patience > 0, "decay_patience must be positive");
    require(max_decay > 0, "max_decay must be positive");
    require(batch_size > 0, "batch_size must be positive");
    require(label_loss_epochs >= 0, "label_loss_epochs must be non-negative");
    require(mlp_hidden > 0, "mlp_hidden must be positive");
    require(dropout >= 0 && dropout < 1, "dropout must be in [0, 1)");
    require(max_epochs > 0, "max_epochs must be positive");
    require(feature_dim > 0, "feature_dim must be positive");
  }

  // Applies one key=value setting; unknown keys are rejected.
  void set(const std::string& key, const std::string& value) {
    const auto as_double = [&] {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    };
    const auto as_int = [&] {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    };
    const auto as_bool = [&] {
      if (value == "true" || value == "1" || value == "on") return true;
      if (value == "false" || value == "0" || value == "off") return false;
      throw std::invalid_argument(value);
    };
    try {
      if (key == "learning_rate") learning_rate = as_double();
      else if (key == "decay_factor") decay_factor = as_double();
      else if (key == "decay_patience") decay_patience = static_cast<int>(as_int());
      else if (key == "max_decay") max_decay = static_cast<int>(as_int());
      else if (key == "batch_size") batch_size = static_cast<int>(as_int());
      else if (key == "label_loss_epochs") label_loss_epochs = static_cast<int>(as_int());
      else if (key == "mlp_hidden") mlp_hidden = static_cast<int>(as_int());
      else if (key == "dropout") dropout = as_double();
      else if (key == "seed") seed = static_cast<std::uint64_t>(as_int());
      else if (key == "max_epochs") max_epochs = static_cast<int>(as_int());
      else if (key == "feature_dim") feature_dim = static_cast<std::uint32_t>(as_int());
      else if (key == "label_loss_gold_only") label_loss_gold_only = as_bool();
      else if (key == "constrain_char_labels") decode.constrain_char_labels = as_bool();
      else if (key == "require_nonnull_root") decode.require_nonnull_root = as_bool();
      else if (key == "margin_mode") {
        if (value == "flat") margin_mode = MarginMode::kFlat;
        else if (value == "hamming") margin_mode = MarginMode::kHamming;
        else throw std::invalid_argument(value);
      } else if (key == "scorer") {
        if (value == "linear") scorer = ScorerKind::kLinear;
        else if (value == "mlp") scorer = ScorerKind::kMlp;
        else throw std::invalid_argument(value);
      } else {
        throw UsageError("unknown config key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      if (dynamic_cast<const UsageError*>(&e)) throw;
      throw UsageError("bad value '" + value + "' for config key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw UsageError("value out of range for config key '" + key + "'");
    }
  }

  // key=value lines; '#' starts a comment.
  void read(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw UsageError("config line without '=': " + line);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }
};

// One training sentence with every derived view precomputed.
struct Example {
  SyntaxTree word_tree;
  CharTree char_tree;
  GoldSpanMap gold;
  WordSegmentation segmentation;
  std::vector<std::string> chars;
};

inline Example make_example(const SyntaxTree& word_tree) {
  Example e;
  e.word_tree = word_tree;
  e.char_tree = to_char_tree(word_tree);
  e.gold = gold_span_labels(e.char_tree);
  e.segmentation = segmentation_of(word_tree);
  e.chars = chars_of(e.char_tree);
  return e;
}

inline std::vector<Example> make_examples(const Corpus& corpus, bool strip_tags = true) {
  std::vector<Example> out;
  out.reserve(corpus.trees.size());
  for (std::size_t k = 0; k < corpus.trees.size(); ++k) {
    try {
      out.push_back(make_example(strip_tags ? strip_function_tags(corpus.trees[k]) : corpus.trees[k]));
    } catch (const DataError& e) {
      throw DataError("tree " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  return out;
}

template <SpanScorer S>
struct Checkpoint {
  S scorer;
  LabelVocab vocab;
  int epoch = 0;
  double best_dev_f1 = 0.0;
  int decay_count = 0;
  DecodeConfig decode;
};

// Scores, decodes and detransforms one sentence.
template <SpanScorer S>
RecoveredTree parse_chars(const S& scorer, const LabelVocab& vocab, const std::vector<std::string>& chars,
                          const DecodeConfig& config = {}) {
  const SpanScores scores = scorer.score(chars, {});
  return from_char_tree(cky_decode(scores, vocab, config, chars).tree);
}

template <SpanScorer S>
JointReport evaluate_dev(const S& scorer, const LabelVocab& vocab, const DecodeConfig& config,
                         const std::vector<Example>& dev, int threads = 1) {
  std::vector<SyntaxTree> gold(dev.size()), pred(dev.size());
  parallel_for(dev.size(), threads, [&](std::size_t k) {
    gold[k] = dev[k].word_tree;
    pred[k] = parse_chars(scorer, vocab, dev[k].chars, config).tree;
  });
  return joint_report(gold, pred);
}

template <SpanScorer S>
JointReport evaluate_dev(const Checkpoint<S>& ckpt, const std::vector<Example>& dev, int threads = 1) {
  return evaluate_dev(ckpt.scorer, ckpt.vocab, ckpt.decode, dev, threads);
}

struct EpochLog {
  int epoch = 0;
  LossKind loss_kind = LossKind::kLabel;
  double loss = 0.0;
  double learning_rate = 0.0;
  double dev_seg_f1 = 0.0;
  double dev_parse_f1 = 0.0;
  double train_parse_f1 = -1.0;  // only when requested
  int decay_count = 0;
};

inline std::string format_epoch_log(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "epoch=%d loss_kind=%s loss=%.6f lr=%.6g dev_seg_f1=%.6f dev_par_f1=%.6f decays=%d",
                e.epoch, to_string(e.loss_kind), e.loss, e.learning_rate, e.dev_seg_f1, e.dev_parse_f1,
                e.decay_count);
  return buf;
}

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, std::size_t batch)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  int epoch_;
  std::size_t batch_;
};

template <SpanScorer S>
struct TrainResult {
  Checkpoint<S> best;
  std::vector<EpochLog> log;
  int epochs_run = 0;
  double final_learning_rate = 0.0;
};

// Tracks the decay policy: after `patience` epochs without a new best dev
// score the rate is multiplied by `factor`; training ends at `max_decay`.
class DecaySchedule {
 public:
  DecaySchedule(double lr, double factor, int patience, int max_decay)
      : lr_(lr), factor_(factor), patience_(patience), max_decay_(max_decay) {}

  // Returns true if this epoch set a new best.
  bool observe(double dev_metric) {
    if (dev_metric > best_) {
      best_ = dev_metric;
      stale_ = 0;
      return true;
    }
    if (++stale_ >= patience_ && decays_ < max_decay_) {
      lr_ *= factor_;
      ++decays_;
      stale_ = 0;
    }
    return false;
  }

  double learning_rate() const { return lr_; }
  int decays() const { return decays_; }
  bool exhausted() const { return decays_ >= max_decay_; }
  double best() const { return best_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  int max_decay_;
  int decays_ = 0;
  int stale_ = 0;
  double best_ = -1.0;
};

template <SpanScorer S>
TrainResult<S> train(const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                     const TrainConfig& config, const std::function<S(const LabelVocab&)>& make_scorer,
                     const std::function<void(const EpochLog&)>& on_epoch = {}) {
  config.validate();
  if (train_set.empty()) throw UsageError("training corpus is empty");
  if (dev_set.empty()) throw UsageError("dev corpus is empty");

  std::vector<CharTree> trees;
  trees.reserve(train_set.size());
  for (const auto& e : train_set) trees.push_back(e.char_tree);
  const LabelVocab vocab = build_vocab(trees);

  S scorer = make_scorer(vocab);
  DecaySchedule schedule(config.learning_rate, config.decay_factor, config.decay_patience, config.max_decay);
  TrainResult<S> result{{scorer, vocab, 0, 0.0, 0, config.decode}, {}, 0, config.learning_rate};

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  Rng rng(config.seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const LossKind kind = epoch <= config.label_loss_epochs ? LossKind::kLabel : LossKind::kTree;
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      auto grad = scorer.zero_gradient();
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) {
        const Example& ex = train_set[order[k]];
        const ForwardOptions opts{true, hash_combine(hash_combine(config.seed, static_cast<std::uint64_t>(epoch)),
                                                     static_cast<std::uint64_t>(order[k]))};
        const SpanScores scores = scorer.score(ex.chars, opts);
        const LossValue loss = kind == LossKind::kLabel
                                   ? label_loss(scores, ex.gold, vocab, config.label_loss_gold_only)
                                   : tree_loss(scores, ex.char_tree, vocab, config.decode, config.margin_mode);
        if (!std::isfinite(loss.value)) throw TrainingDiverged(epoch, b);
        epoch_loss += loss.value;
        scorer.backward(ex.chars, loss.gradient, grad, opts);
      }
      scorer.apply(grad, schedule.learning_rate());
      if (!scorer.all_finite()) throw TrainingDiverged(epoch, b);
    }

    const double lr_used = schedule.learning_rate();
    const JointReport dev = evaluate_dev(scorer, vocab, config.decode, dev_set);
    if (schedule.observe(dev.parse.f1)) {
      result.best = {scorer, vocab, epoch, dev.parse.f1, schedule.decays(), config.decode};
    }
    result.best.decay_count = schedule.decays();
    EpochLog entry{epoch, kind, epoch_loss, lr_used, dev.seg.f1, dev.parse.f1, -1.0, schedule.decays()};
    result.log.push_back(entry);
    result.epochs_run = epoch;
    result.final_learning_rate = schedule.learning_rate();
    if (on_epoch) on_epoch(entry);
    if (schedule.exhausted()) break;
  }
  return result;
}

inline LinearScorer make_linear_scorer(const TrainConfig& c, const LabelVocab& v) {
  return LinearScorer(c.feature_dim, v.size());
}

inline MLPHead make_mlp_head(const TrainConfig& c, const LabelVocab& v) {
  return MLPHead(c.feature_dim, c.mlp_hidden, v.size(), c.dropout, hash_combine(c.seed, 0x4D4C50));
}

// ---- checkpoint files -------------------------------------------------------

inline constexpr std::string_view kCheckpointMagic = "charparse-checkpoint";
inline constexpr int kCheckpointVersion = 1;

template <SpanScorer S>
void save_checkpoint(std::ostream& out, const Checkpoint<S>& c) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "epoch " << c.epoch << '\n';
  out << "best_dev_f1 " << detail::format_double(c.best_dev_f1) << '\n';
  out << "decay_count " << c.decay_count << '\n';
  out << "decode " << (c.decode.constrain_char_labels ? 1 : 0) << ' ' << (c.decode.require_nonnull_root ? 1 : 0)
      << '\n';
  out << "labels " << c.vocab.size();
  for (int l = 0; l < c.vocab.size(); ++l) out << ' ' << (l == 0 ? std::string(kNullToken) : c.vocab.label(l));
  out << '\n';
  c.scorer.save(out);
}

using AnyCheckpoint = std::variant<Checkpoint<LinearScorer>, Checkpoint<MLPHead>>;

inline AnyCheckpoint load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) throw DataError("not a checkpoint file");
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  int epoch = 0, decays = 0, constrain = 1, root = 1, count = 0;
  std::string best;
  detail::expect_key(in, "epoch");
  in >> epoch;
  detail::expect_key(in, "best_dev_f1");
  in >> best;
  detail::expect_key(in, "decay_count");
  in >> decays;
  detail::expect_key(in, "decode");
  in >> constrain >> root;
  detail::expect_key(in, "labels");
  if (!(in >> count) || count < 1) throw DataError("bad label count in checkpoint");
  std::vector<std::string> labels(static_cast<std::size_t>(count));
  for (auto& l : labels) {
    if (!(in >> l)) throw DataError("truncated label list in checkpoint");
    if (l == kNullToken) l = std::string(kNullLabel);
  }
  const LabelVocab vocab = LabelVocab::from_labels(labels);
  const DecodeConfig decode{constrain != 0, root != 0};
  const double best_f1 = detail::parse_double(best);
  in >> std::ws;
  const std::streampos mark = in.tellg();
  std::string kind;
  in >> kind;
  in.seekg(mark);
  if (kind == "linear") {
    LinearScorer s = LinearScorer::load(in);
    if (s.num_labels() != vocab.size()) throw DataError("scorer label count does not match vocabulary");
    return Checkpoint<LinearScorer>{std::move(s), vocab, epoch, best_f1, decays, decode};
  }
  if (kind == "mlp") {
    MLPHead s = MLPHead::load(in);
    if (s.num_labels() != vocab.size()) throw DataError("scorer label count does not match vocabulary");
    return Checkpoint<MLPHead>{std::move(s), vocab, epoch, best_f1, decays, decode};
  }
  throw DataError("unknown scorer kind '" + kind + "' in checkpoint");
}

}  // namespace charparse
