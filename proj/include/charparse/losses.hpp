#pragma once

// Training objectives over span scores: per-span cross-entropy ("label
// loss") and a structured hinge over whole trees ("tree loss").

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "charparse/chartransform.hpp"
#include "charparse/decoder.hpp"
#include "charparse/scores.hpp"

namespace charparse {

enum class MarginMode { kFlat, kHamming };

struct LossValue {
  double value = 0.0;
  std::vector<ScoreGrad> gradient;    // sorted by (i, j, label)
  std::optional<CharTree> predicted;  // tree loss only
};

// Sum over spans of cross-entropy between softmax(scores(i, j, .)) and the
// gold label. Spans missing from `gold` count as the null label unless
// `gold_spans_only` restricts the sum to the gold tree's spans.
inline LossValue label_loss(const SpanScores& scores, const GoldSpanMap& gold, const LabelVocab& vocab,
                            bool gold_spans_only = false) {
  if (scores.n() != gold.n) throw UsageError("gold span map length does not match scores");
  if (scores.num_labels() != vocab.size()) throw UsageError("score tensor and vocabulary disagree on L");
  const int n = scores.n();
  const int L = vocab.size();
  LossValue out;
  std::vector<double> p(static_cast<std::size_t>(L));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      int target = vocab.null_id();
      if (const auto it = gold.entries.find({i, j}); it != gold.entries.end()) {
        target = vocab.id(it->second);
      } else if (gold_spans_only) {
        continue;
      }
      const auto row = scores.row(i, j);
      const double mx = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (int l = 0; l < L; ++l) {
        p[l] = std::exp(row[l] - mx);
        z += p[l];
      }
      out.value += std::log(z) + mx - row[target];
      for (int l = 0; l < L; ++l) {
        const double g = p[l] / z - (l == target ? 1.0 : 0.0);
        if (g != 0.0) out.gradient.push_back({i, j, l, g});
      }
    }
  }
  return out;
}

namespace detail {

struct GoldIndex {
  std::map<std::pair<int, int>, std::pair<int, int>> spans;  // (i,j) -> (label id, split or -1)

  explicit GoldIndex(const CharTree& t, const LabelVocab& vocab) { add(t, vocab); }

  void add(const CharTree& t, const LabelVocab& vocab) {
    spans[{t.begin, t.end}] = {vocab.id(t.label), t.is_leaf() ? -1 : t.left().end};
    for (const auto& c : t.children) add(c, vocab);
  }

  bool contains(int i, int j, int l) const {
    const auto it = spans.find({i, j});
    return it != spans.end() && it->second.first == l;
  }
};

inline int argmax_excluding(std::span<const double> row, int excluded) {
  int best = -1;
  for (int l = 0; l < static_cast<int>(row.size()); ++l) {
    if (l == excluded) continue;
    if (best < 0 || row[l] > row[best]) best = l;
  }
  return best;
}

// Best-scoring tree that differs from the gold tree somewhere, by dynamic
// programming over gold spans: a differing subtree over a gold span either
// changes its label, changes its split, or keeps both and differs in
// exactly one child.
class NonGoldDecoder {
 public:
  NonGoldDecoder(const SpanScores& masked, const Chart& chart, const GoldIndex& gold, const LabelVocab& vocab,
                 std::span<const std::string> chars)
      : masked_(masked), chart_(chart), gold_(gold), vocab_(vocab), chars_(chars) {}

  std::optional<CharTree> decode(int n) {
    if (!std::isfinite(value(0, n))) return std::nullopt;
    return build(0, n);
  }

 private:
  enum class Kind { kRelabel, kResplit, kLeftDiffers, kRightDiffers };
  struct Choice {
    double value = kMasked;
    Kind kind = Kind::kRelabel;
    int label = -1;
    int split = -1;
  };

  double best_split(int i, int j, int excluded, int& arg) const {
    double best = kMasked;
    arg = -1;
    for (int k = i + 1; k < j; ++k) {
      if (k == excluded) continue;
      const double v = chart_.combined(i, k) + chart_.combined(k, j);
      if (arg < 0 || v > best) {
        best = v;
        arg = k;
      }
    }
    return best;
  }

  double value(int i, int j) {
    if (const auto it = memo_.find({i, j}); it != memo_.end()) return it->second.value;
    const auto [g, kg] = gold_.spans.at({i, j});
    const auto row = masked_.row(i, j);
    Choice best;
    const int alt = argmax_excluding(row, g);
    if (j - i == 1) {
      if (alt >= 0) best = {row[alt], Kind::kRelabel, alt, -1};
    } else {
      const auto consider = [&best](Choice c) {
        if (c.value > best.value) best = c;
      };
      int k_any = -1;
      const double any = best_split(i, j, -1, k_any);
      if (alt >= 0) consider({row[alt] + any, Kind::kRelabel, alt, k_any});
      int k_other = -1;
      const double other = best_split(i, j, kg, k_other);
      if (k_other >= 0) consider({row[g] + other, Kind::kResplit, g, k_other});
      consider({row[g] + (value(i, kg) + chart_.combined(kg, j)), Kind::kLeftDiffers, g, kg});
      consider({row[g] + (chart_.combined(i, kg) + value(kg, j)), Kind::kRightDiffers, g, kg});
    }
    memo_[{i, j}] = best;
    return best.value;
  }

  CharTree build(int i, int j) {
    const Choice c = memo_.at({i, j});
    const std::string& label = vocab_.label(c.label);
    if (j - i == 1) return CharTree::leaf(label, leaf_char(chars_, i), i);
    const int k = c.split;
    switch (c.kind) {
      case Kind::kLeftDiffers:
        return CharTree::join(label, build(i, k), backtrace(chart_, vocab_, chars_, k, j));
      case Kind::kRightDiffers:
        return CharTree::join(label, backtrace(chart_, vocab_, chars_, i, k), build(k, j));
      default:
        return CharTree::join(label, backtrace(chart_, vocab_, chars_, i, k), backtrace(chart_, vocab_, chars_, k, j));
    }
  }

  const SpanScores& masked_;
  const Chart& chart_;
  const GoldIndex& gold_;
  const LabelVocab& vocab_;
  std::span<const std::string> chars_;
  std::map<std::pair<int, int>, Choice> memo_;
};

inline void add_tree_pairs(const CharTree& t, const LabelVocab& vocab, double sign,
                           std::map<std::tuple<int, int, int>, double>& acc) {
  acc[{t.begin, t.end, vocab.id(t.label)}] += sign;
  for (const auto& c : t.children) add_tree_pairs(c, vocab, sign, acc);
}

inline int count_non_gold(const CharTree& t, const LabelVocab& vocab, const GoldIndex& gold) {
  int count = gold.contains(t.begin, t.end, vocab.id(t.label)) ? 0 : 1;
  for (const auto& c : t.children) count += count_non_gold(c, vocab, gold);
  return count;
}

}  // namespace detail

// Structured hinge: max(0, s(T_pred) + margin(T_pred) - s(T_gold)).
//
// kFlat adds a constant 1 to every tree other than the gold one, so T_pred is
// the best non-gold tree. kHamming adds 1/|gold spans| for every (span,
// label) pair outside the gold tree and decodes the augmented scores.
// The subgradient is +1 on T_pred's pairs and -1 on T_gold's; it is empty
// when the loss is zero.
inline LossValue tree_loss(const SpanScores& scores, const CharTree& gold_tree, const LabelVocab& vocab,
                           const DecodeConfig& config = {}, MarginMode mode = MarginMode::kFlat) {
  const int n = scores.n();
  if (gold_tree.begin != 0 || gold_tree.end != n) {
    throw UsageError("gold tree covers " + std::to_string(gold_tree.end - gold_tree.begin) +
                     " characters, scores cover " + std::to_string(n));
  }
  const auto chars = chars_of(gold_tree);
  const detail::GoldIndex gold(gold_tree, vocab);
  const double gold_score = tree_score(scores, gold_tree, vocab);
  const SpanScores masked = apply_masks(scores, vocab, config);

  std::optional<CharTree> pred;
  double margin = 0.0;
  if (mode == MarginMode::kFlat) {
    const Chart chart = fill_chart(masked);
    detail::NonGoldDecoder non_gold(masked, chart, gold, vocab, chars);
    pred = non_gold.decode(n);
    margin = 1.0;
  } else {
    const double m = 1.0 / static_cast<double>(gold.spans.size());
    SpanScores augmented = masked;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j <= n; ++j) {
        auto row = augmented.row(i, j);
        for (int l = 0; l < vocab.size(); ++l) {
          if (!gold.contains(i, j, l)) row[l] += m;
        }
      }
    }
    const Chart chart = fill_chart(augmented);
    pred = backtrace(chart, vocab, chars, 0, n);
    margin = m * detail::count_non_gold(*pred, vocab, gold);
  }

  LossValue out;
  if (!pred || *pred == gold_tree) {
    out.predicted = gold_tree;
    return out;
  }
  const double value = tree_score(scores, *pred, vocab) + margin - gold_score;
  if (!(value > 0.0)) {
    out.predicted = gold_tree;
    return out;
  }
  out.value = value;
  std::map<std::tuple<int, int, int>, double> acc;
  detail::add_tree_pairs(*pred, vocab, +1.0, acc);
  detail::add_tree_pairs(gold_tree, vocab, -1.0, acc);
  for (const auto& [key, g] : acc) {
    if (g != 0.0) out.gradient.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), g});
  }
  out.predicted = std::move(pred);
  return out;
}

}  // namespace charparse
