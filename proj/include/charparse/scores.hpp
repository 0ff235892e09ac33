#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "charparse/chartransform.hpp"
#include "charparse/error.hpp"

namespace charparse {

// Bidirectional label <-> id map. The null label is always id 0.
class LabelVocab {
 public:
  LabelVocab() { add(std::string(kNullLabel)); }

  // Builds from an explicit list; the first entry must be the null label.
  static LabelVocab from_labels(const std::vector<std::string>& labels) {
    if (labels.empty() || labels[0] != kNullLabel) {
      throw DataError("label list must start with the null label");
    }
    LabelVocab v;
    for (std::size_t k = 1; k < labels.size(); ++k) {
      if (v.contains(labels[k])) throw DataError("duplicate label '" + labels[k] + "'");
      v.add(labels[k]);
    }
    return v;
  }

  int add(const std::string& label) {
    if (const auto it = index_.find(label); it != index_.end()) return it->second;
    const int id = static_cast<int>(labels_.size());
    labels_.push_back(label);
    index_.emplace(label, id);
    return id;
  }

  bool contains(const std::string& label) const { return index_.count(label) != 0; }

  int id(const std::string& label) const {
    const auto it = index_.find(label);
    if (it == index_.end()) throw DataError("unknown label '" + label + "'");
    return it->second;
  }

  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(labels_.size()); }
  int null_id() const { return 0; }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const LabelVocab& a, const LabelVocab& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

namespace detail {
inline void add_labels(const CharTree& t, LabelVocab& v) {
  v.add(t.label);
  for (const auto& c : t.children) add_labels(c, v);
}
}  // namespace detail

// Null label, then every merged label in first-appearance (pre-order) order;
// "@1" and "@2" are appended if the corpus never uses them bare.
inline LabelVocab build_vocab(const std::vector<CharTree>& trees) {
  if (trees.empty()) throw DataError("cannot build a label vocabulary from an empty corpus");
  LabelVocab v;
  for (const auto& t : trees) detail::add_labels(t, v);
  v.add(std::string(kCharLabel));
  v.add(std::string(kSubwordLabel));
  return v;
}

// Dense score tensor over spans (i, j), 0 <= i < j <= n, and labels.
// Spans are stored in lexicographic (i, j) order.
class SpanScores {
 public:
  SpanScores() = default;
  SpanScores(int n, int num_labels, double fill = 0.0)
      : n_(n), labels_(num_labels), values_(static_cast<std::size_t>(span_count(n)) * num_labels, fill) {
    if (n < 0 || num_labels <= 0) throw UsageError("invalid SpanScores dimensions");
  }

  static int span_count(int n) { return n * (n + 1) / 2; }

  int n() const { return n_; }
  int num_labels() const { return labels_; }
  int num_spans() const { return span_count(n_); }

  std::size_t span_index(int i, int j) const {
    if (i < 0 || j > n_ || i >= j) {
      throw UsageError("span (" + std::to_string(i) + "," + std::to_string(j) + ") out of range for n=" +
                       std::to_string(n_));
    }
    // Spans starting before i: sum_{a<i} (n - a).
    return static_cast<std::size_t>(i * n_ - i * (i - 1) / 2 + (j - i - 1));
  }

  double& at(int i, int j, int l) { return values_[span_index(i, j) * labels_ + l]; }
  double at(int i, int j, int l) const { return values_[span_index(i, j) * labels_ + l]; }

  std::span<double> row(int i, int j) {
    return {values_.data() + span_index(i, j) * labels_, static_cast<std::size_t>(labels_)};
  }
  std::span<const double> row(int i, int j) const {
    return {values_.data() + span_index(i, j) * labels_, static_cast<std::size_t>(labels_)};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool all_finite() const {
    for (const double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const SpanScores&, const SpanScores&) = default;

 private:
  int n_ = 0;
  int labels_ = 0;
  std::vector<double> values_;
};

// One nonzero entry of d(loss)/d(score).
struct ScoreGrad {
  int i = 0;
  int j = 0;
  int label = 0;
  double value = 0.0;

  friend bool operator==(const ScoreGrad&, const ScoreGrad&) = default;
};

// 1.0 on every gold (span, label) pair, 0.0 elsewhere.
inline SpanScores oracle_scores(const GoldSpanMap& gold, const LabelVocab& vocab) {
  SpanScores s(gold.n, vocab.size());
  for (const auto& [span, label] : gold.entries) s.at(span.first, span.second, vocab.id(label)) = 1.0;
  return s;
}

// Sum of the scores of every (span, label) of the tree, accumulated as
// node + (left + right) so it matches the decoder's chart arithmetic.
inline double tree_score(const SpanScores& scores, const CharTree& tree, const LabelVocab& vocab) {
  const double own = scores.at(tree.begin, tree.end, vocab.id(tree.label));
  if (tree.is_leaf()) return own;
  return own + (tree_score(scores, tree.left(), vocab) + tree_score(scores, tree.right(), vocab));
}

}  // namespace charparse
