#pragma once

// CKY decoding over span scores. Because a span's label and its split are
// scored independently, the best tree over (i, j) is
//   best(i, j) = max_l s(i, j, l) + max_k [best(i, k) + best(k, j)]
// which runs in O(n^3 + n^2 L).

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "charparse/chartransform.hpp"
#include "charparse/error.hpp"
#include "charparse/scores.hpp"

namespace charparse {

struct DecodeConfig {
  bool constrain_char_labels = true;  // "@1"-final labels exactly on length-1 spans
  bool require_nonnull_root = true;
};

struct DecodeResult {
  CharTree tree;
  double score = 0.0;
};

inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

inline SpanScores apply_masks(const SpanScores& scores, const LabelVocab& vocab, const DecodeConfig& config) {
  if (scores.num_labels() != vocab.size()) throw UsageError("score tensor and vocabulary disagree on L");
  SpanScores out = scores;
  const int n = scores.n();
  const int L = vocab.size();
  if (config.constrain_char_labels) {
    std::vector<bool> char_final(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) char_final[l] = ends_with_char_label(vocab.label(l));
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j <= n; ++j) {
        auto row = out.row(i, j);
        const bool unit = j - i == 1;
        for (int l = 0; l < L; ++l) {
          if (char_final[l] != unit) row[l] = kMasked;
        }
      }
    }
  }
  if (config.require_nonnull_root && n > 0) out.at(0, n, vocab.null_id()) = kMasked;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      bool any = false;
      for (const double v : out.row(i, j)) any = any || v != kMasked;
      if (!any) {
        throw DataError("masking leaves span (" + std::to_string(i) + "," + std::to_string(j) +
                        ") with no admissible label");
      }
    }
  }
  return out;
}

namespace detail {

// First index of the maximum; ties go to the smallest label id.
inline int argmax(std::span<const double> row) {
  int best = 0;
  for (int l = 1; l < static_cast<int>(row.size()); ++l) {
    if (row[l] > row[best]) best = l;
  }
  return best;
}

inline std::string leaf_char(std::span<const std::string> chars, int pos) {
  return chars.empty() ? std::string() : chars[static_cast<std::size_t>(pos)];
}

inline void check_decode_input(const SpanScores& scores, std::span<const std::string> chars) {
  if (scores.n() == 0) throw UsageError("cannot decode an empty sentence");
  if (!chars.empty() && static_cast<int>(chars.size()) != scores.n()) {
    throw UsageError("character count does not match score tensor length");
  }
}

}  // namespace detail

class Chart {
 public:
  explicit Chart(int n)
      : n_(n),
        combined_(static_cast<std::size_t>(n + 1) * (n + 1), 0.0),
        label_(static_cast<std::size_t>(n + 1) * (n + 1), 0),
        split_(static_cast<std::size_t>(n + 1) * (n + 1), -1) {}

  double& combined(int i, int j) { return combined_[idx(i, j)]; }
  double combined(int i, int j) const { return combined_[idx(i, j)]; }
  int& label(int i, int j) { return label_[idx(i, j)]; }
  int label(int i, int j) const { return label_[idx(i, j)]; }
  int& split(int i, int j) { return split_[idx(i, j)]; }
  int split(int i, int j) const { return split_[idx(i, j)]; }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * (n_ + 1) + j; }

  int n_;
  std::vector<double> combined_;
  std::vector<int> label_;
  std::vector<int> split_;
};

// Fills the chart from already-masked scores.
inline Chart fill_chart(const SpanScores& masked) {
  const int n = masked.n();
  Chart chart(n);
  for (int len = 1; len <= n; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      const auto row = masked.row(i, j);
      const int l = detail::argmax(row);
      chart.label(i, j) = l;
      if (len == 1) {
        chart.combined(i, j) = row[l];
        continue;
      }
      int best_k = i + 1;
      double best = chart.combined(i, i + 1) + chart.combined(i + 1, j);
      for (int k = i + 2; k < j; ++k) {
        const double v = chart.combined(i, k) + chart.combined(k, j);
        if (v > best) {
          best = v;
          best_k = k;
        }
      }
      chart.split(i, j) = best_k;
      chart.combined(i, j) = row[l] + best;
    }
  }
  return chart;
}

inline CharTree backtrace(const Chart& chart, const LabelVocab& vocab, std::span<const std::string> chars, int i,
                          int j) {
  const std::string& label = vocab.label(chart.label(i, j));
  if (j - i == 1) return CharTree::leaf(label, detail::leaf_char(chars, i), i);
  const int k = chart.split(i, j);
  return CharTree::join(label, backtrace(chart, vocab, chars, i, k), backtrace(chart, vocab, chars, k, j));
}

// Highest-scoring binary tree. Masks from `config` are applied first; ties
// go to the smallest label id, then the smallest split point.
inline DecodeResult cky_decode(const SpanScores& scores, const LabelVocab& vocab, const DecodeConfig& config = {},
                               std::span<const std::string> chars = {}) {
  detail::check_decode_input(scores, chars);
  const SpanScores masked = apply_masks(scores, vocab, config);
  const Chart chart = fill_chart(masked);
  const int n = scores.n();
  if (!std::isfinite(chart.combined(0, n))) throw DataError("no admissible tree: all root labels are masked");
  CharTree tree = backtrace(chart, vocab, chars, 0, n);
  const double total = tree_score(masked, tree, vocab);
  return {std::move(tree), total};
}

inline constexpr int kBruteForceMaxLength = 12;

struct BruteForceResult {
  CharTree tree;
  double score = 0.0;
  std::uint64_t bracketings = 0;
};

// Exhaustive reference decoder: scores every binary bracketing of the
// sentence with per-span argmax labels and keeps the first strict maximum,
// enumerating split points in increasing order.
inline BruteForceResult brute_force_decode(const SpanScores& scores, const LabelVocab& vocab,
                                           const DecodeConfig& config = {},
                                           std::span<const std::string> chars = {}) {
  detail::check_decode_input(scores, chars);
  const int n = scores.n();
  if (n > kBruteForceMaxLength) {
    throw UsageError("brute_force_decode supports n <= " + std::to_string(kBruteForceMaxLength));
  }
  const SpanScores masked = apply_masks(scores, vocab, config);

  struct Candidate {
    double score;
    CharTree tree;
  };
  std::map<std::pair<int, int>, std::vector<Candidate>> memo;
  const auto enumerate = [&](auto&& self, int i, int j) -> const std::vector<Candidate>& {
    if (const auto it = memo.find({i, j}); it != memo.end()) return it->second;
    const auto row = masked.row(i, j);
    const int l = detail::argmax(row);
    const std::string& label = vocab.label(l);
    std::vector<Candidate> out;
    if (j - i == 1) {
      out.push_back({row[l], CharTree::leaf(label, detail::leaf_char(chars, i), i)});
    } else {
      for (int k = i + 1; k < j; ++k) {
        const auto& lefts = self(self, i, k);
        const auto& rights = self(self, k, j);
        for (const auto& a : lefts) {
          for (const auto& b : rights) out.push_back({row[l] + (a.score + b.score), CharTree::join(label, a.tree, b.tree)});
        }
      }
    }
    return memo.emplace(std::pair{i, j}, std::move(out)).first->second;
  };

  const auto& all = enumerate(enumerate, 0, n);
  std::size_t best = 0;
  for (std::size_t t = 1; t < all.size(); ++t) {
    if (all[t].score > all[best].score) best = t;
  }
  if (!std::isfinite(all[best].score)) throw DataError("no admissible tree: all root labels are masked");
  return {all[best].tree, all[best].score, static_cast<std::uint64_t>(all.size())};
}

}  // namespace charparse
