#pragma once

// Segmentation F1 and labeled-bracket parse F1.
//
// Constituents are (label, char_start, char_end) triples over internal nodes,
// excluding a root labeled TOP and pre-terminals. Offsets are in characters so
// that parse scoring stays defined when the predicted segmentation differs.

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "charparse/chartransform.hpp"
#include "charparse/error.hpp"
#include "charparse/treebank.hpp"
#include "charparse/utf8.hpp"

namespace charparse {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long matched = 0;
  long gold_count = 0;
  long pred_count = 0;

  static PRF from_counts(long matched, long gold, long pred) {
    PRF r{0.0, 0.0, 0.0, matched, gold, pred};
    r.precision = pred > 0 ? static_cast<double>(matched) / static_cast<double>(pred) : 0.0;
    r.recall = gold > 0 ? static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
  }
};

// Micro-averaged exact-span match.
inline PRF seg_f1(const std::vector<WordSegmentation>& gold, const std::vector<WordSegmentation>& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("sentence count mismatch: gold " + std::to_string(gold.size()) + ", pred " +
                    std::to_string(pred.size()));
  }
  long matched = 0, g = 0, p = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].char_count() != pred[s].char_count()) {
      throw DataError("sentence " + std::to_string(s + 1) + ": character count mismatch (gold " +
                      std::to_string(gold[s].char_count()) + ", pred " + std::to_string(pred[s].char_count()) + ")");
    }
    const std::set<std::pair<int, int>> gold_spans(gold[s].spans.begin(), gold[s].spans.end());
    for (const auto& sp : pred[s].spans) matched += gold_spans.count(sp) ? 1 : 0;
    g += static_cast<long>(gold[s].spans.size());
    p += static_cast<long>(pred[s].spans.size());
  }
  return PRF::from_counts(matched, g, p);
}

using Constituent = std::tuple<std::string, int, int>;

namespace detail {

inline int collect_constituents(const SyntaxTree& t, int start, bool is_root, std::vector<Constituent>& out) {
  if (t.is_leaf()) return start + static_cast<int>(utf8::char_count(t.token));
  int end = start;
  for (const auto& c : t.children) end = collect_constituents(c, end, false, out);
  const bool skip = t.is_preterminal() || (is_root && t.label == kTopLabel);
  if (!skip) out.emplace_back(t.label, start, end);
  return end;
}

}  // namespace detail

inline std::vector<Constituent> constituents(const SyntaxTree& tree) {
  std::vector<Constituent> out;
  detail::collect_constituents(tree, 0, true, out);
  return out;
}

inline PRF parse_f1(const std::vector<SyntaxTree>& gold, const std::vector<SyntaxTree>& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("sentence count mismatch: gold " + std::to_string(gold.size()) + ", pred " +
                    std::to_string(pred.size()));
  }
  long matched = 0, g = 0, p = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::string gy, py;
    for (const auto& w : leaves(gold[s])) gy += w;
    for (const auto& w : leaves(pred[s])) py += w;
    if (gy != py) throw DataError("sentence " + std::to_string(s + 1) + ": character yield mismatch");
    std::map<Constituent, long> bag;
    for (auto& c : constituents(gold[s])) ++bag[c];
    const auto pc = constituents(pred[s]);
    for (const auto& c : pc) {
      if (auto it = bag.find(c); it != bag.end() && it->second > 0) {
        --it->second;
        ++matched;
      }
    }
    g += static_cast<long>(constituents(gold[s]).size());
    p += static_cast<long>(pc.size());
  }
  return PRF::from_counts(matched, g, p);
}

struct JointReport {
  PRF seg;
  PRF parse;
  std::size_t sentences = 0;
};

inline JointReport joint_report(const std::vector<SyntaxTree>& gold, const std::vector<SyntaxTree>& pred) {
  std::vector<WordSegmentation> gs, ps;
  for (const auto& t : gold) gs.push_back(segmentation_of(t));
  for (const auto& t : pred) ps.push_back(segmentation_of(t));
  return {seg_f1(gs, ps), parse_f1(gold, pred), gold.size()};
}

// Shortest fixed-point rendering with at least one decimal: 1 -> "1.0",
// 0.4 -> "0.4", 1/3 -> "0.333333".
inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

// One machine-readable key=value line.
inline std::string report_keyvalues(const JointReport& r) {
  std::ostringstream out;
  out << "seg_f1=" << format_metric(r.seg.f1) << " par_f1=" << format_metric(r.parse.f1)
      << " seg_p=" << format_metric(r.seg.precision) << " seg_r=" << format_metric(r.seg.recall)
      << " par_p=" << format_metric(r.parse.precision) << " par_r=" << format_metric(r.parse.recall)
      << " sentences=" << r.sentences;
  return out.str();
}

inline std::string report_table(const JointReport& r) {
  std::ostringstream out;
  char buf[128];
  out << "            P        R        F1       matched  gold     pred\n";
  const auto row = [&](const char* name, const PRF& m) {
    std::snprintf(buf, sizeof buf, "%-9s %8.2f %8.2f %8.2f %8ld %8ld %8ld\n", name, 100 * m.precision,
                  100 * m.recall, 100 * m.f1, m.matched, m.gold_count, m.pred_count);
    out << buf;
  };
  row("Seg", r.seg);
  row("Par", r.parse);
  return out.str();
}

}  // namespace charparse
