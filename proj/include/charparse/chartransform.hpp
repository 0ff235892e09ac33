#pragma once

// Word-level tree <-> binarized character-level tree.
//
// Forward: every character of a word becomes an "@1" node under the word's
// POS node, unary chains collapse into '+'-joined labels, and nodes with more
// than two children are binarized to the left. Intermediate nodes created
// inside a word are "@2", those created at phrase level are the null label.
// Backward undoes each step and is total on arbitrary binary trees.

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "charparse/error.hpp"
#include "charparse/treebank.hpp"
#include "charparse/utf8.hpp"

namespace charparse {

inline constexpr std::string_view kNullLabel = "\xE2\x88\x85";  // U+2205
inline constexpr std::string_view kNullToken = "NULL";
inline constexpr std::string_view kCharLabel = "@1";
inline constexpr std::string_view kSubwordLabel = "@2";
inline constexpr std::string_view kOrphanPosLabel = "X";
inline constexpr char kUnarySeparator = '+';

// Last '+'-separated segment of a merged label.
inline std::string_view final_segment(std::string_view label) {
  const auto cut = label.rfind(kUnarySeparator);
  return cut == std::string_view::npos ? label : label.substr(cut + 1);
}

inline bool ends_with_char_label(std::string_view label) {
  return final_segment(label) == kCharLabel;
}

inline std::vector<std::string> split_label(std::string_view label) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto cut = label.find(kUnarySeparator, start);
    parts.emplace_back(label.substr(start, cut - start));
    if (cut == std::string_view::npos) break;
    start = cut + 1;
  }
  return parts;
}

// Strictly binary character-level tree. Leaves cover exactly one character.
struct CharTree {
  std::string label;
  std::string ch;  // leaves only
  int begin = 0;
  int end = 0;
  std::vector<CharTree> children;  // empty or exactly two

  bool is_leaf() const { return children.empty(); }
  const CharTree& left() const { return children.at(0); }
  const CharTree& right() const { return children.at(1); }
  int length() const { return end - begin; }

  static CharTree leaf(std::string label, std::string ch, int pos) {
    return {std::move(label), std::move(ch), pos, pos + 1, {}};
  }
  static CharTree join(std::string label, CharTree l, CharTree r) {
    CharTree t{std::move(label), {}, l.begin, r.end, {}};
    t.children.reserve(2);
    t.children.push_back(std::move(l));
    t.children.push_back(std::move(r));
    return t;
  }

  friend bool operator==(const CharTree&, const CharTree&) = default;
};

struct WordSegmentation {
  std::vector<std::pair<int, int>> spans;
  std::vector<std::string> words;

  int char_count() const { return spans.empty() ? 0 : spans.back().second; }
  friend bool operator==(const WordSegmentation&, const WordSegmentation&) = default;
};

struct GoldSpanMap {
  int n = 0;
  std::map<std::pair<int, int>, std::string> entries;
};

inline void collect_chars(const CharTree& t, std::vector<std::string>& out) {
  if (t.is_leaf()) {
    out.push_back(t.ch);
    return;
  }
  collect_chars(t.left(), out);
  collect_chars(t.right(), out);
}

inline std::vector<std::string> chars_of(const CharTree& t) {
  std::vector<std::string> out;
  collect_chars(t, out);
  return out;
}

// Checks the binary span-partition invariant; throws DataError on violation.
inline void check_partition(const CharTree& t) {
  if (t.is_leaf()) {
    if (t.end != t.begin + 1) throw DataError("leaf span is not of length 1");
    return;
  }
  if (t.children.size() != 2) throw DataError("char tree node is not binary");
  const auto& l = t.left();
  const auto& r = t.right();
  if (l.begin != t.begin || r.end != t.end || l.end != r.begin || !(t.begin < l.end && l.end < t.end)) {
    throw DataError("child spans do not partition the parent span");
  }
  check_partition(l);
  check_partition(r);
}

namespace detail {

inline bool is_reserved_label(std::string_view label) {
  return label == kCharLabel || label == kSubwordLabel || label == kNullLabel ||
         label == kNullToken;
}

// Step 1: characters become "@1" children of the POS node.
inline SyntaxTree expand_characters(const SyntaxTree& t) {
  if (t.is_leaf()) {
    throw DataError("word '" + t.token + "' is not under a pre-terminal node");
  }
  if (t.label.find(kUnarySeparator) != std::string::npos) {
    throw DataError("label '" + t.label + "' contains the reserved '+' separator");
  }
  if (is_reserved_label(t.label)) {
    throw DataError("label '" + t.label + "' is reserved");
  }
  const bool has_leaf = [&] {
    for (const auto& c : t.children) {
      if (c.is_leaf()) return true;
    }
    return false;
  }();
  if (has_leaf) {
    if (t.children.size() != 1) {
      throw DataError("word under node '" + t.label + "' is not under a pre-terminal node");
    }
    const std::string& word = t.children[0].token;
    if (word.empty()) throw DataError("empty word token");
    SyntaxTree pos = SyntaxTree::node(t.label, {});
    for (auto& c : utf8::split_chars(word)) {
      pos.children.push_back(SyntaxTree::node(std::string(kCharLabel), {SyntaxTree::leaf(std::move(c))}));
    }
    return pos;
  }
  SyntaxTree out = SyntaxTree::node(t.label, {});
  out.children.reserve(t.children.size());
  for (const auto& c : t.children) out.children.push_back(expand_characters(c));
  return out;
}

// Step 2: A -> B -> ... -> Z with single children becomes "A+B+...+Z".
inline SyntaxTree merge_unary(const SyntaxTree& t) {
  if (t.is_leaf()) return t;
  std::string label = t.label;
  const SyntaxTree* cur = &t;
  while (cur->children.size() == 1 && !cur->children[0].is_leaf()) {
    cur = &cur->children[0];
    label += kUnarySeparator;
    label += cur->label;
  }
  SyntaxTree out = SyntaxTree::node(std::move(label), {});
  out.children.reserve(cur->children.size());
  for (const auto& c : cur->children) out.children.push_back(merge_unary(c));
  return out;
}

// Characters of multi-character words are the only nodes labeled exactly
// "@1" after merging; a single-character word is "POS+@1".
inline bool is_word_internal(const SyntaxTree& t) {
  for (const auto& c : t.children) {
    if (c.is_leaf() || c.label != kCharLabel) return false;
  }
  return true;
}

// Step 3: left binarization with positions assigned.
inline CharTree binarize(const SyntaxTree& t, int& pos) {
  if (t.children.size() == 1 && t.children[0].is_leaf()) {
    return CharTree::leaf(t.label, t.children[0].token, pos++);
  }
  if (t.is_leaf() || t.children.size() == 1) {
    throw DataError("internal error: unmerged unary node '" + t.label + "'");
  }
  const std::string filler(is_word_internal(t) ? kSubwordLabel : kNullLabel);
  CharTree acc = binarize(t.children[0], pos);
  for (std::size_t k = 1; k < t.children.size(); ++k) {
    CharTree next = binarize(t.children[k], pos);
    const bool last = k + 1 == t.children.size();
    acc = CharTree::join(last ? t.label : filler, std::move(acc), std::move(next));
  }
  return acc;
}

// Generic n-ary tree over characters used during the inverse transform.
inline SyntaxTree unmerge(const CharTree& t) {
  std::vector<std::string> chain = split_label(t.label);
  SyntaxTree inner;
  if (t.is_leaf()) {
    inner = SyntaxTree::leaf(t.ch);
  } else {
    inner = SyntaxTree::node({}, {unmerge(t.left()), unmerge(t.right())});
    inner.label = chain.back();
    chain.pop_back();
  }
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    inner = SyntaxTree::node(*it, {std::move(inner)});
  }
  return inner;
}

inline bool spliced(std::string_view label) {
  return label.empty() || label == kNullLabel || label == kNullToken || label == kSubwordLabel;
}

inline std::vector<SyntaxTree> splice(SyntaxTree t) {
  if (t.is_leaf()) return {std::move(t)};
  std::vector<SyntaxTree> kids;
  for (auto& c : t.children) {
    for (auto& g : splice(std::move(c))) kids.push_back(std::move(g));
  }
  if (spliced(t.label)) return kids;
  t.children = std::move(kids);
  std::vector<SyntaxTree> out;
  out.push_back(std::move(t));
  return out;
}

inline void append_yield(const SyntaxTree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.token;
    return;
  }
  for (const auto& c : t.children) append_yield(c, out);
}

// Steps 4 and 5: group runs of "@1" siblings into words and make sure every
// word sits alone under a pre-terminal.
inline void recover_words(SyntaxTree& t) {
  std::vector<SyntaxTree> kids;
  std::string run;
  bool in_run = false;
  const auto flush = [&] {
    if (in_run) {
      kids.push_back(SyntaxTree::leaf(std::move(run)));
      run.clear();
      in_run = false;
    }
  };
  for (auto& c : t.children) {
    if (!c.is_leaf() && c.label == kCharLabel) {
      append_yield(c, run);
      in_run = true;
      continue;
    }
    flush();
    if (c.is_leaf()) {
      kids.push_back(std::move(c));
    } else {
      recover_words(c);
      kids.push_back(std::move(c));
    }
  }
  flush();
  if (kids.size() > 1) {
    for (auto& k : kids) {
      if (k.is_leaf()) k = SyntaxTree::node(std::string(kOrphanPosLabel), {std::move(k)});
    }
  }
  t.children = std::move(kids);
}

}  // namespace detail

inline WordSegmentation segmentation_of(const SyntaxTree& word_tree) {
  WordSegmentation seg;
  int pos = 0;
  for (auto& w : leaves(word_tree)) {
    const int len = static_cast<int>(utf8::char_count(w));
    seg.spans.emplace_back(pos, pos + len);
    seg.words.push_back(std::move(w));
    pos += len;
  }
  return seg;
}

inline CharTree to_char_tree(const SyntaxTree& word_tree) {
  if (word_tree.is_leaf()) {
    throw DataError("word '" + word_tree.token + "' is not under a pre-terminal node");
  }
  const SyntaxTree merged = detail::merge_unary(detail::expand_characters(word_tree));
  int pos = 0;
  return detail::binarize(merged, pos);
}

struct RecoveredTree {
  SyntaxTree tree;
  WordSegmentation segmentation;
};

// Inverse of to_char_tree. Total: any binary tree over any label set yields
// a word-level tree whose words cover the sentence exactly.
inline RecoveredTree from_char_tree(const CharTree& char_tree) {
  std::vector<SyntaxTree> forest = detail::splice(detail::unmerge(char_tree));
  SyntaxTree root;
  if (forest.size() == 1 && !forest[0].is_leaf() && forest[0].label != kCharLabel) {
    root = std::move(forest[0]);
  } else {
    root = SyntaxTree::node(std::string(kTopLabel), std::move(forest));
  }
  detail::recover_words(root);
  WordSegmentation seg = segmentation_of(root);
  return {std::move(root), std::move(seg)};
}

namespace detail {

inline void collect_gold(const CharTree& t, GoldSpanMap& out) {
  const auto [it, inserted] = out.entries.emplace(std::pair{t.begin, t.end}, t.label);
  if (!inserted) {
    throw std::logic_error("duplicate span (" + std::to_string(t.begin) + "," +
                           std::to_string(t.end) + ") in char tree");
  }
  for (const auto& c : t.children) collect_gold(c, out);
}

inline SyntaxTree to_bracket_form(const CharTree& t) {
  const std::string label = t.label == kNullLabel ? std::string(kNullToken) : t.label;
  if (t.is_leaf()) return SyntaxTree::node(label, {SyntaxTree::leaf(t.ch)});
  return SyntaxTree::node(label, {to_bracket_form(t.left()), to_bracket_form(t.right())});
}

inline CharTree from_bracket_form(const SyntaxTree& t, int& pos) {
  if (t.is_leaf()) throw DataError("char tree has an unlabeled character");
  const std::string label = t.label == kNullToken ? std::string(kNullLabel) : t.label;
  if (t.children.size() == 1 && t.children[0].is_leaf()) {
    if (utf8::char_count(t.children[0].token) != 1) {
      throw DataError("char tree leaf '" + t.children[0].token + "' is not a single character");
    }
    return CharTree::leaf(label, t.children[0].token, pos++);
  }
  if (t.children.size() != 2) {
    throw DataError("char tree node '" + t.label + "' has " + std::to_string(t.children.size()) +
                    " children, expected 2");
  }
  CharTree l = from_bracket_form(t.children[0], pos);
  CharTree r = from_bracket_form(t.children[1], pos);
  return CharTree::join(label, std::move(l), std::move(r));
}

}  // namespace detail

inline GoldSpanMap gold_span_labels(const CharTree& char_tree) {
  GoldSpanMap out;
  out.n = char_tree.end - char_tree.begin;
  detail::collect_gold(char_tree, out);
  return out;
}

// Char trees use the ordinary bracketed format with the null label written
// as NULL.
inline std::string serialize_char_tree(const CharTree& t) {
  return serialize_bracketed(detail::to_bracket_form(t));
}

inline CharTree char_tree_from_syntax(const SyntaxTree& t) {
  int pos = 0;
  return detail::from_bracket_form(t, pos);
}

inline CharTree parse_char_tree(std::string_view text) {
  Corpus c = parse_bracketed(text);
  if (c.trees.size() != 1) throw DataError("expected exactly one char tree");
  return char_tree_from_syntax(c.trees[0]);
}

}  // namespace charparse
