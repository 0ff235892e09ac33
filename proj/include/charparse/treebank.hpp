#pragma once

// Bracketed (PTB/CTB style) tree reading and writing.

#include <cctype>
#include <istream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "charparse/error.hpp"

namespace charparse {

inline constexpr std::string_view kTopLabel = "TOP";

// n-ary labeled tree. Leaves carry a token (a word or a single character)
// and nothing else; internal nodes carry a label and at least one child.
struct SyntaxTree {
  std::string label;
  std::vector<SyntaxTree> children;
  std::string token;

  static SyntaxTree leaf(std::string tok) { return {{}, {}, std::move(tok)}; }
  static SyntaxTree node(std::string lab, std::vector<SyntaxTree> kids) {
    return {std::move(lab), std::move(kids), {}};
  }

  bool is_leaf() const { return children.empty(); }
  // A node whose children are all leaves (a POS node in word-level trees).
  bool is_preterminal() const {
    if (children.empty()) return false;
    for (const auto& c : children) {
      if (!c.is_leaf()) return false;
    }
    return true;
  }

  friend bool operator==(const SyntaxTree&, const SyntaxTree&) = default;
};

struct Corpus {
  std::vector<SyntaxTree> trees;
  std::string source_name;
};

inline void collect_leaves(const SyntaxTree& t, std::vector<std::string>& out) {
  if (t.is_leaf()) {
    out.push_back(t.token);
    return;
  }
  for (const auto& c : t.children) collect_leaves(c, out);
}

inline std::vector<std::string> leaves(const SyntaxTree& t) {
  std::vector<std::string> out;
  collect_leaves(t, out);
  return out;
}

namespace detail {

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : text_(text) {}

  std::vector<SyntaxTree> read_all() {
    std::vector<SyntaxTree> trees;
    skip_space();
    while (pos_ < text_.size()) {
      if (text_[pos_] != '(') fail("expected '(' at start of tree");
      trees.push_back(read_top());
      skip_space();
    }
    return trees;
  }

 private:
  SyntaxTree read_top() {
    const std::size_t open = pos_;
    ++pos_;  // '('
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      // Unlabeled wrapper: "( (IP ...) )".
      std::vector<SyntaxTree> kids = read_children(open);
      return SyntaxTree::node(std::string(kTopLabel), std::move(kids));
    }
    return read_labeled(open);
  }

  // Called with pos_ just past '(' and any whitespace.
  SyntaxTree read_labeled(std::size_t open) {
    if (pos_ >= text_.size()) fail("unbalanced brackets: unexpected end of input", open);
    if (text_[pos_] == ')') fail("empty label on internal node");
    if (text_[pos_] == '(') fail("empty label on internal node");
    std::string label = read_token();
    std::vector<SyntaxTree> kids = read_children(open);
    if (kids.empty()) fail("node '" + label + "' has no tokens or children", open);
    return SyntaxTree::node(std::move(label), std::move(kids));
  }

  // Reads children up to and including the matching ')'.
  std::vector<SyntaxTree> read_children(std::size_t open) {
    std::vector<SyntaxTree> kids;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) fail("unbalanced brackets: missing ')'", open);
      const char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        return kids;
      }
      if (c == '(') {
        const std::size_t inner = pos_;
        ++pos_;
        skip_space();
        kids.push_back(read_labeled(inner));
      } else {
        kids.push_back(SyntaxTree::leaf(read_token()));
      }
    }
  }

  std::string read_token() {
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) break;
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) { fail(what, pos_); }
  [[noreturn]] void fail(const std::string& what, std::size_t at) {
    std::size_t line = 1;
    for (std::size_t k = 0; k < at && k < text_.size(); ++k) {
      if (text_[k] == '\n') ++line;
    }
    throw ParseError(what, at, line);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void write_bracketed(const SyntaxTree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.token;
    return;
  }
  out += '(';
  out += t.label;
  for (const auto& c : t.children) {
    out += ' ';
    write_bracketed(c, out);
  }
  out += ')';
}

}  // namespace detail

// Parses zero or more bracketed trees. An unlabeled outermost bracket is
// normalized to a root labeled TOP.
inline Corpus parse_bracketed(std::string_view text, std::string source_name = {}) {
  detail::BracketReader reader(text);
  return Corpus{reader.read_all(), std::move(source_name)};
}

inline Corpus read_corpus(std::istream& in, std::string source_name = {}) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_bracketed(text, std::move(source_name));
}

// Single-line bracketed form.
inline std::string serialize_bracketed(const SyntaxTree& tree) {
  std::string out;
  detail::write_bracketed(tree, out);
  return out;
}

inline void write_corpus(std::ostream& out, const std::vector<SyntaxTree>& trees) {
  for (const auto& t : trees) out << serialize_bracketed(t) << '\n';
}

// Truncates function tags ("NP-SBJ" -> "NP", "NP=2" -> "NP"). The search
// starts at the second character so labels such as "-NONE-" keep a
// non-empty prefix.
inline std::string strip_label(std::string_view label) {
  const auto cut = label.find_first_of("-=", 1);
  return std::string(cut == std::string_view::npos ? label : label.substr(0, cut));
}

inline SyntaxTree strip_function_tags(const SyntaxTree& tree) {
  if (tree.is_leaf()) return tree;
  SyntaxTree out;
  out.label = strip_label(tree.label);
  out.children.reserve(tree.children.size());
  for (const auto& c : tree.children) out.children.push_back(strip_function_tags(c));
  return out;
}

inline Corpus strip_function_tags(const Corpus& corpus) {
  Corpus out{{}, corpus.source_name};
  out.trees.reserve(corpus.trees.size());
  for (const auto& t : corpus.trees) out.trees.push_back(strip_function_tags(t));
  return out;
}

}  // namespace charparse
