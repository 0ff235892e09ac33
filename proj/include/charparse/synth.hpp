#pragma once

// Synthetic CTB-style treebanks for tests, benchmarks and demos.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "charparse/random.hpp"
#include "charparse/treebank.hpp"
#include "charparse/utf8.hpp"

namespace charparse {

struct SynthOptions {
  std::uint64_t seed = 7;
  int min_words = 1;
  int max_words = 60;
  double mean_words = 22.0;  // CTB 5.1 test sentences average a little over 20 words
  int max_fanout = 5;
  int max_unary = 3;       // longest chain of single-child internal nodes
  int char_pool = 400;     // distinct characters drawn from U+4E00..
  double function_tag_rate = 0.1;
};

class SynthTreebank {
 public:
  explicit SynthTreebank(SynthOptions opts) : opts_(opts), rng_(opts.seed) {}

  SyntaxTree next() {
    const int words = sample_length();
    SyntaxTree ip = phrase("IP", words, 0);
    return SyntaxTree::node(std::string(kTopLabel), {std::move(ip)});
  }

  std::vector<SyntaxTree> generate(int count) {
    std::vector<SyntaxTree> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) out.push_back(next());
    return out;
  }

 private:
  int sample_length() {
    // Gamma(shape 2) via the sum of two exponentials, which keeps sequences
    // identical across standard libraries.
    const double scale = opts_.mean_words / 2.0;
    const double g = -scale * (std::log(1.0 - rng_.uniform()) + std::log(1.0 - rng_.uniform()));
    return std::clamp(static_cast<int>(std::lround(g)), opts_.min_words, opts_.max_words);
  }

  template <std::size_t N>
  std::string pick(const char* const (&labels)[N]) {
    return labels[rng_.below(N)];
  }

  std::string tagged(std::string label) {
    static const char* const kTags[] = {"SBJ", "OBJ", "ADV", "TMP", "LOC", "PRD"};
    if (rng_.uniform() < opts_.function_tag_rate) label += "-" + pick(kTags);
    return label;
  }

  std::string word(int len) {
    std::string w;
    for (int k = 0; k < len; ++k) {
      w += utf8::encode(static_cast<char32_t>(0x4E00 + rng_.below(static_cast<std::size_t>(opts_.char_pool))));
    }
    return w;
  }

  int word_length() {
    const double r = rng_.uniform();
    if (r < 0.35) return 1;
    if (r < 0.80) return 2;
    if (r < 0.92) return 3;
    if (r < 0.98) return 4;
    return 5;
  }

  SyntaxTree preterminal() {
    static const char* const kPos[] = {"NN", "VV", "NR", "AD", "P", "JJ", "DEG", "CD", "M", "PU", "LC", "VA", "DEC", "AS"};
    return SyntaxTree::node(pick(kPos), {SyntaxTree::leaf(word(word_length()))});
  }

  // Wraps `t` in up to `depth` unary phrase nodes.
  SyntaxTree wrap(SyntaxTree t, int depth) {
    static const char* const kPhrase[] = {"NP", "VP", "ADVP", "QP", "ADJP", "PP", "LCP", "CP", "DNP"};
    for (int d = 0; d < depth; ++d) t = SyntaxTree::node(tagged(pick(kPhrase)), {std::move(t)});
    return t;
  }

  SyntaxTree phrase(std::string label, int words, int unary_used) {
    static const char* const kPhrase[] = {"NP", "VP", "ADVP", "QP", "ADJP", "PP", "LCP", "CP", "DNP", "IP"};
    if (words == 1) {
      // IP over a single word is already one unary level.
      const int room = std::max(0, opts_.max_unary - unary_used - 2);
      const int extra = room > 0 && rng_.uniform() < 0.3 ? 1 + static_cast<int>(rng_.below(static_cast<std::size_t>(room))) : 0;
      return SyntaxTree::node(tagged(std::move(label)), {wrap(preterminal(), extra)});
    }
    const int fanout = std::min(words, 2 + static_cast<int>(rng_.below(static_cast<std::size_t>(opts_.max_fanout - 1))));
    // Random composition of `words` into `fanout` positive parts.
    std::vector<int> cuts;
    for (int k = 1; k < words; ++k) cuts.push_back(k);
    for (std::size_t k = cuts.size(); k > 1; --k) std::swap(cuts[k - 1], cuts[rng_.below(k)]);
    cuts.resize(static_cast<std::size_t>(fanout - 1));
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(words);
    SyntaxTree node = SyntaxTree::node(tagged(std::move(label)), {});
    int prev = 0;
    for (const int c : cuts) {
      const int part = c - prev;
      prev = c;
      if (part == 1) {
        const bool wrapped = rng_.uniform() < 0.4;
        node.children.push_back(wrapped ? wrap(preterminal(), 1) : preterminal());
      } else if (rng_.uniform() < 0.15) {
        node.children.push_back(SyntaxTree::node(tagged(pick(kPhrase)), {phrase(pick(kPhrase), part, 1)}));
      } else {
        node.children.push_back(phrase(pick(kPhrase), part, 0));
      }
    }
    return node;
  }

  SynthOptions opts_;
  Rng rng_;
};

inline std::vector<SyntaxTree> synthetic_treebank(int count, SynthOptions opts = {}) {
  return SynthTreebank(opts).generate(count);
}

}  // namespace charparse
