#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "charparse/synth.hpp"
#include "charparse/treebank.hpp"

#ifndef CHARPARSE_TEST_DATA_DIR
#define CHARPARSE_TEST_DATA_DIR "tests/data"
#endif

namespace fixtures {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string data_path(const std::string& name) { return std::string(CHARPARSE_TEST_DATA_DIR) + "/" + name; }

// Hand-written CTB-style trees with function tags and multi-line layout.
inline std::string ctb_sample_text() { return read_file(data_path("ctb_sample.txt")); }

inline std::vector<charparse::SyntaxTree> ctb_sample() {
  return charparse::strip_function_tags(charparse::parse_bracketed(ctb_sample_text())).trees;
}

// Synthetic corpus: 1-5 character words, unary chains, fan-out up to 5.
inline std::vector<charparse::SyntaxTree> synthetic(int count, std::uint64_t seed = 11, double mean_words = 14.0) {
  charparse::SynthOptions o;
  o.seed = seed;
  o.mean_words = mean_words;
  return charparse::strip_function_tags(charparse::Corpus{charparse::synthetic_treebank(count, o), ""}).trees;
}

// Everything together: the hand-written sample followed by synthetic trees.
inline std::vector<charparse::SyntaxTree> fixture_corpus(int synthetic_count = 200) {
  auto trees = ctb_sample();
  for (auto& t : synthetic(synthetic_count)) trees.push_back(std::move(t));
  return trees;
}

}  // namespace fixtures
