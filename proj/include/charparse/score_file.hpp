#pragma once

// Text score files, so externally computed span scores can be decoded:
//
//   #scores <sentence-id> <n> <L>
//   #labels NULL <label_1> ... <label_{L-1}>
//   <i> <j> <v_0> ... <v_{L-1}>        (n(n+1)/2 lines, lexicographic (i,j))
//   <blank line>

#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "charparse/error.hpp"
#include "charparse/scorer.hpp"
#include "charparse/scores.hpp"

namespace charparse {

struct ScoredSentence {
  std::string id;
  SpanScores scores;
  LabelVocab vocab;
};

inline void write_scores(std::ostream& out, const SpanScores& scores, const LabelVocab& vocab,
                         const std::string& sentence_id) {
  if (scores.num_labels() != vocab.size()) throw UsageError("score tensor and vocabulary disagree on L");
  if (!scores.all_finite()) throw UsageError("cannot write non-finite scores");
  const int n = scores.n();
  out << "#scores " << sentence_id << ' ' << n << ' ' << vocab.size() << '\n';
  out << "#labels";
  for (int l = 0; l < vocab.size(); ++l) out << ' ' << (l == vocab.null_id() ? std::string(kNullToken) : vocab.label(l));
  out << '\n';
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      out << i << ' ' << j;
      for (const double v : scores.row(i, j)) out << ' ' << detail::format_double(v);
      out << '\n';
    }
  }
  out << '\n';
}

namespace detail {

class ScoreFileReader {
 public:
  explicit ScoreFileReader(std::istream& in) : in_(in) {}

  std::optional<ScoredSentence> next() {
    std::string line;
    if (!next_nonblank(line)) return std::nullopt;
    std::istringstream header(line);
    std::string tag, id;
    int n = -1, labels = -1;
    if (!(header >> tag) || tag != "#scores") fail("missing header");
    if (!(header >> id >> n >> labels) || n < 1 || labels < 1 || has_more(header)) fail("malformed header");

    if (!getline(line)) fail("missing #labels line");
    std::istringstream ls(line);
    if (!(ls >> tag) || tag != "#labels") fail("missing #labels line");
    std::vector<std::string> names;
    for (std::string name; ls >> name;) names.push_back(name == kNullToken ? std::string(kNullLabel) : name);
    if (static_cast<int>(names.size()) != labels) {
      fail("expected " + std::to_string(labels) + " labels, found " + std::to_string(names.size()));
    }
    ScoredSentence out{id, SpanScores(n, labels), LabelVocab::from_labels(names)};

    const int expected = SpanScores::span_count(n);
    int found = 0;
    int ei = 0, ej = 1;
    while (in_.peek() != std::char_traits<char>::eof()) {
      if (!getline(line)) break;
      if (is_blank(line)) break;
      if (line.rfind("#scores", 0) == 0) {
        pending_ = line;
        break;
      }
      ++found;
      if (found > expected) continue;
      std::istringstream row(line);
      int i = -1, j = -1;
      if (!(row >> i >> j)) fail("malformed span line");
      if (i != ei || j != ej) {
        fail("span (" + std::to_string(i) + "," + std::to_string(j) + ") out of order, expected (" +
             std::to_string(ei) + "," + std::to_string(ej) + ")");
      }
      auto dst = out.scores.row(i, j);
      std::string tok;
      for (int l = 0; l < labels; ++l) {
        if (!(row >> tok)) fail("expected " + std::to_string(labels) + " values on span line");
        try {
          dst[l] = parse_double(tok);
        } catch (const DataError& e) {
          fail(e.what());
        }
      }
      if (has_more(row)) fail("too many values on span line");
      if (++ej > n) {
        ++ei;
        ej = ei + 1;
      }
    }
    if (found != expected) {
      fail("span count mismatch for sentence '" + id + "': expected " + std::to_string(expected) + ", found " +
           std::to_string(found));
    }
    return out;
  }

 private:
  static bool is_blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }
  static bool has_more(std::istringstream& s) {
    std::string extra;
    return static_cast<bool>(s >> extra);
  }

  bool getline(std::string& line) {
    if (pending_) {
      line = *pending_;
      pending_.reset();
      return true;
    }
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    return true;
  }

  bool next_nonblank(std::string& line) {
    while (getline(line)) {
      if (!is_blank(line)) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("score file line " + std::to_string(line_no_) + ": " + what);
  }

  std::istream& in_;
  std::optional<std::string> pending_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

inline std::vector<ScoredSentence> read_score_file(std::istream& in) {
  detail::ScoreFileReader reader(in);
  std::vector<ScoredSentence> out;
  while (auto s = reader.next()) out.push_back(std::move(*s));
  return out;
}

// Reads exactly one sentence; an empty stream is an error.
inline ScoredSentence read_scores(std::istream& in) {
  detail::ScoreFileReader reader(in);
  auto s = reader.next();
  if (!s) throw DataError("score file line 0: missing header");
  return std::move(*s);
}

}  // namespace charparse
