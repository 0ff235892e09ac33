#include "charparse/scorer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "charparse/chartransform.hpp"
#include "charparse/decoder.hpp"
#include "charparse/score_file.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace charparse;

namespace {

std::vector<std::string> chars(const std::string& s) { return utf8::split_chars(s); }

std::vector<CharTree> char_trees(const std::vector<SyntaxTree>& trees) {
  std::vector<CharTree> out;
  for (const auto& t : trees) out.push_back(to_char_tree(t));
  return out;
}

}  // namespace

TEST(BuildVocab, SetUnionWithNull) {
  const auto t = to_char_tree(parse_bracketed("(TOP (IP (NN abc)))").trees[0]);
  // Labels: TOP+IP+NN, @2, @1.
  const LabelVocab v = build_vocab({t});
  EXPECT_EQ(v.size(), 4);
  EXPECT_EQ(v.label(0), kNullLabel);
  EXPECT_EQ(v.null_id(), 0);
  EXPECT_TRUE(v.contains("@1"));
  EXPECT_TRUE(v.contains("@2"));
}

TEST(BuildVocab, FourLabelTreeGivesFive) {
  // (TOP (IP (NN abc) (VV d))) -> TOP+IP, NN, @2, @1, VV+@1.
  const auto t = to_char_tree(parse_bracketed("(TOP (IP (NN abc) (NN d)))").trees[0]);
  const LabelVocab v = build_vocab({t});
  std::set<std::string> got(v.labels().begin(), v.labels().end());
  EXPECT_EQ(got, (std::set<std::string>{std::string(kNullLabel), "TOP+IP", "NN", "@2", "@1", "NN+@1"}));
  const auto u = to_char_tree(parse_bracketed("(TOP (IP (NN abc) (NN de)))").trees[0]);
  EXPECT_EQ(build_vocab({u}).size(), 5);
}

TEST(BuildVocab, OrderIndependentLabelSet) {
  auto trees = char_trees(fixtures::fixture_corpus(30));
  const LabelVocab a = build_vocab(trees);
  std::reverse(trees.begin(), trees.end());
  const LabelVocab b = build_vocab(trees);
  EXPECT_EQ(std::set<std::string>(a.labels().begin(), a.labels().end()),
            std::set<std::string>(b.labels().begin(), b.labels().end()));
  EXPECT_EQ(a.label(0), kNullLabel);
  EXPECT_EQ(b.label(0), kNullLabel);
}

TEST(BuildVocab, SizeMatchesTextScan) {
  const auto trees = char_trees(fixtures::fixture_corpus(50));
  std::set<std::string> labels{"NULL", "@1", "@2"};
  for (const auto& t : trees) {
    for (const auto& l : oracle::raw_labels(serialize_char_tree(t))) labels.insert(l);
  }
  EXPECT_EQ(build_vocab(trees).size(), static_cast<int>(labels.size()));
}

TEST(BuildVocab, EmptyCorpusRejected) { EXPECT_THROW(build_vocab({}), DataError); }

TEST(SpanRepresentation, Deterministic) {
  EXPECT_EQ(span_representation(chars("ab"), 0, 2), span_representation(chars("ab"), 0, 2));
}

TEST(SpanRepresentation, LeftSentinelDiffersFromMidSentence) {
  const auto at_start = span_feature_strings(chars("ab"), 0, 2);
  const auto mid = span_feature_strings(chars("xab"), 1, 3);
  std::multiset<std::string> a(at_start.begin(), at_start.end()), b(mid.begin(), mid.end());
  EXPECT_NE(a, b);
  EXPECT_NE(span_representation(chars("ab"), 0, 2), span_representation(chars("xab"), 1, 3));
  // Only the features that look left of the span change.
  std::multiset<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(common, common.begin()));
  EXPECT_EQ(common.size(), a.size() - 2);
}

TEST(SpanRepresentation, LengthBuckets) {
  EXPECT_EQ(length_bucket(1), "1");
  EXPECT_EQ(length_bucket(4), "4");
  EXPECT_EQ(length_bucket(5), "5-8");
  EXPECT_EQ(length_bucket(7), "5-8");
  EXPECT_EQ(length_bucket(8), "5-8");
  EXPECT_EQ(length_bucket(9), "9+");
  const auto f = span_feature_strings(chars("abcdefgh"), 0, 7);
  EXPECT_EQ(f.back(), std::string("N\x1f") + "5-8");
  EXPECT_EQ(f.size(), 7u);  // no span-text feature beyond length 4
}

TEST(SpanRepresentation, IdsBoundedAndErrors) {
  const auto rep = span_representation(chars("abcd"), 1, 3, 17);
  for (const auto id : rep.ids) EXPECT_LT(id, 17u);
  EXPECT_THROW(span_representation(chars("ab"), 1, 1), UsageError);
  EXPECT_THROW(span_representation(chars("ab"), 0, 3), UsageError);
  EXPECT_THROW(span_representation(chars("ab"), 0, 1, 0), UsageError);
}

TEST(SpanRepresentation, HashIsSeededFnv1a) {
  // Plain FNV-1a over the seed's little-endian bytes followed by the input.
  const auto reference = [](const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  };
  EXPECT_EQ(reference("a"), 0xaf63dc4c8601ec8cULL);  // published test vector
  std::string prefix;
  for (int k = 0; k < 8; ++k) prefix += static_cast<char>((kFeatureHashSeed >> (8 * k)) & 0xff);
  for (const std::string s : {"", "a", "L\x1f\xe4\xb8\x80", "N\x1f" "5-8"}) {
    EXPECT_EQ(fnv1a64(s), reference(prefix + s));
  }
}

TEST(ScoreSpans, ZeroHeadGivesZeros) {
  const MLPHead head(64, 5, 3, 0.2, 1, /*zero=*/true);
  const SpanScores s = head.score(chars("abcd"), {true, 3});
  for (const double v : s.values()) EXPECT_EQ(v, 0.0);
}

TEST(ScoreSpans, SpanCount) {
  const LinearScorer lin(64, 4);
  const SpanScores s = lin.score(chars("ab"));
  EXPECT_EQ(s.num_spans(), 3);
  EXPECT_EQ(s.values().size(), 12u);
}

TEST(ScoreSpans, InferenceIsBitwiseDeterministic) {
  const MLPHead head(1 << 12, 16, 5, 0.2, 42);
  const auto c = chars("\xe4\xb8\x80\xe4\xb8\x81\xe4\xb8\x82\xe4\xb8\x83");
  EXPECT_EQ(head.score(c), head.score(c));
  EXPECT_EQ(head.score(c, {true, 9}), head.score(c, {true, 9}));
  EXPECT_NE(head.score(c, {true, 9}), head.score(c));
}

TEST(ScoreSpans, DimensionMismatch) {
  const MLPHead head(64, 4, 3);
  std::vector<double> out(3);
  MLPHead::Cache cache;
  EXPECT_THROW(head.forward(span_representation(chars("ab"), 0, 1, 32), out, cache), UsageError);
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradients) {
  const MLPHead head(8, 4, 3, 0.0, 5);
  const auto g = mlp_backward(head, span_representation(chars("abc"), 0, 2, 8), std::vector<double>{0, 0, 0});
  for (const double v : g.b1) EXPECT_EQ(v, 0.0);
  for (const double v : g.w2) EXPECT_EQ(v, 0.0);
  for (const double v : g.b2) EXPECT_EQ(v, 0.0);
  for (const auto& [f, row] : g.w1_rows) {
    for (const double v : row) EXPECT_EQ(v, 0.0);
  }
}

TEST(MlpBackward, BiasGradientEqualsUpstream) {
  const MLPHead head(8, 4, 3, 0.0, 5);
  const std::vector<double> up{0.3, -1.2, 2.5};
  const auto g = mlp_backward(head, span_representation(chars("abc"), 1, 3, 8), up);
  EXPECT_EQ(g.b2, up);
}

TEST(MlpBackward, NonFiniteUpstreamRejected) {
  const MLPHead head(8, 4, 3);
  EXPECT_THROW(mlp_backward(head, span_representation(chars("ab"), 0, 1, 8), std::vector<double>{0, NAN, 0}),
               DataError);
}

TEST(MlpBackward, MatchesCentralDifferences) {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    MLPHead head(8, 4, 3, 0.0, 1000 + trial);
    for (int u = 0; u < 4; ++u) head.b1(u) = rng.uniform(-0.5, 0.5);
    for (int l = 0; l < 3; ++l) head.b2(l) = rng.uniform(-0.5, 0.5);
    const auto c = chars("abcdef");
    const int i = static_cast<int>(rng.below(5));
    const int j = i + 1 + static_cast<int>(rng.below(static_cast<std::size_t>(6 - i)));
    const auto rep = span_representation(c, i, j, 8);
    std::vector<double> up(3);
    for (auto& x : up) x = rng.uniform(-1, 1);
    const auto objective = [&] {
      const auto out = head.forward(rep);
      double s = 0;
      for (int l = 0; l < 3; ++l) s += up[l] * out[l];
      return s;
    };
    const auto g = mlp_backward(head, rep, up);
    const double h = 1e-4;
    for (int u = 0; u < 4; ++u) {
      EXPECT_LT(oracle::relative_error(g.b1[u], oracle::central_difference(objective, head.b1(u), h)), 1e-4);
      for (int l = 0; l < 3; ++l) {
        EXPECT_LT(oracle::relative_error(g.w2[u * 3 + l], oracle::central_difference(objective, head.w2(u, l), h)),
                  1e-4);
        ++checked;
      }
    }
    for (int l = 0; l < 3; ++l) {
      EXPECT_LT(oracle::relative_error(g.b2[l], oracle::central_difference(objective, head.b2(l), h)), 1e-4);
    }
    for (std::uint32_t f = 0; f < 8; ++f) {
      for (int u = 0; u < 4; ++u) {
        const auto it = g.w1_rows.find(f);
        const double analytic = it == g.w1_rows.end() ? 0.0 : it->second[u];
        EXPECT_LT(oracle::relative_error(analytic, oracle::central_difference(objective, head.w1_mutable(f, u), h)),
                  1e-4);
      }
    }
  }
  EXPECT_EQ(checked, 1200);
}

TEST(MlpBackward, DropoutMaskSharedWithForward) {
  MLPHead head(64, 8, 3, 0.5, 3);
  const auto c = chars("abcd");
  const ForwardOptions opts{true, 77};
  const std::vector<ScoreGrad> up{{0, 2, 1, 1.0}};
  auto g = head.zero_gradient();
  head.backward(c, up, g, opts);
  const auto scale = head.dropout_scale(opts, 0, 2);
  for (int u = 0; u < 8; ++u) {
    if (scale[u] == 0.0) {
      EXPECT_EQ(g.b1[u], 0.0);
    }
  }
  const double h = 1e-5;
  const auto objective = [&] { return head.score(c, opts).at(0, 2, 1); };
  for (int u = 0; u < 8; ++u) {
    EXPECT_LT(oracle::relative_error(g.b1[u], oracle::central_difference(objective, head.b1(u), h)), 1e-4);
  }
}

TEST(LinearScorer, BackwardMatchesCentralDifferences) {
  LinearScorer lin(32, 3);
  const auto c = chars("abcde");
  Rng rng(5);
  auto warm = lin.zero_gradient();
  std::vector<ScoreGrad> noise;
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j <= 5; ++j) noise.push_back({i, j, static_cast<int>(rng.below(3)), rng.uniform(-1, 1)});
  }
  lin.backward(c, noise, warm);
  lin.apply(warm, 1.0);
  const std::vector<ScoreGrad> up{{1, 3, 2, 0.7}, {0, 5, 0, -0.4}, {1, 3, 0, 1.1}};
  auto g = lin.zero_gradient();
  lin.backward(c, up, g);
  for (int l = 0; l < 3; ++l) {
    double expected = 0;
    for (const auto& e : up) expected += e.label == l ? e.value : 0.0;
    EXPECT_DOUBLE_EQ(g.bias[l], expected);
  }
  // A step against the gradient lowers the linear objective by lr * |g|^2.
  const auto objective = [&](const LinearScorer& s) {
    const SpanScores sc = s.score(c);
    double v = 0;
    for (const auto& e : up) v += e.value * sc.at(e.i, e.j, e.label);
    return v;
  };
  double norm2 = 0;
  for (const double b : g.bias) norm2 += b * b;
  for (const auto& [f, row] : g.rows) {
    for (const double x : row) norm2 += x * x;
  }
  LinearScorer stepped = lin;
  stepped.apply(g, 1e-3);
  EXPECT_NEAR(objective(lin) - objective(stepped), 1e-3 * norm2, 1e-9);
}

TEST(OracleScores, OnesOnGold) {
  const auto t = to_char_tree(parse_bracketed("(TOP (NN abc))").trees[0]);
  const LabelVocab v = build_vocab({t});
  const SpanScores s = oracle_scores(gold_span_labels(t), v);
  EXPECT_EQ(std::count(s.values().begin(), s.values().end(), 1.0), 5);
  EXPECT_EQ(std::count(s.values().begin(), s.values().end(), 0.0), static_cast<long>(s.values().size()) - 5);
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j <= 3; ++j) EXPECT_EQ(s.at(i, j, v.null_id()), 0.0);
  }
}

TEST(OracleScores, UnknownLabel) {
  GoldSpanMap g;
  g.n = 1;
  g.entries[{0, 1}] = "ZZ+@1";
  EXPECT_THROW(oracle_scores(g, LabelVocab{}), DataError);
}

TEST(ScoreFile, RoundTripIsExact) {
  const auto trees = char_trees(fixtures::fixture_corpus(5));
  const LabelVocab v = build_vocab(trees);
  const MLPHead head(1 << 10, 8, v.size(), 0.2, 9);
  std::ostringstream out;
  std::vector<SpanScores> written;
  for (std::size_t k = 0; k < trees.size(); ++k) {
    written.push_back(head.score(chars_of(trees[k])));
    write_scores(out, written.back(), v, "s" + std::to_string(k));
  }
  std::istringstream in(out.str());
  const auto back = read_score_file(in);
  ASSERT_EQ(back.size(), written.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].id, "s" + std::to_string(k));
    EXPECT_EQ(back[k].vocab, v);
    EXPECT_EQ(back[k].scores, written[k]);
  }
}

TEST(ScoreFile, HeaderAndNullToken) {
  LabelVocab v;
  v.add("@1");
  SpanScores s(1, 2);
  s.at(0, 1, 1) = 2.5;
  std::ostringstream out;
  write_scores(out, s, v, "x");
  EXPECT_EQ(out.str(), "#scores x 1 2\n#labels NULL @1\n0 1 0 2.5\n\n");
}

TEST(ScoreFile, WrongSpanCount) {
  std::istringstream in("#scores a 2 2\n#labels NULL @1\n0 1 0 1\n0 2 0 1\n\n");
  try {
    read_scores(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 3, found 2"), std::string::npos) << e.what();
  }
}

TEST(ScoreFile, MalformedInputs) {
  std::istringstream empty("");
  try {
    read_scores(empty);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing header"), std::string::npos);
  }
  std::istringstream bad_header("#scores a two 2\n");
  EXPECT_THROW(read_scores(bad_header), DataError);
  std::istringstream bad_value("#scores a 1 2\n#labels NULL @1\n0 1 0 abc\n");
  EXPECT_THROW(read_scores(bad_value), DataError);
  std::istringstream no_null("#scores a 1 2\n#labels @1 NN\n0 1 0 1\n");
  EXPECT_THROW(read_scores(no_null), DataError);
  std::istringstream order("#scores a 2 1\n#labels NULL\n0 2 0\n0 1 0\n1 2 0\n");
  EXPECT_THROW(read_scores(order), DataError);
}
