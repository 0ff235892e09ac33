#include "charparse/eval.hpp"

#include <gtest/gtest.h>

#include "charparse/random.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace charparse;

namespace {

WordSegmentation seg(std::vector<std::pair<int, int>> spans) {
  WordSegmentation s;
  s.spans = std::move(spans);
  for (std::size_t k = 0; k < s.spans.size(); ++k) s.words.push_back("w");
  return s;
}

SyntaxTree tree(const std::string& text) { return parse_bracketed(text).trees.at(0); }

// Randomly relabels, flattens, or regroups nodes while keeping the yield.
SyntaxTree perturb(const SyntaxTree& t, Rng& rng) {
  if (t.is_leaf() || t.is_preterminal()) return t;
  SyntaxTree out = t;
  for (auto& c : out.children) c = perturb(c, rng);
  const auto roll = rng.below(6);
  if (roll == 0) out.label = "ZP";
  if (roll == 1 && out.children.size() >= 3) {
    SyntaxTree grouped = SyntaxTree::node("QP", {out.children[0], out.children[1]});
    out.children.erase(out.children.begin(), out.children.begin() + 2);
    out.children.insert(out.children.begin(), grouped);
  }
  if (roll == 2) {
    std::vector<SyntaxTree> flat;
    for (auto& c : out.children) {
      if (!c.is_preterminal() && !c.is_leaf()) {
        for (auto& g : c.children) flat.push_back(g);
      } else {
        flat.push_back(c);
      }
    }
    out.children = flat;
  }
  return out;
}

// F1 computed from the text-scan constituent multisets.
double reference_parse_f1(const std::vector<SyntaxTree>& gold, const std::vector<SyntaxTree>& pred) {
  long matched = 0, g = 0, p = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto gc = oracle::scan_constituents(serialize_bracketed(gold[s]));
    const auto pc = oracle::scan_constituents(serialize_bracketed(pred[s]));
    for (const auto& [k, c] : gc) {
      g += c;
      if (const auto it = pc.find(k); it != pc.end()) matched += std::min(c, it->second);
    }
    for (const auto& [k, c] : pc) p += c;
  }
  if (matched == 0) return 0.0;
  const double pr = static_cast<double>(matched) / p, rc = static_cast<double>(matched) / g;
  return 2 * pr * rc / (pr + rc);
}

}  // namespace

TEST(SegF1, IdenticalIsOne) {
  const auto s = seg({{0, 2}, {2, 3}, {3, 7}});
  const PRF r = seg_f1({s}, {s});
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
}

TEST(SegF1, PartialMatch) {
  const PRF r = seg_f1({seg({{0, 2}, {2, 3}})}, {seg({{0, 1}, {1, 2}, {2, 3}})});
  EXPECT_DOUBLE_EQ(r.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.4);
}

TEST(SegF1, MicroAveraged) {
  // Sentence 1 matches 1 of 2 gold, sentence 2 matches 4 of 4.
  const PRF r = seg_f1({seg({{0, 2}, {2, 3}}), seg({{0, 1}, {1, 2}, {2, 3}, {3, 4}})},
                       {seg({{0, 1}, {1, 3}}), seg({{0, 1}, {1, 2}, {2, 3}, {3, 4}})});
  EXPECT_EQ(r.matched, 4);
  EXPECT_DOUBLE_EQ(r.recall, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(r.precision, 4.0 / 6.0);
}

TEST(SegF1, Errors) {
  EXPECT_THROW(seg_f1({seg({{0, 1}})}, {}), DataError);
  EXPECT_THROW(seg_f1({seg({{0, 1}})}, {seg({{0, 2}})}), DataError);
}

TEST(ParseF1, OneLabelDifference) {
  const SyntaxTree gold = tree("(TOP (IP (NP (NN ab)) (VP (VV c) (NP (NN d)))))");
  const SyntaxTree pred = tree("(TOP (IP (NP (NN ab)) (VP (VV c) (QP (NN d)))))");
  // Gold constituents: IP, NP, VP, NP; the root TOP and pre-terminals are out.
  const PRF r = parse_f1({gold}, {pred});
  EXPECT_EQ(r.gold_count, 4);
  EXPECT_EQ(r.pred_count, 4);
  EXPECT_EQ(r.matched, 3);
  EXPECT_DOUBLE_EQ(r.f1, 0.75);
}

TEST(ParseF1, CharacterOffsets) {
  const auto c = constituents(tree("(TOP (IP (NP (NN \xe4\xb8\x80\xe4\xb8\x81)) (VP (VV \xe4\xb8\x82))))"));
  const std::vector<Constituent> expected{{"NP", 0, 2}, {"VP", 2, 3}, {"IP", 0, 3}};
  EXPECT_EQ(c, expected);
}

TEST(ParseF1, NonTopRootIsKept) {
  EXPECT_EQ(constituents(tree("(IP (NN a) (VV b))")), (std::vector<Constituent>{{"IP", 0, 2}}));
  EXPECT_TRUE(constituents(tree("(TOP (NN a))")).empty());
}

TEST(ParseF1, DuplicateConstituentsAreAMultiset) {
  const SyntaxTree gold = tree("(TOP (NP (NP (NN a))))");
  const SyntaxTree pred = tree("(TOP (NP (NN a)))");
  const PRF r = parse_f1({gold}, {pred});
  EXPECT_EQ(r.gold_count, 2);
  EXPECT_EQ(r.pred_count, 1);
  EXPECT_EQ(r.matched, 1);
}

TEST(ParseF1, AgreesWithTextScanOracle) {
  const auto gold = fixtures::fixture_corpus(150);
  Rng rng(4);
  std::vector<SyntaxTree> pred;
  for (const auto& t : gold) pred.push_back(perturb(t, rng));
  const double f1 = parse_f1(gold, pred).f1;
  EXPECT_LT(f1, 0.95);
  EXPECT_NEAR(f1, reference_parse_f1(gold, pred), 1e-12);
  EXPECT_EQ(parse_f1(gold, gold).f1, 1.0);
}

TEST(ParseF1, SymmetricF1) {
  const auto gold = fixtures::fixture_corpus(60);
  Rng rng(9);
  std::vector<SyntaxTree> pred;
  for (const auto& t : gold) pred.push_back(perturb(t, rng));
  const PRF a = parse_f1(gold, pred);
  const PRF b = parse_f1(pred, gold);
  EXPECT_DOUBLE_EQ(a.f1, b.f1);
  EXPECT_DOUBLE_EQ(a.precision, b.recall);
}

TEST(ParseF1, YieldMismatch) {
  EXPECT_THROW(parse_f1({tree("(TOP (NN ab))")}, {tree("(TOP (NN ac))")}), DataError);
  EXPECT_THROW(parse_f1({tree("(TOP (NN ab))")}, {}), DataError);
}

TEST(JointReport, PerfectKeyValues) {
  const auto gold = fixtures::ctb_sample();
  const JointReport r = joint_report(gold, gold);
  const std::string line = report_keyvalues(r);
  EXPECT_EQ(line.rfind("seg_f1=1.0 par_f1=1.0 ", 0), 0u) << line;
  EXPECT_NE(line.find("sentences=6"), std::string::npos);
}

TEST(JointReport, Formatting) {
  EXPECT_EQ(format_metric(1.0), "1.0");
  EXPECT_EQ(format_metric(0.0), "0.0");
  EXPECT_EQ(format_metric(0.4), "0.4");
  EXPECT_EQ(format_metric(1.0 / 3.0), "0.333333");
  const std::string table = report_table(joint_report({tree("(TOP (NN ab))")}, {tree("(TOP (NN ab))")}));
  EXPECT_NE(table.find("Seg"), std::string::npos);
  EXPECT_NE(table.find("100.00"), std::string::npos);
}
