#include <gtest/gtest.h>

#include "flexsft/symbolic.hpp"
#include "oracles.hpp"

using namespace flexsft;

namespace {

VertexShift golden() { return VertexShift::from_matrix(oracle::golden_mean()); }
VertexShift upper_triangular() { return VertexShift::from_matrix({{1, 1}, {0, 1}}); }

std::vector<oracle::Seq> as_seqs(const WordSet& ws) {
  std::vector<oracle::Seq> out;
  for (std::size_t i = 0; i < ws.size(); ++i) out.emplace_back(ws[i].begin(), ws[i].end());
  return out;
}

}  // namespace

TEST(Word, ParsePrintRoundTrip) {
  const Word w = Word::parse("01a[40]9");
  ASSERT_EQ(w.size(), 5u);
  EXPECT_EQ(w[2], 10u);
  EXPECT_EQ(w[3], 40u);
  EXPECT_EQ(w.str(), "01a[40]9");
  EXPECT_THROW(Word::parse("01-"), std::invalid_argument);
  EXPECT_THROW(Word::parse("[12"), std::invalid_argument);
  EXPECT_EQ(Word::parse(""), Word{});
}

TEST(Word, OrderingIsLexicographic) {
  EXPECT_LT(Word::parse("01"), Word::parse("1"));
  EXPECT_LT(Word::parse("0"), Word::parse("00"));
  EXPECT_EQ(Word::parse("10") + Word::parse("2"), Word::parse("102"));
}

TEST(Alphabet, RejectsEmpty) { EXPECT_THROW(Alphabet(0), std::invalid_argument); }

TEST(VertexShift, RejectsNonBinaryAndNonSquare) {
  EXPECT_THROW(VertexShift::from_matrix({{1, 2}, {1, 1}}), std::invalid_argument);
  EXPECT_THROW(VertexShift::from_matrix({{1, 1}}), std::invalid_argument);
  EXPECT_THROW(VertexShift::from_matrix({}), std::invalid_argument);
}

TEST(VertexShift, MatrixRoundTripAndEdgeIndex) {
  const auto m = oracle::Matrix{{0, 1, 1}, {1, 0, 0}, {1, 1, 1}};
  const auto s = VertexShift::from_matrix(m);
  EXPECT_EQ(s.matrix(), m);
  EXPECT_EQ(s.edge_count(), 6u);
  EXPECT_EQ(s.edge_index(0, 2), std::optional<std::size_t>(1));
  EXPECT_FALSE(s.edge_index(1, 1).has_value());
  EXPECT_EQ(s.predecessors(0).size(), 2u);
}

TEST(Language, SpecExamples) {
  EXPECT_EQ(language(VertexShift::full(2), 3).size(), 8u);
  EXPECT_EQ(language(golden(), 3).size(), 5u);
  const auto single = language(VertexShift::full(1), 7);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single.word(0).str(), "0000000");
}

TEST(Language, FibonacciCounts) {
  std::size_t a = 2, b = 3;  // |L_1|, |L_2|
  for (std::size_t n = 3; n <= 20; ++n) {
    const std::size_t c = a + b;
    EXPECT_EQ(language(golden(), n).size(), c) << n;
    a = b;
    b = c;
  }
}

TEST(Language, MatchesBruteForceOnRandomShifts) {
  for (const auto& m : oracle::random_irreducible(7, 40, 5)) {
    const auto s = VertexShift::from_matrix(m);
    for (int n = 1; n <= 6; ++n) {
      const auto ws = language(s, n);
      EXPECT_EQ(as_seqs(ws), oracle::all_admissible(m, n));
      for (std::size_t i = 0; i < ws.size(); ++i) EXPECT_TRUE(is_admissible(s, ws[i]));
    }
  }
}

TEST(Language, Submultiplicative) {
  for (const auto& m : oracle::random_irreducible(11, 30, 6)) {
    const auto s = VertexShift::from_matrix(m);
    for (int n = 1; n <= 4; ++n)
      for (int k = 1; k <= 4; ++k)
        EXPECT_LE(language(s, n + k).size(), language(s, n).size() * language(s, k).size());
  }
}

TEST(Language, BudgetRaisesCapacityError) {
  EXPECT_THROW(language(VertexShift::full(2), 10, 1000), CapacityError);
  try {
    language(VertexShift::full(3), 30);
    FAIL();
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.budget(), default_enumeration_budget);
    EXPECT_GT(e.requested(), e.budget());
  }
}

TEST(IsAdmissible, SpecExamples) {
  EXPECT_TRUE(is_admissible(golden(), Word::parse("010")));
  EXPECT_FALSE(is_admissible(golden(), Word::parse("0110")));
  for (const auto& w : oracle::all_admissible(oracle::full(2), 8))
    EXPECT_TRUE(is_admissible(VertexShift::full(2), std::span<const Symbol>(w)));
  EXPECT_THROW(is_admissible(golden(), Word::parse("02")), std::invalid_argument);
}

TEST(IsIrreducible, SpecExamplesAndOracle) {
  EXPECT_TRUE(is_irreducible(VertexShift::full(2)));
  EXPECT_FALSE(is_irreducible(upper_triangular()));
  EXPECT_TRUE(is_irreducible(golden()));
  EXPECT_FALSE(is_irreducible(VertexShift::from_matrix({{0}})));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 5);
    oracle::Matrix m(n, std::vector<int>(n));
    for (auto& row : m)
      for (int& x : row) x = (rng() % 3) == 0;
    EXPECT_EQ(is_irreducible(VertexShift::from_matrix(m)), oracle::irreducible(m));
  }
}

TEST(StrongComponents, AgreeWithClosure) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 7);
    oracle::Matrix m(n, std::vector<int>(n));
    for (auto& row : m)
      for (int& x : row) x = (rng() % 4) == 0;
    const auto comp = strong_components(VertexShift::from_matrix(m));
    const auto r = oracle::closure(m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) { EXPECT_EQ(comp[i] == comp[j], r[i][j] && r[j][i]); }
  }
}

TEST(ConnectingWord, SpecExamples) {
  EXPECT_EQ(connecting_word(golden(), 1, 1).str(), "101");
  EXPECT_EQ(connecting_word(VertexShift::full(2), 0, 1).str(), "01");
  EXPECT_THROW(connecting_word(upper_triangular(), 1, 0), UnreachableStateError);
}

TEST(ConnectingWord, ShortestAndAdmissible) {
  for (const auto& m : oracle::random_irreducible(13, 40, 6, 0.35)) {
    const auto s = VertexShift::from_matrix(m);
    const int n = static_cast<int>(m.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Word w = connecting_word(s, i, j);
        EXPECT_TRUE(is_admissible(s, w));
        EXPECT_EQ(w.front(), static_cast<Symbol>(i));
        EXPECT_EQ(w.back(), static_cast<Symbol>(j));
        EXPECT_EQ(static_cast<int>(w.size()) - 1, oracle::distance(m, i, j));
        EXPECT_EQ(connection_times(s, i)[j], std::optional<std::size_t>(w.size() - 1));
      }
  }
}

TEST(HigherBlock, SpecExamples) {
  EXPECT_EQ(higher_block(VertexShift::full(2), 1), VertexShift::full(2));
  const auto g2 = higher_block(golden(), 2);
  // states 00, 01, 10 in lex order
  EXPECT_EQ(g2.matrix(), (oracle::Matrix{{1, 1, 0}, {0, 0, 1}, {1, 1, 0}}));
  EXPECT_EQ(higher_block(VertexShift::full(1), 5).size(), 1u);
}

TEST(HigherBlock, PreservesWordCounts) {
  for (const auto& m : oracle::random_irreducible(17, 25, 4)) {
    const auto s = VertexShift::from_matrix(m);
    for (std::size_t b = 1; b <= 3; ++b) {
      const auto h = higher_block(s, b);
      for (std::size_t n = 1; n <= 5; ++n) EXPECT_EQ(language(h, n).size(), language(s, n + b - 1).size());
    }
  }
}

TEST(WordSet, InvariantsEnforced) {
  EXPECT_THROW(WordSet::from_words(golden(), {Word::parse("01"), Word::parse("01")}), std::invalid_argument);
  EXPECT_THROW(WordSet::from_words(golden(), {Word::parse("11")}), std::invalid_argument);
  EXPECT_THROW(WordSet::from_words(golden(), {Word::parse("0"), Word::parse("01")}), std::invalid_argument);
  const auto ws = WordSet::from_words(golden(), {Word::parse("10"), Word::parse("00")});
  EXPECT_EQ(ws.word(0).str(), "00");
  EXPECT_TRUE(ws.contains(Word::parse("10").span()));
  EXPECT_FALSE(ws.contains(Word::parse("01").span()));
  EXPECT_THROW(WordSet(2, {1, 0, 0, 1}), std::invalid_argument);
}

TEST(LabeledShift, LabelLanguageOfHigherBlockMatchesBase) {
  for (const auto& m : oracle::random_irreducible(19, 20, 4)) {
    const auto s = VertexShift::from_matrix(m);
    const auto blocks = language(s, 2);
    std::vector<Symbol> labels(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) labels[i] = blocks[i][1];
    const LabeledShift p(higher_block(s, 2), labels, s.size());
    for (std::size_t n = 1; n <= 5; ++n) EXPECT_EQ(label_language(p, n), language(s, n)) << n;
  }
}

TEST(LabeledShift, CollapsingLabels) {
  // Two states both labelled 0, joined in a cycle: presents only 0^n.
  const LabeledShift p(VertexShift::from_matrix({{0, 1}, {1, 0}}), {0, 0}, 2);
  const auto l = label_language(p, 4);
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(l.word(0).str(), "0000");
  EXPECT_THROW(LabeledShift(VertexShift::full(2), {0, 2}, 2), std::invalid_argument);
}
