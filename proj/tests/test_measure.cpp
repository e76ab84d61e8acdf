#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "flexsft/measure.hpp"
#include "oracles.hpp"

using namespace flexsft;

namespace {

VertexShift golden() { return VertexShift::from_matrix(oracle::golden_mean()); }

// Naive surrogate distance between two dense "word -> probability" functions.
template <class A, class B>
double naive_distance(A a, B b, std::size_t q, std::size_t D) {
  double total = 0;
  for (std::size_t m = 1; m <= D; ++m) {
    double tv = 0;
    for (const auto& w : oracle::all_admissible(oracle::full(static_cast<int>(q)), static_cast<int>(m)))
      tv += std::abs(a(w) - b(w));
    total += std::ldexp(1.0, -static_cast<int>(m)) * 0.5 * tv;
  }
  return total;
}

// Probability of prefix `w` under the empirical law of the depth-D windows.
auto empirical_oracle(const std::vector<Symbol>& x, std::size_t D) {
  return [x, D](const oracle::Seq& w) {
    const std::size_t windows = x.size() - D + 1;
    double hits = 0;
    for (std::size_t j = 0; j < windows; ++j) hits += std::equal(w.begin(), w.end(), x.begin() + j);
    return hits / static_cast<double>(windows);
  };
}

auto markov_oracle(const MarkovMeasure& m) {
  const auto P = m.dense();
  const auto pi = m.pi();
  return [P, pi](const oracle::Seq& w) {
    double p = pi[w[0]];
    for (std::size_t i = 0; i + 1 < w.size(); ++i) p *= P[w[i]][w[i + 1]];
    return p;
  };
}

std::vector<Symbol> random_word(std::mt19937_64& rng, std::size_t len, std::size_t q) {
  std::vector<Symbol> w(len);
  for (auto& s : w) s = static_cast<Symbol>(rng() % q);
  return w;
}

MarkovMeasure random_full_markov(std::mt19937_64& rng, std::size_t q) {
  const auto s = VertexShift::full(q);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> probs(q * q);
  for (std::size_t i = 0; i < q; ++i) {
    double t = 0;
    for (std::size_t j = 0; j < q; ++j) t += probs[i * q + j] = u(rng);
    for (std::size_t j = 0; j < q; ++j) probs[i * q + j] /= t;
  }
  auto pi = stationary_distribution(s, probs);
  return MarkovMeasure(s, pi, probs);
}

}  // namespace

TEST(EmpiricalMeasure, SpecExamples) {
  auto e = empirical_measure(Word::parse("0101"), 1);
  EXPECT_DOUBLE_EQ(e.frequencies.at(Word{0}), 0.5);
  EXPECT_DOUBLE_EQ(e.frequencies.at(Word{1}), 0.5);
  e = empirical_measure(Word::parse("0000"), 2);
  ASSERT_EQ(e.frequencies.size(), 1u);
  EXPECT_DOUBLE_EQ(e.frequencies.at(Word::parse("00")), 1.0);
  e = empirical_measure(Word::parse("0010"), 2);
  for (const char* w : {"00", "01", "10"}) EXPECT_DOUBLE_EQ(e.frequencies.at(Word::parse(w)), 1.0 / 3);
  EXPECT_THROW(empirical_measure(Word::parse("0"), 2), WordTooShortError);
}

TEST(WeakStarDistance, SpecExamples) {
  const auto mu = parry_measure(golden());
  EXPECT_EQ(weak_star_distance(mu, mu, MetricConfig(3)), 0.0);
  const auto half = MarkovMeasure::bernoulli({0.5, 0.5});
  const auto zero = MarkovMeasure::bernoulli({1.0, 0.0});
  EXPECT_NEAR(weak_star_distance(half, zero, MetricConfig(1)), 0.25, 1e-15);
  EXPECT_NEAR(weak_star_distance(empirical_measure(Word::parse("01"), 1), half, MetricConfig(1)), 0.0, 1e-15);
  EXPECT_THROW(MetricConfig(0), std::invalid_argument);
}

TEST(WeakStarDistance, MatchesNaiveDefinition) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t q = 2 + trial % 2, D = 1 + trial % 3;
    const auto m = random_full_markov(rng, q);
    const auto x = random_word(rng, 30, q);
    const double got = weak_star_distance(empirical_measure(Word(x), D), m, MetricConfig(D));
    EXPECT_NEAR(got, naive_distance(empirical_oracle(x, D), markov_oracle(m), q, D), 1e-12);
  }
}

TEST(WeakStarDistance, MetricAxiomsOnMarkovMeasures) {
  std::mt19937_64 rng(43);
  const MetricConfig cfg(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = cylinder_table(random_full_markov(rng, 3), 3);
    const auto b = cylinder_table(random_full_markov(rng, 3), 3);
    const auto c = cylinder_table(random_full_markov(rng, 3), 3);
    const double ab = weak_star_distance(a, b, cfg);
    EXPECT_GT(ab, 0);
    EXPECT_DOUBLE_EQ(ab, weak_star_distance(b, a, cfg));
    EXPECT_LE(ab, weak_star_distance(a, c, cfg) + weak_star_distance(c, b, cfg) + 1e-15);
    EXPECT_EQ(weak_star_distance(a, a, cfg), 0.0);
  }
}

TEST(CylinderTable, LabelledTableMatchesCylinderProbs) {
  // Identity labels reproduce cylinder_prob; higher-block labels reproduce the base.
  const auto g = golden();
  const auto mu = parry_measure(g);
  const auto direct = cylinder_table(mu, 4);
  for (std::size_t n = 1; n <= 4; ++n)
    for (const auto& w : language(g, n).words()) EXPECT_NEAR(direct[w], cylinder_prob(mu, w), 1e-15);

  const auto h = higher_block(g, 2);
  const auto blocks = language(g, 2);
  std::vector<Symbol> first(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) first[i] = blocks[i][0];
  const LabeledShift p(h, first, 2);
  const auto lifted = cylinder_table(p, parry_measure(h), 4);
  EXPECT_LT(weak_star_distance(lifted, direct, MetricConfig(4)), 1e-12);
}

TEST(CylinderTable, PeriodicOrbit) {
  const auto t = periodic_orbit_table(Word::parse("001").span(), 2, 2);
  EXPECT_NEAR(t[Word::parse("0")], 2.0 / 3, 1e-15);
  EXPECT_NEAR(t[Word::parse("10")], 1.0 / 3, 1e-15);
  EXPECT_NEAR(t[Word::parse("11")], 0.0, 1e-15);
}

TEST(Katok, FullTwoShiftExample) {
  const auto r = katok_separated_set(VertexShift::full(2), MarkovMeasure::bernoulli({0.5, 0.5}), 10, 0.2, 0.2,
                                     MetricConfig(2));
  EXPECT_LT(std::abs(std::log(static_cast<double>(r.words.size())) / 10 - std::log(2.0)), 0.2);
  EXPECT_EQ(r.candidates, 1024u);
}

TEST(Katok, SingleStateShift) {
  const auto s = VertexShift::full(1);
  const auto r = katok_separated_set(s, parry_measure(s), 6, 0.1, 0.1, MetricConfig(2));
  ASSERT_EQ(r.words.size(), 1u);
  EXPECT_EQ(r.deviation, 0.0);
  EXPECT_EQ(r.entropy, 0.0);
}

TEST(Katok, GoldenMeanAgainstBruteForce) {
  const auto g = golden();
  const auto mu = parry_measure(g);
  const std::size_t n = 12, D = 2;
  const auto r = katok_separated_set(g, mu, n, 0.15, 0.25, MetricConfig(D));
  // Independent filter over every admissible word.
  std::set<oracle::Seq> qualifying;
  for (const auto& w : oracle::all_admissible(oracle::golden_mean(), n)) {
    const std::vector<Symbol> x(w.begin(), w.end());
    if (naive_distance(empirical_oracle(x, D), markov_oracle(mu), 2, D) < 0.25) qualifying.insert(w);
  }
  EXPECT_EQ(r.candidates, 377u);
  EXPECT_EQ(r.in_radius, qualifying.size());
  EXPECT_EQ(qualifying.size(), 375u);  // golden count
  for (std::size_t i = 0; i < r.words.size(); ++i)
    EXPECT_TRUE(qualifying.count(oracle::Seq(r.words[i].begin(), r.words[i].end())));
  const double h = std::log((1 + std::sqrt(5.0)) / 2);
  const double size = static_cast<double>(r.words.size());
  EXPECT_LT(std::log(size) / n, h + 0.15);
  // Maximal: either every qualifying word is kept or one more would break the cap.
  EXPECT_TRUE(r.words.size() == qualifying.size() || std::log(size + 1) / n >= h + 0.15);
  EXPECT_LT(r.deviation, 0.15);
}

TEST(Katok, TooShortRaisesInsufficientN) {
  // A tiny radius leaves too few short words to come close to log 3.
  const auto m = MarkovMeasure::bernoulli({1.0 / 3, 1.0 / 3, 1.0 / 3});
  EXPECT_THROW(katok_separated_set(VertexShift::full(3), m, 2, 0.05, 0.01, MetricConfig(2)), InsufficientNError);
  try {
    katok_separated_set(VertexShift::full(3), m, 3, 0.01, 0.02, MetricConfig(2));
    FAIL();
  } catch (const InsufficientNError& e) {
    EXPECT_GE(e.deviation(), 0.01);
  }
}

TEST(Pigeonhole, SpecExamples) {
  const auto s = VertexShift::full(2);
  auto r = pigeonhole_refine(WordSet::from_words(s, {Word::parse("00"), Word::parse("01"), Word::parse("10")}), s);
  EXPECT_EQ(r.words.words(), std::vector<Word>{Word::parse("00")});
  EXPECT_EQ(r.first, 0u);
  EXPECT_EQ(r.last, 0u);
  r = pigeonhole_refine(WordSet::from_words(s, {Word::parse("010"), Word::parse("011"), Word::parse("000")}), s);
  EXPECT_EQ(r.words.words(), (std::vector<Word>{Word::parse("000"), Word::parse("010")}));
  EXPECT_EQ(r.first, 0u);
  EXPECT_EQ(r.last, 0u);
  r = pigeonhole_refine(WordSet::from_words(s, {Word::parse("101")}), s);
  EXPECT_EQ(r.words.size(), 1u);
  EXPECT_EQ(r.first, 1u);
}

TEST(Pigeonhole, SizeLowerBound) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t q = 2 + trial % 3;
    const auto all = language(VertexShift::full(q), 4);
    std::vector<Symbol> flat;
    std::size_t count = 0;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (rng() % 3 == 0) {
        flat.insert(flat.end(), all[i].begin(), all[i].end());
        ++count;
      }
    if (count == 0) continue;
    const auto r = pigeonhole_refine(WordSet(4, flat), VertexShift::full(q));
    EXPECT_GE(r.words.size() * q * q, count);
    for (const auto& w : r.words.words()) {
      EXPECT_EQ(w.front(), r.first);
      EXPECT_EQ(w.back(), r.last);
    }
  }
}

// The three word-level inequalities for window averages.
TEST(WindowAverages, IndexSetBound) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t q = 2 + trial % 2, D = 1 + trial % 3, len = 20 + rng() % 30;
    const auto x = random_word(rng, len, q);
    std::vector<std::size_t> A, B;
    for (std::size_t j = 0; j + D <= len; ++j) {
      if (rng() % 2) A.push_back(j);
      if (rng() % 2) B.push_back(j);
    }
    if (A.empty() || B.empty()) continue;
    std::vector<std::size_t> sym, inter;
    std::set_symmetric_difference(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(sym));
    std::set_intersection(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(inter));
    const double a = static_cast<double>(A.size()), b = static_cast<double>(B.size());
    const double bound = (a + b) / (a * b) * static_cast<double>(sym.size()) +
                         std::abs(a - b) / (a * b) * static_cast<double>(inter.size());
    const double d = weak_star_distance(window_average(x, A, q, D), window_average(x, B, q, D), MetricConfig(D));
    EXPECT_LE(d, bound + 1e-12);
  }
}

TEST(WindowAverages, DifferingWindowsBound) {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t q = 2, D = 1 + trial % 3, len = 16 + rng() % 20;
    const auto x = random_word(rng, len, q);
    auto y = x;
    const std::size_t flips = rng() % 4;
    for (std::size_t f = 0; f < flips; ++f) y[rng() % len] ^= 1;
    const std::size_t N = len - D + 1;
    std::size_t k = 0;
    for (std::size_t j = 0; j < N; ++j) k += !std::equal(x.begin() + j, x.begin() + j + D, y.begin() + j);
    const double d = weak_star_distance(cylinder_table(empirical_measure(Word(x), D), q),
                                        cylinder_table(empirical_measure(Word(y), D), q), MetricConfig(D));
    EXPECT_LE(d, static_cast<double>(k) / static_cast<double>(N) + 1e-12);
    if (k == 0) { EXPECT_EQ(d, 0.0); }
  }
  // Same windows in a different order: distance zero.
  const auto a = cylinder_table(empirical_measure(Word::parse("0110"), 2), 2);
  const auto b = cylinder_table(empirical_measure(Word::parse("1101"), 2), 2);
  EXPECT_EQ(weak_star_distance(a, b, MetricConfig(2)), 0.0);
}

TEST(WindowAverages, ConvexCombinationsStayClose) {
  std::mt19937_64 rng(61);
  const MetricConfig cfg(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto mu = cylinder_table(random_full_markov(rng, 2), 2);
    std::vector<CylinderTable> parts;
    double eps = 0;
    const std::size_t k = 1 + rng() % 5;
    for (std::size_t i = 0; i < k; ++i) {
      parts.push_back(cylinder_table(empirical_measure(Word(random_word(rng, 12, 2)), 2), 2));
      eps = std::max(eps, weak_star_distance(parts.back(), mu, cfg));
    }
    std::vector<double> w(k);
    std::size_t total = 0;
    for (auto& x : w) total += static_cast<std::size_t>(x = 1 + static_cast<double>(rng() % 7));
    for (auto& x : w) x /= static_cast<double>(total);
    EXPECT_LE(weak_star_distance(CylinderTable::mixture(parts, w), mu, cfg), eps + 1e-12);
  }
}
