#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "flexsft/error.hpp"
#include "flexsft/spectral.hpp"
#include "flexsft/symbolic.hpp"

namespace flexsft {

struct MetricConfig {
  explicit MetricConfig(std::size_t depth = 2) : max_depth(depth) {
    if (depth == 0) throw std::invalid_argument("metric depth must be at least 1");
  }
  std::size_t max_depth;
};

// Probabilities of every cylinder of length 1..depth over an alphabet of q
// symbols, stored densely: level m holds q^m entries indexed by the word read
// as a base-q number. Lower levels are always the marginals of the top level
// over trailing symbols.
class CylinderTable {
 public:
  CylinderTable(std::size_t alphabet, std::vector<double> top, std::size_t depth)
      : q_(alphabet), levels_(depth) {
    if (alphabet == 0 || depth == 0) throw std::invalid_argument("cylinder table needs alphabet and depth");
    if (top.size() != cells(depth)) throw std::invalid_argument("top level has the wrong size");
    levels_[depth - 1] = std::move(top);
    for (std::size_t m = depth - 1; m-- > 0;) {
      auto& lower = levels_[m];
      const auto& upper = levels_[m + 1];
      lower.assign(cells(m + 1), 0.0);
      for (std::size_t code = 0; code < upper.size(); ++code) lower[code / q_] += upper[code];
    }
  }

  std::size_t alphabet() const noexcept { return q_; }
  std::size_t depth() const noexcept { return levels_.size(); }
  const std::vector<double>& level(std::size_t m) const { return levels_.at(m - 1); }

  double operator[](std::span<const Symbol> w) const {
    if (w.empty() || w.size() > depth()) throw std::invalid_argument("cylinder length outside the table");
    std::size_t code = 0;
    for (Symbol s : w) {
      if (s >= q_) return 0.0;
      code = code * q_ + s;
    }
    return levels_[w.size() - 1][code];
  }
  double operator[](const Word& w) const { return (*this)[w.span()]; }

  // Convex combination sum_i weights[i] * tables[i].
  static CylinderTable mixture(std::span<const CylinderTable> tables, std::span<const double> weights) {
    if (tables.empty() || tables.size() != weights.size()) throw std::invalid_argument("mixture needs matching weights");
    const std::size_t q = tables[0].alphabet(), d = tables[0].depth();
    std::vector<double> top(tables[0].level(d).size(), 0.0);
    for (std::size_t i = 0; i < tables.size(); ++i) {
      if (tables[i].alphabet() != q || tables[i].depth() != d) throw std::invalid_argument("mixture of unlike tables");
      const auto& t = tables[i].level(d);
      for (std::size_t c = 0; c < top.size(); ++c) top[c] += weights[i] * t[c];
    }
    return CylinderTable(q, std::move(top), d);
  }

  std::size_t cells(std::size_t m) const {
    std::size_t c = 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (c > default_enumeration_budget / q_) throw CapacityError("cylinder table exceeds budget", c * q_, default_enumeration_budget);
      c *= q_;
    }
    return c;
  }

 private:
  std::size_t q_;
  std::vector<std::vector<double>> levels_;
};

// Label-cylinder probabilities of a Markov measure on a labelled shift. The
// forward pass keeps, for each label word u, the mass of paths labelled u
// ending in each state.
inline CylinderTable cylinder_table(const LabeledShift& p, const MarkovMeasure& m, std::size_t depth) {
  if (!(m.shift() == p.shift())) throw std::invalid_argument("measure lives on a different shift");
  const auto& s = p.shift();
  const std::size_t q = p.label_alphabet(), n = s.size();
  std::vector<std::vector<double>> mass(q, std::vector<double>(n, 0.0));
  for (Symbol i = 0; i < n; ++i) mass[p.label(i)][i] = m.pi(i);
  for (std::size_t level = 1; level < depth; ++level) {
    std::vector<std::vector<double>> next(mass.size() * q);
    for (std::size_t code = 0; code < mass.size(); ++code) {
      const auto& f = mass[code];
      bool any = false;
      for (double x : f) any = any || x > 0;
      if (!any) continue;
      for (Symbol i = 0; i < n; ++i) {
        if (f[i] == 0) continue;
        const auto succ = s.successors(i);
        for (std::size_t k = 0; k < succ.size(); ++k) {
          auto& slot = next[code * q + p.label(succ[k])];
          if (slot.empty()) slot.assign(n, 0.0);
          slot[succ[k]] += f[i] * m.edge_probs()[s.edge_offset(i) + k];
        }
      }
    }
    mass = std::move(next);
  }
  std::vector<double> top(mass.size(), 0.0);
  for (std::size_t code = 0; code < mass.size(); ++code)
    for (double x : mass[code]) top[code] += x;
  return CylinderTable(q, std::move(top), depth);
}

inline CylinderTable cylinder_table(const MarkovMeasure& m, std::size_t depth) {
  return cylinder_table(LabeledShift::identity(m.shift()), m, depth);
}

// Integral of a roof against the label cylinders of a table.
inline double roof_integral(const CylinderTable& table, const RoofFunction& rho) {
  if (table.alphabet() != rho.alphabet()) throw std::invalid_argument("roof and table use different alphabets");
  if (table.depth() < rho.depth()) throw std::invalid_argument("cylinder table shallower than the roof");
  const auto& probs = table.level(rho.depth());
  const auto& values = rho.table();
  double total = 0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (probs[c] <= 0) continue;
    if (std::isnan(values[c])) throw std::invalid_argument("measure charges a cylinder where the roof is undefined");
    total += probs[c] * values[c];
  }
  return total;
}

inline double roof_integral(const LabeledShift& p, const MarkovMeasure& m, const RoofFunction& rho) {
  return roof_integral(cylinder_table(p, m, rho.depth()), rho);
}

struct EmpiricalMeasure {
  Word source;
  std::size_t depth;
  std::map<Word, double> frequencies;  // over the |source| - depth + 1 windows
};

inline EmpiricalMeasure empirical_measure(const Word& w, std::size_t depth) {
  if (depth == 0) throw std::invalid_argument("empirical depth must be positive");
  if (w.size() < depth) throw WordTooShortError(w.size(), depth);
  const std::size_t windows = w.size() - depth + 1;
  std::map<Word, double> freq;
  for (std::size_t j = 0; j < windows; ++j) freq[w.sub(j, depth)] += 1.0;
  for (auto& [_, v] : freq) v /= static_cast<double>(windows);
  return EmpiricalMeasure{w, depth, std::move(freq)};
}

// Average of the point masses at the depth-`depth` windows starting at each
// index in `starts` (repeats count with multiplicity).
inline CylinderTable window_average(std::span<const Symbol> x, std::span<const std::size_t> starts,
                                    std::size_t alphabet, std::size_t depth) {
  if (starts.empty()) throw std::invalid_argument("window index set must be nonempty");
  std::size_t cells = 1;
  for (std::size_t i = 0; i < depth; ++i) cells *= alphabet;
  std::vector<double> top(cells, 0.0);
  const double unit = 1.0 / static_cast<double>(starts.size());
  for (std::size_t j : starts) {
    if (j + depth > x.size()) throw WordTooShortError(x.size() - std::min(j, x.size()), depth);
    std::size_t code = 0;
    for (std::size_t i = 0; i < depth; ++i) {
      if (x[j + i] >= alphabet) throw std::invalid_argument("word symbol outside the alphabet");
      code = code * alphabet + x[j + i];
    }
    top[code] += unit;
  }
  return CylinderTable(alphabet, std::move(top), depth);
}

inline CylinderTable cylinder_table(const EmpiricalMeasure& e, std::size_t alphabet) {
  std::vector<std::size_t> starts(e.source.size() - e.depth + 1);
  std::iota(starts.begin(), starts.end(), std::size_t{0});
  return window_average(e.source.span(), starts, alphabet, e.depth);
}

// Invariant measure carried by the periodic orbit w w w ...; windows wrap
// around.
inline CylinderTable periodic_orbit_table(std::span<const Symbol> w, std::size_t alphabet, std::size_t depth) {
  if (w.empty()) throw std::invalid_argument("periodic orbit needs a nonempty word");
  std::vector<Symbol> unrolled(w.begin(), w.end());
  while (unrolled.size() < w.size() + depth - 1) unrolled.insert(unrolled.end(), w.begin(), w.end());
  std::vector<std::size_t> starts(w.size());
  std::iota(starts.begin(), starts.end(), std::size_t{0});
  return window_average(unrolled, starts, alphabet, depth);
}

// sum_{m=1}^{D} 2^{-m} * (1/2) * sum_{|w|=m} |a[w] - b[w]|
inline double weak_star_distance(const CylinderTable& a, const CylinderTable& b, const MetricConfig& cfg) {
  if (a.alphabet() != b.alphabet()) throw std::invalid_argument("tables over different alphabets");
  if (a.depth() < cfg.max_depth || b.depth() < cfg.max_depth) {
    throw std::invalid_argument("cylinder table shallower than the metric depth");
  }
  double total = 0, weight = 0.5;
  for (std::size_t m = 1; m <= cfg.max_depth; ++m, weight *= 0.5) {
    const auto& x = a.level(m);
    const auto& y = b.level(m);
    double tv = 0;
    for (std::size_t c = 0; c < x.size(); ++c) tv += std::abs(x[c] - y[c]);
    total += weight * 0.5 * tv;
  }
  return total;
}

inline double weak_star_distance(const MarkovMeasure& a, const MarkovMeasure& b, const MetricConfig& cfg) {
  return weak_star_distance(cylinder_table(a, cfg.max_depth), cylinder_table(b, cfg.max_depth), cfg);
}

inline double weak_star_distance(const EmpiricalMeasure& a, const MarkovMeasure& b, const MetricConfig& cfg) {
  return weak_star_distance(cylinder_table(a, b.shift().size()), cylinder_table(b, cfg.max_depth), cfg);
}

struct KatokResult {
  WordSet words;           // state paths, lexicographic
  double deviation;        // |log|words|/n - entropy|
  double entropy;          // markov_entropy of the reference measure
  std::size_t candidates;  // |L_n| inspected
  std::size_t in_radius;   // words whose empirical measure is close enough
};

// Separated set for a Markov measure on a labelled shift. Paths are compared
// through their label words. Among the words of positive measure whose
// empirical label measure lies within `radius`, the closest ones (ties by
// lexicographic order) are kept, as many as
// possible while (1/n) log|set| stays below entropy + kappa. With
// `require_deviation` off, a set that misses entropy - kappa is returned
// instead of rejected.
inline KatokResult katok_separated_set(const LabeledShift& p, const MarkovMeasure& m, std::size_t n, double kappa,
                                       double radius, const MetricConfig& cfg,
                                       std::size_t budget = default_enumeration_budget,
                                       bool require_deviation = true) {
  if (!(kappa > 0) || !(radius > 0)) throw std::invalid_argument("kappa and radius must be positive");
  const std::size_t D = cfg.max_depth;
  if (n < D) throw WordTooShortError(n, D);
  const double h = markov_entropy(m);
  const WordSet all = language(p.shift(), n, budget);
  const CylinderTable reference = cylinder_table(p, m, D);

  std::vector<std::size_t> starts(n - D + 1);
  std::iota(starts.begin(), starts.end(), std::size_t{0});
  std::vector<std::pair<double, std::size_t>> scored;
  std::vector<Symbol> labels(n);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto w = all[i];
    if (cylinder_prob(m, w) <= 0) continue;
    for (std::size_t j = 0; j < n; ++j) labels[j] = p.label(w[j]);
    const double d = weak_star_distance(window_average(labels, starts, p.label_alphabet(), D), reference, cfg);
    if (d < radius) scored.emplace_back(d, i);
  }
  if (scored.empty()) {
    throw InsufficientNError("no word of length " + std::to_string(n) + " has empirical measure within radius", h);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  const double nd = static_cast<double>(n);
  std::size_t keep = scored.size();
  const double cap = std::exp(nd * (h + kappa));
  if (cap < static_cast<double>(keep)) keep = static_cast<std::size_t>(std::floor(cap));
  while (keep > 1 && std::log(static_cast<double>(keep)) / nd >= h + kappa) --keep;
  keep = std::max<std::size_t>(keep, 1);
  const double deviation = std::abs(std::log(static_cast<double>(keep)) / nd - h);
  if (require_deviation && deviation >= kappa) {
    throw InsufficientNError("separated set deviation " + std::to_string(deviation) + " is not below kappa " +
                                 std::to_string(kappa) + " at word length " + std::to_string(n),
                             deviation);
  }

  std::vector<std::size_t> chosen(keep);
  for (std::size_t i = 0; i < keep; ++i) chosen[i] = scored[i].second;
  std::sort(chosen.begin(), chosen.end());
  std::vector<Symbol> flat;
  flat.reserve(keep * n);
  for (std::size_t i : chosen) flat.insert(flat.end(), all[i].begin(), all[i].end());
  return KatokResult{WordSet(n, std::move(flat)), deviation, h, all.size(), scored.size()};
}

inline KatokResult katok_separated_set(const VertexShift& shift, const MarkovMeasure& m, std::size_t n, double kappa,
                                       double radius, const MetricConfig& cfg) {
  return katok_separated_set(LabeledShift::identity(shift), m, n, kappa, radius, cfg);
}

struct PigeonholeResult {
  WordSet words;
  Symbol first;
  Symbol last;
};

// Largest class of words sharing first and last symbol; ties go to the
// smallest (first, last).
inline PigeonholeResult pigeonhole_refine(const WordSet& gamma, const VertexShift& shift) {
  if (gamma.empty()) throw std::invalid_argument("pigeonhole refinement of an empty set");
  const std::size_t q = shift.size();
  std::vector<std::size_t> counts(q * q, 0);
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const auto w = gamma[i];
    if (w.front() >= q || w.back() >= q) throw std::invalid_argument("word symbol outside the alphabet");
    ++counts[w.front() * q + w.back()];
  }
  const auto best = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  const auto first = static_cast<Symbol>(best / q), last = static_cast<Symbol>(best % q);
  std::vector<Symbol> flat;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const auto w = gamma[i];
    if (w.front() == first && w.back() == last) flat.insert(flat.end(), w.begin(), w.end());
  }
  return PigeonholeResult{WordSet(gamma.length(), std::move(flat)), first, last};
}

}  // namespace flexsft
