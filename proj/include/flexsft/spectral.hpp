#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flexsft/error.hpp"
#include "flexsft/symbolic.hpp"

namespace flexsft {

struct PerronOptions {
  double tol = 1e-12;
  std::size_t max_iterations = 1'000'000;
};

struct PerronData {
  double lambda;
  std::vector<double> right;  // sums to 1
  std::vector<double> left;   // left . right == 1
  std::size_t iterations;
};

namespace detail {

// Power iteration for the Perron vector of A + I (or its transpose). The
// Collatz-Wielandt ratios min/max (Bx)_i / x_i bracket the spectral radius of
// B, so the loop stops once the bracket is narrower than tol.
inline std::vector<double> perron_vector(const VertexShift& s, bool transpose, const PerronOptions& opt,
                                         double& lambda, std::size_t& iterations) {
  const std::size_t n = s.size();
  std::vector<double> x(n, 1.0 / static_cast<double>(n)), y(n);
  for (iterations = 1; iterations <= opt.max_iterations; ++iterations) {
    for (Symbol i = 0; i < n; ++i) {
      double acc = x[i];
      for (Symbol j : transpose ? s.predecessors(i) : s.successors(i)) acc += x[j];
      y[i] = acc;
    }
    double lo = INFINITY, hi = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] / x[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      total += y[i];
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / total;
    if (hi - lo <= opt.tol) {
      lambda = 0.5 * (lo + hi) - 1.0;
      return x;
    }
  }
  throw NonConvergenceError("Perron iteration did not converge within " + std::to_string(opt.max_iterations) +
                            " iterations");
}

}  // namespace detail

inline PerronData perron(const VertexShift& shift, const PerronOptions& opt = {}) {
  if (!is_irreducible(shift)) throw ReducibleError();
  double lr = 0, ll = 0;
  std::size_t ir = 0, il = 0;
  PerronData d{0, detail::perron_vector(shift, false, opt, lr, ir), detail::perron_vector(shift, true, opt, ll, il), 0};
  d.lambda = lr;
  d.iterations = std::max(ir, il);
  const double dot = std::inner_product(d.left.begin(), d.left.end(), d.right.begin(), 0.0);
  for (double& u : d.left) u /= dot;
  return d;
}

inline double topological_entropy(const VertexShift& shift) { return std::log(perron(shift).lambda); }

// A stationary Markov chain on the edges of a vertex shift. Transition
// probabilities are stored aligned with the shift's edge order, so the
// support condition holds by construction.
class MarkovMeasure {
 public:
  static constexpr double tolerance = 1e-9;

  MarkovMeasure(VertexShift shift, std::vector<double> pi, std::vector<double> edge_probs)
      : shift_(std::move(shift)), pi_(std::move(pi)), p_(std::move(edge_probs)) {
    if (pi_.size() != shift_.size()) throw std::invalid_argument("stationary vector has wrong length");
    if (p_.size() != shift_.edge_count()) throw std::invalid_argument("one probability per edge required");
    double total = 0;
    for (double x : pi_) {
      if (!(x >= 0)) throw std::invalid_argument("stationary vector must be non-negative");
      total += x;
    }
    if (std::abs(total - 1) > tolerance) throw std::invalid_argument("stationary vector must sum to 1");
    std::vector<double> flow(shift_.size(), 0.0);
    for (Symbol i = 0; i < shift_.size(); ++i) {
      double row = 0;
      const auto succ = shift_.successors(i);
      for (std::size_t k = 0; k < succ.size(); ++k) {
        const double p = p_[shift_.edge_offset(i) + k];
        if (!(p >= 0)) throw std::invalid_argument("transition probabilities must be non-negative");
        row += p;
        flow[succ[k]] += pi_[i] * p;
      }
      if (std::abs(row - 1) > tolerance) {
        throw std::invalid_argument("transition row " + std::to_string(i) + " does not sum to 1");
      }
    }
    for (std::size_t j = 0; j < flow.size(); ++j) {
      if (std::abs(flow[j] - pi_[j]) > tolerance) {
        throw std::invalid_argument("stationary vector is not invariant under the transition matrix");
      }
    }
  }

  // Dense form: P is size x size and may only be positive on edges.
  static MarkovMeasure from_dense(const VertexShift& shift, std::vector<double> pi,
                                  const std::vector<std::vector<double>>& P) {
    if (P.size() != shift.size()) throw std::invalid_argument("transition matrix has wrong size");
    std::vector<double> probs(shift.edge_count());
    for (Symbol i = 0; i < shift.size(); ++i) {
      if (P[i].size() != shift.size()) throw std::invalid_argument("transition matrix has wrong size");
      for (Symbol j = 0; j < shift.size(); ++j) {
        const auto e = shift.edge_index(i, j);
        if (e) probs[*e] = P[i][j];
        else if (P[i][j] != 0) throw std::invalid_argument("transition probability on a forbidden edge");
      }
    }
    return MarkovMeasure(shift, std::move(pi), std::move(probs));
  }

  // i.i.d. measure on the full shift over p.size() symbols.
  static MarkovMeasure bernoulli(const std::vector<double>& p) {
    const auto shift = VertexShift::full(p.size());
    std::vector<double> probs;
    probs.reserve(p.size() * p.size());
    for (std::size_t i = 0; i < p.size(); ++i) probs.insert(probs.end(), p.begin(), p.end());
    return MarkovMeasure(shift, p, std::move(probs));
  }

  const VertexShift& shift() const noexcept { return shift_; }
  const std::vector<double>& pi() const noexcept { return pi_; }
  double pi(Symbol i) const { return pi_[i]; }
  const std::vector<double>& edge_probs() const noexcept { return p_; }

  double transition(Symbol i, Symbol j) const {
    const auto e = shift_.edge_index(i, j);
    return e ? p_[*e] : 0.0;
  }

  std::vector<std::vector<double>> dense() const {
    std::vector<std::vector<double>> P(shift_.size(), std::vector<double>(shift_.size(), 0.0));
    for (Symbol i = 0; i < shift_.size(); ++i) {
      const auto succ = shift_.successors(i);
      for (std::size_t k = 0; k < succ.size(); ++k) P[i][succ[k]] = p_[shift_.edge_offset(i) + k];
    }
    return P;
  }

 private:
  VertexShift shift_;
  std::vector<double> pi_;
  std::vector<double> p_;
};

// Stationary vector of an irreducible chain given by edge-aligned
// probabilities, by power iteration on the lazy chain (P + I) / 2.
inline std::vector<double> stationary_distribution(const VertexShift& shift, const std::vector<double>& edge_probs,
                                                   double tol = 1e-13, std::size_t max_iterations = 1'000'000) {
  const std::size_t n = shift.size();
  std::vector<double> x(n, 1.0 / static_cast<double>(n)), y(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) y[i] = 0.5 * x[i];
    for (Symbol i = 0; i < n; ++i) {
      const auto succ = shift.successors(i);
      for (std::size_t k = 0; k < succ.size(); ++k) y[succ[k]] += 0.5 * x[i] * edge_probs[shift.edge_offset(i) + k];
    }
    double diff = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i) total += y[i];
    for (std::size_t i = 0; i < n; ++i) {
      y[i] /= total;
      diff += std::abs(y[i] - x[i]);
    }
    x.swap(y);
    if (diff <= tol) return x;
  }
  throw NonConvergenceError("stationary distribution did not converge");
}

inline MarkovMeasure parry_measure(const VertexShift& shift) {
  const PerronData d = perron(shift);
  const auto& v = d.right;
  std::vector<double> pi(shift.size());
  double total = 0;
  for (std::size_t i = 0; i < pi.size(); ++i) total += pi[i] = d.left[i] * v[i];
  for (double& x : pi) x /= total;
  std::vector<double> probs(shift.edge_count());
  for (Symbol i = 0; i < shift.size(); ++i) {
    const auto succ = shift.successors(i);
    double row = 0;
    for (std::size_t k = 0; k < succ.size(); ++k) row += probs[shift.edge_offset(i) + k] = v[succ[k]] / (d.lambda * v[i]);
    // Remove the residual rounding so rows are stochastic to machine precision.
    for (std::size_t k = 0; k < succ.size(); ++k) probs[shift.edge_offset(i) + k] /= row;
  }
  return MarkovMeasure(shift, std::move(pi), std::move(probs));
}

// Entropy in nats.
inline double markov_entropy(const MarkovMeasure& m) {
  const auto& s = m.shift();
  double h = 0;
  for (Symbol i = 0; i < s.size(); ++i) {
    const auto out = s.successors(i).size();
    for (std::size_t k = 0; k < out; ++k) {
      const double p = m.edge_probs()[s.edge_offset(i) + k];
      if (p > 0) h -= m.pi(i) * p * std::log(p);
    }
  }
  return h;
}

inline double cylinder_prob(const MarkovMeasure& m, std::span<const Symbol> w) {
  if (w.empty()) throw std::invalid_argument("cylinder word must be nonempty");
  for (Symbol s : w) {
    if (s >= m.shift().size()) throw std::invalid_argument("cylinder symbol outside the alphabet");
  }
  double p = m.pi(w[0]);
  for (std::size_t i = 0; i + 1 < w.size() && p > 0; ++i) p *= m.transition(w[i], w[i + 1]);
  return p;
}

inline double cylinder_prob(const MarkovMeasure& m, const Word& w) { return cylinder_prob(m, w.span()); }

// A strictly positive function of the first `depth` symbols. Stored densely
// over alphabet^depth; words outside the ambient language carry no value.
class RoofFunction {
 public:
  RoofFunction(const VertexShift& ambient, std::size_t depth, const std::map<Word, double>& values)
      : RoofFunction(ambient.size(), depth, values, depth == 0 ? WordSet(0) : language(ambient, depth)) {}

  // Roof over the label alphabet of a presentation; every label word of
  // length `depth` needs a value.
  RoofFunction(const LabeledShift& ambient, std::size_t depth, const std::map<Word, double>& values)
      : RoofFunction(ambient.label_alphabet(), depth, values,
                     depth == 0 ? WordSet(0) : label_language(ambient, depth)) {}

  // `required` lists the words that must carry a value; other keys must
  // still be among them.
  RoofFunction(std::size_t alphabet, std::size_t depth, const std::map<Word, double>& values, const WordSet& required)
      : depth_(depth), alphabet_(alphabet) {
    if (depth_ == 0) throw std::invalid_argument("roof depth must be positive");
    allocate();
    for (const auto& [w, v] : values) {
      if (w.size() != depth_) throw std::invalid_argument("roof word '" + w.str() + "' has the wrong length");
      if (!required.contains(w.span())) throw std::invalid_argument("roof word '" + w.str() + "' is not admissible");
      if (!(v > 0) || !std::isfinite(v)) throw std::invalid_argument("roof values must be positive and finite");
      values_[index(w.span())] = v;
    }
    for (std::size_t i = 0; i < required.size(); ++i) {
      if (std::isnan(values_[index(required[i])])) {
        throw std::invalid_argument("roof has no value for word '" + required.word(i).str() + "'");
      }
    }
  }

  static RoofFunction constant(std::size_t alphabet, double value) {
    std::map<Word, double> values;
    for (Symbol a = 0; a < alphabet; ++a) values[Word{a}] = value;
    return RoofFunction(VertexShift::full(alphabet), 1, values);
  }

  std::size_t depth() const noexcept { return depth_; }
  std::size_t alphabet() const noexcept { return alphabet_; }

  // Value on the cylinder of the first depth() symbols of w.
  double operator()(std::span<const Symbol> w) const {
    if (w.size() < depth_) throw std::invalid_argument("word shorter than roof depth");
    const double v = values_[index(w.first(depth_))];
    if (std::isnan(v)) throw std::invalid_argument("roof is undefined on this cylinder");
    return v;
  }
  double operator()(const Word& w) const { return (*this)(w.span()); }

  // Dense table indexed by base-alphabet words of length depth() read as
  // numbers in base alphabet(); NaN where undefined.
  const std::vector<double>& table() const noexcept { return values_; }

  std::map<Word, double> values() const {
    std::map<Word, double> out;
    std::vector<Symbol> w(depth_);
    for (std::size_t code = 0; code < values_.size(); ++code) {
      if (std::isnan(values_[code])) continue;
      std::size_t c = code;
      for (std::size_t i = depth_; i-- > 0;) {
        w[i] = static_cast<Symbol>(c % alphabet_);
        c /= alphabet_;
      }
      out[Word(w)] = values_[code];
    }
    return out;
  }

 private:
  void allocate() {
    std::size_t cells = 1;
    for (std::size_t i = 0; i < depth_; ++i) {
      if (cells > default_enumeration_budget / alphabet_) {
        throw CapacityError("roof table exceeds budget", cells * alphabet_, default_enumeration_budget);
      }
      cells *= alphabet_;
    }
    values_.assign(cells, std::numeric_limits<double>::quiet_NaN());
  }

  std::size_t index(std::span<const Symbol> w) const {
    std::size_t code = 0;
    for (Symbol s : w) {
      if (s >= alphabet_) throw std::invalid_argument("roof argument outside the alphabet");
      code = code * alphabet_ + s;
    }
    return code;
  }

  std::size_t depth_;
  std::size_t alphabet_;
  std::vector<double> values_;
};

inline double roof_integral(const MarkovMeasure& m, const RoofFunction& rho) {
  if (rho.alphabet() != m.shift().size()) throw std::invalid_argument("roof and measure use different alphabets");
  const WordSet words = language(m.shift(), rho.depth());
  double total = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const double p = cylinder_prob(m, words[i]);
    if (p > 0) total += rho(words[i]) * p;
  }
  return total;
}

inline double abramov(double h_base, double roof_int) {
  if (!(roof_int > 0)) throw std::invalid_argument("roof integral must be positive");
  return h_base / roof_int;
}

}  // namespace flexsft
