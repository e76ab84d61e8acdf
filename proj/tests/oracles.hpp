#pragma once

// Brute-force reference implementations used only by the tests. Each one is
// deliberately naive and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<int>>;
using Seq = std::vector<std::uint32_t>;

inline Matrix golden_mean() { return {{1, 1}, {1, 0}}; }
inline Matrix full(int n) { return Matrix(n, std::vector<int>(n, 1)); }

// Every sequence in q^n, filtered by the matrix, in lexicographic order.
inline std::vector<Seq> all_admissible(const Matrix& a, int n) {
  const int q = static_cast<int>(a.size());
  std::vector<Seq> out;
  std::uint64_t total = 1;
  for (int i = 0; i < n; ++i) total *= q;
  for (std::uint64_t code = 0; code < total; ++code) {
    Seq w(n);
    std::uint64_t c = code;
    for (int i = n - 1; i >= 0; --i) {
      w[i] = static_cast<std::uint32_t>(c % q);
      c /= q;
    }
    bool ok = true;
    for (int i = 0; i + 1 < n && ok; ++i) ok = a[w[i]][w[i + 1]] == 1;
    if (ok) out.push_back(w);
  }
  return out;
}

// Transitive closure by Floyd–Warshall on paths of length >= 1.
inline Matrix closure(const Matrix& a) {
  const std::size_t n = a.size();
  Matrix r = a;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = 1;
  return r;
}

inline bool irreducible(const Matrix& a) {
  const Matrix r = closure(a);
  for (const auto& row : r)
    for (int x : row)
      if (!x) return false;
  return true;
}

// Shortest path length (edges, >= 1) from i to j, or -1.
inline int distance(const Matrix& a, int from, int to) {
  const int n = static_cast<int>(a.size());
  std::vector<int> d(n, -1);
  std::vector<int> q;
  for (int j = 0; j < n; ++j)
    if (a[from][j]) {
      d[j] = 1;
      q.push_back(j);
    }
  for (std::size_t h = 0; h < q.size(); ++h)
    for (int j = 0; j < n; ++j)
      if (a[q[h]][j] && d[j] < 0) {
        d[j] = d[q[h]] + 1;
        q.push_back(j);
      }
  return d[to];
}

inline std::vector<Matrix> random_irreducible(std::uint64_t seed, int count, int max_states, double density = 0.5) {
  std::mt19937_64 rng(seed);
  std::vector<Matrix> out;
  while (static_cast<int>(out.size()) < count) {
    const int n = 1 + static_cast<int>(rng() % max_states);
    Matrix a(n, std::vector<int>(n, 0));
    for (auto& row : a)
      for (int& x : row) x = std::uniform_real_distribution<double>(0, 1)(rng) < density;
    if (irreducible(a)) out.push_back(a);
  }
  return out;
}

// Average log growth factor of normalized word counts; tends to log lambda.
inline double growth_rate(const Matrix& a, int n) {
  const std::size_t q = a.size();
  std::vector<long double> c(q, 1), next(q);
  long double log_sum = 0;
  for (int step = 1; step < n; ++step) {
    std::fill(next.begin(), next.end(), 0.0L);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < q; ++j)
        if (a[i][j]) next[j] += c[i];
    long double total = 0;
    for (auto x : next) total += x;
    for (auto& x : next) x /= total;
    c = next;
    if (step > n / 2) log_sum += std::log(total);
  }
  return static_cast<double>(log_sum / (n - 1 - n / 2));
}

// Count factorizations of `s` into words of `code` by plain recursion.
inline long factorizations(const std::string& s, const std::vector<std::string>& code, std::size_t pos = 0) {
  if (pos == s.size()) return 1;
  long total = 0;
  for (const auto& w : code)
    if (s.compare(pos, w.size(), w) == 0 && pos + w.size() <= s.size()) total += factorizations(s, code, pos + w.size());
  return total;
}

// A code is uniquely decipherable iff no string has two factorizations.
// Walks every string of length <= bound over the alphabet, keeping the
// factorization count of each prefix.
inline bool ud_by_search(const std::vector<std::string>& code, std::size_t bound, std::size_t alphabet = 2) {
  for (std::size_t i = 0; i < code.size(); ++i)
    for (std::size_t j = i + 1; j < code.size(); ++j)
      if (code[i] == code[j]) return false;
  std::string s;
  std::vector<long> f{1};
  std::function<bool()> dfs = [&]() -> bool {
    if (s.size() == bound) return true;
    for (std::size_t a = 0; a < alphabet; ++a) {
      s.push_back(static_cast<char>('0' + a));
      long count = 0;
      for (const auto& w : code)
        if (w.size() <= s.size() && s.compare(s.size() - w.size(), w.size(), w) == 0) count += f[s.size() - w.size()];
      f.push_back(count);
      const bool ok = count <= 1 && dfs();
      f.pop_back();
      s.pop_back();
      if (!ok) return false;
    }
    return true;
  };
  return dfs();
}

// Length of the longest proper border by direct comparison.
inline std::size_t border(const std::string& s) {
  for (std::size_t b = s.empty() ? 0 : s.size() - 1; b > 0; --b)
    if (s.compare(0, b, s, s.size() - b, b) == 0) return b;
  return 0;
}

// Label words of length n over all state sequences of a labelled graph.
inline std::set<Seq> label_words(const Matrix& a, const Seq& labels, int n) {
  std::set<Seq> out;
  for (const Seq& path : all_admissible(a, n)) {
    Seq w(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) w[i] = labels[path[i]];
    out.insert(w);
  }
  return out;
}

inline bool contains_factor(const Seq& w, const Seq& v) {
  if (v.size() > w.size()) return false;
  for (std::size_t i = 0; i + v.size() <= w.size(); ++i)
    if (std::equal(v.begin(), v.end(), w.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  return false;
}

}  // namespace oracle
