#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flexsft/error.hpp"

namespace flexsft {

using Symbol = std::uint32_t;

// Hard cap on the number of words any enumeration may produce.
inline constexpr std::size_t default_enumeration_budget = std::size_t{1} << 24;

struct Alphabet {
  explicit Alphabet(std::size_t n) : size(n) {
    if (n == 0) throw std::invalid_argument("alphabet must have at least one symbol");
  }

  bool contains(Symbol s) const noexcept { return s < size; }

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

  std::size_t size;
};

// Symbols 0..9 print as digits and 10..35 as lower-case letters; anything
// larger prints in brackets, e.g. "[41]".
inline std::string symbol_text(Symbol s) {
  if (s < 10) return std::string(1, static_cast<char>('0' + s));
  if (s < 36) return std::string(1, static_cast<char>('a' + (s - 10)));
  return "[" + std::to_string(s) + "]";
}

class Word {
 public:
  using value_type = Symbol;
  using const_iterator = std::vector<Symbol>::const_iterator;

  Word() = default;
  explicit Word(std::vector<Symbol> symbols) : symbols_(std::move(symbols)) {}
  explicit Word(std::span<const Symbol> symbols) : symbols_(symbols.begin(), symbols.end()) {}
  Word(std::initializer_list<Symbol> symbols) : symbols_(symbols) {}

  // Inverse of str(). Throws std::invalid_argument on malformed text.
  static Word parse(std::string_view text) {
    std::vector<Symbol> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (c >= '0' && c <= '9') {
        out.push_back(static_cast<Symbol>(c - '0'));
      } else if (c >= 'a' && c <= 'z') {
        out.push_back(static_cast<Symbol>(c - 'a' + 10));
      } else if (c == '[') {
        const auto close = text.find(']', i);
        if (close == std::string_view::npos || close == i + 1) {
          throw std::invalid_argument("unterminated bracket symbol in word '" + std::string(text) + "'");
        }
        std::uint64_t value = 0;
        for (std::size_t j = i + 1; j < close; ++j) {
          if (text[j] < '0' || text[j] > '9') {
            throw std::invalid_argument("bad bracket symbol in word '" + std::string(text) + "'");
          }
          value = value * 10 + static_cast<std::uint64_t>(text[j] - '0');
          if (value > std::numeric_limits<Symbol>::max()) {
            throw std::invalid_argument("symbol out of range in word '" + std::string(text) + "'");
          }
        }
        out.push_back(static_cast<Symbol>(value));
        i = close;
      } else {
        throw std::invalid_argument("unexpected character '" + std::string(1, c) + "' in word '" +
                                    std::string(text) + "'");
      }
    }
    return Word(std::move(out));
  }

  std::string str() const {
    std::string out;
    for (Symbol s : symbols_) out += symbol_text(s);
    return out;
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  bool empty() const noexcept { return symbols_.empty(); }
  Symbol operator[](std::size_t i) const { return symbols_[i]; }
  Symbol front() const { return symbols_.front(); }
  Symbol back() const { return symbols_.back(); }
  const_iterator begin() const noexcept { return symbols_.begin(); }
  const_iterator end() const noexcept { return symbols_.end(); }
  std::span<const Symbol> span() const noexcept { return symbols_; }
  const std::vector<Symbol>& symbols() const noexcept { return symbols_; }

  Word sub(std::size_t pos, std::size_t len) const {
    if (pos > size() || len > size() - pos) throw std::out_of_range("Word::sub");
    return Word(std::span<const Symbol>(symbols_).subspan(pos, len));
  }

  void push_back(Symbol s) { symbols_.push_back(s); }

  Word& operator+=(const Word& other) {
    symbols_.insert(symbols_.end(), other.symbols_.begin(), other.symbols_.end());
    return *this;
  }
  friend Word operator+(Word a, const Word& b) { return a += b; }

  friend bool operator==(const Word&, const Word&) = default;
  friend auto operator<=>(const Word&, const Word&) = default;

 private:
  std::vector<Symbol> symbols_;
};

inline bool lex_less(std::span<const Symbol> a, std::span<const Symbol> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// A 0/1 transition matrix stored as forward and reverse adjacency lists. The
// storage is shared, so copies are cheap; values never change after
// construction.
class VertexShift {
 public:
  VertexShift(std::size_t size, std::vector<std::pair<Symbol, Symbol>> edges) {
    if (size == 0) throw std::invalid_argument("vertex shift needs at least one state");
    for (const auto& [a, b] : edges) {
      if (a >= size || b >= size) throw std::invalid_argument("edge endpoint outside the alphabet");
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    auto g = std::make_shared<Graph>();
    g->n = size;
    g->out_offsets.assign(size + 1, 0);
    g->in_offsets.assign(size + 1, 0);
    for (const auto& [a, b] : edges) {
      ++g->out_offsets[a + 1];
      ++g->in_offsets[b + 1];
    }
    for (std::size_t i = 0; i < size; ++i) {
      g->out_offsets[i + 1] += g->out_offsets[i];
      g->in_offsets[i + 1] += g->in_offsets[i];
    }
    g->out.resize(edges.size());
    g->in.resize(edges.size());
    std::vector<std::size_t> in_fill(g->in_offsets.begin(), g->in_offsets.end() - 1);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      g->out[e] = edges[e].second;
      g->in[in_fill[edges[e].second]++] = edges[e].first;
    }
    g_ = std::move(g);
  }

  static VertexShift from_matrix(const std::vector<std::vector<int>>& rows) {
    const std::size_t n = rows.size();
    std::vector<std::pair<Symbol, Symbol>> edges;
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw std::invalid_argument("transition matrix must be square");
      for (std::size_t j = 0; j < n; ++j) {
        if (rows[i][j] != 0 && rows[i][j] != 1) {
          throw std::invalid_argument("transition matrix entries must be 0 or 1");
        }
        if (rows[i][j] == 1) edges.emplace_back(static_cast<Symbol>(i), static_cast<Symbol>(j));
      }
    }
    return VertexShift(n, std::move(edges));
  }

  static VertexShift full(std::size_t n) {
    std::vector<std::pair<Symbol, Symbol>> edges;
    edges.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) edges.emplace_back(static_cast<Symbol>(i), static_cast<Symbol>(j));
    return VertexShift(n, std::move(edges));
  }

  std::size_t size() const noexcept { return g_->n; }
  Alphabet alphabet() const { return Alphabet(g_->n); }
  std::size_t edge_count() const noexcept { return g_->out.size(); }

  std::span<const Symbol> successors(Symbol s) const {
    return std::span<const Symbol>(g_->out).subspan(g_->out_offsets[s],
                                                    g_->out_offsets[s + 1] - g_->out_offsets[s]);
  }
  std::span<const Symbol> predecessors(Symbol s) const {
    return std::span<const Symbol>(g_->in).subspan(g_->in_offsets[s],
                                                   g_->in_offsets[s + 1] - g_->in_offsets[s]);
  }

  // Position of the first out-edge of `s` in the flat edge order. Edge-aligned
  // data (transition probabilities) is indexed by edge_offset(s) + k.
  std::size_t edge_offset(Symbol s) const { return g_->out_offsets[s]; }

  std::optional<std::size_t> edge_index(Symbol from, Symbol to) const {
    if (from >= size() || to >= size()) return std::nullopt;
    const auto succ = successors(from);
    const auto it = std::lower_bound(succ.begin(), succ.end(), to);
    if (it == succ.end() || *it != to) return std::nullopt;
    return edge_offset(from) + static_cast<std::size_t>(it - succ.begin());
  }

  bool has_edge(Symbol from, Symbol to) const { return edge_index(from, to).has_value(); }

  std::vector<std::vector<int>> matrix() const {
    std::vector<std::vector<int>> m(size(), std::vector<int>(size(), 0));
    for (Symbol i = 0; i < size(); ++i)
      for (Symbol j : successors(i)) m[i][j] = 1;
    return m;
  }

  // Sub-shift on a sorted, duplicate-free subset of states; state k of the
  // result is states[k].
  VertexShift induced(std::span<const Symbol> states) const {
    if (states.empty()) throw std::invalid_argument("induced sub-shift needs a state");
    std::vector<std::int64_t> index(size(), -1);
    for (std::size_t k = 0; k < states.size(); ++k) {
      if (states[k] >= size() || index[states[k]] != -1 || (k > 0 && states[k] <= states[k - 1])) {
        throw std::invalid_argument("induced sub-shift states must be sorted, unique and in range");
      }
      index[states[k]] = static_cast<std::int64_t>(k);
    }
    std::vector<std::pair<Symbol, Symbol>> edges;
    for (std::size_t k = 0; k < states.size(); ++k) {
      for (Symbol t : successors(states[k])) {
        if (index[t] >= 0) edges.emplace_back(static_cast<Symbol>(k), static_cast<Symbol>(index[t]));
      }
    }
    return VertexShift(states.size(), std::move(edges));
  }

  friend bool operator==(const VertexShift& a, const VertexShift& b) {
    return a.g_ == b.g_ || (a.g_->n == b.g_->n && a.g_->out_offsets == b.g_->out_offsets &&
                            a.g_->out == b.g_->out);
  }

 private:
  struct Graph {
    std::size_t n = 0;
    std::vector<std::size_t> out_offsets;
    std::vector<Symbol> out;
    std::vector<std::size_t> in_offsets;
    std::vector<Symbol> in;
  };
  std::shared_ptr<const Graph> g_;
};

// A finite set of equal-length words, stored flat and kept in lexicographic
// order.
class WordSet {
 public:
  explicit WordSet(std::size_t length) : length_(length) {}

  // `flat` holds the words back to back; they must already be strictly
  // increasing.
  WordSet(std::size_t length, std::vector<Symbol> flat) : length_(length), data_(std::move(flat)) {
    if (length_ == 0 ? !data_.empty() : data_.size() % length_ != 0) {
      throw std::invalid_argument("flat word storage does not match the word length");
    }
    for (std::size_t i = 1; i < size(); ++i) {
      if (!lex_less((*this)[i - 1], (*this)[i])) {
        throw std::invalid_argument("word set must be sorted without duplicates");
      }
    }
  }

  // Validates the WordSet invariants against `shift`.
  static WordSet from_words(const VertexShift& shift, std::vector<Word> words);

  std::size_t size() const noexcept { return length_ == 0 ? 0 : data_.size() / length_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t length() const noexcept { return length_; }

  std::span<const Symbol> operator[](std::size_t i) const {
    return std::span<const Symbol>(data_).subspan(i * length_, length_);
  }
  Word word(std::size_t i) const { return Word((*this)[i]); }

  std::vector<Word> words() const {
    std::vector<Word> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(word(i));
    return out;
  }

  bool contains(std::span<const Symbol> w) const {
    if (w.size() != length_) return false;
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (lex_less((*this)[mid], w)) lo = mid + 1; else hi = mid;
    }
    return lo < size() && std::equal(w.begin(), w.end(), (*this)[lo].begin());
  }

  const std::vector<Symbol>& flat() const noexcept { return data_; }

  friend bool operator==(const WordSet&, const WordSet&) = default;

 private:
  std::size_t length_;
  std::vector<Symbol> data_;
};

inline bool is_admissible(const VertexShift& shift, std::span<const Symbol> w) {
  for (Symbol s : w) {
    if (s >= shift.size()) throw std::invalid_argument("word symbol outside the alphabet");
  }
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    if (!shift.has_edge(w[i], w[i + 1])) return false;
  }
  return true;
}

inline bool is_admissible(const VertexShift& shift, const Word& w) { return is_admissible(shift, w.span()); }

inline WordSet WordSet::from_words(const VertexShift& shift, std::vector<Word> words) {
  if (words.empty()) return WordSet(0);
  const std::size_t len = words.front().size();
  for (const Word& w : words) {
    if (w.size() != len) throw std::invalid_argument("word set members must share one length");
    if (!is_admissible(shift, w)) throw std::invalid_argument("word '" + w.str() + "' is not admissible");
  }
  std::sort(words.begin(), words.end());
  if (std::adjacent_find(words.begin(), words.end()) != words.end()) {
    throw std::invalid_argument("word set contains a duplicate word");
  }
  std::vector<Symbol> flat;
  flat.reserve(words.size() * len);
  for (const Word& w : words) flat.insert(flat.end(), w.begin(), w.end());
  return WordSet(len, std::move(flat));
}

// Number of admissible words of length n, saturating at `cap` + 1.
inline std::size_t count_words(const VertexShift& shift, std::size_t n, std::size_t cap) {
  if (n == 0) return 1;
  const std::size_t limit = cap + 1;
  std::vector<std::size_t> cur(shift.size(), 1), next(shift.size());
  for (std::size_t step = 1; step < n; ++step) {
    std::fill(next.begin(), next.end(), 0);
    for (Symbol s = 0; s < shift.size(); ++s) {
      if (cur[s] == 0) continue;
      for (Symbol t : shift.successors(s)) next[t] = std::min(limit, next[t] + cur[s]);
    }
    cur.swap(next);
  }
  std::size_t total = 0;
  for (std::size_t c : cur) total = std::min(limit, total + c);
  return total;
}

// All admissible words of length n in lexicographic order.
inline WordSet language(const VertexShift& shift, std::size_t n,
                        std::size_t budget = default_enumeration_budget) {
  if (n == 0) throw std::invalid_argument("language length must be positive");
  const std::size_t count = count_words(shift, n, budget);
  if (count > budget) throw CapacityError("language enumeration exceeds budget", count, budget);

  std::vector<Symbol> flat;
  flat.reserve(count * n);
  std::vector<Symbol> word(n);
  std::vector<std::size_t> cursor(n, 0);  // next successor to try at each depth
  for (Symbol start = 0; start < shift.size(); ++start) {
    word[0] = start;
    if (n == 1) {
      flat.push_back(start);
      continue;
    }
    std::size_t depth = 1;
    cursor[1] = 0;
    while (depth > 0) {
      const auto succ = shift.successors(word[depth - 1]);
      if (cursor[depth] == succ.size()) {
        --depth;
        continue;
      }
      word[depth] = succ[cursor[depth]++];
      if (depth + 1 == n) {
        flat.insert(flat.end(), word.begin(), word.end());
      } else {
        ++depth;
        cursor[depth] = 0;
      }
    }
  }
  return WordSet(n, std::move(flat));
}

namespace detail {

inline std::vector<char> reach(const VertexShift& shift, Symbol start, bool forward) {
  std::vector<char> seen(shift.size(), 0);
  std::vector<Symbol> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const Symbol s = stack.back();
    stack.pop_back();
    for (Symbol t : forward ? shift.successors(s) : shift.predecessors(s)) {
      if (!seen[t]) {
        seen[t] = 1;
        stack.push_back(t);
      }
    }
  }
  return seen;
}

}  // namespace detail

// Strongly connected with at least one edge.
inline bool is_irreducible(const VertexShift& shift) {
  if (shift.edge_count() == 0) return false;
  const auto fwd = detail::reach(shift, 0, true);
  const auto bwd = detail::reach(shift, 0, false);
  return std::all_of(fwd.begin(), fwd.end(), [](char c) { return c != 0; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](char c) { return c != 0; });
}

// Strongly connected components (Tarjan, iterative). Returns the component id
// of every state; ids are dense from 0.
inline std::vector<std::size_t> strong_components(const VertexShift& shift, std::size_t* count = nullptr) {
  const std::size_t n = shift.size();
  constexpr std::size_t unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, unset), low(n, 0), comp(n, unset);
  std::vector<char> on_stack(n, 0);
  std::vector<Symbol> stack;
  std::vector<std::pair<Symbol, std::size_t>> call;
  std::size_t next_index = 0, components = 0;
  for (Symbol root = 0; root < n; ++root) {
    if (index[root] != unset) continue;
    call.emplace_back(root, 0);
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [v, pos] = call.back();
      const auto succ = shift.successors(v);
      if (pos < succ.size()) {
        const Symbol w = succ[pos++];
        if (index[w] == unset) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        Symbol w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = components;
        } while (w != v);
        ++components;
      }
      const Symbol finished = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[finished]);
    }
  }
  if (count) *count = components;
  return comp;
}

// Shortest admissible word of length >= 2 from `from` to `to` (breadth-first
// search). Its length minus one is the connection time.
inline Word connecting_word(const VertexShift& shift, Symbol from, Symbol to) {
  if (from >= shift.size() || to >= shift.size()) throw std::invalid_argument("state outside the alphabet");
  constexpr Symbol none = std::numeric_limits<Symbol>::max();
  std::vector<Symbol> parent(shift.size(), none);
  std::vector<char> seen(shift.size(), 0);
  std::vector<Symbol> frontier;
  for (Symbol t : shift.successors(from)) {
    if (!seen[t]) {
      seen[t] = 1;
      parent[t] = from;
      frontier.push_back(t);
    }
  }
  for (std::size_t head = 0; head < frontier.size() && !seen[to]; ++head) {
    const Symbol s = frontier[head];
    for (Symbol t : shift.successors(s)) {
      if (!seen[t]) {
        seen[t] = 1;
        parent[t] = s;
        frontier.push_back(t);
      }
    }
  }
  if (!seen[to]) throw UnreachableStateError(from, to);
  std::vector<Symbol> path{to};
  // Only first-layer states have `from` as parent, so the walk stops there
  // even when from == to.
  for (Symbol cur = to;;) {
    const Symbol p = parent[cur];
    path.push_back(p);
    if (p == from) break;
    cur = p;
  }
  std::reverse(path.begin(), path.end());
  return Word(std::move(path));
}

// Breadth-first connection times (edges) from `from` to every state; states
// that cannot be reached after at least one step get nullopt.
inline std::vector<std::optional<std::size_t>> connection_times(const VertexShift& shift, Symbol from,
                                                                bool forward = true) {
  std::vector<std::optional<std::size_t>> dist(shift.size());
  std::vector<Symbol> frontier;
  auto step = [&](Symbol s) { return forward ? shift.successors(s) : shift.predecessors(s); };
  for (Symbol t : step(from)) {
    if (!dist[t]) {
      dist[t] = 1;
      frontier.push_back(t);
    }
  }
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const Symbol s = frontier[head];
    for (Symbol t : step(s)) {
      if (!dist[t]) {
        dist[t] = *dist[s] + 1;
        frontier.push_back(t);
      }
    }
  }
  return dist;
}

// Higher-block recoding. State i of the result is word i of language(shift, m);
// u -> v iff u and v overlap in m - 1 symbols.
inline VertexShift higher_block(const VertexShift& shift, std::size_t m,
                                std::size_t budget = default_enumeration_budget) {
  if (m == 0) throw std::invalid_argument("block length must be positive");
  if (m == 1) return shift;
  const WordSet blocks = language(shift, m, budget);
  std::vector<std::pair<Symbol, Symbol>> edges;
  std::vector<Symbol> probe(m);
  for (std::size_t u = 0; u < blocks.size(); ++u) {
    const auto block = blocks[u];
    std::copy(block.begin() + 1, block.end(), probe.begin());
    // Successor blocks share the (m-1)-prefix `probe[0..m-2]`; they are
    // contiguous in lexicographic order.
    for (Symbol a : shift.successors(block.back())) {
      probe[m - 1] = a;
      std::size_t lo = 0, hi = blocks.size();
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (lex_less(blocks[mid], probe)) lo = mid + 1; else hi = mid;
      }
      edges.emplace_back(static_cast<Symbol>(u), static_cast<Symbol>(lo));
    }
  }
  return VertexShift(blocks.size(), std::move(edges));
}

// A vertex shift whose states carry labels in a (usually smaller) alphabet.
// Label sequences of paths form the presented subshift. Every stage of the
// construction is one of these, labelled in the base alphabet.
class LabeledShift {
 public:
  LabeledShift(VertexShift shift, std::vector<Symbol> labels, std::size_t label_alphabet)
      : shift_(std::move(shift)), labels_(std::move(labels)), label_alphabet_(label_alphabet) {
    if (labels_.size() != shift_.size()) throw std::invalid_argument("one label per state required");
    if (label_alphabet_ == 0) throw std::invalid_argument("label alphabet must be nonempty");
    for (Symbol l : labels_) {
      if (l >= label_alphabet_) throw std::invalid_argument("label outside the label alphabet");
    }
  }

  static LabeledShift identity(const VertexShift& shift) {
    std::vector<Symbol> labels(shift.size());
    for (Symbol s = 0; s < shift.size(); ++s) labels[s] = s;
    return LabeledShift(shift, std::move(labels), shift.size());
  }

  const VertexShift& shift() const noexcept { return shift_; }
  const std::vector<Symbol>& labels() const noexcept { return labels_; }
  Symbol label(Symbol state) const { return labels_[state]; }
  std::size_t label_alphabet() const noexcept { return label_alphabet_; }

  Word label_word(std::span<const Symbol> path) const {
    std::vector<Symbol> out(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) out[i] = labels_[path[i]];
    return Word(std::move(out));
  }

  // Restriction to a sorted subset of states, keeping labels.
  LabeledShift induced(std::span<const Symbol> states) const {
    std::vector<Symbol> labels(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) labels[k] = labels_[states[k]];
    return LabeledShift(shift_.induced(states), std::move(labels), label_alphabet_);
  }

  // Relabel through a map from this shift's labels into another alphabet.
  LabeledShift relabel(std::span<const Symbol> label_map, std::size_t alphabet) const {
    std::vector<Symbol> labels(labels_.size());
    for (std::size_t s = 0; s < labels_.size(); ++s) labels[s] = label_map[labels_[s]];
    return LabeledShift(shift_, std::move(labels), alphabet);
  }

 private:
  VertexShift shift_;
  std::vector<Symbol> labels_;
  std::size_t label_alphabet_;
};

// Higher-block recoding of a presentation; each block state carries the
// label of its first state.
inline LabeledShift higher_block(const LabeledShift& p, std::size_t m,
                                 std::size_t budget = default_enumeration_budget) {
  if (m == 1) return p;
  const WordSet blocks = language(p.shift(), m, budget);
  std::vector<Symbol> labels(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) labels[i] = p.label(blocks[i][0]);
  return LabeledShift(higher_block(p.shift(), m, budget), std::move(labels), p.label_alphabet());
}

// Set of states reachable by reading one more label `a` from `frontier`
// (or the states labelled `a` when `frontier` is null).
inline std::vector<Symbol> label_step(const LabeledShift& p, const std::vector<Symbol>* frontier, Symbol a) {
  std::vector<Symbol> out;
  if (!frontier) {
    for (Symbol s = 0; s < p.shift().size(); ++s)
      if (p.label(s) == a) out.push_back(s);
    return out;
  }
  std::vector<char> mark(p.shift().size(), 0);
  for (Symbol s : *frontier) {
    for (Symbol t : p.shift().successors(s)) {
      if (!mark[t] && p.label(t) == a) {
        mark[t] = 1;
        out.push_back(t);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// The distinct label words of length n carried by paths, in lexicographic
// order.
inline WordSet label_language(const LabeledShift& p, std::size_t n,
                              std::size_t budget = default_enumeration_budget) {
  if (n == 0) throw std::invalid_argument("language length must be positive");
  std::vector<Symbol> flat;
  std::vector<Symbol> word(n);
  std::size_t produced = 0;
  // Depth-first over label prefixes; each level keeps the frontier of states
  // that can end the prefix.
  std::vector<std::vector<Symbol>> frontiers(n);
  std::vector<Symbol> next_symbol(n, 0);
  const auto q = static_cast<Symbol>(p.label_alphabet());
  std::size_t depth = 0;
  next_symbol[0] = 0;
  while (true) {
    if (next_symbol[depth] == q) {
      if (depth == 0) break;
      --depth;
      continue;
    }
    const Symbol a = next_symbol[depth]++;
    auto f = label_step(p, depth == 0 ? nullptr : &frontiers[depth - 1], a);
    if (f.empty()) continue;
    word[depth] = a;
    if (depth + 1 == n) {
      if (++produced > budget) throw CapacityError("label language enumeration exceeds budget", produced, budget);
      flat.insert(flat.end(), word.begin(), word.end());
      continue;
    }
    frontiers[depth] = std::move(f);
    ++depth;
    next_symbol[depth] = 0;
  }
  return WordSet(n, std::move(flat));
}

}  // namespace flexsft
