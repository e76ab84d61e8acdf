#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flexsft/error.hpp"
#include "flexsft/symbolic.hpp"

namespace flexsft {

class Code {
 public:
  explicit Code(std::vector<Word> words) : words_(std::move(words)) {
    if (words_.empty()) throw std::invalid_argument("code must contain a word");
    for (const Word& w : words_) {
      if (w.empty()) throw std::invalid_argument("code words must be nonempty");
    }
    std::sort(words_.begin(), words_.end());
    const auto dup = std::adjacent_find(words_.begin(), words_.end());
    if (dup != words_.end()) throw std::invalid_argument("duplicate code word '" + dup->str() + "'");
    const std::size_t k = words_.front().size();
    if (std::all_of(words_.begin(), words_.end(), [k](const Word& w) { return w.size() == k; })) uniform_ = k;
  }

  const std::vector<Word>& words() const noexcept { return words_; }
  std::size_t size() const noexcept { return words_.size(); }
  std::optional<std::size_t> uniform_length() const noexcept { return uniform_; }
  bool contains(const Word& w) const { return std::binary_search(words_.begin(), words_.end(), w); }

  Symbol max_symbol() const {
    Symbol m = 0;
    for (const Word& w : words_)
      for (Symbol s : w) m = std::max(m, s);
    return m;
  }

 private:
  std::vector<Word> words_;
  std::optional<std::size_t> uniform_;
};

// Two different factorizations of one concatenation.
struct Ambiguity {
  Word text;
  std::vector<Word> first;
  std::vector<Word> second;

  // "010 = 0·10 = 01·0"
  std::string str() const {
    auto join = [](const std::vector<Word>& parts) {
      std::string out;
      for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "·" : "") + parts[i].str();
      return out;
    };
    return text.str() + " = " + join(first) + " = " + join(second);
  }
};

// Sardinas-Patterson as a breadth-first search over dangling suffixes. Each
// search node carries the two partial factorizations, `ahead` spelling
// `behind` followed by the dangling suffix, so a hit yields a witness
// directly.
inline std::optional<Ambiguity> find_ambiguity(const Code& code) {
  const auto& words = code.words();
  struct Node {
    Word suffix;
    std::vector<Word> ahead;
    std::vector<Word> behind;
  };
  std::deque<Node> queue;
  std::set<Word> seen;

  auto push = [&](Word suffix, std::vector<Word> ahead, std::vector<Word> behind) {
    if (seen.insert(suffix).second) queue.push_back(Node{std::move(suffix), std::move(ahead), std::move(behind)});
  };
  // Proper prefixes of `s` that are code words.
  auto codeword_prefixes = [&](const Word& s) {
    std::vector<Word> out;
    for (std::size_t len = 1; len < s.size(); ++len) {
      Word p = s.sub(0, len);
      if (code.contains(p)) out.push_back(std::move(p));
    }
    return out;
  };
  // Code words that have `s` as a proper prefix; they are contiguous in
  // sorted order.
  auto extensions = [&](const Word& s) {
    std::vector<const Word*> out;
    for (auto it = std::upper_bound(words.begin(), words.end(), s); it != words.end(); ++it) {
      if (it->size() <= s.size() || !std::equal(s.begin(), s.end(), it->begin())) break;
      out.push_back(&*it);
    }
    return out;
  };

  for (const Word& b : words)
    for (Word& a : codeword_prefixes(b)) push(b.sub(a.size(), b.size() - a.size()), {b}, {a});

  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();
    if (code.contains(node.suffix)) {
      auto behind = node.behind;
      behind.push_back(node.suffix);
      Word text;
      for (const Word& w : node.ahead) text += w;
      auto first = node.ahead, second = behind;
      if (second.front() < first.front()) std::swap(first, second);
      return Ambiguity{std::move(text), std::move(first), std::move(second)};
    }
    for (Word& c : codeword_prefixes(node.suffix)) {
      auto behind = node.behind;
      behind.push_back(c);
      push(node.suffix.sub(c.size(), node.suffix.size() - c.size()), node.ahead, std::move(behind));
    }
    for (const Word* c : extensions(node.suffix)) {
      auto behind = node.behind;
      behind.push_back(*c);
      push(c->sub(node.suffix.size(), c->size() - node.suffix.size()), std::move(behind), node.ahead);
    }
  }
  return std::nullopt;
}

inline bool is_uniquely_decipherable(const Code& code) { return !find_ambiguity(code).has_value(); }

// For a uniform code of length k: are there two parsings of one bi-infinite
// concatenation at different phases? A phase-r double parsing is a
// bi-infinite walk that alternates codeword splits w = s.t with |s| = r and
// |s| = k - r; it exists iff the split graph has a cycle.
inline bool has_unique_phase(const Code& code) {
  const auto k = code.uniform_length();
  if (!k) throw NonUniformLengthError();
  for (std::size_t r = 1; r < *k; ++r) {
    std::map<Word, std::vector<Word>> graph;
    for (const Word& w : code.words()) {
      graph[w.sub(0, r)].push_back(w.sub(r, *k - r));
      graph[w.sub(0, *k - r)].push_back(w.sub(*k - r, r));
    }
    // Iterative three-colour DFS.
    std::map<Word, int> colour;
    for (const auto& [root, _] : graph) {
      if (colour[root]) continue;
      std::vector<std::pair<Word, std::size_t>> stack{{root, 0}};
      colour[root] = 1;
      while (!stack.empty()) {
        auto& [v, i] = stack.back();
        const auto it = graph.find(v);
        if (it == graph.end() || i == it->second.size()) {
          colour[v] = 2;
          stack.pop_back();
          continue;
        }
        const Word next = it->second[i++];
        const int c = colour[next];
        if (c == 1) return false;
        if (c == 0) {
          colour[next] = 1;
          stack.emplace_back(next, 0);
        }
      }
    }
  }
  return true;
}

struct RenewalShift {
  LabeledShift presentation;  // state alpha * k + p carries symbol p of word alpha
  std::size_t k;
  std::size_t words;
};

// Positional graph of a uniform uniquely decipherable code: walk through a
// word position by position, then jump to the start of any word.
inline RenewalShift renewal_to_sft(const Code& code, std::size_t label_alphabet = 0) {
  const auto k = code.uniform_length();
  if (!k) throw NonUniformLengthError();
  if (auto amb = find_ambiguity(code)) throw NotUniquelyDecipherableError("code is not uniquely decipherable: " + amb->str());
  if (label_alphabet == 0) label_alphabet = code.max_symbol() + 1;
  const std::size_t n = code.size();
  std::vector<std::pair<Symbol, Symbol>> edges;
  edges.reserve(n * (*k - 1) + n * n);
  std::vector<Symbol> labels(n * *k);
  for (std::size_t a = 0; a < n; ++a) {
    const Word& w = code.words()[a];
    for (std::size_t p = 0; p < *k; ++p) {
      const auto state = static_cast<Symbol>(a * *k + p);
      labels[state] = w[p];
      if (p + 1 < *k) {
        edges.emplace_back(state, state + 1);
      } else {
        for (std::size_t b = 0; b < n; ++b) edges.emplace_back(state, static_cast<Symbol>(b * *k));
      }
    }
  }
  return RenewalShift{LabeledShift(VertexShift(n * *k, std::move(edges)), std::move(labels), label_alphabet), *k, n};
}

// failure[i] = length of the longest proper border of w[0..i].
inline std::vector<std::size_t> failure_function(std::span<const Symbol> w) {
  std::vector<std::size_t> f(w.size(), 0);
  for (std::size_t i = 1, b = 0; i < w.size(); ++i) {
    while (b > 0 && w[i] != w[b]) b = f[b - 1];
    if (w[i] == w[b]) ++b;
    f[i] = b;
  }
  return f;
}

inline std::size_t max_self_overlap(std::span<const Symbol> w) {
  if (w.empty()) throw std::invalid_argument("self-overlap of the empty word");
  return failure_function(w).back();
}

inline std::size_t max_self_overlap(const Word& w) { return max_self_overlap(w.span()); }

// Lexicographically first path of length l whose label word has maximal
// self-overlap below l/4. Paths are explored depth first in state order, so
// the first hit is the lexicographic minimum over state paths.
inline Word find_low_overlap_word(const LabeledShift& p, std::size_t l,
                                  std::size_t budget = default_enumeration_budget) {
  if (l == 0) throw std::invalid_argument("word length must be positive");
  const auto& s = p.shift();
  std::vector<Symbol> path(l), labels(l);
  std::vector<std::size_t> cursor(l, 0);
  std::size_t visited = 0;
  for (Symbol start = 0; start < s.size(); ++start) {
    path[0] = start;
    labels[0] = p.label(start);
    std::size_t depth = 1;
    if (l > 1) cursor[1] = 0;
    while (true) {
      if (depth == l) {
        if (4 * max_self_overlap(std::span<const Symbol>(labels)) < l) return Word(path);
        --depth;
        if (depth == 0) break;
        continue;
      }
      const auto succ = s.successors(path[depth - 1]);
      if (cursor[depth] == succ.size()) {
        --depth;
        if (depth == 0) break;
        continue;
      }
      if (++visited > budget) throw CapacityError("low-overlap word search exceeds budget", visited, budget);
      path[depth] = succ[cursor[depth]++];
      labels[depth] = p.label(path[depth]);
      ++depth;
      if (depth < l) cursor[depth] = 0;
    }
  }
  throw NotFoundError("no admissible word of length " + std::to_string(l) + " has self-overlap below " +
                      std::to_string(l) + "/4");
}

inline Word find_low_overlap_word(const VertexShift& shift, std::size_t l,
                                  std::size_t budget = default_enumeration_budget) {
  return find_low_overlap_word(LabeledShift::identity(shift), l, budget);
}

}  // namespace flexsft
