#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "flexsft/error.hpp"
#include "flexsft/flex.hpp"
#include "flexsft/measure.hpp"
#include "flexsft/spectral.hpp"
#include "flexsft/symbolic.hpp"

namespace flexsft {

// Everything a run needs. The text form is sectioned key = value lines:
//
//   [shift]    alphabet = 3, then either `row = 011` lines or `forbidden = 11`
//   [roof]     depth = 1, then `<word> = <value>` lines or `constant = <v>`
//   [target]   c = <value> or fraction = <share of h*>
//   [schedule] stages, word_length, overlap_length, delta.<n>, kappa.<n>,
//              word_length.<n>, overlap_length.<n>
//   [run]      metric_depth, seed, samples, block_depth, out, keep_going
//
// Lines starting with '#' or ';' are comments.
struct RunConfig {
  std::size_t alphabet = 0;
  std::vector<std::string> rows;
  std::vector<std::string> forbidden;

  std::size_t roof_depth = 1;
  std::optional<double> roof_constant;
  std::map<std::string, double> roof_values;

  std::optional<double> c;
  std::optional<double> fraction;

  std::size_t stages = 1;
  std::size_t word_length = 12;
  std::size_t overlap_length = 0;
  std::map<std::size_t, double> delta;
  std::map<std::size_t, double> kappa;
  std::map<std::size_t, std::size_t> stage_word_length;
  std::map<std::size_t, std::size_t> stage_overlap_length;

  std::size_t metric_depth = 0;  // 0 picks max(roof depth, 2)
  std::uint64_t seed = 1;
  std::size_t samples = 32;
  std::size_t block_depth = 2;
  std::string out = "out";
  bool keep_going = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct LineContext {
  const std::string& source;
  std::size_t line;
  std::string field;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(source, line, field, msg); }

  template <class T>
  T integer(std::string_view v) const {
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) fail("expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
  }

  double real(std::string_view v) const {
    double out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
      fail("expected a finite number, got '" + std::string(v) + "'");
    }
    return out;
  }

  bool boolean(std::string_view v) const {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail("expected true or false, got '" + std::string(v) + "'");
  }
};

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline RunConfig parse_config(std::string_view text, const std::string& source = "<config>") {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  bool alphabet_given = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    detail::LineContext ctx{source, line_no, {}};
    if (line.front() == '[') {
      if (line.back() != ']') ctx.fail("unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section != "shift" && section != "roof" && section != "target" && section != "schedule" && section != "run") {
        ctx.field = section;
        ctx.fail("unknown section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) ctx.fail("expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    ctx.field = section + "." + key;
    if (section.empty()) ctx.fail("key outside any section");
    if (key.empty()) ctx.fail("empty key");

    // Keys of the form name.<stage>.
    auto staged = [&](const std::string& name) -> std::optional<std::size_t> {
      if (key.rfind(name + ".", 0) != 0) return std::nullopt;
      const auto n = ctx.integer<std::size_t>(std::string_view(key).substr(name.size() + 1));
      if (n == 0) ctx.fail("stages are numbered from 1");
      return n;
    };

    if (section == "shift") {
      if (key == "alphabet") {
        cfg.alphabet = ctx.integer<std::size_t>(value);
        if (cfg.alphabet == 0) ctx.fail("alphabet must have a symbol");
        alphabet_given = true;
      } else if (key == "row") {
        for (char ch : value)
          if (ch != '0' && ch != '1') ctx.fail("matrix rows are strings of 0 and 1");
        if (value.empty()) ctx.fail("empty matrix row");
        cfg.rows.emplace_back(value);
      } else if (key == "forbidden") {
        try {
          if (Word::parse(value).empty()) ctx.fail("empty forbidden word");
        } catch (const std::invalid_argument& e) {
          ctx.fail(e.what());
        }
        cfg.forbidden.emplace_back(value);
      } else {
        ctx.fail("unknown key");
      }
    } else if (section == "roof") {
      if (key == "depth") {
        cfg.roof_depth = ctx.integer<std::size_t>(value);
        if (cfg.roof_depth == 0) ctx.fail("roof depth must be positive");
      } else if (key == "constant") {
        cfg.roof_constant = ctx.real(value);
        if (!(*cfg.roof_constant > 0)) ctx.fail("roof values must be positive");
      } else {
        try {
          Word::parse(key);
        } catch (const std::invalid_argument&) {
          ctx.fail("unknown key (roof lines are <word> = <value>)");
        }
        const double v = ctx.real(value);
        if (!(v > 0)) ctx.fail("roof values must be positive");
        if (!cfg.roof_values.emplace(key, v).second) ctx.fail("duplicate roof word");
      }
    } else if (section == "target") {
      if (key == "c") {
        cfg.c = ctx.real(value);
      } else if (key == "fraction") {
        cfg.fraction = ctx.real(value);
      } else {
        ctx.fail("unknown key");
      }
      if (cfg.c && cfg.fraction) ctx.fail("give either c or fraction, not both");
      if ((cfg.c && *cfg.c < 0) || (cfg.fraction && *cfg.fraction < 0)) ctx.fail("target must be non-negative");
    } else if (section == "schedule") {
      if (key == "stages") {
        cfg.stages = ctx.integer<std::size_t>(value);
      } else if (key == "word_length") {
        cfg.word_length = ctx.integer<std::size_t>(value);
        if (cfg.word_length == 0) ctx.fail("word length must be positive");
      } else if (key == "overlap_length") {
        cfg.overlap_length = ctx.integer<std::size_t>(value);
      } else if (auto n = staged("delta")) {
        cfg.delta[*n] = ctx.real(value);
      } else if (auto n = staged("kappa")) {
        cfg.kappa[*n] = ctx.real(value);
      } else if (auto n = staged("word_length")) {
        cfg.stage_word_length[*n] = ctx.integer<std::size_t>(value);
      } else if (auto n = staged("overlap_length")) {
        cfg.stage_overlap_length[*n] = ctx.integer<std::size_t>(value);
      } else {
        ctx.fail("unknown key");
      }
    } else {
      if (key == "metric_depth") {
        cfg.metric_depth = ctx.integer<std::size_t>(value);
      } else if (key == "seed") {
        cfg.seed = ctx.integer<std::uint64_t>(value);
      } else if (key == "samples") {
        cfg.samples = ctx.integer<std::size_t>(value);
      } else if (key == "block_depth") {
        cfg.block_depth = ctx.integer<std::size_t>(value);
        if (cfg.block_depth == 0) ctx.fail("block depth must be positive");
      } else if (key == "out") {
        if (value.empty()) ctx.fail("empty output directory");
        cfg.out = std::string(value);
      } else if (key == "keep_going") {
        cfg.keep_going = ctx.boolean(value);
      } else {
        ctx.fail("unknown key");
      }
    }
  }

  detail::LineContext end{source, line_no, "shift"};
  if (!cfg.rows.empty() && !cfg.forbidden.empty()) end.fail("give matrix rows or forbidden words, not both");
  if (!cfg.rows.empty()) {
    if (!alphabet_given) cfg.alphabet = cfg.rows.size();
    if (cfg.rows.size() != cfg.alphabet) end.fail("expected " + std::to_string(cfg.alphabet) + " matrix rows");
    for (const auto& r : cfg.rows)
      if (r.size() != cfg.alphabet) end.fail("matrix rows must have " + std::to_string(cfg.alphabet) + " entries");
  } else if (!alphabet_given) {
    end.fail("missing alphabet");
  }
  for (const auto& f : cfg.forbidden)
    for (Symbol s : Word::parse(f))
      if (s >= cfg.alphabet) end.fail("forbidden word '" + f + "' uses a symbol outside the alphabet");
  end.field = "roof";
  if (cfg.roof_constant && !cfg.roof_values.empty()) end.fail("give a constant or word values, not both");
  for (const auto& [w, _] : cfg.roof_values) {
    const Word word = Word::parse(w);
    if (word.size() != cfg.roof_depth) end.fail("roof word '" + w + "' does not have length " + std::to_string(cfg.roof_depth));
    for (Symbol s : word)
      if (s >= cfg.alphabet) end.fail("roof word '" + w + "' uses a symbol outside the alphabet");
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "", "cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline std::string serialize_config(const RunConfig& cfg) {
  std::string out = "[shift]\nalphabet = " + std::to_string(cfg.alphabet) + "\n";
  for (const auto& r : cfg.rows) out += "row = " + r + "\n";
  for (const auto& f : cfg.forbidden) out += "forbidden = " + f + "\n";
  out += "\n[roof]\ndepth = " + std::to_string(cfg.roof_depth) + "\n";
  if (cfg.roof_constant) out += "constant = " + detail::format_real(*cfg.roof_constant) + "\n";
  for (const auto& [w, v] : cfg.roof_values) out += w + " = " + detail::format_real(v) + "\n";
  out += "\n[target]\n";
  if (cfg.c) out += "c = " + detail::format_real(*cfg.c) + "\n";
  if (cfg.fraction) out += "fraction = " + detail::format_real(*cfg.fraction) + "\n";
  out += "\n[schedule]\nstages = " + std::to_string(cfg.stages) + "\n";
  out += "word_length = " + std::to_string(cfg.word_length) + "\n";
  out += "overlap_length = " + std::to_string(cfg.overlap_length) + "\n";
  for (const auto& [n, v] : cfg.delta) out += "delta." + std::to_string(n) + " = " + detail::format_real(v) + "\n";
  for (const auto& [n, v] : cfg.kappa) out += "kappa." + std::to_string(n) + " = " + detail::format_real(v) + "\n";
  for (const auto& [n, v] : cfg.stage_word_length) out += "word_length." + std::to_string(n) + " = " + std::to_string(v) + "\n";
  for (const auto& [n, v] : cfg.stage_overlap_length) {
    out += "overlap_length." + std::to_string(n) + " = " + std::to_string(v) + "\n";
  }
  out += "\n[run]\nmetric_depth = " + std::to_string(cfg.metric_depth) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "samples = " + std::to_string(cfg.samples) + "\n";
  out += "block_depth = " + std::to_string(cfg.block_depth) + "\n";
  out += "out = " + cfg.out + "\n";
  out += std::string("keep_going = ") + (cfg.keep_going ? "true" : "false") + "\n";
  return out;
}

// Vertex-shift presentation, labelled by the configured alphabet. Forbidden
// words of length L > 2 are recoded on blocks of length L - 1.
inline LabeledShift build_presentation(const RunConfig& cfg) {
  if (!cfg.rows.empty()) {
    std::vector<std::vector<int>> m;
    for (const auto& r : cfg.rows) {
      std::vector<int> row;
      for (char ch : r) row.push_back(ch - '0');
      m.push_back(std::move(row));
    }
    return LabeledShift::identity(VertexShift::from_matrix(m));
  }
  std::vector<Word> bad;
  std::size_t longest = 1;
  for (const auto& f : cfg.forbidden) {
    bad.push_back(Word::parse(f));
    longest = std::max(longest, bad.back().size());
  }
  auto clean = [&](std::span<const Symbol> w) {
    for (const Word& b : bad)
      for (std::size_t i = 0; i + b.size() <= w.size(); ++i)
        if (std::equal(b.begin(), b.end(), w.begin() + static_cast<std::ptrdiff_t>(i))) return false;
    return true;
  };
  const std::size_t m = std::max<std::size_t>(longest - 1, 1);
  const VertexShift full = VertexShift::full(cfg.alphabet);
  const LabeledShift blocks = higher_block(LabeledShift::identity(full), m);
  const WordSet words = language(full, m);
  std::vector<Symbol> keep;
  for (std::size_t i = 0; i < words.size(); ++i)
    if (clean(words[i])) keep.push_back(static_cast<Symbol>(i));
  if (keep.empty()) throw ReducibleError();
  // Drop block transitions whose (m+1)-word contains a forbidden word.
  std::vector<std::pair<Symbol, Symbol>> edges;
  std::vector<Symbol> joined(m + 1);
  for (std::size_t a = 0; a < keep.size(); ++a) {
    for (Symbol t : blocks.shift().successors(keep[a])) {
      const auto pos = std::lower_bound(keep.begin(), keep.end(), t);
      if (pos == keep.end() || *pos != t) continue;
      const auto u = words[keep[a]];
      std::copy(u.begin(), u.end(), joined.begin());
      joined[m] = words[t][m - 1];
      if (clean(joined)) edges.emplace_back(static_cast<Symbol>(a), static_cast<Symbol>(pos - keep.begin()));
    }
  }
  std::vector<Symbol> labels(keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a) labels[a] = words[keep[a]][0];
  return LabeledShift(VertexShift(keep.size(), std::move(edges)), std::move(labels), cfg.alphabet);
}

inline RoofFunction build_roof(const RunConfig& cfg, const LabeledShift& base) {
  if (cfg.roof_constant) return RoofFunction::constant(base.label_alphabet(), *cfg.roof_constant);
  if (cfg.roof_values.empty()) return RoofFunction::constant(base.label_alphabet(), 1.0);
  std::map<Word, double> values;
  for (const auto& [w, v] : cfg.roof_values) values[Word::parse(w)] = v;
  return RoofFunction(base, cfg.roof_depth, values);
}

inline Target build_target(const RunConfig& cfg) {
  const LabeledShift base = build_presentation(cfg);
  RoofFunction rho = build_roof(cfg, base);
  MarkovMeasure mu = parry_measure(base.shift());
  double c = 0;
  if (cfg.c) {
    c = *cfg.c;
  } else if (cfg.fraction) {
    c = *cfg.fraction * abramov(markov_entropy(mu), roof_integral(base, mu, rho));
  } else {
    throw ParseError("<config>", 0, "target", "missing target (c or fraction)");
  }
  return Target(c, std::move(rho), base, std::move(mu));
}

inline std::vector<ScheduleEntry> build_schedule(const RunConfig& cfg) {
  std::vector<ScheduleEntry> out(cfg.stages);
  for (std::size_t n = 1; n <= cfg.stages; ++n) {
    ScheduleEntry& e = out[n - 1];
    if (auto it = cfg.delta.find(n); it != cfg.delta.end()) e.delta = it->second;
    if (auto it = cfg.kappa.find(n); it != cfg.kappa.end()) e.kappa = it->second;
    const auto wl = cfg.stage_word_length.find(n);
    e.word_length = wl != cfg.stage_word_length.end() ? wl->second : cfg.word_length;
    const auto ol = cfg.stage_overlap_length.find(n);
    e.overlap_length = ol != cfg.stage_overlap_length.end() ? ol->second : cfg.overlap_length;
  }
  return out;
}

inline ConstructionOptions build_options(const RunConfig& cfg) {
  ConstructionOptions opt;
  opt.seed = cfg.seed;
  opt.samples = cfg.samples;
  opt.keep_going = cfg.keep_going;
  opt.metric_depth = cfg.metric_depth;
  opt.selection.block_depth = cfg.block_depth;
  opt.selection.max_block_depth = std::max<std::size_t>(cfg.block_depth, 3);
  return opt;
}

}  // namespace flexsft
