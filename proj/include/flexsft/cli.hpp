#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flexsft/config.hpp"
#include "flexsft/error.hpp"
#include "flexsft/flex.hpp"
#include "flexsft/renewal.hpp"
#include "flexsft/spectral.hpp"

namespace flexsft {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int infeasible = 2;
inline constexpr int stage_failure = 3;
inline constexpr int capacity = 4;
}  // namespace exit_code

namespace cli_detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string csv_num(double v) { return std::isnan(v) ? "" : fmt("%.12g", v); }
inline std::string table_num(double v) { return std::isnan(v) ? "-" : fmt("%.6g", v); }

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

// Prints the diagnostic for the active exception and returns its exit code.
inline int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const InfeasibleTargetError& e) {
    err << "infeasible-target: " << e.what() << "\n";
    return exit_code::infeasible;
  } catch (const CapacityError& e) {
    err << "capacity exceeded: " << e.what() << " (requested " << e.requested() << ", budget " << e.budget()
        << ")\n";
    return exit_code::capacity;
  } catch (const ReducibleError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::stage_failure;
  }
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace cli_detail

inline const char* stages_csv_header =
    "stage,k,gamma_size,h_top,roof_integral,normalized_entropy,bracket_lower,bracket_upper,distance_to_previous,"
    "ud_pass,sync_depth,pass";

inline std::string stages_csv(const Tower& tower, const Target& t) {
  using cli_detail::csv_num;
  std::string out = std::string(stages_csv_header) + "\n";
  const Stage& base = tower.stages.front();
  const double roof0 = roof_integral(base.presentation, base.measure, t.rho);
  out += "0,,," + csv_num(markov_entropy(base.measure)) + "," + csv_num(roof0) + "," +
         csv_num(normalized_entropy(base, t.rho)) + ",,,,,1,\n";
  for (const StageReport& r : tower.reports) {
    out += std::to_string(r.stage) + ",";
    out += (r.k ? std::to_string(*r.k) : "") + ",";
    out += (r.gamma_size ? std::to_string(*r.gamma_size) : "") + ",";
    out += csv_num(r.h_top) + "," + csv_num(r.roof_integral) + "," + csv_num(r.normalized_entropy) + ",";
    out += csv_num(r.bracket_lower) + "," + csv_num(r.bracket_upper) + "," + csv_num(r.distance_to_previous) + ",";
    out += (r.ud ? (*r.ud ? "pass" : "fail") : "") + std::string(",");
    out += (r.sync_depth ? std::to_string(*r.sync_depth) : "") + ",";
    out += std::string(r.pass() ? "pass" : "fail") + "\n";
  }
  return out;
}

inline std::string stage_report_text(const StageReport& r, const Stage* stage, const StageParams* p) {
  using cli_detail::pad;
  using cli_detail::table_num;
  std::string out = "stage " + std::to_string(r.stage) + "\n";
  if (p) {
    out += "params delta=" + table_num(p->delta) + " kappa=" + table_num(p->kappa) +
           " word_length=" + std::to_string(p->word_length) + " metric_depth=" + std::to_string(p->metric.max_depth) +
           "\n";
  }
  if (stage && stage->construction) {
    const StageConstruction& c = *stage->construction;
    out += "construction block_depth=" + std::to_string(c.block_depth) + " c1=" + table_num(c.c1) +
           " h(Y)=" + table_num(c.y_entropy) + " d(Y)=" + table_num(c.y_distance) + " h(Z)=" + table_num(c.z_entropy) +
           " K1=" + std::to_string(c.k1) + " M=" + std::to_string(c.connection_time) + "\n";
    out += "marker " + c.marker.str() + " (length " + std::to_string(c.marker_length) + ")\n";
    out += "connectors u=" + c.connector_u.str() + " v=" + c.connector_v.str() + "\n";
    out += "separated set candidates=" + std::to_string(c.katok_candidates) +
           " in_radius=" + std::to_string(c.katok_in_radius) + " kept=" + std::to_string(c.katok_size) +
           " pigeonhole=" + std::to_string(c.pigeonhole_size) + (c.radius_relaxed ? " radius=relaxed" : "") + "\n";
  }
  for (const ReportItem& i : r.items) {
    const char* verdict = !i.applicable ? "n/a " : (i.pass ? "PASS" : "FAIL");
    std::string line = std::string(verdict) + "  " + pad(i.name, 36);
    if (i.applicable && !(std::isnan(i.lower) && std::isnan(i.value) && std::isnan(i.upper))) {
      line += " " + table_num(i.lower) + " <= " + table_num(i.value) + " <= " + table_num(i.upper);
    }
    if (!i.gating) line += " (informational)";
    if (!i.note.empty()) line += "  " + i.note;
    out += line + "\n";
  }
  out += std::string("result ") + (r.pass() ? "pass" : "fail") + "\n";
  return out;
}

inline std::string summary_text(const Tower& tower, const Target& t) {
  using cli_detail::pad;
  using cli_detail::table_num;
  std::string out = "target c=" + table_num(t.c) + " h*=" + table_num(t.h_star()) + "\n";
  out += pad("stage", 6) + pad("k", 6) + pad("|G|", 8) + pad("h_top", 12) + pad("roof", 12) + pad("h_norm", 12) +
         pad("lower", 12) + pad("upper", 12) + pad("dist", 12) + pad("ud", 6) + pad("sync", 6) + "pass\n";
  const Stage& base = tower.stages.front();
  out += pad("0", 6) + pad("-", 6) + pad("-", 8) + pad(table_num(markov_entropy(base.measure)), 12) +
         pad(table_num(roof_integral(base.presentation, base.measure, t.rho)), 12) +
         pad(table_num(normalized_entropy(base, t.rho)), 12) + pad("-", 12) + pad("-", 12) + pad("-", 12) +
         pad("-", 6) + pad("1", 6) + "-\n";
  for (const StageReport& r : tower.reports) {
    out += pad(std::to_string(r.stage), 6) + pad(r.k ? std::to_string(*r.k) : "-", 6) +
           pad(r.gamma_size ? std::to_string(*r.gamma_size) : "-", 8) + pad(table_num(r.h_top), 12) +
           pad(table_num(r.roof_integral), 12) + pad(table_num(r.normalized_entropy), 12) +
           pad(table_num(r.bracket_lower), 12) + pad(table_num(r.bracket_upper), 12) +
           pad(table_num(r.distance_to_previous), 12) + pad(r.ud ? (*r.ud ? "pass" : "fail") : "-", 6) +
           pad(r.sync_depth ? std::to_string(*r.sync_depth) : "-", 6) + (r.pass() ? "pass" : "fail") + "\n";
  }
  std::string result = "result pass";
  for (const StageReport& r : tower.reports) {
    if (r.pass()) continue;
    if (result == "result pass") result = "result fail";
    result += "; stage " + std::to_string(r.stage) + ":";
    for (const ReportItem* i : r.failures()) result += " [" + i->name + "]";
  }
  if (tower.error) {
    result = result == "result pass" ? "result error" : result;
    result += "; stopped: " + tower.error_message;
  }
  return out + result + "\n";
}

namespace cli_detail {

inline int cmd_entropy(const std::string& config, std::ostream& out) {
  const RunConfig cfg = load_config(config);
  out << fmt("%.12f", topological_entropy(build_presentation(cfg).shift())) << "\n";
  return exit_code::ok;
}

inline int cmd_parry(const std::string& config, std::ostream& out) {
  const RunConfig cfg = load_config(config);
  const LabeledShift p = build_presentation(cfg);
  const MarkovMeasure m = parry_measure(p.shift());
  out << "entropy " << table_num(markov_entropy(m)) << "\n";
  out << pad("state", 7) << pad("label", 7) << "pi\n";
  for (Symbol s = 0; s < p.shift().size(); ++s) {
    out << pad(std::to_string(s), 7) << pad(symbol_text(p.label(s)), 7) << table_num(m.pi(s)) << "\n";
  }
  out << pad("from", 7) << pad("to", 7) << "P\n";
  for (Symbol s = 0; s < p.shift().size(); ++s) {
    for (Symbol t : p.shift().successors(s)) {
      out << pad(std::to_string(s), 7) << pad(std::to_string(t), 7) << table_num(m.transition(s, t)) << "\n";
    }
  }
  return exit_code::ok;
}

inline int cmd_ud_check(std::vector<std::string> words, const std::string& file, std::ostream& out) {
  if (!file.empty()) {
    std::istringstream in(read_file(file));
    for (std::string w; in >> w;) words.push_back(w);
  }
  if (words.empty()) throw std::invalid_argument("ud-check needs at least one code word");
  std::vector<Word> parsed;
  for (const auto& w : words) parsed.push_back(Word::parse(w));
  const auto amb = find_ambiguity(Code(std::move(parsed)));
  if (amb) {
    out << "NOT uniquely decipherable: " << amb->str() << "\n";
  } else {
    out << "uniquely decipherable\n";
  }
  return exit_code::ok;
}

inline int cmd_find_word(const std::string& config, std::size_t length, std::ostream& out) {
  const RunConfig cfg = load_config(config);
  const LabeledShift p = build_presentation(cfg);
  const Word path = find_low_overlap_word(p, length);
  const Word w = p.label_word(path.span());
  out << w.str() << "\n";
  out << "max overlap " << max_self_overlap(w) << " < " << fmt("%g", static_cast<double>(length) / 4) << "\n";
  return exit_code::ok;
}

struct ConstructFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> stages;
  std::optional<std::size_t> metric_depth;
  bool keep_going = false;
};

inline int cmd_construct(const ConstructFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.stages) cfg.stages = *f.stages;
  if (f.metric_depth) cfg.metric_depth = *f.metric_depth;
  if (f.keep_going) cfg.keep_going = true;

  const Target t = build_target(cfg);
  const Tower tower = iterate(t, cfg.stages, build_schedule(cfg), build_options(cfg));

  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  write_file(dir / "stages.csv", stages_csv(tower, t));
  const std::string summary = summary_text(tower, t);
  write_file(dir / "summary.txt", summary);
  for (std::size_t i = 0; i < tower.reports.size(); ++i) {
    const StageReport& r = tower.reports[i];
    const Stage* stage = i + 1 < tower.stages.size() ? &tower.stages[i + 1] : nullptr;
    const StageParams* p = i < tower.params.size() ? &tower.params[i] : nullptr;
    write_file(dir / ("stage-" + std::to_string(r.stage) + ".report"), stage_report_text(r, stage, p));
  }
  out << summary;

  if (tower.error) {
    try {
      tower.rethrow();
    } catch (...) {
      return report_exception(err);
    }
  }
  if (!tower.all_pass()) {
    err << "stage verification failed\n";
    return exit_code::stage_failure;
  }
  return exit_code::ok;
}

inline int cmd_report(const std::string& dir, std::optional<std::size_t> stage, std::ostream& out) {
  const std::filesystem::path d(dir);
  if (stage) {
    out << read_file(d / ("stage-" + std::to_string(*stage) + ".report"));
  } else {
    out << read_file(d / "summary.txt");
  }
  return exit_code::ok;
}

}  // namespace cli_detail

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropy-flexibility construction for suspension flows over SFTs", "flexsft"};
  app.require_subcommand(1);

  std::string config;
  auto* entropy = app.add_subcommand("entropy", "topological entropy of the configured shift (nats)");
  entropy->add_option("--config", config, "run configuration")->required();

  auto* parry = app.add_subcommand("parry", "Parry measure of the configured shift");
  parry->add_option("--config", config, "run configuration")->required();

  std::vector<std::string> words;
  std::string word_file;
  auto* ud = app.add_subcommand("ud-check", "unique decipherability of a code");
  ud->add_option("words", words, "code words");
  ud->add_option("--file", word_file, "file of whitespace-separated code words");

  std::size_t length = 0;
  auto* find = app.add_subcommand("find-word", "low self-overlap word in the configured shift");
  find->add_option("--config", config, "run configuration")->required();
  find->add_option("--length", length, "word length")->required();

  cli_detail::ConstructFlags flags;
  auto* construct = app.add_subcommand("construct", "run the stage construction");
  construct->add_option("--config", flags.config, "run configuration")->required();
  construct->add_option("--seed", flags.seed, "random seed");
  construct->add_option("--out", flags.out, "output directory");
  construct->add_option("--stages", flags.stages, "number of stages");
  construct->add_option("--metric-depth", flags.metric_depth, "cylinder depth of the weak* metric");
  construct->add_flag("--keep-going", flags.keep_going, "continue past failing stages");

  std::string report_dir;
  std::optional<std::size_t> report_stage;
  auto* report = app.add_subcommand("report", "print saved construction output");
  report->add_option("--out", report_dir, "output directory of a construct run")->required();
  report->add_option("--stage", report_stage, "print one stage report");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_code::usage;
  }

  try {
    if (*entropy) return cli_detail::cmd_entropy(config, out);
    if (*parry) return cli_detail::cmd_parry(config, out);
    if (*ud) return cli_detail::cmd_ud_check(words, word_file, out);
    if (*find) return cli_detail::cmd_find_word(config, length, out);
    if (*construct) return cli_detail::cmd_construct(flags, out, err);
    return cli_detail::cmd_report(report_dir, report_stage, out);
  } catch (...) {
    return cli_detail::report_exception(err);
  }
}

}  // namespace flexsft
