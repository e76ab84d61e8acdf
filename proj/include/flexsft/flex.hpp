#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flexsft/error.hpp"
#include "flexsft/measure.hpp"
#include "flexsft/renewal.hpp"
#include "flexsft/spectral.hpp"
#include "flexsft/symbolic.hpp"

namespace flexsft {

inline constexpr double entropy_identity_tolerance = 1e-9;
// Slack on closed entropy bounds, so that an entropy computed as log(1 +/- ulp)
// still meets a bound of exactly 0.
inline constexpr double entropy_slack = 1e-12;

// What the construction aims for: a flow over the base shift under the roof
// rho whose entropy is c.
struct Target {
  Target(double c_value, RoofFunction roof, LabeledShift base_shift, MarkovMeasure measure)
      : c(c_value), rho(std::move(roof)), base(std::move(base_shift)), base_measure(std::move(measure)) {
    if (!(base_measure.shift() == base.shift())) throw std::invalid_argument("base measure lives on another shift");
    if (rho.alphabet() != base.label_alphabet()) throw std::invalid_argument("roof alphabet differs from the base labels");
    if (!(c >= 0) || !std::isfinite(c)) throw std::invalid_argument("target entropy must be finite and non-negative");
    base_entropy = markov_entropy(base_measure);
    base_roof = roof_integral(base, base_measure, rho);
    if (!(c < h_star())) {
      throw InfeasibleTargetError("infeasible target: c = " + std::to_string(c) + " is not below h* = " +
                                  std::to_string(h_star()));
    }
  }

  double h_star() const { return abramov(base_entropy, base_roof); }

  double c;
  RoofFunction rho;
  LabeledShift base;
  MarkovMeasure base_measure;
  double base_entropy = 0;
  double base_roof = 0;
};

struct StageParams {
  double delta = 0;
  double kappa = 0;
  std::size_t word_length = 12;
  std::size_t overlap_length = 0;  // lower bound for the marker length
  MetricConfig metric{2};
  double radius = 0;  // 0 selects kappa

  double effective_radius() const { return radius > 0 ? radius : kappa; }
};

// Per-stage overrides of the default parameter schedule.
struct ScheduleEntry {
  std::optional<double> delta{};
  std::optional<double> kappa{};
  std::optional<std::size_t> word_length{};
  std::optional<std::size_t> overlap_length{};
};

inline double derive_c1(double c, double roof_int, double delta) {
  return c * roof_int * ((1 + delta) * (1 + delta) + (1 + 3 * delta)) / 2;
}

inline double kappa_bound(double c, double roof_int, double delta) {
  const double k = roof_int / 4 * std::min(c * std::abs((1 + delta) * (1 + delta) - (1 + 3 * delta)), delta / 2);
  return k > 0 ? k : roof_int / 4 * (delta / 2);
}

inline StageParams plan_initial_params(const Target& t) {
  const double I = t.base_roof;
  const double delta_sup = t.c > 0 ? (t.base_entropy / (t.c * I) - 1) / 3 : INFINITY;
  if (!(delta_sup > 0)) throw InfeasibleTargetError("infeasible target: no admissible delta");
  StageParams p;
  p.delta = std::min(delta_sup / 2, 0.5);
  p.kappa = kappa_bound(t.c, I, p.delta);
  p.metric = MetricConfig(std::max<std::size_t>(t.rho.depth(), 2));
  return p;
}

inline void check_decay(const StageParams& prev, const StageParams& next) {
  if (!(next.delta > 0) || !(next.kappa > 0)) throw std::invalid_argument("delta and kappa must be positive");
  if (!((1 + next.delta) * (1 + next.delta) < 1 + prev.delta)) {
    throw std::invalid_argument("schedule violates (1 + delta')^2 < 1 + delta");
  }
  if (!(next.kappa < prev.kappa / 2)) throw std::invalid_argument("schedule violates kappa' < kappa / 2");
}

inline StageParams next_params(const StageParams& prev, double c, double roof_int, const ScheduleEntry& over) {
  StageParams p = prev;
  p.delta = over.delta ? *over.delta : 0.9 * (std::sqrt(1 + prev.delta) - 1);
  p.kappa = over.kappa ? *over.kappa : std::min(kappa_bound(c, roof_int, p.delta), 0.45 * prev.kappa);
  if (over.word_length) p.word_length = *over.word_length;
  if (over.overlap_length) p.overlap_length = *over.overlap_length;
  check_decay(prev, p);
  return p;
}

inline StageParams next_params(const StageParams& prev, double c, double roof_int) {
  const ScheduleEntry defaults;
  return next_params(prev, c, roof_int, defaults);
}

inline void check_params(const StageParams& p) {
  if (!(p.delta > 0) || !(p.delta < 1)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(p.kappa > 0)) throw std::invalid_argument("kappa must be positive");
  if (p.word_length == 0) throw std::invalid_argument("word length must be positive");
}

// How a stage was assembled from its predecessor.
struct StageConstruction {
  std::size_t block_depth = 0;
  double c1 = 0;
  double previous_roof = 0;
  LabeledShift y;
  LabeledShift z;
  double y_entropy = 0;
  double y_distance = 0;
  double z_entropy = 0;
  bool selection_feasible = false;
  std::size_t k1 = 0;
  std::size_t connection_time = 0;
  std::size_t marker_length = 0;
  Word marker{};       // base labels
  Word connector_u{};  // after the separated word, before the marker
  Word connector_v{};  // after the marker, before the next separated word
  double katok_deviation = 0;
  bool radius_relaxed = false;
  std::size_t katok_candidates = 0;
  std::size_t katok_in_radius = 0;
  std::size_t katok_size = 0;
  std::size_t pigeonhole_size = 0;
};

struct Stage {
  std::size_t index = 0;
  LabeledShift presentation;  // labelled in the base alphabet
  MarkovMeasure measure;
  std::optional<Code> code;
  std::optional<std::size_t> renewal_k;
  std::optional<StageConstruction> construction;
  std::vector<std::optional<std::size_t>> sync_depths;  // s_0 .. s_index
  std::optional<StageParams> params;
};

inline Stage initial_stage(const Target& t) {
  return Stage{0, t.base, t.base_measure, std::nullopt, std::nullopt, std::nullopt, {std::size_t{1}}, std::nullopt};
}

inline double normalized_entropy(const Stage& s, const RoofFunction& rho) {
  return abramov(topological_entropy(s.presentation.shift()), roof_integral(s.presentation, s.measure, rho));
}

struct ReportItem {
  explicit ReportItem(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double value = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  bool applicable = true;
  bool pass = true;
  bool gating = true;  // informational items never fail a stage
  std::string note;
};

struct StageReport {
  std::size_t stage = 0;
  std::vector<ReportItem> items;
  std::optional<std::size_t> k;
  std::optional<std::size_t> gamma_size;
  double h_top = 0;
  double roof_integral = 0;
  double normalized_entropy = 0;
  double bracket_lower = 0;
  double bracket_upper = 0;
  double distance_to_previous = 0;
  std::optional<bool> ud;
  std::optional<std::size_t> sync_depth;

  bool pass() const {
    return std::all_of(items.begin(), items.end(),
                       [](const ReportItem& i) { return !i.applicable || !i.gating || i.pass; });
  }
  std::vector<const ReportItem*> failures() const {
    std::vector<const ReportItem*> out;
    for (const auto& i : items)
      if (i.applicable && i.gating && !i.pass) out.push_back(&i);
    return out;
  }
  const ReportItem* find(const std::string& name) const {
    for (const auto& i : items)
      if (i.name == name) return &i;
    return nullptr;
  }
};

class StageVerificationError : public Error {
 public:
  StageVerificationError(StageReport report, std::shared_ptr<const Stage> stage)
      : Error(describe(report)), report_(std::move(report)), stage_(std::move(stage)) {}
  const StageReport& report() const noexcept { return report_; }
  const std::shared_ptr<const Stage>& stage() const noexcept { return stage_; }

 private:
  static std::string describe(const StageReport& r) {
    std::string out = "stage " + std::to_string(r.stage) + " failed verification:";
    for (const ReportItem* i : r.failures()) out += " [" + i->name + "]";
    return out;
  }
  StageReport report_;
  std::shared_ptr<const Stage> stage_;
};

struct SelectionOptions {
  std::size_t block_depth = 2;
  std::size_t max_block_depth = 3;
  std::size_t exhaustive_limit = 12;     // hosts up to this size try every state subset
  std::size_t search_state_limit = 96;   // larger hosts are not searched at all
  std::size_t beam_width = 16;
  std::size_t candidate_limit = 64;      // Y candidates tried for a partner Z
  bool require_feasible = true;
};

struct ConstructionOptions {
  SelectionOptions selection;
  std::size_t samples = 32;
  std::uint64_t seed = 1;
  std::size_t nest_depth = 6;
  std::size_t sync_cap = 64;
  bool keep_going = false;  // record failing stages and carry on
  std::size_t metric_depth = 0;  // overrides the planned metric depth when positive
  // Replaces the base-label code words before the decipherability check.
  std::function<std::vector<Word>(std::vector<Word>)> code_hook;
};

struct SubsystemSelection {
  std::size_t block_depth;
  LabeledShift host;  // higher-block recoding of the previous presentation
  std::vector<Symbol> y_states;
  std::vector<Symbol> z_states;
  LabeledShift y;
  LabeledShift z;
  double y_entropy;
  double y_distance;
  double z_entropy;
  std::size_t k1;               // L_k1(Y) and L_k1(Z) are disjoint
  std::size_t connection_time;  // longest shortest path between Y and Z, both ways
  bool feasible;
};

namespace detail {

inline std::uint64_t stage_seed(std::uint64_t seed, std::size_t stage) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(stage) + 1));
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1p-53;
}

// Heavy-tailed random weights, normalised.
inline void random_distribution(std::mt19937_64& rng, std::span<double> out) {
  double total = 0;
  for (double& x : out) {
    const double e = -std::log(uniform01(rng));
    total += x = e * e * e;
  }
  for (double& x : out) x /= total;
}

// Longest path length (in vertices); nullopt when the graph has a cycle.
inline std::optional<std::size_t> longest_path(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::size_t> best(n, 0);
  std::vector<char> colour(n, 0);
  std::size_t result = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (colour[root]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = 1;
    while (!stack.empty()) {
      auto& [v, i] = stack.back();
      if (i == adj[v].size()) {
        std::size_t b = 1;
        for (std::size_t w : adj[v]) b = std::max(b, best[w] + 1);
        best[v] = b;
        colour[v] = 2;
        result = std::max(result, b);
        stack.pop_back();
        continue;
      }
      const std::size_t w = adj[v][i++];
      if (colour[w] == 1) return std::nullopt;
      if (colour[w] == 0) {
        colour[w] = 1;
        stack.emplace_back(w, 0);
      }
    }
  }
  return result;
}

// Length of the longest common label word of two presentations, or nullopt
// when they share arbitrarily long words.
inline std::optional<std::size_t> longest_common_word(const LabeledShift& a, const LabeledShift& b) {
  const std::size_t nb = b.shift().size();
  std::map<std::pair<Symbol, Symbol>, std::size_t> id;
  std::vector<std::pair<Symbol, Symbol>> nodes;
  for (Symbol x = 0; x < a.shift().size(); ++x)
    for (Symbol y = 0; y < nb; ++y)
      if (a.label(x) == b.label(y)) {
        id[{x, y}] = nodes.size();
        nodes.emplace_back(x, y);
      }
  std::vector<std::vector<std::size_t>> adj(nodes.size());
  for (std::size_t v = 0; v < nodes.size(); ++v)
    for (Symbol x : a.shift().successors(nodes[v].first))
      for (Symbol y : b.shift().successors(nodes[v].second)) {
        const auto it = id.find({x, y});
        if (it != id.end()) adj[v].push_back(it->second);
      }
  return longest_path(adj);
}

// Longest label word of p avoiding v as a factor; nullopt if unbounded.
inline std::optional<std::size_t> avoidance_length(const LabeledShift& p, std::span<const Symbol> v) {
  const std::size_t m = v.size(), n = p.shift().size();
  const auto fail = failure_function(v);
  auto step = [&](std::size_t j, Symbol a) {
    while (j > 0 && v[j] != a) j = fail[j - 1];
    return v[j] == a ? j + 1 : j;
  };
  std::vector<std::size_t> id(n * m, std::numeric_limits<std::size_t>::max());
  std::vector<std::pair<Symbol, std::size_t>> nodes;
  auto visit = [&](Symbol g, std::size_t j) {
    std::size_t& slot = id[g * m + j];
    if (slot == std::numeric_limits<std::size_t>::max()) {
      slot = nodes.size();
      nodes.emplace_back(g, j);
    }
    return slot;
  };
  for (Symbol g = 0; g < n; ++g) {
    const std::size_t j = step(0, p.label(g));
    if (j < m) visit(g, j);
  }
  std::vector<std::vector<std::size_t>> adj;
  for (std::size_t head = 0; head < nodes.size(); ++head) {
    const auto [g, j] = nodes[head];
    std::vector<std::size_t> out;
    for (Symbol h : p.shift().successors(g)) {
      const std::size_t k = step(j, p.label(h));
      if (k < m) out.push_back(visit(h, k));
    }
    adj.resize(nodes.size());
    adj[head] = std::move(out);
  }
  adj.resize(nodes.size());
  return longest_path(adj);
}

// Smallest s >= floor (and at least `floor`) such that every word of `words`
// is a factor of every label word of length s; nullopt past `cap`.
inline std::optional<std::size_t> saturation_depth(const LabeledShift& p, const WordSet& words, std::size_t floor,
                                                   std::size_t cap) {
  std::size_t s = floor;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto a = avoidance_length(p, words[i]);
    if (!a || *a + 1 > cap) return std::nullopt;
    s = std::max(s, *a + 1);
  }
  return s <= cap ? std::optional<std::size_t>(s) : std::nullopt;
}

struct YCandidate {
  std::vector<Symbol> states;
  double entropy;
  double distance;
  double score;  // max(|h - c1|, distance) / kappa; feasible iff <= 1
};

struct SearchContext {
  const LabeledShift& host;
  double c1;
  double kappa;
  const CylinderTable& reference;
  const MetricConfig& cfg;
  std::map<std::vector<Symbol>, std::optional<YCandidate>> seen;

  const std::optional<YCandidate>& evaluate(const std::vector<Symbol>& states) {
    auto it = seen.find(states);
    if (it != seen.end()) return it->second;
    std::optional<YCandidate> out;
    const LabeledShift sub = host.induced(states);
    if (is_irreducible(sub.shift())) {
      const MarkovMeasure m = parry_measure(sub.shift());
      const double h = std::log(perron(sub.shift()).lambda);
      const double d = weak_star_distance(cylinder_table(sub, m, cfg.max_depth), reference, cfg);
      out = YCandidate{states, h, d, std::max(std::abs(h - c1), d) / kappa};
    }
    return seen.emplace(states, std::move(out)).first->second;
  }
};

// Strongly connected pieces (with an edge) of the sub-shift on `states`,
// as sorted host-state lists.
inline std::vector<std::vector<Symbol>> components_of(const LabeledShift& host, const std::vector<Symbol>& states) {
  if (states.empty()) return {};
  const VertexShift sub = host.shift().induced(states);
  std::size_t count = 0;
  const auto comp = strong_components(sub, &count);
  std::vector<std::vector<Symbol>> groups(count);
  for (std::size_t i = 0; i < states.size(); ++i) groups[comp[i]].push_back(states[i]);
  std::vector<std::vector<Symbol>> out;
  for (auto& g : groups) {
    std::vector<Symbol> local;
    for (Symbol s : g) local.push_back(static_cast<Symbol>(std::lower_bound(states.begin(), states.end(), s) - states.begin()));
    if (is_irreducible(sub.induced(local))) out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<YCandidate> enumerate_y(SearchContext& ctx, const SelectionOptions& opt) {
  const std::size_t n = ctx.host.shift().size();
  if (n <= opt.exhaustive_limit) {
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
      std::vector<Symbol> states;
      for (Symbol s = 0; s < n; ++s)
        if (mask >> s & 1) states.push_back(s);
      ctx.evaluate(states);
    }
  } else {
    // Beam search downward from the whole host: drop one state, keep each
    // irreducible piece, and retain the pieces closest in measure that still
    // have enough entropy to go further down.
    std::vector<Symbol> all(n);
    for (Symbol s = 0; s < n; ++s) all[s] = s;
    std::vector<std::vector<Symbol>> beam{all};
    ctx.evaluate(all);
    while (!beam.empty()) {
      std::vector<YCandidate> next;
      std::set<std::vector<Symbol>> queued;
      for (const auto& S : beam) {
        for (std::size_t drop = 0; drop < S.size(); ++drop) {
          std::vector<Symbol> T = S;
          T.erase(T.begin() + static_cast<std::ptrdiff_t>(drop));
          for (auto& piece : components_of(ctx.host, T)) {
            const bool fresh = !ctx.seen.count(piece);
            const auto& c = ctx.evaluate(piece);
            if (fresh && c && c->entropy >= ctx.c1 - ctx.kappa && queued.insert(piece).second) next.push_back(*c);
          }
        }
      }
      std::stable_sort(next.begin(), next.end(), [](const YCandidate& a, const YCandidate& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.score < b.score;
      });
      if (next.size() > opt.beam_width) next.resize(opt.beam_width);
      beam.clear();
      for (auto& c : next) beam.push_back(std::move(c.states));
    }
  }
  std::vector<YCandidate> out;
  for (const auto& [_, c] : ctx.seen)
    if (c) out.push_back(*c);
  std::stable_sort(out.begin(), out.end(), [](const YCandidate& a, const YCandidate& b) { return a.score < b.score; });
  return out;
}

}  // namespace detail

// Finds inside a higher-block recoding of `p` an irreducible Y with entropy
// near c1 and measure near `m`, and a positive-entropy Z in the rest whose
// label language is disjoint from Y's at some finite length.
inline SubsystemSelection select_disjoint_subsystems(const LabeledShift& p, const MarkovMeasure& m, double c1,
                                                     double kappa, const MetricConfig& cfg,
                                                     const SelectionOptions& opt = {}) {
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be positive");
  const CylinderTable reference = cylinder_table(p, m, cfg.max_depth);
  std::optional<SubsystemSelection> best;
  double best_score = INFINITY;
  std::string skipped;
  for (std::size_t b = opt.block_depth; b <= opt.max_block_depth; ++b) {
    const LabeledShift host = higher_block(p, b);
    const std::size_t n = host.shift().size();
    if (n > opt.search_state_limit) {
      skipped += "; block depth " + std::to_string(b) + " has " + std::to_string(n) + " states (limit " +
                 std::to_string(opt.search_state_limit) + ")";
      continue;
    }
    detail::SearchContext ctx{host, c1, kappa, reference, cfg, {}};
    auto candidates = detail::enumerate_y(ctx, opt);
    if (candidates.size() > opt.candidate_limit) candidates.resize(opt.candidate_limit);
    for (const auto& yc : candidates) {
      if (yc.score >= best_score) break;
      std::vector<Symbol> rest;
      for (Symbol s = 0; s < n; ++s)
        if (!std::binary_search(yc.states.begin(), yc.states.end(), s)) rest.push_back(s);
      const LabeledShift y = host.induced(yc.states);
      std::optional<SubsystemSelection> pick;
      for (auto& zs : detail::components_of(host, rest)) {
        const LabeledShift z = host.induced(zs);
        const double hz = std::log(perron(z.shift()).lambda);
        if (!(hz > 1e-9)) continue;
        const auto common = detail::longest_common_word(y, z);
        if (!common) continue;
        const std::size_t k1 = *common + 1;
        if (pick && (k1 > pick->k1 || (k1 == pick->k1 && hz <= pick->z_entropy))) continue;
        pick = SubsystemSelection{b, host, yc.states, zs, y, z, yc.entropy, yc.distance, hz, k1, 0, yc.score <= 1};
      }
      if (!pick) continue;
      std::size_t M = 0;
      for (Symbol a : pick->y_states) {
        const auto t = connection_times(host.shift(), a);
        for (Symbol z : pick->z_states) M = std::max(M, t[z].value());
      }
      for (Symbol z : pick->z_states) {
        const auto t = connection_times(host.shift(), z);
        for (Symbol a : pick->y_states) M = std::max(M, t[a].value());
      }
      pick->connection_time = M;
      best = std::move(pick);
      best_score = yc.score;
      break;  // candidates are sorted, so this is the best one at this depth
    }
    if (best && best->feasible) return *best;
  }
  if (best && !opt.require_feasible) return *best;
  std::string msg = "no subsystem pair meets |h(Y) - c1| <= kappa and distance <= kappa (c1 = " +
                    std::to_string(c1) + ", kappa = " + std::to_string(kappa) + ")";
  if (best) {
    msg += "; closest: h(Y) = " + std::to_string(best->y_entropy) + ", distance = " + std::to_string(best->y_distance) +
           " at block depth " + std::to_string(best->block_depth);
  } else {
    msg += "; no irreducible Y leaves a positive-entropy Z with a disjoint language";
  }
  msg += skipped;
  throw SearchFailureError(msg);
}

inline SubsystemSelection select_disjoint_subsystems(const VertexShift& shift, const MarkovMeasure& m, double c1,
                                                     double kappa, const MetricConfig& cfg,
                                                     const SelectionOptions& opt = {}) {
  return select_disjoint_subsystems(LabeledShift::identity(shift), m, c1, kappa, cfg, opt);
}

namespace detail {

// Random Markov measure with full support on the presentation. Renewal
// presentations only branch at word ends, so there the chain reduces to a
// chain on code words.
inline MarkovMeasure sample_measure(const Stage& s, std::mt19937_64& rng) {
  const VertexShift& g = s.presentation.shift();
  std::vector<double> probs(g.edge_count(), 0.0);
  if (s.renewal_k && s.code) {
    const std::size_t k = *s.renewal_k, n = s.code->size();
    std::vector<double> Q(n * n);
    for (std::size_t a = 0; a < n; ++a) random_distribution(rng, std::span<double>(Q).subspan(a * n, n));
    std::vector<double> w(n, 1.0 / static_cast<double>(n)), next(n);
    for (int it = 0; it < 1'000'000; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t a = 0; a < n; ++a) {
        next[a] += 0.5 * w[a];
        for (std::size_t b = 0; b < n; ++b) next[b] += 0.5 * w[a] * Q[a * n + b];
      }
      double diff = 0;
      for (std::size_t a = 0; a < n; ++a) diff += std::abs(next[a] - w[a]);
      w.swap(next);
      if (diff < 1e-15) break;
    }
    std::vector<double> pi(g.size());
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t p = 0; p < k; ++p) pi[a * k + p] = w[a] / static_cast<double>(k);
    for (Symbol v = 0; v < g.size(); ++v) {
      const auto off = g.edge_offset(v);
      if (v % k + 1 < k) {
        probs[off] = 1.0;
      } else {
        const std::size_t a = v / k;
        for (std::size_t b = 0; b < n; ++b) probs[off + b] = Q[a * n + b];
      }
    }
    return MarkovMeasure(g, std::move(pi), std::move(probs));
  }
  for (Symbol v = 0; v < g.size(); ++v) {
    const auto out = g.successors(v).size();
    random_distribution(rng, std::span<double>(probs).subspan(g.edge_offset(v), out));
  }
  auto pi = stationary_distribution(g, probs);
  return MarkovMeasure(g, std::move(pi), std::move(probs));
}

inline ReportItem window(std::string name, double lo, double v, double hi, bool strict) {
  ReportItem i{std::move(name)};
  i.lower = lo;
  i.value = v;
  i.upper = hi;
  i.pass = strict ? (lo < v && v < hi) : (lo - entropy_slack <= v && v <= hi + entropy_slack);
  return i;
}

inline ReportItem at_most(std::string name, double v, double hi) {
  ReportItem i{std::move(name)};
  i.value = v;
  i.upper = hi;
  i.pass = v <= hi;
  return i;
}

inline ReportItem not_applicable(std::string name, std::string why) {
  ReportItem i{std::move(name)};
  i.applicable = false;
  i.note = std::move(why);
  return i;
}

}  // namespace detail

// Checks one stage against its predecessors. `tower` holds the stages
// 0..n; `next` is stage n+1 built with parameters `p`.
inline StageReport verify_stage(const std::vector<Stage>& tower, const Stage& next, const Target& t,
                                const StageParams& p, const ConstructionOptions& opt = {}) {
  if (tower.empty()) throw std::invalid_argument("verification needs a previous stage");
  const Stage& prev = tower.back();
  if (next.presentation.label_alphabet() != prev.presentation.label_alphabet()) {
    throw std::invalid_argument("stages use different label alphabets");
  }
  const double delta = p.delta, kappa = p.kappa, c = t.c;
  const std::size_t D = p.metric.max_depth, T = std::max(D, t.rho.depth()), q = next.presentation.label_alphabet();
  StageReport r;
  r.stage = next.index;

  const CylinderTable reference = cylinder_table(prev.presentation, prev.measure, T);
  const double I_prev = roof_integral(reference, t.rho);
  const double h = topological_entropy(next.presentation.shift());
  const CylinderTable own = cylinder_table(next.presentation, next.measure, T);
  const double I = roof_integral(own, t.rho);
  r.h_top = h;
  r.roof_integral = I;
  r.normalized_entropy = abramov(h, I);
  r.bracket_lower = c * (1 + delta);
  r.bracket_upper = c * (1 + 3 * delta) / (1 - delta);
  r.distance_to_previous = weak_star_distance(own, reference, p.metric);
  r.k = next.renewal_k;
  if (next.code) r.gamma_size = next.code->size();

  auto& items = r.items;
  items.push_back(detail::window("entropy window", (1 + delta) * (1 + delta) * c * I_prev, h,
                                 (1 + 3 * delta) * c * I_prev, false));
  if (next.code && next.renewal_k) {
    const double expected = std::log(static_cast<double>(next.code->size())) / static_cast<double>(*next.renewal_k);
    items.push_back(detail::at_most("entropy identity", std::abs(h - expected), entropy_identity_tolerance));
  } else {
    items.push_back(detail::not_applicable("entropy identity", "stage is not a renewal presentation"));
  }

  // Invariant measures on the new stage: its own measure, random samples and
  // the periodic orbits of the code words.
  std::mt19937_64 rng(detail::stage_seed(opt.seed, next.index));
  std::vector<CylinderTable> samples;
  for (std::size_t i = 0; i < opt.samples; ++i) samples.push_back(cylinder_table(next.presentation, detail::sample_measure(next, rng), T));
  std::vector<CylinderTable> orbits;
  if (next.code)
    for (const Word& w : next.code->words()) orbits.push_back(periodic_orbit_table(w.span(), q, T));

  const double roof_lo = (1 - delta) * I_prev, roof_hi = (1 + delta) * I_prev;
  auto family = [&](const std::string& what, const std::vector<CylinderTable>& tables, const std::string& why_empty) {
    if (tables.empty()) {
      items.push_back(detail::not_applicable("roof window (" + what + ")", why_empty));
      items.push_back(detail::not_applicable("measure distance (" + what + ")", why_empty));
      return;
    }
    double worst_roof = roof_integral(tables[0], t.rho), worst_d = 0;
    std::size_t roof_bad = 0, d_bad = 0;
    for (const auto& tab : tables) {
      const double v = roof_integral(tab, t.rho);
      if (std::abs(v - I_prev) > std::abs(worst_roof - I_prev)) worst_roof = v;
      if (!(roof_lo < v && v < roof_hi)) ++roof_bad;
      const double d = weak_star_distance(tab, reference, p.metric);
      worst_d = std::max(worst_d, d);
      if (!(d <= 2 * kappa)) ++d_bad;
    }
    ReportItem a = detail::window("roof window (" + what + ")", roof_lo, worst_roof, roof_hi, true);
    a.pass = roof_bad == 0;
    a.note = "worst of " + std::to_string(tables.size()) + ", " + std::to_string(roof_bad) + " outside";
    items.push_back(std::move(a));
    ReportItem b = detail::at_most("measure distance (" + what + ")", worst_d, 2 * kappa);
    b.pass = d_bad == 0;
    b.note = "worst of " + std::to_string(tables.size()) + ", " + std::to_string(d_bad) + " outside";
    items.push_back(std::move(b));
  };
  family("stage measure", {own}, "");
  family("sampled measures", samples, "no samples requested");
  family("periodic orbits", orbits, "stage has no code words");

  items.push_back(detail::window("normalized entropy bracket", r.bracket_lower, r.normalized_entropy, r.bracket_upper, false));

  if (next.code) {
    const auto amb = find_ambiguity(*next.code);
    r.ud = !amb;
    ReportItem ud{"unique decipherability"};
    ud.pass = !amb;
    if (amb) ud.note = amb->str();
    items.push_back(std::move(ud));
    ReportItem phase{"unique parsing phase"};
    phase.gating = false;
    phase.pass = next.code->uniform_length() && has_unique_phase(*next.code);
    items.push_back(std::move(phase));
  } else {
    items.push_back(detail::not_applicable("unique decipherability", "stage has no code words"));
  }

  if (const auto& cs = next.construction) {
    ReportItem yh = detail::at_most("subsystem entropy", std::abs(cs->y_entropy - cs->c1), kappa);
    yh.note = "h(Y) = " + std::to_string(cs->y_entropy) + ", c1 = " + std::to_string(cs->c1);
    items.push_back(std::move(yh));
    items.push_back(detail::at_most("subsystem distance", cs->y_distance, kappa));
    ReportItem zh{"marker subsystem entropy"};
    zh.lower = 0;
    zh.value = cs->z_entropy;
    zh.pass = cs->z_entropy > 0;
    items.push_back(std::move(zh));
    ReportItem kd = detail::at_most("separated set deviation", cs->katok_deviation, kappa);
    kd.pass = cs->katok_deviation < kappa && !cs->radius_relaxed;
    if (cs->radius_relaxed) kd.note = "no word within the radius; radius relaxed";
    items.push_back(std::move(kd));

    const WordSet ly = label_language(cs->y, cs->k1), lz = label_language(cs->z, cs->k1);
    std::size_t shared = 0;
    for (std::size_t i = 0; i < ly.size(); ++i) shared += lz.contains(ly[i]) ? 1 : 0;
    ReportItem dj{"disjoint languages"};
    dj.value = static_cast<double>(shared);
    dj.upper = 0;
    dj.pass = shared == 0;
    dj.note = "K1 = " + std::to_string(cs->k1);
    items.push_back(std::move(dj));
    const std::size_t border = max_self_overlap(cs->marker);
    ReportItem ov{"marker self-overlap"};
    ov.value = static_cast<double>(4 * border);
    ov.upper = static_cast<double>(cs->marker_length);
    ov.pass = 4 * border < cs->marker_length;
    ov.note = "4 * overlap against marker length";
    items.push_back(std::move(ov));
    ReportItem ml{"marker length"};
    ml.lower = static_cast<double>(4 * (cs->connection_time + cs->k1));
    ml.value = static_cast<double>(cs->marker_length);
    ml.pass = cs->marker_length > 4 * (cs->connection_time + cs->k1);
    items.push_back(std::move(ml));
  } else {
    items.push_back(detail::not_applicable("subsystem selection", "stage was not built by the construction"));
  }

  {
    ReportItem nest{"language nesting"};
    std::string bad;
    for (std::size_t m = 1; m <= opt.nest_depth; ++m) {
      const WordSet mine = label_language(next.presentation, m), theirs = label_language(prev.presentation, m);
      for (std::size_t i = 0; i < mine.size(); ++i)
        if (!theirs.contains(mine[i])) {
          bad += (bad.empty() ? "" : ", ") + std::to_string(m) + ":" + mine.word(i).str();
          break;
        }
    }
    nest.pass = bad.empty();
    nest.note = bad.empty() ? "depths 1.." + std::to_string(opt.nest_depth) : "not in previous stage: " + bad;
    items.push_back(std::move(nest));
  }

  for (std::size_t j = 0; j < tower.size(); ++j) {
    const auto& sj = tower[j].sync_depths.empty() ? std::optional<std::size_t>{} : tower[j].sync_depths.back();
    const std::string tag = "stage " + std::to_string(j);
    if (!sj) {
      items.push_back(detail::not_applicable("language equality at " + tag, "sync depth not certified"));
      continue;
    }
    ReportItem eq{"language equality at " + tag};
    const WordSet mine = label_language(next.presentation, *sj);
    eq.pass = mine == label_language(tower[j].presentation, *sj);
    eq.note = "depth " + std::to_string(*sj);
    items.push_back(std::move(eq));
    const bool own_sync = next.sync_depths.size() == next.index + 1 && next.sync_depths.back();
    if (!own_sync) continue;
    ReportItem sat{"saturation at " + tag};
    const auto s = detail::saturation_depth(next.presentation, mine, 1, opt.sync_cap);
    sat.value = s ? static_cast<double>(*s) : INFINITY;
    sat.upper = static_cast<double>(*next.sync_depths.back());
    sat.pass = s && *s <= *next.sync_depths.back();
    items.push_back(std::move(sat));
  }
  if (next.sync_depths.size() == next.index + 1) {
    r.sync_depth = next.sync_depths.back();
    ReportItem sd{"sync depth"};
    sd.pass = r.sync_depth.has_value();
    if (r.sync_depth) sd.value = static_cast<double>(*r.sync_depth);
    sd.upper = static_cast<double>(opt.sync_cap);
    items.push_back(std::move(sd));
  } else {
    items.push_back(detail::not_applicable("sync depth", "stage carries no sync depths"));
  }

  if (prev.params) {
    ReportItem dec{"parameter decay"};
    dec.pass = (1 + delta) * (1 + delta) < 1 + prev.params->delta && kappa < prev.params->kappa / 2;
    items.push_back(std::move(dec));
  } else {
    items.push_back(detail::not_applicable("parameter decay", "first stage"));
  }
  return r;
}

inline StageReport verify_stage(const Stage& prev, const Stage& next, const Target& t, const StageParams& p,
                                const ConstructionOptions& opt = {}) {
  return verify_stage(std::vector<Stage>{prev}, next, t, p, opt);
}

struct BuiltStage {
  Stage stage;
  StageReport report;
};

// One step of the tower: separated words of Y, each wrapped between
// connectors and a low-overlap marker from Z, form a uniform code whose
// renewal system is the next stage.
inline BuiltStage build_stage(const std::vector<Stage>& tower, const Target& t, const StageParams& p,
                              const ConstructionOptions& opt = {}) {
  if (tower.empty()) throw std::invalid_argument("construction needs a previous stage");
  check_params(p);
  const Stage& prev = tower.back();
  const double previous_roof = roof_integral(prev.presentation, prev.measure, t.rho);
  const double c1 = derive_c1(t.c, previous_roof, p.delta);

  SelectionOptions sel = opt.selection;
  sel.require_feasible = sel.require_feasible && !opt.keep_going;
  const SubsystemSelection pick = select_disjoint_subsystems(prev.presentation, prev.measure, c1, p.kappa, p.metric, sel);
  StageConstruction cs{.block_depth = pick.block_depth,
                       .c1 = c1,
                       .previous_roof = previous_roof,
                       .y = pick.y,
                       .z = pick.z,
                       .y_entropy = pick.y_entropy,
                       .y_distance = pick.y_distance,
                       .z_entropy = pick.z_entropy,
                       .selection_feasible = pick.feasible,
                       .k1 = pick.k1,
                       .connection_time = pick.connection_time};
  cs.marker_length = std::max(p.overlap_length, 4 * (pick.connection_time + pick.k1) + 1);

  const Word marker_path = find_low_overlap_word(pick.z, cs.marker_length);
  std::vector<Symbol> marker(marker_path.size());
  for (std::size_t i = 0; i < marker.size(); ++i) marker[i] = pick.z_states[marker_path[i]];

  const MarkovMeasure ym = parry_measure(pick.y.shift());
  std::optional<KatokResult> katok;
  try {
    katok = katok_separated_set(pick.y, ym, p.word_length, p.kappa, p.effective_radius(), p.metric,
                                default_enumeration_budget, !opt.keep_going);
  } catch (const InsufficientNError&) {
    if (!opt.keep_going) throw;
    katok = katok_separated_set(pick.y, ym, p.word_length, p.kappa, 2.0, p.metric, default_enumeration_budget, false);
    cs.radius_relaxed = true;
  }
  cs.katok_deviation = katok->deviation;
  cs.katok_candidates = katok->candidates;
  cs.katok_in_radius = katok->in_radius;
  cs.katok_size = katok->words.size();
  const PigeonholeResult gamma = pigeonhole_refine(katok->words, pick.y.shift());
  cs.pigeonhole_size = gamma.words.size();

  const VertexShift& host = pick.host.shift();
  auto interior = [&](Symbol from, Symbol to) {
    const Word w = connecting_word(host, from, to);
    return std::vector<Symbol>(w.begin() + 1, w.end() - 1);
  };
  const auto u = interior(pick.y_states[gamma.last], marker.front());
  const auto v = interior(marker.back(), pick.y_states[gamma.first]);
  cs.marker = pick.host.label_word(marker);
  cs.connector_u = pick.host.label_word(u);
  cs.connector_v = pick.host.label_word(v);

  std::vector<Word> words;
  for (std::size_t i = 0; i < gamma.words.size(); ++i) {
    std::vector<Symbol> path = v;
    for (Symbol s : gamma.words[i]) path.push_back(pick.y_states[s]);
    path.insert(path.end(), u.begin(), u.end());
    path.insert(path.end(), marker.begin(), marker.end());
    words.push_back(pick.host.label_word(path));
  }
  if (opt.code_hook) words = opt.code_hook(std::move(words));
  std::sort(words.begin(), words.end());
  if (const auto dup = std::adjacent_find(words.begin(), words.end()); dup != words.end()) {
    throw NotUniquelyDecipherableError("code words collide in base labels: " + dup->str());
  }
  Code code(std::move(words));
  if (const auto amb = find_ambiguity(code)) {
    throw NotUniquelyDecipherableError("stage " + std::to_string(prev.index + 1) +
                                       " code is not uniquely decipherable: " + amb->str());
  }
  RenewalShift renewal = renewal_to_sft(code, prev.presentation.label_alphabet());

  Stage next{prev.index + 1,
             renewal.presentation,
             parry_measure(renewal.presentation.shift()),
             std::move(code),
             renewal.k,
             std::move(cs),
             prev.sync_depths,
             p};
  std::optional<std::size_t> sync;
  if (const auto& s_prev = prev.sync_depths.back()) {
    sync = detail::saturation_depth(next.presentation, label_language(next.presentation, *s_prev), *s_prev, opt.sync_cap);
  }
  next.sync_depths.push_back(sync);

  StageReport report = verify_stage(tower, next, t, p, opt);
  if (!opt.keep_going && !report.pass()) {
    throw StageVerificationError(std::move(report), std::make_shared<const Stage>(std::move(next)));
  }
  return BuiltStage{std::move(next), std::move(report)};
}

struct Tower {
  std::vector<Stage> stages;
  std::vector<StageReport> reports;  // reports[i] belongs to stages[i + 1]
  std::vector<StageParams> params;   // params[i] built stages[i + 1]
  std::exception_ptr error;
  std::string error_message;

  bool complete() const { return !error; }
  bool all_pass() const {
    return !error && std::all_of(reports.begin(), reports.end(), [](const StageReport& r) { return r.pass(); });
  }
  void rethrow() const {
    if (error) std::rethrow_exception(error);
  }
};

// Stage-1 parameters: the planned defaults with any schedule override.
inline StageParams first_stage_params(const Target& t, const std::vector<ScheduleEntry>& schedule = {}) {
  StageParams first = plan_initial_params(t);
  if (!schedule.empty()) {
    const auto& o = schedule[0];
    if (o.delta) first.delta = *o.delta;
    if (o.kappa) first.kappa = *o.kappa;
    else if (o.delta) first.kappa = kappa_bound(t.c, t.base_roof, first.delta);
    if (o.word_length) first.word_length = *o.word_length;
    if (o.overlap_length) first.overlap_length = *o.overlap_length;
  }
  check_params(first);
  return first;
}

// Builds stages 1..count. A failing stage ends the tower unless
// `keep_going` is set, in which case only errors that leave no stage to
// continue from stop it. Errors are captured in the result.
inline Tower iterate(const Target& t, std::size_t count, const std::vector<ScheduleEntry>& schedule = {},
                     const ConstructionOptions& opt = {}) {
  Tower tower;
  tower.stages.push_back(initial_stage(t));
  try {
    for (std::size_t n = 1; n <= count; ++n) {
      StageParams p;
      if (n == 1) {
        p = first_stage_params(t, schedule);
      } else {
        const double roof = roof_integral(tower.stages.back().presentation, tower.stages.back().measure, t.rho);
        p = n - 1 < schedule.size() ? next_params(tower.params.back(), t.c, roof, schedule[n - 1])
                                    : next_params(tower.params.back(), t.c, roof);
      }
      if (opt.metric_depth > 0) p.metric = MetricConfig(opt.metric_depth);
      tower.params.push_back(p);
      try {
        BuiltStage built = build_stage(tower.stages, t, p, opt);
        tower.stages.push_back(std::move(built.stage));
        tower.reports.push_back(std::move(built.report));
      } catch (const StageVerificationError& e) {
        tower.stages.push_back(*e.stage());
        tower.reports.push_back(e.report());
        throw;
      }
    }
  } catch (const std::exception& e) {
    tower.error = std::current_exception();
    tower.error_message = e.what();
    if (tower.params.size() > tower.reports.size()) tower.params.pop_back();
  }
  return tower;
}

}  // namespace flexsft
