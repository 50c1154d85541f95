#pragma once

// AST augmentation: a stochastic cascade of rewrites (most of them exactly
// robustness-preserving), numeric perturbations, post-serialization
// refinement, and stratified corpus assembly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stlenc/parallel.hpp"
#include "stlenc/semantics.hpp"
#include "stlenc/tokenizer.hpp"

namespace stlenc {

enum class Rule {
  not_injection,
  de_morgan,
  time_partition,
  until_nesting,
  temporal_identity,
  distributivity,
  predicate_inversion,
  no_change,
};
inline constexpr std::size_t kRuleCount = 8;

inline std::string_view rule_name(Rule r) {
  static constexpr std::array<std::string_view, kRuleCount> names{
      "not_injection", "de_morgan", "time_partition", "until_nesting", "temporal_identity",
      "distributivity", "predicate_inversion", "no_change"};
  return names[static_cast<std::size_t>(r)];
}

/// Rules whose output has exactly the robustness of their input.
inline bool preserves_robustness(Rule r) { return r != Rule::until_nesting; }

enum class VariantKind { equivalent, parametric, hybrid };

inline std::string_view variant_name(VariantKind k) {
  switch (k) {
    case VariantKind::equivalent: return "equivalent";
    case VariantKind::parametric: return "parametric";
    case VariantKind::hybrid: return "hybrid";
  }
  return "?";
}

inline VariantKind parse_variant(std::string_view s) {
  if (s == "equivalent") return VariantKind::equivalent;
  if (s == "parametric") return VariantKind::parametric;
  if (s == "hybrid") return VariantKind::hybrid;
  throw Error(ErrorKind::validation, "unknown variant kind: " + std::string(s));
}

struct AugmentConfig {
  // indexed by Rule
  std::array<double, kRuleCount> rule_probs{0.001, 0.099, 0.35, 0.25, 0.05, 0.15, 0.08, 0.02};
  int min_depth = 5;
  double vibration_prob = 0.5;
  double duality_prob = 0.4;
  double vibration_threshold = 0.1;
  double vibration_width_lo = 0.6;
  double vibration_width_hi = 1.8;
  double shift_threshold_lo = -6.0;
  double shift_threshold_hi = 6.0;
  double shift_time_lo = -15.0;
  double shift_time_hi = 40.0;
  double target_equivalent = 0.104;
  double target_parametric = 0.434;
  double target_hybrid = 0.457;
  std::uint64_t seed = 0;

  // grid shared with the training signals
  int num_vars = 3;
  std::size_t points = 101;
  double horizon = 100.0;
  std::size_t max_tokens = 128;

  // until-nesting operand pool
  double pool_threshold_std = 2.0;
  int until_max_lo = 2;     // grid steps
  int until_max_width = 4;  // grid steps

  int max_attempts = 64;
  int max_rewrite_steps = 64;

  double time_step() const { return horizon / static_cast<double>(points - 1); }

  void validate() const {
    double total = 0.0;
    for (double p : rule_probs) {
      require(p >= 0.0 && std::isfinite(p), ErrorKind::config, "rule probabilities must be non-negative");
      total += p;
    }
    require(std::fabs(total - 1.0) < 1e-9, ErrorKind::config,
            "rule probabilities must sum to 1 (got " + std::to_string(total) + ")");
    const double strata = target_equivalent + target_parametric + target_hybrid;
    require(target_equivalent >= 0 && target_parametric >= 0 && target_hybrid >= 0, ErrorKind::config,
            "stratification targets must be non-negative");
    require(std::fabs(strata - 1.0) <= 0.005 + 1e-12, ErrorKind::config,
            "stratification targets must sum to 1 +- 0.005 (got " + std::to_string(strata) + ")");
    require(min_depth >= 1, ErrorKind::config, "min_depth must be >= 1");
    require(vibration_prob >= 0 && vibration_prob <= 1, ErrorKind::config, "vibration_prob outside [0,1]");
    require(duality_prob >= 0 && duality_prob <= 1, ErrorKind::config, "duality_prob outside [0,1]");
    require(vibration_width_lo > 0 && vibration_width_hi >= vibration_width_lo, ErrorKind::config,
            "bad vibration width range");
    require(shift_threshold_hi >= shift_threshold_lo && shift_time_hi >= shift_time_lo, ErrorKind::config,
            "bad shift range");
    require(num_vars >= 1 && num_vars <= kMaxVars, ErrorKind::config, "num_vars outside [1, 8]");
    require(points >= 2 && horizon > 0, ErrorKind::config, "grid needs points >= 2 and horizon > 0");
    require(max_tokens >= 3, ErrorKind::config, "max_tokens must be >= 3");
    require(max_attempts >= 1 && max_rewrite_steps >= 1, ErrorKind::config, "retry bounds must be >= 1");
  }
};

namespace detail {

inline long to_steps(double t, double dt) { return std::lround(t / dt); }

inline double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

// v + delta rounded to 0.01 toward v, so the result never leaves [v, v + delta]
inline double add_toward(double v, double delta) { return v + std::trunc(delta * 100.0) / 100.0; }

inline Formula random_pool_predicate(const AugmentConfig& cfg, Rng& rng) {
  const int var = static_cast<int>(uniform_int(rng, 0, cfg.num_vars - 1));
  const auto cmp = static_cast<Comparison>(uniform_int(rng, 0, 3));
  return make_predicate(var, cmp, round_cents(normal(rng, 0.0, cfg.pool_threshold_std)));
}

inline Comparison complement(Comparison c) {
  switch (c) {
    case Comparison::le: return Comparison::gt;
    case Comparison::ge: return Comparison::lt;
    case Comparison::lt: return Comparison::ge;
    case Comparison::gt: return Comparison::le;
  }
  return c;
}

}  // namespace detail

/// Splits I = [a, a + w] into I1 = [a1, a1 + w1] and I2 = [a - a1, a - a1 + w - w1]
/// (Minkowski sum I1 + I2 = I). Arguments are in grid steps of size dt.
inline std::pair<Interval, Interval> partition_interval(const Interval& iv, long a1, long w1, double dt) {
  const long a = detail::to_steps(iv.lo, dt);
  const long w = detail::to_steps(iv.hi, dt) - a;
  if (a1 < 0 || a1 > a || w1 < 1 || w1 > w - 1) {
    throw Error(ErrorKind::validation, "invalid interval partition");
  }
  const Interval first{static_cast<double>(a1) * dt, static_cast<double>(a1 + w1) * dt};
  const Interval second{static_cast<double>(a - a1) * dt, static_cast<double>(a - a1 + w - w1) * dt};
  return {first, second};
}

/// Pre-order indices of nodes where `rule` can fire.
inline std::vector<std::size_t> applicable_nodes(const Formula& f, Rule rule, const AugmentConfig& cfg) {
  const auto nodes = preorder(f);
  const auto parents = parent_indices(f);
  const double dt = cfg.time_step();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = *nodes[i];
    bool ok = false;
    switch (rule) {
      case Rule::not_injection:
        ok = i == 0 || nodes[parents[i]]->kind != NodeKind::negation;
        break;
      case Rule::de_morgan: ok = n.kind == NodeKind::conjunction || n.kind == NodeKind::disjunction; break;
      case Rule::time_partition:
        ok = (n.kind == NodeKind::always || n.kind == NodeKind::eventually) &&
             detail::to_steps(n.interval.hi, dt) - detail::to_steps(n.interval.lo, dt) >= 2;
        break;
      case Rule::distributivity:
        ok = (n.kind == NodeKind::always && n.lhs->kind == NodeKind::conjunction) ||
             (n.kind == NodeKind::eventually && n.lhs->kind == NodeKind::disjunction);
        break;
      case Rule::predicate_inversion: ok = n.kind == NodeKind::predicate; break;
      case Rule::until_nesting:
      case Rule::temporal_identity:
      case Rule::no_change: ok = true; break;
    }
    if (ok) out.push_back(i);
  }
  return out;
}

/// Applies `rule` at pre-order node `at`; the caller guarantees applicability.
inline Formula apply_rule(const Formula& f, Rule rule, std::size_t at, const AugmentConfig& cfg, Rng& rng) {
  const Formula node = preorder(f)[at];
  Formula repl;
  switch (rule) {
    case Rule::no_change: return f;
    case Rule::not_injection: repl = make_not(make_not(node)); break;
    case Rule::de_morgan: {
      const bool conj = node->kind == NodeKind::conjunction;
      const Formula a = make_not(node->lhs);
      const Formula b = make_not(node->rhs);
      repl = make_not(conj ? make_or(a, b) : make_and(a, b));
      break;
    }
    case Rule::time_partition: {
      const double dt = cfg.time_step();
      const long a = detail::to_steps(node->interval.lo, dt);
      const long w = detail::to_steps(node->interval.hi, dt) - a;
      const long a1 = uniform_int(rng, 0, a);
      const long w1 = uniform_int(rng, 1, w - 1);
      const auto [outer, inner] = partition_interval(node->interval, a1, w1, dt);
      repl = make_temporal(node->kind, outer, make_temporal(node->kind, inner, node->lhs));
      break;
    }
    case Rule::until_nesting: {
      const double dt = cfg.time_step();
      const long lo = uniform_int(rng, 0, cfg.until_max_lo);
      const long width = uniform_int(rng, 1, cfg.until_max_width);
      const Interval iv{static_cast<double>(lo) * dt, static_cast<double>(lo + width) * dt};
      const Formula psi = detail::random_pool_predicate(cfg, rng);
      repl = bernoulli(rng, 0.5) ? make_until(iv, node, psi) : make_until(iv, psi, node);
      break;
    }
    case Rule::temporal_identity:
      repl = make_temporal(bernoulli(rng, 0.5) ? NodeKind::always : NodeKind::eventually, Interval{}, node);
      break;
    case Rule::distributivity: {
      const Formula& inner = node->lhs;
      const Formula a = make_temporal(node->kind, node->interval, inner->lhs);
      const Formula b = make_temporal(node->kind, node->interval, inner->rhs);
      repl = inner->kind == NodeKind::conjunction ? make_and(a, b) : make_or(a, b);
      break;
    }
    case Rule::predicate_inversion:
      repl = make_not(make_predicate(node->var, detail::complement(node->cmp), node->threshold));
      break;
  }
  return replace_at(f, at, repl);
}

/// One cascade step: draw a rule from the configured distribution, then a node
/// where it applies. Inapplicable draws leave `f` unchanged. With
/// `preserving_only`, until nesting is excluded and the rest renormalized.
inline Formula rewrite_once(const Formula& f, const AugmentConfig& cfg, Rng& rng, bool preserving_only = false) {
  std::array<double, kRuleCount> w = cfg.rule_probs;
  if (preserving_only) w[static_cast<std::size_t>(Rule::until_nesting)] = 0.0;
  double total = 0.0;
  for (double p : w) total += p;
  if (!(total > 0.0)) return f;
  const auto rule = static_cast<Rule>(std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng));
  if (rule == Rule::no_change) return f;
  const auto nodes = applicable_nodes(f, rule, cfg);
  if (nodes.empty()) return f;
  const std::size_t at = nodes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(nodes.size()) - 1))];
  return apply_rule(f, rule, at, cfg, rng);
}

inline bool fits_tokens(const Formula& f, std::size_t max_tokens) {
  return formula_tokens(f).size() + 2 <= max_tokens;
}

namespace detail {

inline Formula deepen(const Formula& f, const AugmentConfig& cfg, Rng& rng, bool preserving_only) {
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Formula g = f;
    for (int step = 0; step < cfg.max_rewrite_steps && depth(g) < cfg.min_depth; ++step) {
      g = rewrite_once(g, cfg, rng, preserving_only);
    }
    if (g == f) g = rewrite_once(g, cfg, rng, preserving_only);
    if (depth(g) >= cfg.min_depth && !equal(g, f) && fits_tokens(g, cfg.max_tokens)) return g;
  }
  throw Error(ErrorKind::validation, "depth-unreachable: no variant of depth >= " + std::to_string(cfg.min_depth) +
                                         " within " + std::to_string(cfg.max_attempts) + " attempts");
}

}  // namespace detail

/// Robustness-preserving rewrites until depth >= min_depth.
inline Formula make_equivalent_variant(const Formula& f, const AugmentConfig& cfg, Rng& rng) {
  return detail::deepen(f, cfg, rng, true);
}

/// Structural rewrites from the full rule table (until nesting included).
inline Formula make_structural_variant(const Formula& f, const AugmentConfig& cfg, Rng& rng) {
  return detail::deepen(f, cfg, rng, false);
}

/// Numeric perturbation. One mode per formula, offsets drawn per node.
/// Thresholds stay on a 0.01 grid and time bounds on the signal grid; every
/// non-identity interval is rebuilt as [L', L' + W'] with W' >= one step.
inline Formula perturb(const Formula& f, const AugmentConfig& cfg, Rng& rng) {
  const bool vibration = bernoulli(rng, cfg.vibration_prob);
  const double dt = cfg.time_step();
  return transform(f, [&](const Formula& n) -> Formula {
    if (n->kind == NodeKind::predicate) {
      double theta;
      if (vibration) {
        const double u = uniform(rng, 1.0 - cfg.vibration_threshold, 1.0 + cfg.vibration_threshold);
        theta = detail::add_toward(n->threshold, n->threshold * (u - 1.0));
      } else {
        theta = detail::round_cents(n->threshold + uniform(rng, cfg.shift_threshold_lo, cfg.shift_threshold_hi));
      }
      return make_predicate(n->var, n->cmp, theta);
    }
    if (!is_temporal(n->kind) || n->interval.is_identity()) return n;
    const long lo = detail::to_steps(n->interval.lo, dt);
    const long width = detail::to_steps(n->interval.hi, dt) - lo;
    long new_lo = lo;
    long new_width = width;
    if (vibration) {
      const double factor = uniform(rng, cfg.vibration_width_lo, cfg.vibration_width_hi);
      new_width = std::max(1L, std::lround(static_cast<double>(width) * factor));
    } else {
      new_lo = std::max(0L, lo + std::lround(uniform(rng, cfg.shift_time_lo, cfg.shift_time_hi) / dt));
    }
    Node copy = *n;
    copy.interval = Interval{static_cast<double>(new_lo) * dt, static_cast<double>(new_lo + new_width) * dt};
    return std::make_shared<const Node>(std::move(copy));
  });
}

/// G_I A -> not F_I not A (and the dual) at pre-order node `at`.
inline Formula duality_shift_at(const Formula& f, std::size_t at) {
  const Formula node = preorder(f)[at];
  if (node->kind != NodeKind::always && node->kind != NodeKind::eventually) {
    throw Error(ErrorKind::validation, "duality shift needs an always/eventually node");
  }
  const NodeKind dual = node->kind == NodeKind::always ? NodeKind::eventually : NodeKind::always;
  return replace_at(f, at, make_not(make_temporal(dual, node->interval, make_not(node->lhs))));
}

struct RefineResult {
  std::optional<Formula> formula;
  std::string reason;  // set when rejected

  explicit operator bool() const { return formula.has_value(); }
};

/// Optional duality shift, then serialization round-trip and validation
/// against the probe signal.
inline RefineResult refine_serialized(const Formula& f, const AugmentConfig& cfg, Rng& rng,
                                      const TrajectoryView& probe) {
  Formula g = f;
  if (bernoulli(rng, cfg.duality_prob)) {
    std::vector<std::size_t> temporal;
    const auto nodes = preorder(g);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->kind == NodeKind::always || nodes[i]->kind == NodeKind::eventually) temporal.push_back(i);
    }
    if (!temporal.empty()) {
      g = duality_shift_at(g, temporal[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(temporal.size()) - 1))]);
    }
  }
  try {
    g = parse(print(g), cfg.num_vars);
  } catch (const Error& e) {
    return {std::nullopt, std::string("serialization: ") + e.what()};
  }
  if (!fits_tokens(g, cfg.max_tokens)) return {std::nullopt, "token overflow"};
  try {
    const double r = robustness(g, probe);
    if (!std::isfinite(r)) return {std::nullopt, "non-finite robustness"};
  } catch (const Error& e) {
    return {std::nullopt, e.what()};
  }
  return {g, {}};
}

// ---- dataset --------------------------------------------------------------

struct DatasetRecord {
  std::int64_t id = 0;
  Formula formula;
  std::string text;
  std::int64_t seed_id = 0;
  VariantKind kind = VariantKind::equivalent;
};

/// Probe signal for validation: one fixed draw from mu0 per build.
inline TrajectorySet probe_signal(const AugmentConfig& cfg) {
  return sample_mu0(1, cfg.points, static_cast<std::size_t>(cfg.num_vars), cfg.horizon,
                    mix_seed(cfg.seed ^ 0x70b3e5c1a9d2f4e7ULL));
}

/// Stratum sizes by largest remainder over normalized targets.
inline std::array<std::size_t, 3> strata_counts(std::size_t n_total, const AugmentConfig& cfg) {
  const std::array<double, 3> t{cfg.target_equivalent, cfg.target_parametric, cfg.target_hybrid};
  const double sum = t[0] + t[1] + t[2];
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n_total) * t[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n_total) {
    const auto i = static_cast<std::size_t>(std::max_element(rem.begin(), rem.end()) - rem.begin());
    ++counts[i];
    rem[i] = -1.0;
    ++assigned;
  }
  return counts;
}

/// One candidate of the given kind, before refinement.
inline Formula make_variant(const Formula& seed, VariantKind kind, const AugmentConfig& cfg, Rng& rng) {
  switch (kind) {
    case VariantKind::equivalent: return make_equivalent_variant(seed, cfg, rng);
    case VariantKind::parametric: return perturb(seed, cfg, rng);
    case VariantKind::hybrid: return perturb(make_structural_variant(seed, cfg, rng), cfg, rng);
  }
  return seed;
}

/// Stratified corpus. Record r draws from its own substream of cfg.seed, so
/// the result does not depend on the thread count.
inline std::vector<DatasetRecord> build_dataset(const std::vector<Formula>& seeds, std::size_t n_total,
                                                const AugmentConfig& cfg) {
  cfg.validate();
  if (seeds.empty()) throw Error(ErrorKind::validation, "build_dataset needs at least one seed formula");
  const TrajectorySet probe = probe_signal(cfg);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (max_var(seeds[s]) >= cfg.num_vars) {
      throw Error(ErrorKind::validation, "seed " + std::to_string(s) + " uses a variable beyond num_vars");
    }
  }

  const auto counts = strata_counts(n_total, cfg);
  std::vector<VariantKind> kinds;
  kinds.insert(kinds.end(), counts[0], VariantKind::equivalent);
  kinds.insert(kinds.end(), counts[1], VariantKind::parametric);
  kinds.insert(kinds.end(), counts[2], VariantKind::hybrid);
  Rng shuffle_rng(mix_seed(cfg.seed));
  std::shuffle(kinds.begin(), kinds.end(), shuffle_rng);

  std::vector<DatasetRecord> records(n_total);
  parallel_for(n_total, [&](std::size_t r) {
    Rng rng = substream(cfg.seed, r);
    const std::size_t seed_id = r % seeds.size();
    std::string last_reason;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      Formula candidate;
      try {
        candidate = make_variant(seeds[seed_id], kinds[r], cfg, rng);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::validation) throw;
        last_reason = e.what();
        continue;
      }
      RefineResult refined = refine_serialized(candidate, cfg, rng, probe[0]);
      if (!refined) {
        last_reason = refined.reason;
        continue;
      }
      records[r] = DatasetRecord{static_cast<std::int64_t>(r), *refined.formula, print(*refined.formula),
                                 static_cast<std::int64_t>(seed_id), kinds[r]};
      return;
    }
    throw Error(ErrorKind::validation, "record " + std::to_string(r) + " (seed " + std::to_string(seed_id) +
                                           "): rejection budget exhausted; last reason: " + last_reason);
  });
  return records;
}

// JSONL: {"id", "formula_text", "seed_id", "variant_kind"} per line.
inline void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path);
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.id}, {"formula_text", r.text}, {"seed_id", r.seed_id},
                     {"variant_kind", std::string(variant_name(r.kind))}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

inline std::vector<DatasetRecord> load_dataset(const std::string& path, int num_vars = kMaxVars) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open: " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::io, where + "malformed JSON record");
    }
    DatasetRecord r;
    try {
      r.id = j.at("id").get<std::int64_t>();
      r.text = j.at("formula_text").get<std::string>();
      r.seed_id = j.value("seed_id", static_cast<std::int64_t>(-1));
      r.kind = parse_variant(j.value("variant_kind", std::string("equivalent")));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::io, where + "record missing id/formula_text");
    }
    try {
      r.formula = parse(r.text, num_vars);
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<Formula> formulae_of(const std::vector<DatasetRecord>& records) {
  std::vector<Formula> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.formula);
  return out;
}

/// Seed file: one formula per line; blank lines and '#' comments ignored.
inline std::vector<Formula> load_seed_file(const std::string& path, int num_vars = kMaxVars) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open: " + path);
  std::vector<Formula> seeds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      seeds.push_back(parse(line, num_vars));
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return seeds;
}

}  // namespace stlenc
