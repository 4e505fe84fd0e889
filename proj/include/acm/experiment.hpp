#pragma once

// Experiment configuration (flat key = value text) and the preset batteries.
// Layering, lowest to highest: preset defaults, config file, environment,
// command-line overrides.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "acm/analysis.hpp"
#include "acm/export.hpp"
#include "acm/height_recursion.hpp"
#include "acm/time_delay_graph.hpp"

namespace acm {

inline constexpr const char* kResultSchema = "acm-experiment/1";
inline constexpr const char* kOutputDirEnv = "ACM_OUTPUT_DIR";
inline constexpr Time kMaxHorizon = 100'000'000;

using ConfigMap = std::map<std::string, std::string>;

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"nakamoto-rate", "nakamoto-clt", "regen-stats", "palm",
                                              "f1-growth",     "f2-stability", "phase-sweep", "commuting"};
  return names;
}

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "preset",     "delay",    "construction", "horizon",   "replicas",
      "seed",       "threads",  "output_dir",   "exact_confirmation", "export_graph",
      "margin",     "k",        "alpha_grid",   "k_list",    "drift_initial_leaves",
      "min_level",  "initial_leaves"};
  return keys;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline void set_config_value(ConfigMap& cfg, const std::string& key, const std::string& value) {
  const auto& keys = config_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end())
    throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
  cfg[key] = value;
}

// Lines of "key = value"; '#' starts a comment.
inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline ConfigMap preset_defaults(const std::string& preset) {
  ConfigMap base{{"delay", "geometric:0.5"}, {"construction", "nakamoto"}, {"horizon", "10000"},
                 {"replicas", "1"},          {"seed", "1"},                {"threads", "1"},
                 {"output_dir", "results"},  {"exact_confirmation", "true"}, {"export_graph", "false"},
                 {"k", "2"},                 {"alpha_grid", "0.1,0.5,2,10,50"}, {"k_list", "2,4,8,16,32"},
                 {"drift_initial_leaves", "256"}, {"min_level", "20"},   {"initial_leaves", "0"}};
  auto set = [&](std::initializer_list<std::pair<const char*, const char*>> kv) {
    for (const auto& [k, v] : kv) base[k] = v;
  };
  if (preset.empty()) return base;
  base["preset"] = preset;
  if (preset == "nakamoto-rate") set({{"horizon", "1000000"}});
  else if (preset == "nakamoto-clt") set({{"horizon", "10000"}, {"replicas", "1000"}});
  else if (preset == "regen-stats") set({{"horizon", "1000000"}});
  else if (preset == "palm") set({{"horizon", "1000000"}});
  else if (preset == "f1-growth") set({{"construction", "f1"}, {"horizon", "1000000"}, {"replicas", "20"}});
  else if (preset == "f2-stability")
    set({{"delay", "geometric:0.75"}, {"construction", "f2"}, {"horizon", "100000"}, {"replicas", "20"}});
  else if (preset == "phase-sweep")
    set({{"delay", "geometric:0.75"}, {"construction", "state-varying:2:0"}, {"horizon", "100000"}, {"replicas", "20"}});
  else if (preset == "commuting")
    set({{"delay", "geometric:0.75"}, {"construction", "all"}, {"horizon", "10000"}});
  else
    throw Error(ErrorKind::ConfigError, "unknown preset '" + preset + "'");
  return base;
}

struct ExperimentConfig {
  std::string preset;
  std::string delay_text;
  std::string construction_text;
  DelaySpec delay;
  ConstructionSpec construction;
  Time horizon = 0;
  std::size_t replicas = 1;
  std::uint64_t seed_base = 1;
  unsigned threads = 1;
  std::string output_dir;
  bool exact_confirmation = true;
  bool export_graph = false;
  std::optional<Time> margin;
  std::int64_t k = 2;
  std::vector<double> alpha_grid;
  std::vector<std::int64_t> k_list;
  std::int64_t drift_initial_leaves = 0;
  std::int64_t min_level = 20;
  std::int64_t initial_leaves = 0;

  InitialGraph initial_graph() const {
    return initial_leaves > 0 ? InitialGraph::star(initial_leaves) : InitialGraph::root_only();
  }
};

namespace detail {

inline long long parse_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(ErrorKind::ConfigError, key + ": expected an integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(ErrorKind::ConfigError, key + ": expected a number, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::ConfigError, key + ": expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig materialize(const ConfigMap& m) {
  auto get = [&](const std::string& key) -> std::string {
    const auto it = m.find(key);
    return it == m.end() ? std::string() : it->second;
  };
  ExperimentConfig c;
  c.preset = get("preset");
  if (!c.preset.empty()) {
    const auto& names = preset_names();
    if (std::find(names.begin(), names.end(), c.preset) == names.end())
      throw Error(ErrorKind::ConfigError, "unknown preset '" + c.preset + "'");
  }
  c.delay_text = get("delay");
  c.construction_text = get("construction");
  try {
    c.delay = parse_delay_spec(c.delay_text);
    make_delay_model(c.delay);
    c.construction = parse_construction_spec(c.construction_text);
    validate(c.construction);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  const auto horizon = detail::parse_integer("horizon", get("horizon"));
  if (horizon < 1) throw Error(ErrorKind::ConfigError, "horizon must be >= 1");
  if (horizon > kMaxHorizon) throw Error(ErrorKind::ResourceBound, "horizon above " + std::to_string(kMaxHorizon));
  c.horizon = horizon;
  const auto replicas = detail::parse_integer("replicas", get("replicas"));
  if (replicas < 1) throw Error(ErrorKind::ConfigError, "replicas must be >= 1");
  c.replicas = static_cast<std::size_t>(replicas);
  c.seed_base = static_cast<std::uint64_t>(detail::parse_integer("seed", get("seed")));
  const auto threads = detail::parse_integer("threads", get("threads"));
  if (threads < 0) throw Error(ErrorKind::ConfigError, "threads must be >= 0");
  c.threads = static_cast<unsigned>(threads);
  c.output_dir = get("output_dir");
  if (c.output_dir.empty()) throw Error(ErrorKind::ConfigError, "output_dir is empty");
  c.exact_confirmation = detail::parse_bool("exact_confirmation", get("exact_confirmation"));
  c.export_graph = detail::parse_bool("export_graph", get("export_graph"));
  if (const auto mg = get("margin"); !mg.empty()) {
    const auto v = detail::parse_integer("margin", mg);
    if (v < 0) throw Error(ErrorKind::ConfigError, "margin must be >= 0");
    c.margin = v;
  }
  c.k = detail::parse_integer("k", get("k"));
  if (c.k < 2) throw Error(ErrorKind::ConfigError, "k must be >= 2");
  for (const auto& a : detail::split(get("alpha_grid"), ',')) {
    const double v = detail::parse_real("alpha_grid", a);
    if (!(v >= 0.0)) throw Error(ErrorKind::ConfigError, "alpha_grid values must be >= 0");
    c.alpha_grid.push_back(v);
  }
  for (const auto& j : detail::split(get("k_list"), ',')) {
    const auto v = detail::parse_integer("k_list", j);
    if (v < 1) throw Error(ErrorKind::ConfigError, "k_list values must be >= 1");
    c.k_list.push_back(v);
  }
  c.drift_initial_leaves = detail::parse_integer("drift_initial_leaves", get("drift_initial_leaves"));
  c.min_level = detail::parse_integer("min_level", get("min_level"));
  c.initial_leaves = detail::parse_integer("initial_leaves", get("initial_leaves"));
  if (c.drift_initial_leaves < 0 || c.initial_leaves < 0)
    throw Error(ErrorKind::ConfigError, "initial leaf counts must be >= 0");
  return c;
}

// Applies the output directory environment override before CLI overrides.
inline ExperimentConfig load_config(const std::string& preset, const std::string& file, const ConfigMap& overrides) {
  ConfigMap m = preset_defaults(preset);
  if (!file.empty())
    for (const auto& [k, v] : read_config_file(file)) m[k] = v;
  if (!preset.empty()) m["preset"] = preset;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) m["output_dir"] = env;
  for (const auto& [k, v] : overrides) set_config_value(m, k, v);
  return materialize(m);
}

inline Json config_echo(const ExperimentConfig& c) {
  Json j;
  j["preset"] = c.preset;
  j["delay"] = c.delay_text;
  j["construction"] = c.construction_text;
  j["horizon"] = c.horizon;
  j["replicas"] = c.replicas;
  j["seed"] = c.seed_base;
  j["exact_confirmation"] = c.exact_confirmation;
  if (c.preset == "phase-sweep") {
    j["k"] = c.k;
    j["alpha_grid"] = c.alpha_grid;
  }
  if (c.preset == "commuting") j["k_list"] = c.k_list;
  if (c.preset == "f2-stability") {
    j["drift_initial_leaves"] = c.drift_initial_leaves;
    j["min_level"] = c.min_level;
  }
  return j;
}

struct ExperimentResult {
  std::string preset;
  std::string claim;
  Json config;
  Json per_replica = Json::array();
  Json aggregate = Json::object();
  Json thresholds = Json::object();
  bool passed = false;

  Json to_json() const {
    Json j;
    j["schema"] = kResultSchema;
    j["preset"] = preset;
    j["claim"] = claim;
    j["config"] = config;
    j["thresholds"] = thresholds;
    j["aggregate"] = aggregate;
    j["per_replica"] = per_replica;
    j["passed"] = passed;
    return j;
  }
};

namespace presets {

inline ExperimentResult nakamoto_rate(const ExperimentConfig& c) {
  constexpr double kTol = 0.01;
  const auto model = make_delay_model(c.delay);
  ExperimentResult res;
  res.claim = "longest-chain height X_t / t converges almost surely to lambda = 1 / E chi";
  res.thresholds = Json{{"relative_error_max", kTol}};
  const double lambda = lambda_closed_form(model);
  struct Rep {
    double estimate;
    std::optional<double> chi_p;
  };
  const auto reps = parallel_map(c.replicas, c.threads, [&](std::size_t i) {
    const auto series = height_recursion(sample_trace(model, c.horizon, replica_seed(c.seed_base, i)));
    Rep r{static_cast<double>(series.X.back()) / static_cast<double>(c.horizon), std::nullopt};
    if (series.chi_gaps.size() > kMinChiGaps) r.chi_p = chi_gap_gof(series, model).p_value();
    return r;
  });
  res.passed = true;
  std::vector<double> est;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const double rel = std::abs(reps[i].estimate - lambda) / lambda;
    res.passed = res.passed && rel <= kTol;
    est.push_back(reps[i].estimate);
    res.per_replica.push_back(Json{{"seed", replica_seed(c.seed_base, i)},
                                   {"rate", reps[i].estimate},
                                   {"relative_error", rel},
                                   {"chi_gap_p_value", reps[i].chi_p ? Json(*reps[i].chi_p) : Json(nullptr)}});
  }
  res.aggregate = Json{{"lambda", lambda}, {"rate", to_json(stats::mean_ci(est))}};
  return res;
}

inline ExperimentResult nakamoto_clt(const ExperimentConfig& c) {
  constexpr double kKsMax = 0.06;
  const auto model = make_delay_model(c.delay);
  ExperimentResult res;
  res.claim = "longest-chain height fluctuations are Gaussian with variance lambda^3 Var(chi) t";
  res.thresholds = Json{{"ks_distance_max", kKsMax}};
  const auto rep = clt_test(model, c.horizon, c.replicas, c.seed_base, c.threads);
  res.aggregate = Json{{"lambda", rep.lambda}, {"sigma2", rep.sigma2}, {"degenerate", rep.degenerate},
                       {"ks_distance", rep.ks_distance}};
  for (std::size_t i = 0; i < rep.standardized.size(); ++i)
    res.per_replica.push_back(Json{{"seed", replica_seed(c.seed_base, i)}, {"standardized", rep.standardized[i]}});
  res.passed = !rep.degenerate && rep.ks_distance <= kKsMax;
  return res;
}

inline ExperimentResult regen_stats(const ExperimentConfig& c) {
  constexpr double kTol = 0.02;
  const auto model = make_delay_model(c.delay);
  ExperimentResult res;
  res.claim = "regeneration starts have density q-tilde and mean gap 1 / q-tilde";
  res.thresholds = Json{{"density_relative_error_max", kTol}, {"gap_mean_relative_error_max", kTol}};
  const double q = regen_probability(model);
  const auto reps = parallel_map(c.replicas, c.threads, [&](std::size_t i) {
    return detect_regeneration_intervals(sample_trace(model, c.horizon, replica_seed(c.seed_base, i)), model);
  });
  res.passed = true;
  for (const auto& rep : reps) {
    const double d_err = std::abs(rep.density() - q) / q;
    Json j = to_json(rep);
    j["density_relative_error"] = d_err;
    bool ok = d_err <= kTol;
    if (rep.times.size() >= 2) {
      const double g_err = std::abs(gap_statistics(rep).mean - 1.0 / q) * q;
      j["gap_mean_relative_error"] = g_err;
      ok = ok && g_err <= kTol;
    } else {
      ok = false;
    }
    res.passed = res.passed && ok;
    res.per_replica.push_back(j);
  }
  res.aggregate = Json{{"q_tilde", q}, {"mean_gap_expected", 1.0 / q}};
  return res;
}

inline ExperimentResult palm(const ExperimentConfig& c) {
  constexpr double kTol = 0.05;
  const auto model = make_delay_model(c.delay);
  ExperimentResult res;
  res.claim = "Palm inversion for the regeneration process with H(x) = x^2";
  res.thresholds = Json{{"relative_discrepancy_max", kTol}};
  const GapFunctional H = [](Time x) { return static_cast<double>(x) * static_cast<double>(x); };
  const auto reps = parallel_map(c.replicas, c.threads, [&](std::size_t i) {
    const auto trace = sample_trace(model, c.horizon, replica_seed(c.seed_base, i));
    return palm_identity_check(trace, detect_regeneration_intervals(trace, model), H);
  });
  res.passed = true;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const double d = reps[i].relative_discrepancy();
    res.passed = res.passed && d <= kTol;
    res.per_replica.push_back(Json{{"seed", replica_seed(c.seed_base, i)},
                                   {"lhs", reps[i].lhs},
                                   {"rhs", reps[i].rhs},
                                   {"relative_discrepancy", d}});
  }
  return res;
}

inline ExperimentResult f1_growth(const ExperimentConfig& c) {
  constexpr double kLo = 0.45, kHi = 0.55;
  const auto model = make_delay_model(c.delay);
  ExperimentResult res;
  res.claim = "leaf count of the single-leaf construction grows like t^(1/2)";
  res.thresholds = Json{{"slope_min", kLo}, {"slope_max", kHi}};
  const auto rep = leaf_growth_exponent(model, c.horizon, c.replicas, c.seed_base, c.threads);
  Json samples = Json::array();
  for (std::size_t j = 0; j < rep.sample_times.size(); ++j)
    samples.push_back(Json{{"t", rep.sample_times[j]}, {"mean_leaves", rep.mean_leaves[j]}});
  res.aggregate = Json{{"slope", rep.slope()},
                       {"slope_ci_half_width", rep.slope_ci_half_width},
                       {"bound_constant", rep.bound_constant},
                       {"bound_holds", rep.bound_holds},
                       {"degenerate", rep.degenerate},
                       {"samples", samples}};
  res.passed = !rep.degenerate && rep.bound_holds && rep.slope() >= kLo && rep.slope() <= kHi;
  return res;
}

inline ExperimentResult f2_stability(const ExperimentConfig& c) {
  constexpr std::size_t kMinHits = 10;
  const auto model = make_delay_model(c.delay);
  ExperimentResult res;
  res.claim = "leaf count at regenerations is positive recurrent when P(f != f_1) > 0";
  res.thresholds = Json{{"hits_min_per_seed", kMinHits}, {"min_level", c.min_level}, {"drift_ci_upper_max", 0.0}};
  struct Rep {
    std::size_t hits;
    DriftReport drift;
  };
  const auto reps = parallel_map(c.replicas, c.threads, [&](std::size_t i) {
    const auto seed = replica_seed(c.seed_base, i);
    Rep r;
    r.hits = single_leaf_hitting(model, c.construction, c.horizon, seed, c.initial_graph()).times.size();
    const auto g0 = c.drift_initial_leaves > 0 ? InitialGraph::star(c.drift_initial_leaves) : c.initial_graph();
    r.drift = foster_drift(model, c.construction, c.horizon, seed, g0);
    return r;
  });
  DriftReport pooled;
  res.passed = true;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    pooled.merge(reps[i].drift);
    res.passed = res.passed && reps[i].hits >= kMinHits;
    res.per_replica.push_back(Json{{"seed", replica_seed(c.seed_base, i)},
                                   {"single_leaf_hits", reps[i].hits},
                                   {"drift_pairs", reps[i].drift.pairs}});
  }
  const auto high = pooled.pooled(c.min_level);
  res.passed = res.passed && pooled.hypothesis_holds && high.n >= 2 && high.upper() < 0.0;
  res.aggregate = Json{{"drift_at_min_level", to_json(high)}, {"drift", to_json(pooled)}};
  return res;
}

inline ExperimentResult phase_sweep(const ExperimentConfig& c) {
  constexpr std::size_t kMinMonotone = 18;
  const auto model = make_delay_model(c.delay);
  ExperimentResult res;
  res.claim = "state-varying construction: leaves diverge for small alpha and recur for large alpha";
  const std::size_t needed = (kMinMonotone * c.replicas + 19) / 20;
  res.thresholds = Json{{"passing_batteries_min", needed}, {"exponent_threshold", kDivergingExponent}};
  if (c.alpha_grid.empty()) throw Error(ErrorKind::ConfigError, "alpha_grid is empty");
  auto grid = c.alpha_grid;
  std::sort(grid.begin(), grid.end());
  std::size_t passing = 0, monotone = 0, low_diverging = 0, high_recurrent = 0;
  const auto reps = parallel_map(c.replicas, c.threads, [&](std::size_t b) {
    return phase_transition_sweep(model, c.k, grid, c.horizon, 1, replica_seed(c.seed_base, b));
  });
  for (std::size_t b = 0; b < c.replicas; ++b) {
    const auto& rep = reps[b];
    const bool mono = rep.monotone();
    const bool lo = rep.points.front().regime == Regime::DivergingLeaves;
    const bool hi = rep.points.back().regime == Regime::Recurrent;
    monotone += mono;
    low_diverging += lo;
    high_recurrent += hi;
    passing += mono && lo && hi;
    Json j = to_json(rep);
    j["seed"] = replica_seed(c.seed_base, b);
    res.per_replica.push_back(j);
  }
  res.aggregate = Json{{"batteries", c.replicas},
                       {"monotone", monotone},
                       {"smallest_alpha_diverging", low_diverging},
                       {"largest_alpha_recurrent", high_recurrent},
                       {"passing", passing}};
  res.passed = passing >= needed;
  return res;
}

inline ExperimentResult commuting(const ExperimentConfig& c) {
  const auto model = make_delay_model(c.delay);
  ExperimentResult res;
  res.claim = "finite-k leaf constructions converge to the all-leaves construction";
  res.thresholds = Json{{"equality_horizon_ge_coupling_bound", true}, {"distance_non_increasing", true}};
  auto ks = c.k_list;
  std::sort(ks.begin(), ks.end());
  const auto reps = parallel_map(c.replicas, c.threads, [&](std::size_t i) {
    return commuting_check(model, c.horizon, replica_seed(c.seed_base, i), ks);
  });
  res.passed = true;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    res.passed = res.passed && reps[i].horizons_dominate_bounds() && reps[i].distances_non_increasing() &&
                 reps[i].horizons_non_decreasing();
    Json j = to_json(reps[i]);
    j["seed"] = replica_seed(c.seed_base, i);
    res.per_replica.push_back(j);
  }
  return res;
}

}  // namespace presets

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  ExperimentResult res;
  if (c.preset == "nakamoto-rate") res = presets::nakamoto_rate(c);
  else if (c.preset == "nakamoto-clt") res = presets::nakamoto_clt(c);
  else if (c.preset == "regen-stats") res = presets::regen_stats(c);
  else if (c.preset == "palm") res = presets::palm(c);
  else if (c.preset == "f1-growth") res = presets::f1_growth(c);
  else if (c.preset == "f2-stability") res = presets::f2_stability(c);
  else if (c.preset == "phase-sweep") res = presets::phase_sweep(c);
  else if (c.preset == "commuting") res = presets::commuting(c);
  else throw Error(ErrorKind::ConfigError, "unknown preset '" + c.preset + "'");
  res.preset = c.preset;
  res.config = config_echo(c);
  return res;
}

inline std::filesystem::path ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::ConfigError, "cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace acm
