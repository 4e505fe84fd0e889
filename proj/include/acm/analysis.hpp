#pragma once

// Finite-horizon proxies for the asymptotic end-structure results:
// confirmed vertices (exact, by reverse reachability, and certified, by
// regeneration events), Foster drift of the leaf count at regenerations,
// single-leaf hits, leaf-growth exponents, coupled f_j / f_inf runs and the
// rooted-ball metric d_*.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acm/acm_engine.hpp"
#include "acm/height_recursion.hpp"
#include "acm/parallel.hpp"
#include "acm/stats.hpp"
#include "acm/time_delay_graph.hpp"

namespace acm {

inline constexpr Time kExactHorizonLimit = 20000;

// v is confirmed at the horizon iff every vertex w with mark in
// (mark(v), T - margin] has a directed path to v. Vertices for which that
// range is empty are never reported.
inline VertexSet confirmed_exact(const ProcessState& state, Time margin, Time horizon_limit = kExactHorizonLimit) {
  const Time T = state.time();
  if (T > horizon_limit)
    throw Error(ErrorKind::HorizonTooLargeForExact,
                "exact confirmation limited to T <= " + std::to_string(horizon_limit));
  const Time last_mark = T - std::max<Time>(margin, 0);
  if (last_mark < 1) return {};
  const auto n = static_cast<std::size_t>(state.last_id(last_mark) + 1);
  const std::size_t words = (n + 63) / 64;
  // reach[w] = vertices reachable from w (excluding w itself).
  std::vector<std::uint64_t> reach(n * words, 0);
  auto row = [&](std::size_t w) { return reach.data() + w * words; };
  for (std::size_t w = 0; w < n; ++w) {
    auto* rw = row(w);
    for (const auto target : state.out_edges(static_cast<VertexId>(w))) {
      const auto* rt = row(static_cast<std::size_t>(target));
      for (std::size_t i = 0; i < words; ++i) rw[i] |= rt[i];
      rw[static_cast<std::size_t>(target) / 64] |= std::uint64_t{1} << (target % 64);
    }
  }
  const auto first_new = static_cast<std::size_t>(state.initial_vertices());
  std::vector<std::uint64_t> common(words, ~std::uint64_t{0});
  std::vector<char> confirmed(n, 0);
  auto has = [&](std::size_t u) { return (common[u / 64] >> (u % 64) & 1U) != 0; };
  for (std::size_t w = n; w-- > first_new;) {
    const auto* rw = row(w);
    for (std::size_t i = 0; i < words; ++i) common[i] &= rw[i];
    // common = vertices reached from every id in [w, n).
    if (w > first_new) {
      if (has(w - 1)) confirmed[w - 1] = 1;
    } else {
      for (std::size_t u = 0; u < first_new; ++u)
        if (has(u)) confirmed[u] = 1;
    }
  }
  VertexSet out;
  for (std::size_t v = 0; v < n; ++v)
    if (confirmed[v]) out.push_back(static_cast<VertexId>(v));
  return out;
}

// Times t at which X increments and [t, t + 2r) is a regeneration interval
// (t and t + r both certified starts).
inline std::vector<Time> anchor_events_nakamoto(const HeightSeries& series, const RegenerationReport& rep) {
  if (series.horizon != rep.horizon || series.seed != rep.seed)
    throw Error(ErrorKind::TraceMismatch, "height series and regeneration report come from different traces");
  std::vector<Time> out;
  for (const Time t : consecutive_regenerations(rep))
    if (series.X[static_cast<std::size_t>(t)] - series.X[static_cast<std::size_t>(t - 1)] == 1) out.push_back(t);
  return out;
}

struct HittingReport {
  std::vector<Time> times;  // certified regeneration times t with L_t = 1
  std::size_t count(Time from = 0) const {
    return static_cast<std::size_t>(times.end() - std::lower_bound(times.begin(), times.end(), from));
  }
};

inline HittingReport single_leaf_hitting(const ProcessState& state, const RegenerationReport& rep) {
  if (rep.r != 1) throw Error(ErrorKind::WrongMinimumSupport, "single-leaf hitting needs r = 1");
  if (rep.horizon != state.time()) throw Error(ErrorKind::TraceMismatch, "report and run horizons differ");
  HittingReport out;
  for (const Time t : rep.times)
    if (state.leaf_count(t) == 1) out.times.push_back(t);
  return out;
}

inline HittingReport single_leaf_hitting(const DelayModel& model, const ConstructionSpec& spec, Time horizon,
                                         std::uint64_t seed, const InitialGraph& g0 = InitialGraph::root_only()) {
  if (model.r() != 1) throw Error(ErrorKind::WrongMinimumSupport, "single-leaf hitting needs r = 1");
  const auto res = run(model, spec, horizon, seed, g0);
  return single_leaf_hitting(res.state, detect_regeneration_times(res.trace, model));
}

struct ConfirmationReport {
  VertexSet confirmed_exact;
  VertexSet confirmed_anchor;
  Time margin = 0;
  bool anchors_contained() const {
    return std::includes(confirmed_exact.begin(), confirmed_exact.end(), confirmed_anchor.begin(),
                         confirmed_anchor.end());
  }
};

// Certified confirmed vertices: Nakamoto anchors, or for leaf-based rules the
// vertices added at regeneration times with a single leaf.
inline VertexSet confirmed_certified(const RunResult& res, const ConstructionSpec& spec, const RegenerationReport& rep) {
  VertexSet out;
  if (std::holds_alternative<Nakamoto>(spec)) {
    for (const Time t : anchor_events_nakamoto(height_recursion(res.trace), rep))
      out.push_back(res.state.vertex_of_time(t));
  } else if (is_leaf_based(spec) && rep.r == 1) {
    for (const Time t : single_leaf_hitting(res.state, rep).times) out.push_back(res.state.vertex_of_time(t));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline ConfirmationReport confirmation_report(const RunResult& res, const DelayModel& model,
                                              const ConstructionSpec& spec, std::optional<Time> margin = std::nullopt) {
  ConfirmationReport out;
  const auto rep = detect_regeneration_intervals(res.trace, model);
  out.margin = margin.value_or(rep.censor_margin);
  out.confirmed_exact = confirmed_exact(res.state, out.margin);
  // Anchors beyond the exact window are outside the comparison.
  const VertexId last = res.state.last_id(res.state.time() - out.margin);
  for (const auto v : confirmed_certified(res, spec, rep))
    if (v < last) out.confirmed_anchor.push_back(v);
  return out;
}

struct DriftLevel {
  std::size_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

struct DriftReport {
  std::map<std::int64_t, DriftLevel> levels;  // keyed by the Lyapunov value at the earlier regeneration
  std::size_t pairs = 0;
  bool hypothesis_holds = true;  // P(f != f_1) > 0

  void add(std::int64_t level, double delta) {
    auto& l = levels[level];
    ++l.count;
    l.sum += delta;
    l.sum_sq += delta * delta;
    ++pairs;
  }

  void merge(const DriftReport& other) {
    for (const auto& [k, v] : other.levels) {
      auto& l = levels[k];
      l.count += v.count;
      l.sum += v.sum;
      l.sum_sq += v.sum_sq;
    }
    pairs += other.pairs;
    hypothesis_holds = hypothesis_holds && other.hypothesis_holds;
  }

  // Mean increment over all levels >= min_level with a t-based CI.
  stats::MeanCI pooled(std::int64_t min_level, std::optional<std::int64_t> max_level = std::nullopt,
                       double confidence = 0.95) const {
    DriftLevel acc;
    for (const auto& [k, v] : levels) {
      if (k < min_level || (max_level && k > *max_level)) continue;
      acc.count += v.count;
      acc.sum += v.sum;
      acc.sum_sq += v.sum_sq;
    }
    stats::MeanCI ci;
    ci.n = acc.count;
    ci.mean = acc.mean();
    if (acc.count >= 2) {
      const double var = std::max(0.0, (acc.sum_sq - acc.sum * acc.sum / static_cast<double>(acc.count)) /
                                           static_cast<double>(acc.count - 1));
      ci.half_width = stats::t_quantile(confidence, acc.count - 1) * std::sqrt(var / static_cast<double>(acc.count));
    } else {
      ci.half_width = std::numeric_limits<double>::infinity();
    }
    return ci;
  }

  // Levels grouped into [1], [2,3], [4,7], ...
  std::vector<std::pair<std::int64_t, stats::MeanCI>> dyadic_bands() const {
    std::vector<std::pair<std::int64_t, stats::MeanCI>> out;
    if (levels.empty()) return out;
    const auto top = levels.rbegin()->first;
    for (std::int64_t lo = 1; lo <= top; lo *= 2) {
      const auto ci = pooled(lo, 2 * lo - 1);
      if (ci.n > 0) out.emplace_back(lo, ci);
    }
    return out;
  }
};

// Lyapunov value at a certified start: L_t for r = 1, sum_{i<r} L_{t+i} otherwise.
inline std::int64_t lyapunov_value(const ProcessState& state, Time t, Delay r) {
  std::int64_t v = 0;
  for (Delay i = 0; i < r; ++i) v += state.leaf_count(std::min<Time>(t + i, state.time()));
  return v;
}

inline DriftReport foster_drift(const ProcessState& state, const RegenerationReport& rep, const ConstructionSpec& spec) {
  if (rep.times.size() < 2) throw Error(ErrorKind::TooFewRegenerations, "drift needs at least two regenerations");
  DriftReport out;
  out.hypothesis_holds = non_single_leaf_weight(spec) > 0.0;
  for (std::size_t k = 0; k + 1 < rep.times.size(); ++k) {
    const auto a = lyapunov_value(state, rep.times[k], rep.r);
    const auto b = lyapunov_value(state, rep.times[k + 1], rep.r);
    out.add(a, static_cast<double>(b - a));
  }
  return out;
}

inline DriftReport foster_drift(const DelayModel& model, const ConstructionSpec& spec, Time horizon, std::uint64_t seed,
                                const InitialGraph& g0 = InitialGraph::root_only()) {
  const auto res = run(model, spec, horizon, seed, g0);
  return foster_drift(res.state, detect_regeneration_intervals(res.trace, model), spec);
}

struct LeafGrowthReport {
  std::vector<std::int64_t> sample_times;
  std::vector<double> mean_leaves;  // replica mean of L_t at sample_times
  stats::LinearFit fit;             // log mean L_t against log t
  double slope_ci_half_width = 0.0;
  double bound_constant = 0.0;      // c = 2 E(xi - 1)_+
  bool bound_holds = true;          // mean L_t <= sqrt((2c+1) t + L_0^2) at every sample
  bool degenerate = false;          // leaf count constant: no growth to fit
  double slope() const { return fit.slope; }
};

inline LeafGrowthReport leaf_growth_exponent(const DelayModel& model, Time horizon, std::size_t replicas,
                                             std::uint64_t seed_base, unsigned threads = 1, Time t_min = 1000,
                                             std::size_t points = 40) {
  LeafGrowthReport rep;
  rep.sample_times = stats::log_grid(std::min(t_min, horizon), horizon, points);
  const auto per_replica = parallel_map(replicas, threads, [&](std::size_t i) {
    const auto res = run(model, KLeaves{1}, horizon, replica_seed(seed_base, i));
    std::vector<double> out;
    for (const auto t : rep.sample_times) out.push_back(static_cast<double>(res.state.leaf_count(t)));
    return out;
  });
  rep.mean_leaves.assign(rep.sample_times.size(), 0.0);
  for (const auto& r : per_replica)
    for (std::size_t j = 0; j < r.size(); ++j) rep.mean_leaves[j] += r[j] / static_cast<double>(replicas);
  rep.bound_constant = 2.0 * model.expected_excess(1);
  const double l0 = 1.0;
  for (std::size_t j = 0; j < rep.sample_times.size(); ++j) {
    const double bound = std::sqrt((2.0 * rep.bound_constant + 1.0) * static_cast<double>(rep.sample_times[j]) + l0 * l0);
    if (rep.mean_leaves[j] > bound) rep.bound_holds = false;
  }
  rep.degenerate = std::all_of(rep.mean_leaves.begin(), rep.mean_leaves.end(),
                               [&](double v) { return v == rep.mean_leaves.front(); });
  if (!rep.degenerate) {
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < rep.sample_times.size(); ++j) {
      lx.push_back(std::log(static_cast<double>(rep.sample_times[j])));
      ly.push_back(std::log(rep.mean_leaves[j]));
    }
    rep.fit = stats::least_squares(lx, ly);
    rep.slope_ci_half_width = rep.fit.slope_ci_half_width();
  }
  return rep;
}

// Undirected hop distances from the root; -1 for vertices absent or unreachable.
inline std::vector<std::int64_t> root_distances(const ProcessState& g) {
  const auto n = static_cast<std::size_t>(g.vertex_count());
  std::vector<std::vector<VertexId>> adj(n);
  for (VertexId v = 0; v < g.vertex_count(); ++v)
    for (const auto w : g.out_edges(v)) {
      adj[static_cast<std::size_t>(v)].push_back(w);
      adj[static_cast<std::size_t>(w)].push_back(v);
    }
  std::vector<std::int64_t> dist(n, -1);
  std::deque<VertexId> queue{g.root()};
  dist[static_cast<std::size_t>(g.root())] = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (const auto w : adj[static_cast<std::size_t>(v)])
      if (dist[static_cast<std::size_t>(w)] < 0) {
        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
        queue.push_back(w);
      }
  }
  return dist;
}

// d_*(g1, g2) = 1 / (1 + s), s the largest radius at which the labelled
// undirected balls around the roots coincide; 0 for identical graphs.
inline double graph_distance(const ProcessState& g1, const ProcessState& g2) {
  const auto d1 = root_distances(g1);
  const auto d2 = root_distances(g2);
  constexpr auto kInf = std::numeric_limits<std::int64_t>::max();
  std::int64_t first_diff = kInf;
  const auto n = std::max(d1.size(), d2.size());
  auto dist = [](const std::vector<std::int64_t>& d, std::size_t v) {
    return v < d.size() && d[v] >= 0 ? d[v] : kInf;
  };
  for (std::size_t v = 0; v < n; ++v) {
    const auto a = dist(d1, v), b = dist(d2, v);
    if (a != b) first_diff = std::min(first_diff, std::min(a, b));
  }
  auto edge_diffs = [&](const ProcessState& g, const ProcessState& other, const std::vector<std::int64_t>& d) {
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
      const auto mine = g.out_edges(v);
      const bool other_has = v < other.vertex_count();
      for (const auto w : mine) {
        bool present = false;
        if (other_has) {
          const auto theirs = other.out_edges(v);
          present = std::binary_search(theirs.begin(), theirs.end(), w);
        }
        if (!present) {
          const auto a = dist(d, static_cast<std::size_t>(v)), b = dist(d, static_cast<std::size_t>(w));
          first_diff = std::min(first_diff, std::max(a, b));
        }
      }
    }
  };
  edge_diffs(g1, g2, d1);
  edge_diffs(g2, g1, d2);
  if (first_diff == kInf) return 0.0;
  return 1.0 / static_cast<double>(first_diff);  // s = first_diff - 1
}

struct CommutingEntry {
  std::int64_t j = 0;
  Time equality_horizon = 0;  // largest t with G_t(f_j) = G_t(f_inf)
  Time coupling_bound = 0;    // largest t with max_{s<=t} L_s(f_inf) <= j
  double distance = 0.0;      // d_*(G_T(f_j), G_T(f_inf))
};

struct CommutingReport {
  Time horizon = 0;
  std::vector<CommutingEntry> entries;  // in the order of k_list
  bool horizons_dominate_bounds() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const CommutingEntry& e) { return e.equality_horizon >= e.coupling_bound; });
  }
  bool distances_non_increasing() const {
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].j >= entries[i - 1].j && entries[i].distance > entries[i - 1].distance) return false;
    return true;
  }
  bool horizons_non_decreasing() const {
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].j >= entries[i - 1].j && entries[i].equality_horizon < entries[i - 1].equality_horizon) return false;
    return true;
  }
};

// Largest t such that the two runs agree on every vertex up to t.
inline Time prefix_equality_horizon(const ProcessState& a, const ProcessState& b) {
  const Time T = std::min(a.time(), b.time());
  for (Time t = 1; t <= T; ++t) {
    const auto ea = a.out_edges(a.vertex_of_time(t));
    const auto eb = b.out_edges(b.vertex_of_time(t));
    if (!std::equal(ea.begin(), ea.end(), eb.begin(), eb.end())) return t - 1;
  }
  return T;
}

inline CommutingReport commuting_check(const Trace& trace, const std::vector<std::int64_t>& k_list) {
  CommutingReport rep;
  rep.horizon = trace.horizon();
  const auto full = run_on_trace(trace, AllLeaves{});
  std::vector<std::int64_t> running_max(static_cast<std::size_t>(rep.horizon) + 1);
  std::int64_t m = 0;
  for (Time t = 0; t <= rep.horizon; ++t) {
    m = std::max(m, full.leaf_count(t));
    running_max[static_cast<std::size_t>(t)] = m;
  }
  for (const auto j : k_list) {
    CommutingEntry e;
    e.j = j;
    const auto partial = run_on_trace(trace, KLeaves{j});
    e.equality_horizon = prefix_equality_horizon(partial, full);
    const auto it = std::upper_bound(running_max.begin(), running_max.end(), j);
    e.coupling_bound = static_cast<Time>(it - running_max.begin()) - 1;
    e.distance = graph_distance(partial, full);
    rep.entries.push_back(e);
  }
  return rep;
}

inline CommutingReport commuting_check(const DelayModel& model, Time horizon, std::uint64_t seed,
                                       const std::vector<std::int64_t>& k_list) {
  return commuting_check(sample_trace(model, horizon, seed), k_list);
}

enum class Regime { DivergingLeaves, Indeterminate, Recurrent };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::DivergingLeaves: return "diverging-leaves";
    case Regime::Indeterminate: return "indeterminate";
    case Regime::Recurrent: return "recurrent";
  }
  return "?";
}

// Classification thresholds; conventions of this tool, not derived constants.
inline constexpr double kDivergingExponent = 0.3;

struct PhasePoint {
  double alpha = 0.0;
  double exponent = 0.0;
  std::size_t hits = 0;  // single-leaf regenerations at t >= t_min, summed over replicas
  double final_mean_leaves = 0.0;
  Regime regime = Regime::Indeterminate;
};

struct PhaseSweepReport {
  std::vector<PhasePoint> points;  // ordered as the alpha grid
  bool monotone() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].alpha >= points[i - 1].alpha && points[i].regime < points[i - 1].regime) return false;
    return true;
  }
  // [largest alpha classified diverging, smallest alpha classified recurrent].
  std::pair<std::optional<double>, std::optional<double>> transition_window() const {
    std::optional<double> lo, hi;
    for (const auto& p : points) {
      if (p.regime == Regime::DivergingLeaves) lo = lo ? std::max(*lo, p.alpha) : p.alpha;
      if (p.regime == Regime::Recurrent) hi = hi ? std::min(*hi, p.alpha) : p.alpha;
    }
    return {lo, hi};
  }
};

inline Regime classify_regime(double exponent, std::size_t hits) {
  if (exponent > kDivergingExponent && hits == 0) return Regime::DivergingLeaves;
  if (hits > 0 && exponent <= kDivergingExponent) return Regime::Recurrent;
  return Regime::Indeterminate;
}

inline PhaseSweepReport phase_transition_sweep(const DelayModel& model, std::int64_t k,
                                               const std::vector<double>& alpha_grid, Time horizon,
                                               std::size_t replicas, std::uint64_t seed_base, unsigned threads = 1,
                                               Time t_min = 1000, std::size_t points = 30) {
  if (model.r() != 1) throw Error(ErrorKind::WrongMinimumSupport, "phase sweep uses regeneration times (r = 1)");
  PhaseSweepReport rep;
  const auto grid = stats::log_grid(std::min(t_min, horizon), horizon, points);
  struct ReplicaOut {
    std::vector<double> leaves;
    std::size_t hits = 0;
  };
  for (const double alpha : alpha_grid) {
    const ConstructionSpec spec = StateVarying{k, alpha};
    validate(spec);
    const auto outs = parallel_map(replicas, threads, [&](std::size_t i) {
      const auto res = run(model, spec, horizon, replica_seed(seed_base, i));
      ReplicaOut o;
      for (const auto t : grid) o.leaves.push_back(static_cast<double>(res.state.leaf_count(t)));
      o.hits = single_leaf_hitting(res.state, detect_regeneration_times(res.trace, model)).count(t_min);
      return o;
    });
    PhasePoint p;
    p.alpha = alpha;
    std::vector<double> mean(grid.size(), 0.0);
    for (const auto& o : outs) {
      p.hits += o.hits;
      for (std::size_t j = 0; j < grid.size(); ++j) mean[j] += o.leaves[j] / static_cast<double>(replicas);
    }
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      lx.push_back(std::log(static_cast<double>(grid[j])));
      ly.push_back(std::log(std::max(mean[j], 1.0)));
    }
    p.exponent = stats::least_squares(lx, ly).slope;
    p.final_mean_leaves = mean.empty() ? 0.0 : mean.back();
    p.regime = classify_regime(p.exponent, p.hits);
    rep.points.push_back(p);
  }
  return rep;
}

}  // namespace acm
