#pragma once

// Longest-chain height X_t = max(X_{t-1}, 1 + X_{(t - xi_t)_+}), X_0 = 0,
// computed directly from a trace (no DAG), together with its renewal
// decomposition into increment times pi_k and gaps chi_k.

#include <cmath>
#include <cstdint>
#include <vector>

#include "acm/acm_engine.hpp"
#include "acm/delay_models.hpp"
#include "acm/parallel.hpp"
#include "acm/stats.hpp"
#include "acm/time_delay_graph.hpp"

namespace acm {

struct HeightSeries {
  std::uint64_t seed = 0;
  Time horizon = 0;
  std::vector<std::int64_t> X;     // X_0..X_T
  std::vector<Time> pi;            // pi_0 = 0, pi_k = first n with X_n >= k
  std::vector<Time> chi_gaps;      // chi_k = pi_{k+1} - pi_k, k >= 0
};

inline HeightSeries height_recursion(const Trace& trace) {
  HeightSeries h;
  h.seed = trace.seed();
  h.horizon = trace.horizon();
  h.X.resize(static_cast<std::size_t>(h.horizon) + 1, 0);
  h.pi.push_back(0);
  for (Time t = 1; t <= h.horizon; ++t) {
    const auto prev = h.X[static_cast<std::size_t>(t - 1)];
    const auto via = 1 + h.X[static_cast<std::size_t>(trace.source(t))];
    h.X[static_cast<std::size_t>(t)] = std::max(prev, via);
    if (h.X[static_cast<std::size_t>(t)] > prev) {
      h.chi_gaps.push_back(t - h.pi.back());
      h.pi.push_back(t);
    }
  }
  return h;
}

// Final height only, without storing the series; O(T) time, O(T) memory for X.
inline std::int64_t final_height(const DelayModel& model, Time horizon, std::uint64_t seed) {
  std::vector<std::int64_t> X(static_cast<std::size_t>(horizon) + 1, 0);
  for (Time t = 1; t <= horizon; ++t) {
    const Time s = std::max<Time>(t - sample_delay(model, seed, t), 0);
    X[static_cast<std::size_t>(t)] = std::max(X[static_cast<std::size_t>(t - 1)], 1 + X[static_cast<std::size_t>(s)]);
  }
  return X.back();
}

// Checks X_t against the max depth of a Nakamoto run on the same trace.
inline bool verify_against_dag(const HeightSeries& series, const RunResult& nakamoto_run) {
  if (series.seed != nakamoto_run.trace.seed() || series.horizon != nakamoto_run.trace.horizon() ||
      nakamoto_run.state.time() != series.horizon)
    throw Error(ErrorKind::TraceMismatch, "height series and run were driven by different traces");
  for (Time t = 0; t <= series.horizon; ++t)
    if (series.X[static_cast<std::size_t>(t)] != nakamoto_run.state.max_depth(t)) return false;
  return true;
}

struct GrowthRateReport {
  std::vector<double> estimates;  // X_T / T per replica
  double mean = 0.0;
  double ci_half_width = 0.0;
  double lambda = 0.0;
  double relative_error = 0.0;   // |mean - lambda| / lambda
};

inline GrowthRateReport growth_rate_test(const DelayModel& model, Time horizon, std::size_t replicas,
                                         std::uint64_t seed_base, unsigned threads = 1) {
  GrowthRateReport rep;
  rep.lambda = lambda_closed_form(model);
  rep.estimates = parallel_map(replicas, threads, [&](std::size_t i) {
    return static_cast<double>(final_height(model, horizon, replica_seed(seed_base, i))) / static_cast<double>(horizon);
  });
  const auto ci = stats::mean_ci(rep.estimates);
  rep.mean = ci.mean;
  rep.ci_half_width = replicas > 1 ? ci.half_width : 0.0;
  rep.relative_error = std::abs(rep.mean - rep.lambda) / rep.lambda;
  return rep;
}

struct ChiGapReport {
  std::size_t gaps = 0;
  stats::ChiSquareResult gof;
  double lag1_autocorrelation = 0.0;
  double lag1_z = 0.0;  // autocorrelation / its standard error under independence
  double p_value() const { return gof.p_value; }
};

inline constexpr std::size_t kMinChiGaps = 1000;

// Pearson goodness of fit of chi_1, chi_2, ... against the chi law; chi_0
// (from time 0) is excluded.
inline ChiGapReport chi_gap_gof(const HeightSeries& series, const DelayModel& model,
                                std::size_t min_gaps = kMinChiGaps) {
  if (series.chi_gaps.size() < min_gaps + 1)
    throw Error(ErrorKind::TooFewGaps, "need " + std::to_string(min_gaps) + " gaps, have " +
                                           std::to_string(series.chi_gaps.empty() ? 0 : series.chi_gaps.size() - 1));
  const std::span<const Time> gaps(series.chi_gaps.begin() + 1, series.chi_gaps.end());
  const auto law = chi_law(model);
  const auto kmax = static_cast<std::size_t>(law.truncation_point);
  std::vector<double> observed(kmax + 1, 0.0), expected(kmax + 1, 0.0);
  for (const auto g : gaps) observed[std::min<std::size_t>(static_cast<std::size_t>(g) - 1, kmax)] += 1.0;
  const double n = static_cast<double>(gaps.size());
  double assigned = 0.0;
  for (std::size_t k = 1; k <= kmax; ++k) {
    expected[k - 1] = n * law.pmf(static_cast<Delay>(k));
    assigned += expected[k - 1];
  }
  expected[kmax] = std::max(0.0, n - assigned);
  ChiGapReport rep;
  rep.gaps = gaps.size();
  rep.gof = stats::chi_square_gof(observed, expected);
  const auto summary = summarize_gaps(gaps);
  rep.lag1_autocorrelation = summary.lag1_autocorrelation;
  rep.lag1_z = summary.lag1_standard_error > 0.0 ? summary.lag1_autocorrelation / summary.lag1_standard_error : 0.0;
  return rep;
}

struct CltReport {
  bool degenerate = false;  // Var(chi) = 0: no Gaussian fluctuations
  std::vector<double> standardized;
  double ks_distance = 0.0;
  double lambda = 0.0;
  double sigma2 = 0.0;      // lambda^3 Var(chi)
};

inline CltReport clt_test(const DelayModel& model, Time horizon, std::size_t replicas, std::uint64_t seed_base,
                          unsigned threads = 1) {
  CltReport rep;
  const auto law = chi_law(model);
  rep.lambda = 1.0 / law.mean;
  rep.sigma2 = rep.lambda * rep.lambda * rep.lambda * law.variance;
  if (rep.sigma2 < 1e-14) {
    rep.degenerate = true;
    return rep;
  }
  const double scale = std::sqrt(rep.sigma2 * static_cast<double>(horizon));
  rep.standardized = parallel_map(replicas, threads, [&](std::size_t i) {
    const auto x = static_cast<double>(final_height(model, horizon, replica_seed(seed_base, i)));
    return (x - rep.lambda * static_cast<double>(horizon)) / scale;
  });
  rep.ks_distance = stats::ks_distance_normal(rep.standardized);
  return rep;
}

// Z_n(t) = (X_{floor(n t)} - lambda n t) / sqrt(n) on a grid in [0, 1].
inline std::vector<double> path_functional(const HeightSeries& series, Time n, const std::vector<double>& grid,
                                           double lambda) {
  if (n > series.horizon) throw Error(ErrorKind::ConfigError, "n exceeds the series horizon");
  std::vector<double> out;
  out.reserve(grid.size());
  for (const double t : grid) {
    if (t < 0.0 || t > 1.0) throw Error(ErrorKind::ConfigError, "grid points must lie in [0,1]");
    const auto idx = static_cast<Time>(std::floor(static_cast<double>(n) * t));
    out.push_back((static_cast<double>(series.X[static_cast<std::size_t>(idx)]) - lambda * static_cast<double>(n) * t) /
                  std::sqrt(static_cast<double>(n)));
  }
  return out;
}

}  // namespace acm
