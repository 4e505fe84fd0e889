#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace acm::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (const double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Unbiased sample variance.
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (const double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two-sided Student-t quantile for a (1 - alpha) interval.
inline double t_quantile(double confidence, std::size_t dof) {
  if (dof == 0) return std::numeric_limits<double>::infinity();
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.5 + confidence / 2.0);
}

struct MeanCI {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;
  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
};

inline MeanCI mean_ci(std::span<const double> xs, double confidence = 0.95) {
  MeanCI ci;
  ci.n = xs.size();
  ci.mean = mean(xs);
  if (xs.size() >= 2)
    ci.half_width = t_quantile(confidence, xs.size() - 1) * std::sqrt(variance(xs) / static_cast<double>(xs.size()));
  else
    ci.half_width = std::numeric_limits<double>::infinity();
  return ci;
}

// sup_x |F_n(x) - Phi(x)|.
inline double ks_distance_normal(std::vector<double> xs) {
  if (xs.empty()) return 1.0;
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

inline double chi_square_sf(double statistic, double dof) {
  if (dof <= 0.0) return 1.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::size_t bins = 0;
};

// Pearson test; adjacent bins are pooled left to right until each expected
// count reaches min_expected, and any remainder joins the last bin.
inline ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                                      double min_expected = 5.0) {
  std::vector<double> obs, exp;
  double o = 0.0, e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o += observed[i];
    e += expected[i];
    if (e >= min_expected) {
      obs.push_back(o);
      exp.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (exp.empty()) {
      obs.push_back(o);
      exp.push_back(e);
    } else {
      obs.back() += o;
      exp.back() += e;
    }
  }
  ChiSquareResult r;
  r.bins = obs.size();
  for (std::size_t i = 0; i < obs.size(); ++i)
    if (exp[i] > 0.0) r.statistic += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  r.dof = obs.size() > 1 ? obs.size() - 1 : 0;
  r.p_value = chi_square_sf(r.statistic, static_cast<double>(r.dof));
  return r;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_standard_error = 0.0;
  std::size_t n = 0;
  double slope_ci_half_width(double confidence = 0.95) const {
    return n > 2 ? t_quantile(confidence, n - 2) * slope_standard_error : std::numeric_limits<double>::infinity();
  }
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  LinearFit f;
  f.n = x.size();
  if (x.size() < 2) return f;
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_standard_error = std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
  }
  return f;
}

// Roughly log-spaced integer sample points in [lo, hi], both included.
inline std::vector<std::int64_t> log_grid(std::int64_t lo, std::int64_t hi, std::size_t points) {
  std::vector<std::int64_t> out;
  if (hi < lo || points == 0) return out;
  if (points == 1 || lo == hi) return {hi};
  const double a = std::log(static_cast<double>(std::max<std::int64_t>(lo, 1)));
  const double b = std::log(static_cast<double>(hi));
  for (std::size_t i = 0; i < points; ++i) {
    const auto v = static_cast<std::int64_t>(std::llround(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1))));
    if (out.empty() || v > out.back()) out.push_back(std::clamp(v, lo, hi));
  }
  return out;
}

}  // namespace acm::stats
