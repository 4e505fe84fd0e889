#pragma once

// The time-delay graph t -> (t - xi_t)_+ and its regeneration structure.
//
// A time t (an interval [t, t+r) when the minimal delay r exceeds 1) is a
// regeneration point iff r <= xi_{t+s} <= max(s, r) for every s >= 0. The
// predicate depends on the whole future, so a finite trace can only certify
// it where delays beyond the horizon are (almost) unable to overturn it;
// everything else is reported as a candidate.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "acm/delay_models.hpp"
#include "acm/error.hpp"
#include "acm/rng.hpp"

namespace acm {

using Time = std::int64_t;

class Trace {
 public:
  Trace() = default;
  Trace(std::uint64_t seed, std::vector<Delay> xi) : seed_(seed), xi_(std::move(xi)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  Time horizon() const noexcept { return static_cast<Time>(xi_.size()); }
  // xi_t for t = 1..T.
  Delay xi(Time t) const { return xi_[static_cast<std::size_t>(t - 1)]; }
  std::span<const Delay> delays() const noexcept { return xi_; }
  ThetaStream theta(Time t) const noexcept { return ThetaStream(seed_, static_cast<std::uint64_t>(t)); }
  // (t - xi_t)_+, the snapshot time seen by vertex t.
  Time source(Time t) const { return std::max<Time>(t - xi(t), 0); }

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::vector<Delay> xi_;
};

inline Delay sample_delay(const DelayModel& model, std::uint64_t seed, Time t) {
  return model.quantile(to_unit_open(counter_hash(seed, StreamTag::Delay, static_cast<std::uint64_t>(t), 0)));
}

inline Trace sample_trace(const DelayModel& model, Time horizon, std::uint64_t seed) {
  if (horizon < 1) throw Error(ErrorKind::ConfigError, "horizon must be >= 1");
  std::vector<Delay> xi(static_cast<std::size_t>(horizon));
  for (Time t = 1; t <= horizon; ++t) xi[static_cast<std::size_t>(t - 1)] = sample_delay(model, seed, t);
  return Trace(seed, std::move(xi));
}

// edges[t-1] = (t - xi_t)_+ for t = 1..T.
inline std::vector<Time> build_time_delay_graph(const Trace& trace) {
  std::vector<Time> edges(static_cast<std::size_t>(trace.horizon()));
  for (Time t = 1; t <= trace.horizon(); ++t) edges[static_cast<std::size_t>(t - 1)] = trace.source(t);
  return edges;
}

struct RegenerationReport {
  std::vector<Time> times;       // certified starts, strictly increasing
  std::vector<Time> candidates;  // predicate holds within the horizon but not conclusive
  std::vector<Time> gaps;        // times[k+1] - times[k]
  std::uint64_t seed = 0;
  Delay r = 1;
  Time censor_margin = 0;        // W: certification only for t <= horizon - W
  Time horizon = 0;
  std::vector<std::int64_t> counts;  // counts[n] = certified starts in [1, n], n = 0..horizon

  // Number of positions where certification is conclusive.
  Time certifiable_positions() const { return std::max<Time>(horizon - censor_margin, 0); }
  double density() const {
    const Time n = certifiable_positions();
    return n > 0 ? static_cast<double>(times.size()) / static_cast<double>(n) : 0.0;
  }
};

// Mask of t in [1, T] satisfying the regeneration predicate for every
// s with t + s <= T. A delay xi_u > r blocks exactly the starts t in
// (u - xi_u, u], so a difference array over those ranges decides all t at once.
inline std::vector<char> regeneration_predicate_mask(const Trace& trace, Delay r) {
  const Time horizon = trace.horizon();
  std::vector<std::int64_t> diff(static_cast<std::size_t>(horizon) + 2, 0);
  for (Time u = 1; u <= horizon; ++u) {
    const Delay x = trace.xi(u);
    if (x <= r) continue;
    const Time lo = std::max<Time>(u - x + 1, 1);
    diff[static_cast<std::size_t>(lo)] += 1;
    diff[static_cast<std::size_t>(u) + 1] -= 1;
  }
  std::vector<char> ok(static_cast<std::size_t>(horizon) + 1, 0);
  std::int64_t blocked = 0;
  for (Time t = 1; t <= horizon; ++t) {
    blocked += diff[static_cast<std::size_t>(t)];
    ok[static_cast<std::size_t>(t)] = blocked == 0 ? 1 : 0;
  }
  return ok;
}

inline RegenerationReport detect_regeneration_intervals(const Trace& trace, const DelayModel& model,
                                                        double censor_eps = kDefaultCensorEps) {
  RegenerationReport rep;
  rep.seed = trace.seed();
  rep.r = model.r();
  rep.horizon = trace.horizon();
  rep.censor_margin = model.censor_margin(censor_eps);
  const auto ok = regeneration_predicate_mask(trace, rep.r);
  const Time last_conclusive = rep.horizon - rep.censor_margin;
  rep.counts.assign(static_cast<std::size_t>(rep.horizon) + 1, 0);
  for (Time t = 1; t <= rep.horizon; ++t) {
    const bool holds = ok[static_cast<std::size_t>(t)] != 0;
    if (holds && t <= last_conclusive)
      rep.times.push_back(t);
    else if (holds)
      rep.candidates.push_back(t);
    rep.counts[static_cast<std::size_t>(t)] = static_cast<std::int64_t>(rep.times.size());
  }
  for (std::size_t i = 1; i < rep.times.size(); ++i) rep.gaps.push_back(rep.times[i] - rep.times[i - 1]);
  return rep;
}

inline RegenerationReport detect_regeneration_times(const Trace& trace, const DelayModel& model,
                                                    double censor_eps = kDefaultCensorEps) {
  if (model.r() != 1)
    throw Error(ErrorKind::WrongMinimumSupport,
                "regeneration times need P(xi = 1) > 0; r = " + std::to_string(model.r()));
  return detect_regeneration_intervals(trace, model, censor_eps);
}

// Starts t whose successor start t + r is also certified: back-to-back
// regeneration intervals, i.e. a regeneration interval of length 2r.
inline std::vector<Time> consecutive_regenerations(const RegenerationReport& rep) {
  std::vector<Time> out;
  std::size_t j = 0;
  for (const Time t : rep.times) {
    while (j < rep.times.size() && rep.times[j] < t + rep.r) ++j;
    if (j < rep.times.size() && rep.times[j] == t + rep.r) out.push_back(t);
  }
  return out;
}

struct GapSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  double lag1_autocorrelation = 0.0;
  // Standard error of the lag-1 autocorrelation under independence.
  double lag1_standard_error = 0.0;
};

template <typename T>
GapSummary summarize_gaps(std::span<const T> gaps) {
  GapSummary s;
  s.count = gaps.size();
  if (gaps.empty()) return s;
  double sum = 0.0;
  for (const auto g : gaps) sum += static_cast<double>(g);
  s.mean = sum / static_cast<double>(gaps.size());
  double ss = 0.0;
  for (const auto g : gaps) ss += (static_cast<double>(g) - s.mean) * (static_cast<double>(g) - s.mean);
  s.variance = gaps.size() > 1 ? ss / static_cast<double>(gaps.size() - 1) : 0.0;
  if (gaps.size() >= 3 && ss > 0.0) {
    double cov = 0.0;
    for (std::size_t i = 1; i < gaps.size(); ++i)
      cov += (static_cast<double>(gaps[i - 1]) - s.mean) * (static_cast<double>(gaps[i]) - s.mean);
    s.lag1_autocorrelation = cov / ss;
    s.lag1_standard_error = 1.0 / std::sqrt(static_cast<double>(gaps.size()));
  }
  return s;
}

inline GapSummary gap_statistics(const RegenerationReport& rep) {
  if (rep.times.size() < 2)
    throw Error(ErrorKind::TooFewRegenerations,
                "need >= 2 certified regenerations, have " + std::to_string(rep.times.size()));
  return summarize_gaps(std::span<const Time>(rep.gaps));
}

// H evaluated on non-negative integers with H(0) = 0.
using GapFunctional = std::function<double(Time)>;

struct PalmCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_discrepancy() const { return rhs != 0.0 ? std::abs(lhs - rhs) / std::abs(rhs) : std::abs(lhs); }
};

// lhs: time average over t in [1, tau_K] of h(lambda_t - t), where lambda_t is
// the next certified regeneration at or after t and h(x) = H(x+1) - H(x).
// rhs: certified density times the mean of H over the gaps.
inline PalmCheck palm_identity_check(const Trace& trace, const RegenerationReport& rep,
                                     const GapFunctional& H) {
  if (rep.horizon != trace.horizon() || rep.seed != trace.seed())
    throw Error(ErrorKind::TraceMismatch, "report was computed from a different trace");
  if (rep.times.empty() || rep.gaps.empty())
    throw Error(ErrorKind::TooFewRegenerations, "palm check needs at least one certified gap");
  PalmCheck out;
  double sum = 0.0;
  Time t = 1;
  for (const Time next : rep.times) {
    for (; t <= next; ++t) {
      const Time x = next - t;
      sum += H(x + 1) - H(x);
    }
  }
  out.lhs = sum / static_cast<double>(rep.times.back());
  double hsum = 0.0;
  for (const Time g : rep.gaps) hsum += H(g);
  out.rhs = rep.density() * hsum / static_cast<double>(rep.gaps.size());
  return out;
}

}  // namespace acm
