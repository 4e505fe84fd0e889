#pragma once

// Delay laws on {1, 2, ...} and the closed-form constants derived from them:
// the chi law of the longest-chain increment gaps, the growth rate lambda and
// the regeneration probability q (q-tilde for minimal support r > 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "acm/error.hpp"

namespace acm {

using Delay = std::int64_t;

struct Deterministic {
  Delay value = 1;
};

// P(xi = k) = p (1-p)^(k-1), k >= 1.
struct Geometric {
  double p = 0.5;
};

// xi = shift + G with G ~ Geometric(p); support starts at shift + 1.
struct ShiftedGeometric {
  Delay shift = 0;
  double p = 0.5;
};

struct FiniteSupport {
  std::vector<std::pair<Delay, double>> atoms;
};

using DelaySpec = std::variant<Deterministic, Geometric, ShiftedGeometric, FiniteSupport>;

inline constexpr double kDefaultTailEps = 1e-12;
inline constexpr double kDefaultCensorEps = 1e-9;

class DelayModel {
 public:
  const DelaySpec& spec() const noexcept { return spec_; }
  Delay r() const noexcept { return r_; }
  double mean() const noexcept { return mean_; }
  double second_moment() const noexcept { return second_moment_; }
  double tail_truncation_eps() const noexcept { return tail_eps_; }
  // Largest support point, when the law has bounded support.
  std::optional<Delay> max_support() const noexcept { return max_support_; }

  double pmf(Delay k) const {
    if (k < 1) return 0.0;
    return std::visit(
        [k](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Deterministic>) {
            return k == s.value ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return s.p * std::pow(1.0 - s.p, static_cast<double>(k - 1));
          } else if constexpr (std::is_same_v<T, ShiftedGeometric>) {
            if (k <= s.shift) return 0.0;
            return s.p * std::pow(1.0 - s.p, static_cast<double>(k - s.shift - 1));
          } else {
            for (const auto& [v, w] : s.atoms)
              if (v == k) return w;
            return 0.0;
          }
        },
        spec_);
  }

  // P(xi >= k).
  double survival(Delay k) const {
    if (k <= 1) return 1.0;
    return std::visit(
        [k](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Deterministic>) {
            return k <= s.value ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return std::pow(1.0 - s.p, static_cast<double>(k - 1));
          } else if constexpr (std::is_same_v<T, ShiftedGeometric>) {
            if (k <= s.shift + 1) return 1.0;
            return std::pow(1.0 - s.p, static_cast<double>(k - s.shift - 1));
          } else {
            double acc = 0.0;
            for (const auto& [v, w] : s.atoms)
              if (v >= k) acc += w;
            return std::min(acc, 1.0);
          }
        },
        spec_);
  }

  // P(xi <= k).
  double cdf(Delay k) const { return 1.0 - survival(k + 1); }

  // E(xi - a)_+ for integer a >= 0; equals sum_{s >= a} P(xi > s).
  double expected_excess(Delay a) const {
    a = std::max<Delay>(a, 0);
    return std::visit(
        [a, this](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Deterministic>) {
            return static_cast<double>(std::max<Delay>(s.value - a, 0));
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return std::pow(1.0 - s.p, static_cast<double>(a)) / s.p;
          } else if constexpr (std::is_same_v<T, ShiftedGeometric>) {
            if (a <= s.shift) return static_cast<double>(s.shift - a) + 1.0 / s.p;
            return std::pow(1.0 - s.p, static_cast<double>(a - s.shift)) / s.p;
          } else {
            (void)this;
            double acc = 0.0;
            for (const auto& [v, w] : s.atoms)
              if (v > a) acc += w * static_cast<double>(v - a);
            return acc;
          }
        },
        spec_);
  }

  // Inverse-CDF sample from a uniform u in (0, 1).
  Delay quantile(double u) const {
    return std::visit(
        [u](const auto& s) -> Delay {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Deterministic>) {
            return s.value;
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return 1 + geometric_failures(s.p, u);
          } else if constexpr (std::is_same_v<T, ShiftedGeometric>) {
            return s.shift + 1 + geometric_failures(s.p, u);
          } else {
            double acc = 0.0;
            for (const auto& [v, w] : s.atoms) {
              acc += w;
              if (u < acc) return v;
            }
            return s.atoms.back().first;
          }
        },
        spec_);
  }

  // Smallest W such that sum_{s > W} P(xi > s) < censor_eps; for bounded
  // support the largest support point. A candidate time t <= T - W can no
  // longer be invalidated by delays past the horizon except with
  // probability below censor_eps.
  Delay censor_margin(double censor_eps = kDefaultCensorEps) const {
    if (max_support_) return *max_support_;
    Delay w = 0;
    while (expected_excess(w + 1) >= censor_eps) {
      w = (w == 0) ? 1 : w * 2;
    }
    Delay lo = 0, hi = w;  // invariant: excess(hi + 1) < eps
    while (lo < hi) {
      const Delay mid = lo + (hi - lo) / 2;
      if (expected_excess(mid + 1) < censor_eps)
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&os](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Deterministic>) {
            os << "det:" << s.value;
          } else if constexpr (std::is_same_v<T, Geometric>) {
            os << "geometric:" << s.p;
          } else if constexpr (std::is_same_v<T, ShiftedGeometric>) {
            os << "shifted-geometric:" << s.shift << ":" << s.p;
          } else {
            os << "finite:";
            bool first = true;
            for (const auto& [v, w] : s.atoms) {
              if (!first) os << ",";
              os << v << "=" << w;
              first = false;
            }
          }
        },
        spec_);
    return os.str();
  }

 private:
  friend DelayModel make_delay_model(DelaySpec spec, double tail_eps);

  static Delay geometric_failures(double p, double u) {
    if (p >= 1.0) return 0;
    return static_cast<Delay>(std::floor(std::log1p(-u) / std::log1p(-p)));
  }

  DelaySpec spec_;
  Delay r_ = 1;
  double mean_ = 1.0;
  double second_moment_ = 1.0;
  double tail_eps_ = kDefaultTailEps;
  std::optional<Delay> max_support_;
};

inline DelayModel make_delay_model(DelaySpec spec, double tail_eps = kDefaultTailEps) {
  if (!(tail_eps > 0.0 && tail_eps < 1.0))
    throw Error(ErrorKind::MalformedSpec, "tail truncation eps must lie in (0,1)");
  DelayModel m;
  m.tail_eps_ = tail_eps;
  std::visit(
      [&m](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Deterministic>) {
          if (s.value < 1) throw Error(ErrorKind::MalformedSpec, "deterministic delay must be >= 1");
          m.r_ = s.value;
          m.mean_ = static_cast<double>(s.value);
          m.second_moment_ = m.mean_ * m.mean_;
          m.max_support_ = s.value;
        } else if constexpr (std::is_same_v<T, Geometric> || std::is_same_v<T, ShiftedGeometric>) {
          if (std::isnan(s.p) || s.p < 0.0 || s.p > 1.0)
            throw Error(ErrorKind::MalformedSpec, "geometric parameter must lie in (0,1]");
          if (s.p == 0.0) throw Error(ErrorKind::InfiniteMean, "geometric parameter p = 0");
          Delay shift = 0;
          if constexpr (std::is_same_v<T, ShiftedGeometric>) {
            if (s.shift < 0) throw Error(ErrorKind::MalformedSpec, "shift must be >= 0");
            shift = s.shift;
          }
          const double g_mean = 1.0 / s.p;
          const double g_var = (1.0 - s.p) / (s.p * s.p);
          m.r_ = shift + 1;
          m.mean_ = static_cast<double>(shift) + g_mean;
          m.second_moment_ = g_var + m.mean_ * m.mean_;
          if (s.p == 1.0) m.max_support_ = shift + 1;
        } else {
          if (s.atoms.empty()) throw Error(ErrorKind::MalformedSpec, "finite support is empty");
          double total = 0.0;
          for (const auto& [v, w] : s.atoms) {
            if (v < 1) throw Error(ErrorKind::MalformedSpec, "support point below 1");
            if (!(w >= 0.0)) throw Error(ErrorKind::MalformedSpec, "negative probability");
            total += w;
          }
          if (std::abs(total - 1.0) > 1e-9)
            throw Error(ErrorKind::MalformedSpec, "probabilities sum to " + std::to_string(total));
          std::sort(s.atoms.begin(), s.atoms.end());
          std::vector<std::pair<Delay, double>> merged;
          for (const auto& [v, w] : s.atoms) {
            if (w == 0.0) continue;
            if (!merged.empty() && merged.back().first == v)
              merged.back().second += w / total;
            else
              merged.emplace_back(v, w / total);
          }
          s.atoms = std::move(merged);
          m.r_ = s.atoms.front().first;
          m.max_support_ = s.atoms.back().first;
          m.mean_ = 0.0;
          m.second_moment_ = 0.0;
          for (const auto& [v, w] : s.atoms) {
            m.mean_ += w * static_cast<double>(v);
            m.second_moment_ += w * static_cast<double>(v) * static_cast<double>(v);
          }
        }
      },
      spec);
  m.spec_ = std::move(spec);
  return m;
}

struct ChiLaw {
  std::vector<double> survival;  // survival[k-1] = P(chi >= k), k = 1..K
  double mean = 0.0;
  double variance = 0.0;
  Delay truncation_point = 0;  // K

  // P(chi >= k) for any k >= 1; zero beyond the truncation point.
  double tail(Delay k) const {
    if (k <= 1) return 1.0;
    if (static_cast<std::size_t>(k) > survival.size()) return 0.0;
    return survival[static_cast<std::size_t>(k - 1)];
  }
  double pmf(Delay k) const { return tail(k) - tail(k + 1); }
};

// P(chi >= k) = prod_{i=1}^k P(xi >= i), truncated at the first k with
// survival below eps.
inline ChiLaw chi_law(const DelayModel& model, std::optional<double> eps = std::nullopt) {
  const double cut = eps.value_or(model.tail_truncation_eps());
  ChiLaw law;
  double s = 1.0;
  double second = 0.0;
  for (Delay k = 1;; ++k) {
    s *= model.survival(k);
    law.survival.push_back(s);
    law.mean += s;
    second += static_cast<double>(2 * k - 1) * s;
    if (s < cut) {
      law.truncation_point = k;
      break;
    }
  }
  law.variance = std::max(0.0, second - law.mean * law.mean);
  return law;
}

// gcd of the support; infinite-support laws here always have period 1.
inline Delay support_period(const DelayModel& model) {
  return std::visit(
      [](const auto& s) -> Delay {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Deterministic>) {
          return s.value;
        } else if constexpr (std::is_same_v<T, FiniteSupport>) {
          Delay g = 0;
          for (const auto& [v, w] : s.atoms) g = std::gcd(g, v);
          return g;
        } else if constexpr (std::is_same_v<T, ShiftedGeometric>) {
          return s.p == 1.0 ? s.shift + 1 : 1;
        } else {
          return 1;
        }
      },
      model.spec());
}

// Asymptotic growth rate of the longest chain, 1 / E chi.
inline double lambda_closed_form(const DelayModel& model) { return 1.0 / chi_law(model).mean; }

struct RegenProbability {
  double value = 1.0;
  Delay truncation_point = 0;  // last factor index s included
  double truncation_bound = 0.0;  // sum_{s > t} P(xi > s) bounds q_t - q
};

// q-tilde = prod_{s >= 0} P(xi <= max(s, r)); equals q when r = 1.
inline RegenProbability regen_probability_detail(const DelayModel& model) {
  const Delay r = model.r();
  RegenProbability out;
  const double base = model.cdf(r);
  double prod = std::pow(base, static_cast<double>(r + 1));  // s = 0..r
  Delay s = r;
  for (;;) {
    const double bound = model.expected_excess(s + 1);
    if (bound < model.tail_truncation_eps() || prod == 0.0) {
      out.truncation_point = s;
      out.truncation_bound = bound;
      break;
    }
    ++s;
    prod *= model.cdf(s);
  }
  out.value = prod;
  return out;
}

inline double regen_probability(const DelayModel& model) {
  return regen_probability_detail(model).value;
}

// Textual delay specs: det:C | geometric:P | shifted-geometric:SHIFT:P |
// finite:V=W,V=W,...
inline DelaySpec parse_delay_spec(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw Error(ErrorKind::MalformedSpec, "expected kind:params, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  auto to_double = [&text](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw Error(ErrorKind::MalformedSpec, "bad number '" + s + "' in '" + text + "'");
    }
    if (used != s.size()) throw Error(ErrorKind::MalformedSpec, "bad number '" + s + "'");
    return v;
  };
  auto to_int = [&text](const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      throw Error(ErrorKind::MalformedSpec, "bad integer '" + s + "' in '" + text + "'");
    }
    if (used != s.size()) throw Error(ErrorKind::MalformedSpec, "bad integer '" + s + "'");
    return static_cast<Delay>(v);
  };
  if (kind == "det" || kind == "deterministic") return Deterministic{to_int(rest)};
  if (kind == "geometric" || kind == "geo") return Geometric{to_double(rest)};
  if (kind == "shifted-geometric" || kind == "shifted") {
    const auto c2 = rest.find(':');
    if (c2 == std::string::npos)
      throw Error(ErrorKind::MalformedSpec, "shifted-geometric needs SHIFT:P");
    return ShiftedGeometric{to_int(rest.substr(0, c2)), to_double(rest.substr(c2 + 1))};
  }
  if (kind == "finite") {
    FiniteSupport fs;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::MalformedSpec, "finite atom needs V=W");
      fs.atoms.emplace_back(to_int(item.substr(0, eq)), to_double(item.substr(eq + 1)));
    }
    return fs;
  }
  throw Error(ErrorKind::MalformedSpec, "unknown delay kind '" + kind + "'");
}

}  // namespace acm
