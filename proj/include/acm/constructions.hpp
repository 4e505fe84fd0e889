#pragma once

// Construction functions: given a (delayed) snapshot of the DAG and the
// per-step randomness theta_t, return the set of vertices the new vertex
// attaches to. Each rule consumes draws from the theta stream in a fixed
// order so runs stay reproducible and couplable:
//   Nakamoto      one draw (index into the max-depth set)
//   KLeaves(k)    none when the snapshot has <= k leaves, else k draws (Floyd)
//   AllLeaves     none
//   Mixture       one draw (component), then the component's draws
//   StateVarying  one draw (coin), then KLeaves(k) or KLeaves(1)
//   TwoEnded      none

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "acm/error.hpp"
#include "acm/rng.hpp"

namespace acm {

using VertexId = std::int64_t;
using VertexSet = std::vector<VertexId>;  // sorted, no duplicates

struct Nakamoto {};
struct KLeaves {
  std::int64_t k = 1;
};
struct AllLeaves {};

using BasicConstruction = std::variant<Nakamoto, KLeaves, AllLeaves>;

struct MixtureComponent {
  BasicConstruction kind;
  double weight = 0.0;
};

struct Mixture {
  std::vector<MixtureComponent> components;
};

// KLeaves(k) with probability min(1, alpha / sqrt(l)), else KLeaves(1), where
// l is the leaf count of the snapshot handed to the rule.
struct StateVarying {
  std::int64_t k = 2;
  double alpha = 0.0;
};

// Attaches to the vertex marked (m-1)_+, m the largest mark of the snapshot.
struct TwoEndedExample {};

using ConstructionSpec = std::variant<Nakamoto, KLeaves, AllLeaves, Mixture, StateVarying, TwoEndedExample>;

// Read-only view of a past graph G_s.
template <typename S>
concept Snapshot = requires(const S& s, std::int64_t j) {
  { s.time() } -> std::convertible_to<std::int64_t>;
  { s.vertex_count() } -> std::convertible_to<std::int64_t>;
  { s.leaf_count() } -> std::convertible_to<std::int64_t>;
  { s.leaf_at(j) } -> std::convertible_to<VertexId>;
  { s.max_depth_count() } -> std::convertible_to<std::int64_t>;
  { s.max_depth_at(j) } -> std::convertible_to<VertexId>;
  { s.vertex_with_mark(j) } -> std::convertible_to<VertexId>;
};

// Plain in-memory snapshot; vertex ids double as marks.
struct ExplicitSnapshot {
  std::int64_t largest_mark = 0;
  std::vector<VertexId> leaves;        // ordered by mark
  std::vector<VertexId> deepest;       // ordered by mark
  std::int64_t vertices = 1;

  std::int64_t time() const { return largest_mark; }
  std::int64_t vertex_count() const { return vertices; }
  std::int64_t leaf_count() const { return static_cast<std::int64_t>(leaves.size()); }
  VertexId leaf_at(std::int64_t j) const { return leaves[static_cast<std::size_t>(j)]; }
  std::int64_t max_depth_count() const { return static_cast<std::int64_t>(deepest.size()); }
  VertexId max_depth_at(std::int64_t j) const { return deepest[static_cast<std::size_t>(j)]; }
  VertexId vertex_with_mark(std::int64_t m) const { return m; }
};

inline void validate(const ConstructionSpec& spec) {
  auto check_k = [](std::int64_t k) {
    if (k < 1) throw Error(ErrorKind::MalformedSpec, "k must be >= 1");
  };
  if (const auto* kl = std::get_if<KLeaves>(&spec)) check_k(kl->k);
  if (const auto* sv = std::get_if<StateVarying>(&spec)) {
    if (sv->k < 2) throw Error(ErrorKind::MalformedSpec, "state-varying k must be >= 2");
    if (!(sv->alpha >= 0.0)) throw Error(ErrorKind::MalformedSpec, "alpha must be >= 0");
  }
  if (const auto* mx = std::get_if<Mixture>(&spec)) {
    if (mx->components.empty()) throw Error(ErrorKind::MalformedSpec, "empty mixture");
    double total = 0.0;
    for (const auto& c : mx->components) {
      if (!(c.weight >= 0.0)) throw Error(ErrorKind::MalformedSpec, "negative mixture weight");
      if (const auto* kl = std::get_if<KLeaves>(&c.kind)) check_k(kl->k);
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::MalformedSpec, "mixture weights must sum to 1");
  }
}

// Probability that a step does something other than KLeaves(1); the
// one-endedness results need it strictly positive.
inline double non_single_leaf_weight(const ConstructionSpec& spec) {
  if (const auto* kl = std::get_if<KLeaves>(&spec)) return kl->k == 1 ? 0.0 : 1.0;
  if (const auto* mx = std::get_if<Mixture>(&spec)) {
    double w = 0.0;
    for (const auto& c : mx->components) {
      const auto* kl = std::get_if<KLeaves>(&c.kind);
      if (!(kl && kl->k == 1)) w += c.weight;
    }
    return w;
  }
  return 1.0;
}

// Rules whose output is always a subset of the snapshot's leaves.
inline bool is_leaf_based(const ConstructionSpec& spec) {
  if (std::holds_alternative<Nakamoto>(spec) || std::holds_alternative<TwoEndedExample>(spec)) return false;
  if (const auto* mx = std::get_if<Mixture>(&spec)) {
    for (const auto& c : mx->components)
      if (std::holds_alternative<Nakamoto>(c.kind)) return false;
  }
  return true;
}

namespace detail {

template <Snapshot S>
VertexSet all_leaves(const S& snap) {
  const std::int64_t n = snap.leaf_count();
  VertexSet out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < n; ++j) out.push_back(snap.leaf_at(j));
  return out;
}

// Floyd's uniform k-subset of {0..n-1}, returned as sorted ranks.
inline std::vector<std::int64_t> floyd_sample(std::int64_t n, std::int64_t k, ThetaStream& theta) {
  std::vector<std::int64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  for (std::int64_t j = n - k; j < n; ++j) {
    const auto r = static_cast<std::int64_t>(theta.uniform_below(static_cast<std::uint64_t>(j + 1)));
    const auto it = std::lower_bound(chosen.begin(), chosen.end(), r);
    if (it != chosen.end() && *it == r) {
      chosen.insert(std::upper_bound(chosen.begin(), chosen.end(), j), j);
    } else {
      chosen.insert(it, r);
    }
  }
  return chosen;
}

template <Snapshot S>
VertexSet select_k_leaves(const S& snap, std::int64_t k, ThetaStream& theta) {
  const std::int64_t n = snap.leaf_count();
  if (n <= k) return all_leaves(snap);
  VertexSet out;
  out.reserve(static_cast<std::size_t>(k));
  for (const auto rank : floyd_sample(n, k, theta)) out.push_back(snap.leaf_at(rank));
  std::sort(out.begin(), out.end());
  return out;
}

template <Snapshot S>
VertexSet select_basic(const BasicConstruction& kind, const S& snap, ThetaStream& theta) {
  return std::visit(
      [&](const auto& c) -> VertexSet {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Nakamoto>) {
          const auto n = snap.max_depth_count();
          const auto j = static_cast<std::int64_t>(theta.uniform_below(static_cast<std::uint64_t>(n)));
          return {snap.max_depth_at(j)};
        } else if constexpr (std::is_same_v<T, KLeaves>) {
          return select_k_leaves(snap, c.k, theta);
        } else {
          return all_leaves(snap);
        }
      },
      kind);
}

inline double state_varying_probability(const StateVarying& sv, std::int64_t leaves) {
  if (leaves <= 0) return 1.0;
  return std::min(1.0, sv.alpha / std::sqrt(static_cast<double>(leaves)));
}

}  // namespace detail

template <Snapshot S>
VertexSet select(const ConstructionSpec& spec, const S& snap, ThetaStream& theta) {
  if (snap.vertex_count() <= 0) throw Error(ErrorKind::EmptySnapshot, "snapshot has no vertices");
  return std::visit(
      [&](const auto& c) -> VertexSet {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Nakamoto> || std::is_same_v<T, KLeaves> ||
                      std::is_same_v<T, AllLeaves>) {
          return detail::select_basic(BasicConstruction{c}, snap, theta);
        } else if constexpr (std::is_same_v<T, Mixture>) {
          const double u = theta.uniform01();
          double acc = 0.0;
          for (const auto& comp : c.components) {
            acc += comp.weight;
            if (u < acc) return detail::select_basic(comp.kind, snap, theta);
          }
          return detail::select_basic(c.components.back().kind, snap, theta);
        } else if constexpr (std::is_same_v<T, StateVarying>) {
          const double p = detail::state_varying_probability(c, snap.leaf_count());
          const double u = theta.uniform01();
          return detail::select_k_leaves(snap, u < p ? c.k : 1, theta);
        } else {
          return {snap.vertex_with_mark(std::max<std::int64_t>(snap.time() - 1, 0))};
        }
      },
      spec);
}

using SelectionDistribution = std::map<VertexSet, double>;

inline constexpr std::int64_t kMaxEnumerableLeaves = 20;

namespace detail {

inline void add_uniform_subsets(const VertexSet& pool, std::int64_t k, double mass, SelectionDistribution& out) {
  const auto n = static_cast<std::int64_t>(pool.size());
  if (n <= k) {
    out[pool] += mass;
    return;
  }
  std::vector<std::int64_t> idx(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::vector<VertexSet> subsets;
  for (;;) {
    VertexSet s;
    for (const auto i : idx) s.push_back(pool[static_cast<std::size_t>(i)]);
    subsets.push_back(std::move(s));
    std::int64_t pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (std::int64_t q = pos + 1; q < k; ++q) idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
  }
  const double each = mass / static_cast<double>(subsets.size());
  for (auto& s : subsets) out[s] += each;
}

template <Snapshot S>
void add_basic_distribution(const BasicConstruction& kind, const S& snap, double mass, SelectionDistribution& out) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Nakamoto>) {
          const auto n = snap.max_depth_count();
          for (std::int64_t j = 0; j < n; ++j) out[{snap.max_depth_at(j)}] += mass / static_cast<double>(n);
        } else if constexpr (std::is_same_v<T, KLeaves>) {
          add_uniform_subsets(all_leaves(snap), c.k, mass, out);
        } else {
          out[all_leaves(snap)] += mass;
        }
      },
      kind);
}

}  // namespace detail

// Exact law of select(spec, snap, .) by enumeration.
template <Snapshot S>
SelectionDistribution selection_distribution(const ConstructionSpec& spec, const S& snap) {
  if (snap.leaf_count() > kMaxEnumerableLeaves || snap.max_depth_count() > kMaxEnumerableLeaves)
    throw Error(ErrorKind::TooLargeToEnumerate, "snapshot too large to enumerate");
  SelectionDistribution out;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Nakamoto> || std::is_same_v<T, KLeaves> ||
                      std::is_same_v<T, AllLeaves>) {
          detail::add_basic_distribution(BasicConstruction{c}, snap, 1.0, out);
        } else if constexpr (std::is_same_v<T, Mixture>) {
          for (const auto& comp : c.components)
            if (comp.weight > 0.0) detail::add_basic_distribution(comp.kind, snap, comp.weight, out);
        } else if constexpr (std::is_same_v<T, StateVarying>) {
          const double p = detail::state_varying_probability(c, snap.leaf_count());
          if (p > 0.0) detail::add_basic_distribution(KLeaves{c.k}, snap, p, out);
          if (p < 1.0) detail::add_basic_distribution(KLeaves{1}, snap, 1.0 - p, out);
        } else {
          out[{snap.vertex_with_mark(std::max<std::int64_t>(snap.time() - 1, 0))}] = 1.0;
        }
      },
      spec);
  return out;
}

// Grammar: nakamoto | f<K> | leaves:K | all | two-ended |
//          state-varying:K:ALPHA | mixture:ITEM=W,ITEM=W,... (ITEM in nakamoto, f<K>, all)
inline BasicConstruction parse_basic_construction(const std::string& text) {
  if (text == "nakamoto" || text == "nak") return Nakamoto{};
  if (text == "all" || text == "finf" || text == "f_inf") return AllLeaves{};
  std::string digits;
  if (text.rfind("leaves:", 0) == 0)
    digits = text.substr(7);
  else if (text.size() > 1 && text[0] == 'f')
    digits = text.substr(1);
  if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos)
    return KLeaves{std::stoll(digits)};
  throw Error(ErrorKind::MalformedSpec, "unknown construction '" + text + "'");
}

inline ConstructionSpec parse_construction_spec(const std::string& text) {
  ConstructionSpec spec;
  if (text == "two-ended") {
    spec = TwoEndedExample{};
  } else if (text.rfind("state-varying:", 0) == 0) {
    const std::string rest = text.substr(14);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::MalformedSpec, "state-varying needs K:ALPHA");
    try {
      spec = StateVarying{std::stoll(rest.substr(0, colon)), std::stod(rest.substr(colon + 1))};
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::MalformedSpec, "bad state-varying parameters '" + rest + "'");
    }
  } else if (text.rfind("mixture:", 0) == 0) {
    Mixture mx;
    std::stringstream ss(text.substr(8));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::MalformedSpec, "mixture item needs KIND=W");
      double w = 0.0;
      try {
        w = std::stod(item.substr(eq + 1));
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::MalformedSpec, "bad mixture weight in '" + item + "'");
      }
      mx.components.push_back({parse_basic_construction(item.substr(0, eq)), w});
    }
    spec = std::move(mx);
  } else {
    spec = std::visit([](const auto& b) -> ConstructionSpec { return b; }, parse_basic_construction(text));
  }
  validate(spec);
  return spec;
}

inline std::string describe(const BasicConstruction& kind) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Nakamoto>) return "nakamoto";
        else if constexpr (std::is_same_v<T, KLeaves>) return "f" + std::to_string(c.k);
        else return "all";
      },
      kind);
}

inline std::string describe(const ConstructionSpec& spec) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Nakamoto> || std::is_same_v<T, KLeaves> ||
                      std::is_same_v<T, AllLeaves>) {
          return describe(BasicConstruction{c});
        } else if constexpr (std::is_same_v<T, Mixture>) {
          std::ostringstream os;
          os << "mixture:";
          for (std::size_t i = 0; i < c.components.size(); ++i)
            os << (i ? "," : "") << describe(c.components[i].kind) << "=" << c.components[i].weight;
          return os.str();
        } else if constexpr (std::is_same_v<T, StateVarying>) {
          std::ostringstream os;
          os << "state-varying:" << c.k << ":" << c.alpha;
          return os.str();
        } else {
          return "two-ended";
        }
      },
      spec);
}

}  // namespace acm
