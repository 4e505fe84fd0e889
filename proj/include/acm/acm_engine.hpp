#pragma once

// The ACM recursion G_t = G_{t-1} U f(G_{(t - xi_t)_+}, theta_t).
//
// Vertices are never removed and edges only point to older vertices, so a
// past snapshot G_s is recoverable from two per-vertex facts: the vertex
// exists in G_s iff its mark is <= s, and it is a leaf of G_s iff its
// cover time (first time it gained an in-neighbour) is > s. Leaves of G_s
// are answered from the current leaf set (an order-statistics index over
// vertex ids) plus the vertices covered after s.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "acm/constructions.hpp"
#include "acm/delay_models.hpp"
#include "acm/error.hpp"
#include "acm/fenwick.hpp"
#include "acm/time_delay_graph.hpp"

namespace acm {

inline constexpr Time kNeverCovered = std::numeric_limits<Time>::max();

// Initial graph G_0: vertices 0..vertices-1, all marked 0, vertex 0 the
// distinguished root. Edges (u, v) point from u to v.
struct InitialGraph {
  std::int64_t vertices = 1;
  std::vector<std::pair<VertexId, VertexId>> edges;

  static InitialGraph root_only() { return {}; }
  static InitialGraph star(std::int64_t leaves) {
    InitialGraph g;
    g.vertices = leaves + 1;
    for (VertexId v = 1; v <= leaves; ++v) g.edges.emplace_back(v, 0);
    return g;
  }
};

class ProcessState;

class SnapshotView {
 public:
  std::int64_t time() const { return s_; }
  std::int64_t vertex_count() const;
  std::int64_t leaf_count() const;
  VertexId leaf_at(std::int64_t j) const;
  std::int64_t max_depth() const;
  std::int64_t max_depth_count() const;
  VertexId max_depth_at(std::int64_t j) const;
  VertexId vertex_with_mark(std::int64_t m) const;
  VertexSet leaves() const {
    VertexSet out;
    const auto n = leaf_count();
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) out.push_back(leaf_at(j));
    return out;
  }
  VertexSet deepest() const {
    VertexSet out;
    for (std::int64_t j = 0; j < max_depth_count(); ++j) out.push_back(max_depth_at(j));
    return out;
  }

 private:
  friend class ProcessState;
  SnapshotView(const ProcessState& state, Time s);

  const ProcessState* state_;
  Time s_;
  VertexId last_id_;
  std::int64_t current_below_;   // current leaves with id <= last_id_
  VertexSet recently_covered_;   // leaves of G_s covered after s, sorted
  std::int64_t deepest_count_;
};

static_assert(Snapshot<SnapshotView>);

class ProcessState {
 public:
  static ProcessState init(const InitialGraph& g0 = InitialGraph::root_only(), Time capacity_hint = 0) {
    if (g0.vertices < 1) throw Error(ErrorKind::MalformedInitialGraph, "G_0 needs at least the root");
    const auto n = static_cast<std::size_t>(g0.vertices);
    std::vector<std::vector<VertexId>> out(n);
    std::vector<std::int64_t> indeg(n, 0);
    for (const auto& [u, v] : g0.edges) {
      if (u < 0 || v < 0 || u >= g0.vertices || v >= g0.vertices || u == v)
        throw Error(ErrorKind::MalformedInitialGraph, "edge endpoint out of range or self-loop");
      out[static_cast<std::size_t>(u)].push_back(v);
    }
    for (auto& o : out) {
      std::sort(o.begin(), o.end());
      o.erase(std::unique(o.begin(), o.end()), o.end());
      for (const auto v : o) ++indeg[static_cast<std::size_t>(v)];
    }
    if (!out[0].empty()) throw Error(ErrorKind::MalformedInitialGraph, "root must have out-degree 0");
    for (std::size_t v = 1; v < n; ++v)
      if (out[v].empty()) throw Error(ErrorKind::MalformedInitialGraph, "non-root vertex without out-edge");

    // Longest path to the root via Kahn's order on reversed edges; a
    // leftover vertex means a cycle.
    std::vector<std::int64_t> remaining(n);
    std::vector<std::vector<VertexId>> in(n);
    for (std::size_t u = 0; u < n; ++u) {
      remaining[u] = static_cast<std::int64_t>(out[u].size());
      for (const auto v : out[u]) in[static_cast<std::size_t>(v)].push_back(static_cast<VertexId>(u));
    }
    std::vector<std::int64_t> depth(n, 0);
    std::vector<VertexId> queue{0};
    std::size_t head = 0;
    while (head < queue.size()) {
      const auto v = queue[head++];
      for (const auto u : in[static_cast<std::size_t>(v)]) {
        depth[static_cast<std::size_t>(u)] = std::max(depth[static_cast<std::size_t>(u)], depth[static_cast<std::size_t>(v)] + 1);
        if (--remaining[static_cast<std::size_t>(u)] == 0) queue.push_back(u);
      }
    }
    if (queue.size() != n) throw Error(ErrorKind::MalformedInitialGraph, "G_0 has a cycle");

    ProcessState st;
    st.initial_vertices_ = g0.vertices;
    st.leaves_.reserve(n + static_cast<std::size_t>(std::max<Time>(capacity_hint, 0)));
    st.out_offsets_.push_back(0);
    for (std::size_t v = 0; v < n; ++v) {
      for (const auto w : out[v]) st.out_targets_.push_back(w);
      st.out_offsets_.push_back(static_cast<std::int64_t>(st.out_targets_.size()));
      st.depth_.push_back(depth[v]);
      st.cover_time_.push_back(indeg[v] > 0 ? 0 : kNeverCovered);
      if (indeg[v] == 0) st.leaves_.insert(v);
      st.add_to_depth_list(static_cast<VertexId>(v), depth[v]);
    }
    st.leaf_series_.push_back(st.leaves_.size());
    st.max_depth_series_.push_back(static_cast<std::int64_t>(st.depth_lists_.size()) - 1);
    st.covered_offsets_.push_back(0);
    if (capacity_hint > 0) st.reserve(capacity_hint);
    return st;
  }

  void reserve(Time steps) {
    const auto extra = static_cast<std::size_t>(steps);
    depth_.reserve(depth_.size() + extra);
    cover_time_.reserve(cover_time_.size() + extra);
    out_offsets_.reserve(out_offsets_.size() + extra);
    out_targets_.reserve(out_targets_.size() + extra);
    leaf_series_.reserve(leaf_series_.size() + extra);
    max_depth_series_.reserve(max_depth_series_.size() + extra);
    covered_offsets_.reserve(covered_offsets_.size() + extra);
    covered_.reserve(covered_.size() + extra);
  }

  Time time() const noexcept { return static_cast<Time>(leaf_series_.size()) - 1; }
  std::int64_t initial_vertices() const noexcept { return initial_vertices_; }
  std::int64_t vertex_count() const noexcept { return static_cast<std::int64_t>(depth_.size()); }
  std::int64_t edge_count() const noexcept { return static_cast<std::int64_t>(out_targets_.size()); }
  VertexId root() const noexcept { return 0; }

  // Largest vertex id present in G_s.
  VertexId last_id(Time s) const noexcept { return initial_vertices_ - 1 + s; }
  VertexId vertex_of_time(Time t) const noexcept { return t == 0 ? 0 : initial_vertices_ - 1 + t; }
  Time mark(VertexId v) const noexcept { return v < initial_vertices_ ? 0 : v - initial_vertices_ + 1; }

  std::span<const VertexId> out_edges(VertexId v) const {
    const auto i = static_cast<std::size_t>(v);
    return std::span<const VertexId>(out_targets_).subspan(
        static_cast<std::size_t>(out_offsets_[i]), static_cast<std::size_t>(out_offsets_[i + 1] - out_offsets_[i]));
  }
  Time cover_time(VertexId v) const { return cover_time_[static_cast<std::size_t>(v)]; }
  std::int64_t depth(VertexId v) const { return depth_[static_cast<std::size_t>(v)]; }
  bool is_leaf_at(VertexId v, Time s) const { return v <= last_id(s) && cover_time(v) > s; }

  std::int64_t leaf_count(Time s) const { return leaf_series_[static_cast<std::size_t>(s)]; }
  std::int64_t max_depth(Time s) const { return max_depth_series_[static_cast<std::size_t>(s)]; }
  std::span<const std::int64_t> leaf_series() const noexcept { return leaf_series_; }
  std::span<const std::int64_t> max_depth_series() const noexcept { return max_depth_series_; }

  SnapshotView snapshot(Time s) const {
    if (s < 0 || s > time())
      throw Error(ErrorKind::FutureSnapshot, "snapshot " + std::to_string(s) + " beyond time " + std::to_string(time()));
    return SnapshotView(*this, s);
  }

  // Leaves of G_s by a direct scan; O(|G_s|).
  VertexSet leaves_at(Time s) const {
    if (s < 0 || s > time()) throw Error(ErrorKind::FutureSnapshot, "snapshot beyond current time");
    VertexSet out;
    for (VertexId v = 0; v <= last_id(s); ++v)
      if (cover_time(v) > s) out.push_back(v);
    return out;
  }

  // Adds vertex t attached to select(spec, G_{(t - xi)_+}, theta).
  void step(Time t, Delay xi, const ConstructionSpec& spec, ThetaStream& theta) {
    if (t != time() + 1) throw Error(ErrorKind::ConfigError, "steps must be consecutive");
    if (xi < 1) throw Error(ErrorKind::MalformedSpec, "delay must be >= 1");
    const Time s = std::max<Time>(t - xi, 0);
    VertexSet targets;
    {
      const SnapshotView view(*this, s);
      targets = select(spec, view, theta);
    }
    attach(t, targets);
  }

  // Adds vertex t with the given (sorted, unique, existing) targets.
  void attach(Time t, const VertexSet& targets) {
    if (targets.empty()) throw Error(ErrorKind::EmptySnapshot, "construction returned no targets");
    const VertexId v = vertex_of_time(t);
    std::int64_t d = 0;
    std::int64_t newly_covered = 0;
    for (const auto w : targets) {
      out_targets_.push_back(w);
      d = std::max(d, depth(w) + 1);
      auto& ct = cover_time_[static_cast<std::size_t>(w)];
      if (ct == kNeverCovered) {
        ct = t;
        leaves_.erase(static_cast<std::size_t>(w));
        covered_.push_back(w);
        ++newly_covered;
      }
    }
    out_offsets_.push_back(static_cast<std::int64_t>(out_targets_.size()));
    covered_offsets_.push_back(static_cast<std::int64_t>(covered_.size()));
    depth_.push_back(d);
    cover_time_.push_back(kNeverCovered);
    leaves_.insert(static_cast<std::size_t>(v));
    add_to_depth_list(v, d);
    leaf_series_.push_back(leaf_series_.back() + 1 - newly_covered);
    max_depth_series_.push_back(std::max(max_depth_series_.back(), d));
  }

  std::vector<std::pair<VertexId, VertexId>> edges() const {
    std::vector<std::pair<VertexId, VertexId>> out;
    out.reserve(out_targets_.size());
    for (VertexId v = 0; v < vertex_count(); ++v)
      for (const auto w : out_edges(v)) out.emplace_back(v, w);
    return out;
  }

 private:
  friend class SnapshotView;

  void add_to_depth_list(VertexId v, std::int64_t d) {
    if (static_cast<std::size_t>(d) >= depth_lists_.size()) depth_lists_.resize(static_cast<std::size_t>(d) + 1);
    depth_lists_[static_cast<std::size_t>(d)].push_back(v);
  }

  std::int64_t initial_vertices_ = 1;
  std::vector<std::int64_t> out_offsets_;
  std::vector<VertexId> out_targets_;
  std::vector<Time> cover_time_;
  std::vector<std::int64_t> depth_;
  std::vector<std::vector<VertexId>> depth_lists_;  // ids per depth, increasing
  std::vector<std::int64_t> leaf_series_;
  std::vector<std::int64_t> max_depth_series_;
  std::vector<std::int64_t> covered_offsets_;  // covered_[off[t-1], off[t]) gained an in-edge at t
  std::vector<VertexId> covered_;
  FenwickSet leaves_;  // leaves of the current graph
};

inline SnapshotView::SnapshotView(const ProcessState& state, Time s)
    : state_(&state), s_(s), last_id_(state.last_id(s)) {
  current_below_ = state.leaves_.count_below(static_cast<std::size_t>(last_id_) + 1);
  const Time now = state.time();
  const auto lo = static_cast<std::size_t>(state.covered_offsets_[static_cast<std::size_t>(s)]);
  const auto hi = static_cast<std::size_t>(state.covered_offsets_[static_cast<std::size_t>(now)]);
  for (std::size_t i = lo; i < hi; ++i)
    if (state.covered_[i] <= last_id_) recently_covered_.push_back(state.covered_[i]);
  std::sort(recently_covered_.begin(), recently_covered_.end());
  const auto& list = state.depth_lists_[static_cast<std::size_t>(state.max_depth(s))];
  deepest_count_ = std::upper_bound(list.begin(), list.end(), last_id_) - list.begin();
}

inline std::int64_t SnapshotView::vertex_count() const { return last_id_ + 1; }
inline std::int64_t SnapshotView::leaf_count() const { return state_->leaf_count(s_); }
inline std::int64_t SnapshotView::max_depth() const { return state_->max_depth(s_); }
inline std::int64_t SnapshotView::max_depth_count() const { return deepest_count_; }
inline VertexId SnapshotView::vertex_with_mark(std::int64_t m) const { return state_->vertex_of_time(m); }

inline VertexId SnapshotView::max_depth_at(std::int64_t j) const {
  return state_->depth_lists_[static_cast<std::size_t>(max_depth())][static_cast<std::size_t>(j)];
}

// Rank j in the merge of current leaves (id <= last_id_) and recently covered.
inline VertexId SnapshotView::leaf_at(std::int64_t j) const {
  const auto& fen = state_->leaves_;
  for (std::size_t i = 0; i < recently_covered_.size(); ++i) {
    const auto e = recently_covered_[i];
    const auto before = fen.count_below(static_cast<std::size_t>(e)) + static_cast<std::int64_t>(i);
    if (j < before) return static_cast<VertexId>(fen.kth(j - static_cast<std::int64_t>(i)));
    if (j == before) return e;
  }
  return static_cast<VertexId>(fen.kth(j - static_cast<std::int64_t>(recently_covered_.size())));
}

struct RunResult {
  ProcessState state;
  Trace trace;
};

inline ProcessState run_on_trace(const Trace& trace, const ConstructionSpec& spec,
                                 const InitialGraph& g0 = InitialGraph::root_only()) {
  validate(spec);
  auto state = ProcessState::init(g0, trace.horizon());
  for (Time t = 1; t <= trace.horizon(); ++t) {
    auto theta = trace.theta(t);
    state.step(t, trace.xi(t), spec, theta);
  }
  return state;
}

inline RunResult run(const DelayModel& model, const ConstructionSpec& spec, Time horizon, std::uint64_t seed,
                     const InitialGraph& g0 = InitialGraph::root_only()) {
  auto trace = sample_trace(model, horizon, seed);
  auto state = run_on_trace(trace, spec, g0);
  return {std::move(state), std::move(trace)};
}

}  // namespace acm
