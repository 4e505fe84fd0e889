#include <gtest/gtest.h>

#include "acm/analysis.hpp"

using namespace acm;

namespace {

// Definition-level oracle: v is confirmed iff every vertex with id in
// (v, last] reaches v, found by one DFS per vertex.
VertexSet brute_force_confirmed(const ProcessState& st, Time margin) {
  const Time last_mark = st.time() - margin;
  if (last_mark < 1) return {};
  const auto last = st.last_id(last_mark);
  const auto n = static_cast<std::size_t>(last + 1);
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (std::size_t w = 0; w < n; ++w) {
    std::vector<VertexId> stack{static_cast<VertexId>(w)};
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const auto x : st.out_edges(u))
        if (!reach[w][static_cast<std::size_t>(x)]) {
          reach[w][static_cast<std::size_t>(x)] = 1;
          stack.push_back(x);
        }
    }
  }
  VertexSet out;
  for (VertexId v = 0; v < last; ++v) {
    // Vertices of G_0 are compared against every added vertex only.
    const VertexId from = std::max<VertexId>(v + 1, st.initial_vertices());
    bool ok = from <= last;
    for (VertexId w = from; w <= last && ok; ++w) ok = reach[static_cast<std::size_t>(w)][static_cast<std::size_t>(v)];
    if (ok) out.push_back(v);
  }
  return out;
}

ProcessState chain(Time length) {
  if (length == 0) return ProcessState::init();
  return run(make_delay_model(Deterministic{1}), Nakamoto{}, length, 1).state;
}

}  // namespace

TEST(ConfirmedExact, Chain) {
  const auto st = chain(10);
  VertexSet expected;
  for (VertexId v = 0; v < 10; ++v) expected.push_back(v);
  EXPECT_EQ(confirmed_exact(st, 0), expected);
  expected.resize(7);
  EXPECT_EQ(confirmed_exact(st, 3), expected);
  EXPECT_TRUE(confirmed_exact(st, 10).empty());
}

TEST(ConfirmedExact, UnreferencedStarLeaves) {
  auto st = ProcessState::init(InitialGraph::star(3));
  st.attach(1, {1});
  st.attach(2, {4});
  EXPECT_EQ(confirmed_exact(st, 0), (VertexSet{0, 1, 4}));
}

TEST(ConfirmedExact, HorizonLimit) {
  const auto st = chain(50);
  try {
    confirmed_exact(st, 0, 40);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::HorizonTooLargeForExact);
  }
}

TEST(ConfirmedExact, MatchesDefinition) {
  const auto m = make_delay_model(Geometric{0.4});
  for (const auto& text : {"nakamoto", "f1", "f2", "all", "mixture:f1=0.7,f3=0.3"}) {
    for (const auto& g0 : {InitialGraph::root_only(), InitialGraph::star(4)}) {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto res = run(m, parse_construction_spec(text), 300, seed, g0);
        for (const Time margin : {0, 5, 40})
          EXPECT_EQ(confirmed_exact(res.state, margin), brute_force_confirmed(res.state, margin))
              << text << " seed " << seed << " margin " << margin;
      }
    }
  }
}

TEST(ConfirmedExact, LargerMarginKeepsEarlierConfirmations) {
  const auto res = run(make_delay_model(Geometric{0.5}), KLeaves{2}, 3000, 7);
  const auto wide = confirmed_exact(res.state, 10);
  const auto narrow = confirmed_exact(res.state, 200);
  const auto cut = res.state.last_id(res.state.time() - 200);
  for (const auto v : wide)
    if (v < cut) {
      EXPECT_TRUE(std::binary_search(narrow.begin(), narrow.end(), v)) << v;
    }
}

TEST(ConfirmedExact, SingleLeafTreeConfirmsFewVertices) {
  const auto res = run(make_delay_model(Geometric{0.5}), KLeaves{1}, 5000, 3);
  const auto c = confirmed_exact(res.state, 30);
  EXPECT_LT(static_cast<std::int64_t>(c.size()), res.state.leaf_count(5000));
  // Each confirmed vertex lies on the path to the root of the next one.
  for (std::size_t i = 1; i < c.size(); ++i) {
    VertexId u = c[i];
    while (u > c[i - 1]) u = res.state.out_edges(u)[0];
    EXPECT_EQ(u, c[i - 1]);
  }
}

TEST(Certified, ContainedInExact) {
  const auto m = make_delay_model(Geometric{0.5});
  for (const ConstructionSpec& spec : {ConstructionSpec{Nakamoto{}}, ConstructionSpec{KLeaves{2}}}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto res = run(m, spec, 3000, seed);
      const auto rep = confirmation_report(res, m, spec);
      EXPECT_FALSE(rep.confirmed_anchor.empty()) << describe(spec) << " seed " << seed;
      EXPECT_TRUE(rep.anchors_contained()) << describe(spec) << " seed " << seed;
    }
  }
}

TEST(Certified, AnchorsAreHeightIncrements) {
  const auto m = make_delay_model(Geometric{0.5});
  const auto tr = sample_trace(m, 20000, 2);
  const auto h = height_recursion(tr);
  const auto rep = detect_regeneration_times(tr, m);
  const auto anchors = anchor_events_nakamoto(h, rep);
  ASSERT_FALSE(anchors.empty());
  for (const auto t : anchors) {
    EXPECT_EQ(h.X[static_cast<std::size_t>(t)], h.X[static_cast<std::size_t>(t - 1)] + 1);
    EXPECT_TRUE(std::binary_search(rep.times.begin(), rep.times.end(), t + 1));
  }
  EXPECT_THROW(anchor_events_nakamoto(height_recursion(sample_trace(m, 20000, 3)), rep), Error);
}

TEST(Hitting, UnitDelaysAlwaysHit) {
  const auto m = make_delay_model(Deterministic{1});
  const auto hits = single_leaf_hitting(m, KLeaves{1}, 100, 1);
  EXPECT_EQ(hits.times.size(), 99u);
  EXPECT_EQ(hits.count(50), 50u);
}

TEST(Hitting, NeedsUnitMinimalSupport) {
  try {
    single_leaf_hitting(make_delay_model(ShiftedGeometric{1, 0.5}), KLeaves{2}, 100, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::WrongMinimumSupport);
  }
}

TEST(Hitting, HitsHaveOneLeaf) {
  const auto m = make_delay_model(Geometric{0.75});
  const auto res = run(m, KLeaves{2}, 20000, 5);
  const auto hits = single_leaf_hitting(res.state, detect_regeneration_times(res.trace, m));
  EXPECT_GT(hits.times.size(), 10u);
  for (const auto t : hits.times) EXPECT_EQ(res.state.leaf_count(t), 1);
}

TEST(Drift, PooledByHand) {
  DriftReport rep;
  rep.add(1, 1.0);
  rep.add(2, -1.0);
  rep.add(3, -3.0);
  rep.add(5, 2.0);
  EXPECT_EQ(rep.pairs, 4u);
  const auto all = rep.pooled(2);
  EXPECT_EQ(all.n, 3u);
  EXPECT_NEAR(all.mean, -2.0 / 3.0, 1e-15);
  // sample sd of {-1, -3, 2} is sqrt(19/3); t_{0.975, 2} = 4.302652729911275
  EXPECT_NEAR(all.half_width, 4.302652729911275 * std::sqrt(19.0 / 3.0 / 3.0), 1e-9);
  EXPECT_TRUE(std::isinf(rep.pooled(5).half_width));
  EXPECT_EQ(rep.pooled(6).n, 0u);
  const auto bands = rep.dyadic_bands();
  ASSERT_EQ(bands.size(), 3u);
  EXPECT_EQ(bands[1].first, 2);
  EXPECT_EQ(bands[1].second.n, 2u);
  EXPECT_EQ(bands[2].first, 4);
}

TEST(Drift, MergeAddsCounts) {
  DriftReport a, b;
  a.add(3, 1.0);
  b.add(3, -2.0);
  b.hypothesis_holds = false;
  a.merge(b);
  EXPECT_EQ(a.levels.at(3).count, 2u);
  EXPECT_DOUBLE_EQ(a.levels.at(3).mean(), -0.5);
  EXPECT_FALSE(a.hypothesis_holds);
}

TEST(Drift, UnitDelaysAreFlat) {
  const auto rep = foster_drift(make_delay_model(Deterministic{1}), KLeaves{1}, 200, 1);
  EXPECT_FALSE(rep.hypothesis_holds);
  EXPECT_EQ(rep.pairs, 198u);
  ASSERT_EQ(rep.levels.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.levels.at(1).mean(), 0.0);
}

TEST(Drift, LyapunovSumsOverInterval) {
  auto st = ProcessState::init(InitialGraph::star(2));
  st.attach(1, {1});
  st.attach(2, {2});
  // L_0 = 2, L_1 = 2, L_2 = 2.
  EXPECT_EQ(lyapunov_value(st, 0, 1), 2);
  EXPECT_EQ(lyapunov_value(st, 0, 2), 4);
  EXPECT_EQ(lyapunov_value(st, 2, 3), 6);  // clamped at the horizon
}

TEST(Drift, StarStartPullsDown) {
  const auto m = make_delay_model(Geometric{0.75});
  const auto rep = foster_drift(m, KLeaves{2}, 20000, 1, InitialGraph::star(128));
  EXPECT_TRUE(rep.hypothesis_holds);
  EXPECT_LT(rep.pooled(20).upper(), 0.0);
}

TEST(Drift, TooFewRegenerations) {
  RegenerationReport rep;
  rep.times = {3};
  EXPECT_THROW(foster_drift(ProcessState::init(), rep, KLeaves{2}), Error);
}

TEST(LeafGrowth, UnitDelaysAreDegenerate) {
  const auto rep = leaf_growth_exponent(make_delay_model(Deterministic{1}), 2000, 2, 1, 1, 100, 10);
  EXPECT_TRUE(rep.degenerate);
  EXPECT_TRUE(rep.bound_holds);
}

TEST(LeafGrowth, SquareRootScaling) {
  const auto m = make_delay_model(Geometric{0.5});
  const auto rep = leaf_growth_exponent(m, 50000, 8, 1, 2, 1000, 20);
  EXPECT_FALSE(rep.degenerate);
  EXPECT_TRUE(rep.bound_holds);
  EXPECT_NEAR(rep.slope(), 0.5, 0.1);
  EXPECT_DOUBLE_EQ(rep.bound_constant, 2.0 * m.expected_excess(1));
}

TEST(Distance, IdenticalIsZero) {
  const auto a = run(make_delay_model(Geometric{0.5}), KLeaves{2}, 500, 3).state;
  EXPECT_DOUBLE_EQ(graph_distance(a, a), 0.0);
}

TEST(Distance, ChainsDifferingAtRadiusSix) {
  EXPECT_DOUBLE_EQ(graph_distance(chain(5), chain(6)), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(graph_distance(chain(6), chain(5)), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(graph_distance(chain(0), chain(1)), 1.0);
}

TEST(Distance, RootDistancesOfStar) {
  auto st = ProcessState::init(InitialGraph::star(3));
  st.attach(1, {2});
  EXPECT_EQ(root_distances(st), (std::vector<std::int64_t>{0, 1, 1, 1, 2}));
}

TEST(Distance, Ultrametric) {
  const auto m = make_delay_model(Geometric{0.6});
  std::vector<ProcessState> graphs;
  for (const auto& text : {"f1", "f2", "f3", "all", "nakamoto"})
    for (const Time T : {60, 120}) graphs.push_back(run(m, parse_construction_spec(text), T, 4).state);
  for (const auto& a : graphs)
    for (const auto& b : graphs) {
      EXPECT_DOUBLE_EQ(graph_distance(a, b), graph_distance(b, a));
      for (const auto& c : graphs)
        EXPECT_LE(graph_distance(a, c), std::max(graph_distance(a, b), graph_distance(b, c)) + 1e-15);
    }
}

TEST(Commuting, LargeJMatchesAllLeaves) {
  const auto m = make_delay_model(Geometric{0.75});
  const auto rep = commuting_check(m, 3000, 2, {1, 2, 4, 1000000});
  ASSERT_EQ(rep.entries.size(), 4u);
  EXPECT_EQ(rep.entries.back().equality_horizon, 3000);
  EXPECT_EQ(rep.entries.back().coupling_bound, 3000);
  EXPECT_DOUBLE_EQ(rep.entries.back().distance, 0.0);
  EXPECT_TRUE(rep.horizons_dominate_bounds());
}

TEST(Commuting, CouplingAcrossSeeds) {
  const auto m = make_delay_model(Geometric{0.5});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto rep = commuting_check(m, 4000, seed, {1, 2, 4, 8, 16});
    EXPECT_TRUE(rep.horizons_dominate_bounds()) << seed;
    for (const auto& e : rep.entries) EXPECT_GE(e.coupling_bound, 0);
  }
}

TEST(Commuting, PrefixEqualityOfSameRun) {
  const auto tr = sample_trace(make_delay_model(Geometric{0.5}), 800, 3);
  const auto a = run_on_trace(tr, KLeaves{2});
  EXPECT_EQ(prefix_equality_horizon(a, a), 800);
  const auto b = run_on_trace(Trace(tr.seed(), std::vector<Delay>(tr.delays().begin(), tr.delays().begin() + 400)), KLeaves{2});
  EXPECT_EQ(prefix_equality_horizon(a, b), 400);
}

TEST(Phase, ClassificationTable) {
  EXPECT_EQ(classify_regime(0.5, 0), Regime::DivergingLeaves);
  EXPECT_EQ(classify_regime(0.1, 3), Regime::Recurrent);
  EXPECT_EQ(classify_regime(0.5, 3), Regime::Indeterminate);
  EXPECT_EQ(classify_regime(0.1, 0), Regime::Indeterminate);
  EXPECT_EQ(to_string(Regime::Recurrent), "recurrent");
}

TEST(Phase, MonotoneAndWindow) {
  PhaseSweepReport rep;
  rep.points = {{0.1, 0.5, 0, 0.0, Regime::DivergingLeaves},
                {1.0, 0.2, 0, 0.0, Regime::Indeterminate},
                {10.0, 0.0, 9, 0.0, Regime::Recurrent}};
  EXPECT_TRUE(rep.monotone());
  const auto [lo, hi] = rep.transition_window();
  EXPECT_DOUBLE_EQ(*lo, 0.1);
  EXPECT_DOUBLE_EQ(*hi, 10.0);
  std::swap(rep.points[0].regime, rep.points[2].regime);
  EXPECT_FALSE(rep.monotone());
}

TEST(Phase, SweepShapeAndErrors) {
  const auto m = make_delay_model(Geometric{0.75});
  const auto rep = phase_transition_sweep(m, 2, {0.0, 50.0}, 5000, 2, 1, 2, 500, 10);
  ASSERT_EQ(rep.points.size(), 2u);
  EXPECT_EQ(rep.points[1].regime, Regime::Recurrent);
  EXPECT_GT(rep.points[0].exponent, rep.points[1].exponent);
  EXPECT_THROW(phase_transition_sweep(make_delay_model(ShiftedGeometric{1, 0.5}), 2, {1.0}, 100, 1, 1), Error);
}
