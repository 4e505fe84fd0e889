#include <gtest/gtest.h>

#include <map>

#include "acm/constructions.hpp"
#include "acm/stats.hpp"

using namespace acm;

namespace {

ExplicitSnapshot snap(std::vector<VertexId> leaves, std::vector<VertexId> deepest = {0}, std::int64_t largest_mark = 10) {
  ExplicitSnapshot s;
  s.leaves = std::move(leaves);
  s.deepest = std::move(deepest);
  s.largest_mark = largest_mark;
  s.vertices = largest_mark + 1;
  return s;
}

// Pearson p-value of 1e5 draws of select against the enumerated law.
double sampling_p_value(const ConstructionSpec& spec, const ExplicitSnapshot& s, std::uint64_t seed = 1) {
  const auto law = selection_distribution(spec, s);
  std::map<VertexSet, double> counts;
  constexpr int kDraws = 100000;
  for (int t = 1; t <= kDraws; ++t) {
    ThetaStream theta(seed, static_cast<std::uint64_t>(t));
    const auto got = select(spec, s, theta);
    EXPECT_TRUE(law.count(got)) << "outcome outside the support";
    counts[got] += 1.0;
  }
  std::vector<double> obs, exp;
  for (const auto& [set, p] : law) {
    obs.push_back(counts[set]);
    exp.push_back(p * kDraws);
  }
  if (obs.size() < 2) return 1.0;
  return stats::chi_square_gof(obs, exp).p_value;
}

}  // namespace

TEST(Select, KLeavesTakesAllWhenFewer) {
  ThetaStream theta(1, 1);
  EXPECT_EQ(select(KLeaves{2}, snap({4, 7}), theta), (VertexSet{4, 7}));
  EXPECT_EQ(theta.draws_used(), 0u);
}

TEST(Select, AllLeavesOnRoot) {
  ThetaStream theta(1, 1);
  EXPECT_EQ(select(AllLeaves{}, snap({0}, {0}, 0), theta), (VertexSet{0}));
}

TEST(Select, TwoEndedPicksPreviousMark) {
  ThetaStream theta(1, 1);
  EXPECT_EQ(select(TwoEndedExample{}, snap({2}, {2}, 2), theta), (VertexSet{1}));
  ThetaStream theta0(1, 1);
  EXPECT_EQ(select(TwoEndedExample{}, snap({0}, {0}, 0), theta0), (VertexSet{0}));
}

TEST(Select, NakamotoPicksDeepest) {
  ThetaStream theta(3, 9);
  const auto got = select(Nakamoto{}, snap({5, 6, 7}, {6, 7}), theta);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_TRUE(got[0] == 6 || got[0] == 7);
  EXPECT_EQ(theta.draws_used(), 1u);
}

TEST(Select, ResultsAreSortedSubsetsOfLeaves) {
  const auto s = snap({1, 3, 4, 8, 9, 12, 15});
  for (const ConstructionSpec& spec : {ConstructionSpec{KLeaves{1}}, ConstructionSpec{KLeaves{3}}, ConstructionSpec{AllLeaves{}},
                                      ConstructionSpec{StateVarying{2, 1.0}},
                                      ConstructionSpec{Mixture{{{KLeaves{1}, 0.5}, {KLeaves{4}, 0.5}}}}}) {
    for (std::uint64_t t = 1; t < 200; ++t) {
      ThetaStream theta(5, t);
      const auto got = select(spec, s, theta);
      ASSERT_FALSE(got.empty());
      EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
      EXPECT_EQ(std::adjacent_find(got.begin(), got.end()), got.end());
      for (const auto v : got) EXPECT_TRUE(std::binary_search(s.leaves.begin(), s.leaves.end(), v));
    }
  }
}

TEST(Select, EmptySnapshotRejected) {
  ExplicitSnapshot s;
  s.vertices = 0;
  ThetaStream theta(1, 1);
  try {
    select(KLeaves{1}, s, theta);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptySnapshot);
  }
}

TEST(Select, DeterministicGivenTheta) {
  const auto s = snap({1, 2, 3, 4, 5, 6});
  for (std::uint64_t t = 1; t < 50; ++t) {
    ThetaStream a(11, t), b(11, t);
    EXPECT_EQ(select(KLeaves{3}, s, a), select(KLeaves{3}, s, b));
  }
}

TEST(Distribution, SingleLeafUniform) {
  const auto d = selection_distribution(KLeaves{1}, snap({1, 2, 3}));
  ASSERT_EQ(d.size(), 3u);
  for (const auto& [set, p] : d) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Distribution, PairsOfThree) {
  const auto d = selection_distribution(KLeaves{2}, snap({1, 2, 3}));
  ASSERT_EQ(d.size(), 3u);
  for (const auto& [set, p] : d) {
    EXPECT_EQ(set.size(), 2u);
    EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  }
}

TEST(Distribution, EvenMixtureOnTwoLeaves) {
  const Mixture mx{{{KLeaves{1}, 0.5}, {KLeaves{2}, 0.5}}};
  const auto d = selection_distribution(mx, snap({4, 9}));
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d.at({4}), 0.25, 1e-15);
  EXPECT_NEAR(d.at({9}), 0.25, 1e-15);
  EXPECT_NEAR(d.at({4, 9}), 0.5, 1e-15);
}

TEST(Distribution, TooLargeToEnumerate) {
  std::vector<VertexId> leaves(21);
  for (int i = 0; i < 21; ++i) leaves[static_cast<std::size_t>(i)] = i;
  try {
    selection_distribution(KLeaves{2}, snap(leaves));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooLargeToEnumerate);
  }
}

TEST(Distribution, StateVaryingReductions) {
  const auto s = snap({1, 2, 3, 4});
  EXPECT_EQ(selection_distribution(StateVarying{2, 0.0}, s), selection_distribution(KLeaves{1}, s));
  // alpha / sqrt(4) = 1.
  EXPECT_EQ(selection_distribution(StateVarying{2, 2.0}, s), selection_distribution(KLeaves{2}, s));
  EXPECT_EQ(selection_distribution(StateVarying{3, 50.0}, s), selection_distribution(KLeaves{3}, s));
  const auto mid = selection_distribution(StateVarying{2, 1.0}, s);  // p = 1/2
  EXPECT_NEAR(mid.at({1}), 0.5 / 4.0, 1e-15);
  EXPECT_NEAR(mid.at({1, 2}), 0.5 / 6.0, 1e-15);
}

TEST(Distribution, SumsToOne) {
  const auto s = snap({1, 2, 3, 4, 5, 6}, {2, 5});
  for (const ConstructionSpec& spec :
       {ConstructionSpec{Nakamoto{}}, ConstructionSpec{KLeaves{1}}, ConstructionSpec{KLeaves{4}}, ConstructionSpec{AllLeaves{}},
        ConstructionSpec{StateVarying{3, 0.7}}, ConstructionSpec{TwoEndedExample{}},
        ConstructionSpec{Mixture{{{Nakamoto{}, 0.2}, {KLeaves{2}, 0.3}, {AllLeaves{}, 0.5}}}}}) {
    double total = 0.0;
    for (const auto& [set, p] : selection_distribution(spec, s)) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12) << describe(spec);
  }
}

class SamplingMatchesLaw : public ::testing::TestWithParam<std::string> {};

TEST_P(SamplingMatchesLaw, ChiSquare) {
  const auto spec = parse_construction_spec(GetParam());
  const auto s = snap({2, 3, 5, 8, 13, 21}, {8, 13, 21});
  EXPECT_GT(sampling_p_value(spec, s), 0.01) << GetParam();
}

INSTANTIATE_TEST_SUITE_P(Kinds, SamplingMatchesLaw,
                         ::testing::Values("nakamoto", "f1", "f2", "f3", "f5", "f6", "all", "two-ended",
                                           "state-varying:2:1.2", "state-varying:3:0.5",
                                           "mixture:f1=0.3,f2=0.3,nakamoto=0.4", "mixture:f1=0.9,all=0.1"));

TEST(SamplingMatchesLaw, SmallLeafSets) {
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<VertexId> leaves;
    for (std::size_t i = 0; i < n; ++i) leaves.push_back(static_cast<VertexId>(3 * i + 1));
    EXPECT_GT(sampling_p_value(KLeaves{2}, snap(leaves), 100 + n), 0.01) << n;
  }
}

TEST(Validate, Rejects) {
  EXPECT_THROW(validate(KLeaves{0}), Error);
  EXPECT_THROW(validate(StateVarying{1, 1.0}), Error);
  EXPECT_THROW(validate(StateVarying{2, -1.0}), Error);
  EXPECT_THROW(validate(Mixture{}), Error);
  EXPECT_THROW(validate(Mixture{{{KLeaves{1}, 0.5}, {KLeaves{2}, 0.6}}}), Error);
  EXPECT_THROW(validate(Mixture{{{KLeaves{1}, -0.5}, {KLeaves{2}, 1.5}}}), Error);
  EXPECT_NO_THROW(validate(Mixture{{{KLeaves{1}, 0.25}, {KLeaves{2}, 0.75}}}));
}

TEST(Validate, NonSingleLeafWeight) {
  EXPECT_DOUBLE_EQ(non_single_leaf_weight(KLeaves{1}), 0.0);
  EXPECT_DOUBLE_EQ(non_single_leaf_weight(KLeaves{2}), 1.0);
  EXPECT_NEAR(non_single_leaf_weight(Mixture{{{KLeaves{1}, 0.9}, {KLeaves{2}, 0.1}}}), 0.1, 1e-15);
  EXPECT_TRUE(is_leaf_based(KLeaves{3}));
  EXPECT_FALSE(is_leaf_based(Nakamoto{}));
}

TEST(Parse, RoundTrip) {
  for (const std::string text : {"nakamoto", "f1", "f7", "all", "two-ended", "state-varying:2:0.5",
                                 "mixture:f1=0.9,f2=0.1"}) {
    EXPECT_EQ(describe(parse_construction_spec(text)), text);
  }
  EXPECT_EQ(describe(parse_construction_spec("leaves:3")), "f3");
  EXPECT_THROW(parse_construction_spec("f"), Error);
  EXPECT_THROW(parse_construction_spec("f0"), Error);
  EXPECT_THROW(parse_construction_spec("tree"), Error);
  EXPECT_THROW(parse_construction_spec("state-varying:2"), Error);
  EXPECT_THROW(parse_construction_spec("mixture:f1=0.5"), Error);
}

TEST(Floyd, UniformRanks) {
  // Each rank of {0..4} appears in a 2-subset with probability 2/5.
  std::vector<double> hits(5, 0.0);
  constexpr int kDraws = 50000;
  for (int t = 1; t <= kDraws; ++t) {
    ThetaStream theta(77, static_cast<std::uint64_t>(t));
    const auto ranks = detail::floyd_sample(5, 2, theta);
    ASSERT_EQ(ranks.size(), 2u);
    ASSERT_LT(ranks[0], ranks[1]);
    for (const auto r : ranks) hits[static_cast<std::size_t>(r)] += 1.0;
  }
  for (const double h : hits) EXPECT_NEAR(h / kDraws, 0.4, 0.01);
}
