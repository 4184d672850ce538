#include <gtest/gtest.h>

#include "fsa/fused.hpp"
#include "fsa/generators.hpp"
#include "oracles.hpp"

using namespace fsa;

namespace {

SeedBatch seeds_of(std::vector<NodeId> ids) { return SeedBatch{std::move(ids), {}}; }

// Root 0 with U = {1, 2}; N(1) = {0, 3}, N(2) = {0, 4, 5} once symmetrized. To
// keep the hop-2 sets at {3} and {4, 5} the example is built directed.
CsrGraph two_hop_example() { return build_csr({{0, 1}, {0, 2}, {1, 3}, {2, 4}, {2, 5}}, 6, false); }

FeatureMatrix<double> scalar_features(std::vector<double> v) {
  const std::size_t n = v.size();
  return FeatureMatrix<double>(n, 1, std::move(v));
}

}  // namespace

TEST(Fused1Hop, DegreeBelowFanoutGivesExactMean) {
  const auto g = build_csr({{0, 1}, {0, 2}}, 3, true);
  FeatureMatrix<double> x(3, 2, std::vector<double>{0, 0, 2, 4, 4, 8});
  const auto r = fused_1hop_forward(g, x, seeds_of({0}), 5, 1, true);
  EXPECT_EQ(r.out.row(0)[0], 3.0);
  EXPECT_EQ(r.out.row(0)[1], 6.0);
  EXPECT_EQ(r.indices->takes[0], 2);
  EXPECT_EQ(std::vector<NodeId>(r.indices->samples.begin(), r.indices->samples.end()),
            (std::vector<NodeId>{1, 2, -1, -1, -1}));
  EXPECT_EQ(r.sampled_pairs, 2u);
}

TEST(Fused1Hop, IsolatedNodeGivesZeroRow) {
  const auto g = build_csr({{1, 2}}, 3, true);
  const auto x = random_features<double>(3, 4, 1);
  for (std::size_t k : {1u, 3u}) {
    const auto r = fused_1hop_forward(g, x, seeds_of({0}), k, 9, true);
    for (double v : r.out.row(0)) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(r.indices->takes[0], 0);
    for (NodeId s : r.indices->samples) EXPECT_EQ(s, kPad);
  }
}

TEST(Fused1Hop, HighDegreeMatchesReferenceSampler) {
  std::vector<Edge> e;
  for (int i = 1; i <= 100; ++i) e.emplace_back(0, i);
  const auto g = build_csr(e, 101, true);
  const auto x = random_features<double>(101, 3, 5);
  const auto r = fused_1hop_forward(g, x, seeds_of({0}), 10, 31, true);
  const auto expect = oracle::one_hop(oracle::adjacency_of(g), oracle::mat_of(x), {0}, 10, 31);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(r.out.row(0)[c], expect[c]);
  EXPECT_EQ(r.indices->takes[0], 10);
}

TEST(Fused1Hop, MatchesOracleOnRandomGraphs) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto g = gen_power_law(150, 8, 2.1, s);
    const auto x = random_features<double>(150, 5, s + 100);
    std::vector<NodeId> seeds;
    for (int i = 0; i < 40; ++i) seeds.push_back(static_cast<NodeId>((i * 37 + s) % 150));
    const auto r = fused_1hop_forward(g, x, seeds_of(seeds), 6, s, false);
    const auto expect = oracle::one_hop(oracle::adjacency_of(g), oracle::mat_of(x), seeds, 6, s);
    ASSERT_EQ(std::vector<double>(r.out.values.begin(), r.out.values.end()), expect) << "seed " << s;
  }
}

TEST(Fused1Hop, RejectsBadInputs) {
  const auto g = gen_uniform(10, 2, 1);
  const auto x = random_features<double>(10, 2, 1);
  EXPECT_THROW(fused_1hop_forward(g, x, seeds_of({10}), 3, 0, false), InvalidArgument);
  EXPECT_THROW(fused_1hop_forward(g, x, seeds_of({0}), 0, 0, false), InvalidArgument);
  EXPECT_THROW(fused_1hop_forward(g, random_features<double>(9, 2, 1), seeds_of({0}), 3, 0, false), InvalidArgument);
}

TEST(Fused1HopBackward, SplitsGradientOverTake) {
  SampledIndices1 idx(1, 3, nullptr);
  idx.samples[0] = 1;
  idx.samples[1] = 2;
  idx.takes[0] = 2;
  const std::vector<double> go{1.0};
  const auto g = fused_1hop_backward<double>(go, 1, idx, 4);
  EXPECT_EQ(g.at(0, 0), 0.0);
  EXPECT_EQ(g.at(1, 0), 0.5);
  EXPECT_EQ(g.at(2, 0), 0.5);
  EXPECT_EQ(g.at(3, 0), 0.0);
}

TEST(Fused1HopBackward, ZeroTakeRowContributesNothing) {
  SampledIndices1 idx(1, 2, nullptr);
  const std::vector<double> go{5.0};
  EXPECT_TRUE(fused_1hop_backward<double>(go, 1, idx, 3).all_zero());
}

TEST(Fused1HopBackward, SharedNodeAccumulates) {
  SampledIndices1 idx(2, 4, nullptr);
  idx.samples[0] = 7;
  idx.samples[1] = 1;
  idx.takes[0] = 2;
  for (int t = 0; t < 4; ++t) idx.samples[4 + t] = static_cast<NodeId>(t == 0 ? 7 : t + 1);
  idx.takes[1] = 4;
  const std::vector<double> go{1.0, 1.0};
  EXPECT_EQ(fused_1hop_backward<double>(go, 1, idx, 8).at(7, 0), 0.75);
}

TEST(Fused1HopBackward, RejectsCorruptIndices) {
  SampledIndices1 idx(1, 2, nullptr);
  idx.samples[0] = 9;
  idx.takes[0] = 1;
  const std::vector<double> go{1.0};
  EXPECT_THROW(fused_1hop_backward<double>(go, 1, idx, 5), InvalidArgument);
  idx.samples[0] = 1;
  idx.takes[0] = -1;
  EXPECT_THROW(fused_1hop_backward<double>(go, 1, idx, 5), InvalidArgument);
}

TEST(Fused2Hop, NestedMeanExample) {
  const auto g = two_hop_example();
  const auto x = scalar_features({0, 0, 0, 1, 2, 4});
  const auto r = fused_2hop_forward(g, x, seeds_of({0}), 2, 2, 3, true);
  EXPECT_EQ(r.out.row(0)[0], 2.0);  // ((1/1) + (2+4)/2) / 2
  EXPECT_EQ(r.sampled_pairs, 2u + 3u);
}

TEST(Fused2Hop, NestedMeanBackwardExample) {
  const auto g = two_hop_example();
  const auto x = scalar_features({0, 0, 0, 1, 2, 4});
  const auto r = fused_2hop_forward(g, x, seeds_of({0}), 2, 2, 3, true);
  const std::vector<double> go{1.0};
  const auto gx = fused_2hop_backward<double>(go, 1, *r.indices, 6);
  EXPECT_EQ(gx.at(3, 0), 0.5);
  EXPECT_EQ(gx.at(4, 0), 0.25);
  EXPECT_EQ(gx.at(5, 0), 0.25);
  EXPECT_EQ(gx.at(0, 0) + gx.at(1, 0) + gx.at(2, 0), 0.0);
}

TEST(Fused2Hop, IsolatedRoot) {
  const auto g = build_csr({{1, 2}}, 3, true);
  const auto x = random_features<double>(3, 2, 1);
  const auto r = fused_2hop_forward(g, x, seeds_of({0, 0}), 3, 2, 1, true);
  for (double v : r.out.values) EXPECT_EQ(v, 0.0);
  for (NodeId v : r.indices->s1) EXPECT_EQ(v, kPad);
  const std::vector<double> go(4, 1.0);
  EXPECT_TRUE(fused_2hop_backward<double>(go, 2, *r.indices, 3).all_zero());
}

TEST(Fused2Hop, MatchesOracleOnRandomGraphs) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto g = gen_power_law(200, 6, 2.1, s);
    const auto x = random_features<double>(200, 4, s + 7);
    std::vector<NodeId> roots;
    for (int i = 0; i < 25; ++i) roots.push_back(static_cast<NodeId>((i * 53 + 3 * s) % 200));
    const auto r = fused_2hop_forward(g, x, seeds_of(roots), 5, 4, s * 11, false);
    const auto expect = oracle::two_hop(oracle::adjacency_of(g), oracle::mat_of(x), roots, 5, 4, s * 11);
    ASSERT_EQ(std::vector<double>(r.out.values.begin(), r.out.values.end()), expect) << "seed " << s;
  }
}

TEST(Fused2Hop, FloatMatchesFloatOracle) {
  const auto g = gen_power_law(300, 10, 2.1, 2);
  const auto x = random_features<float>(300, 16, 3);
  std::vector<NodeId> roots{0, 5, 17, 299, 5};
  const auto r = fused_2hop_forward(g, x, seeds_of(roots), 7, 3, 99, false);
  const auto expect = oracle::two_hop(oracle::adjacency_of(g), oracle::mat_of(x), roots, 7, 3, 99);
  EXPECT_EQ(std::vector<float>(r.out.values.begin(), r.out.values.end()), expect);
}

TEST(Fused2Hop, RepeatedRootPositionsSampleIndependently) {
  const auto g = gen_uniform(100, 30, 1);
  const auto x = random_features<double>(100, 2, 1);
  const auto r = fused_2hop_forward(g, x, seeds_of({4, 4}), 5, 5, 8, true);
  EXPECT_FALSE(std::equal(r.indices->hop1(0).begin(), r.indices->hop1(0).end(), r.indices->hop1(1).begin()));
}

TEST(Fused2Hop, NosaveIsBitwiseEqualAndBackwardIsZero) {
  const auto g = gen_power_law(500, 12, 2.1, 1);
  const auto x = random_features<double>(500, 8, 2);
  std::vector<NodeId> roots;
  for (int i = 0; i < 64; ++i) roots.push_back(i * 7);
  const auto saved = fused_2hop_forward(g, x, seeds_of(roots), 6, 4, 5, true);
  const auto ns = fused_2hop_forward_nosave(g, x, seeds_of(roots), 6, 4, 5);
  EXPECT_FALSE(ns.indices.has_value());
  EXPECT_TRUE(saved.out.values == ns.out.values);
  const std::vector<double> go(64 * 8, 1.0);
  EXPECT_TRUE(fused_2hop_backward<double>(go, 8, ns.indices, 500).all_zero());
}

TEST(Fused2Hop, NosaveTransientExcludesIndexStorage) {
  const auto g = gen_uniform(2000, 20, 3);
  const auto x = random_features<float>(2000, 16, 2);
  std::vector<NodeId> roots;
  for (int i = 0; i < 512; ++i) roots.push_back(i * 3);
  const std::size_t b = roots.size(), k1 = 10, k2 = 8, d = 16;
  MemoryMeter meter;
  { auto r = fused_2hop_forward_nosave(g, x, seeds_of(roots), k1, k2, 1, ExecContext{1, &meter}); }
  EXPECT_EQ(meter.current(), 0u);
  // Output plus one worker's scratch: hop-1 ids, hop-2 ids, inner accumulator.
  EXPECT_EQ(meter.peak(), b * d * sizeof(float) + (k1 + k1 * k2) * sizeof(NodeId) + d * sizeof(float));
  EXPECT_LT(meter.peak(), b * k1 * k2 * sizeof(NodeId));

  MemoryMeter saved;
  { auto r = fused_2hop_forward(g, x, seeds_of(roots), k1, k2, 1, true, ExecContext{1, &saved}); }
  EXPECT_GE(saved.peak(), b * (k1 + k1 * k2) * sizeof(NodeId));
}

TEST(Fused2HopBackward, RejectsInconsistentPadding) {
  SampledIndices2 idx(1, 2, 2, nullptr);
  idx.s2[0] = 1;  // hop-2 entry under a padded hop-1 slot
  const std::vector<double> go{1.0};
  EXPECT_THROW(fused_2hop_backward<double>(go, 1, idx, 3), InvalidArgument);
}

TEST(FusedDeterminism, WorkerCountDoesNotChangeAnyBit) {
  const auto g = gen_power_law(3000, 15, 2.1, 8);
  const auto x = random_features<double>(3000, 12, 9);
  std::vector<NodeId> roots;
  for (int i = 0; i < 300; ++i) roots.push_back((i * 101) % 3000);
  const auto ref = fused_2hop_forward(g, x, seeds_of(roots), 10, 5, 77, true, {1, nullptr});
  std::vector<double> go(300 * 12);
  for (std::size_t i = 0; i < go.size(); ++i) go[i] = std::sin(static_cast<double>(i));
  const auto gref = fused_2hop_backward<double>(go, 12, *ref.indices, 3000, {1, nullptr});
  for (unsigned w : {2u, 3u, 4u, 8u}) {
    const auto r = fused_2hop_forward(g, x, seeds_of(roots), 10, 5, 77, true, {w, nullptr});
    EXPECT_TRUE(r.out.values == ref.out.values);
    EXPECT_TRUE(r.indices->s1 == ref.indices->s1);
    EXPECT_TRUE(r.indices->s2 == ref.indices->s2);
    EXPECT_EQ(r.sampled_pairs, ref.sampled_pairs);
    EXPECT_TRUE(fused_2hop_backward<double>(go, 12, *r.indices, 3000, {w, nullptr}).values == gref.values);
  }
}
