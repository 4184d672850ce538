// Randomized invariants over many generated instances.

#include <gtest/gtest.h>

#include "fsa/verify.hpp"
#include "oracles.hpp"

using namespace fsa;

TEST(Properties, VerifySuitePassesOnRandomInstances) {
  VerifyOptions opt;
  opt.trials = 150;
  opt.seed = 99;
  const auto rep = verify_suite(opt);
  EXPECT_TRUE(rep.passed()) << rep.counterexample;
  EXPECT_EQ(rep.trials, 150u);
}

TEST(Properties, VerifySuiteCatchesAFlippedSample) {
  VerifyOptions opt;
  opt.trials = 30;
  opt.inject_fault = true;
  const auto rep = verify_suite(opt);
  EXPECT_FALSE(rep.passed());
  EXPECT_NE(rep.counterexample.find("instance_seed="), std::string::npos);
}

TEST(Properties, RandomInstancesMatchTheIndependentOracle) {
  const InstanceLimits lim;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto inst = random_instance<double>(s, lim);
    const auto adj = oracle::adjacency_of(inst.graph);
    const auto x = oracle::mat_of(inst.x);
    const auto f1 = fused_1hop_forward(inst.graph, inst.x, inst.seeds, inst.k1, inst.base_seed, false);
    const auto f2 = fused_2hop_forward(inst.graph, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, false);
    ASSERT_EQ(f1.out.values.vec(), oracle::one_hop(adj, x, inst.seeds.seeds, inst.k1, inst.base_seed)) << inst.describe();
    ASSERT_EQ(f2.out.values.vec(), oracle::two_hop(adj, x, inst.seeds.seeds, inst.k1, inst.k2, inst.base_seed))
        << inst.describe();
  }
}

TEST(Properties, GraphInvariantsHoldForEveryConstructor) {
  for (std::uint64_t s = 0; s < 40; ++s) {
    const auto inst = random_instance<float>(s, InstanceLimits{300, 1, 1, 1});
    EXPECT_NO_THROW(inst.graph.validate());
    if (inst.graph.is_symmetric())
      EXPECT_EQ(build_csr(edge_list(inst.graph), inst.graph.num_nodes(), true), inst.graph);
  }
}

TEST(Properties, SampledPairsEqualSumOfTakes) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto inst = random_instance<double>(s + 500, InstanceLimits{});
    const auto f = fused_2hop_forward(inst.graph, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, true);
    std::uint64_t takes = 0;
    for (NodeId v : f.indices->s1) takes += v >= 0;
    for (NodeId v : f.indices->s2) takes += v >= 0;
    EXPECT_EQ(f.sampled_pairs, takes);
  }
}

TEST(Properties, BaselineMemoryGrowsLinearlyInFanoutProduct) {
  const auto g = gen_uniform(5000, 40, 3);
  const auto x = random_features<float>(5000, 16, 1);
  SeedBatch seeds;
  for (int i = 0; i < 128; ++i) seeds.seeds.push_back(i * 37);
  auto peak = [&](std::size_t k1, std::size_t k2) {
    MemoryMeter m;
    { auto r = baseline_forward(g, x, seeds, k1, k2, 1, false, {1, &m}); }
    return static_cast<double>(m.peak());
  };
  // Every degree >= 40, so all slots are full: gathered bytes = B*k1*k2*D*4.
  const double p1 = peak(5, 4), p2 = peak(10, 4), p4 = peak(10, 8);
  EXPECT_NEAR((p2 - p1) / (128.0 * 20 * 16 * 4), 1.0, 0.15);
  EXPECT_GT(p4, 1.9 * p2 - p1);
}

TEST(Properties, GradientCheckOnRandomInstances) {
  GradCheckOptions opt;
  opt.trials = 20;
  const auto rep = grad_check(opt);
  EXPECT_EQ(rep.trials, 20u);
  EXPECT_LT(rep.max_rel_err(), 1e-6) << rep.worst;
  opt.nosave = true;
  EXPECT_EQ(grad_check(opt).max_abs_grad_nosave, 0.0);
}
