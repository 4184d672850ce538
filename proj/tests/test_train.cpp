#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fsa/bench.hpp"
#include "fsa/train.hpp"
#include "oracles.hpp"

using namespace fsa;

namespace {

template <class T>
std::vector<T> rand_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  RngStream s = derive_stream(seed, 0, 0x7E, 0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(scale * (2.0 * uniform_unit(s) - 1.0));
  return v;
}

// logits for one sample by direct summation (no library GEMM).
std::vector<double> direct_logits(const TrainState<double>& st, const std::vector<double>& xs,
                                  const std::vector<double>& xa, std::size_t i) {
  const std::size_t d = st.in_dim, h = st.hidden, c = st.classes;
  std::vector<double> hid(h);
  for (std::size_t j = 0; j < h; ++j) {
    double z = st.b1.value[j];
    for (std::size_t k = 0; k < d; ++k) z += xs[i * d + k] * st.w1.value[k * h + j];
    for (std::size_t k = 0; k < d; ++k) z += xa[i * d + k] * st.w1.value[(d + k) * h + j];
    hid[j] = std::max(0.0, z);
  }
  std::vector<double> out(c);
  for (std::size_t q = 0; q < c; ++q) {
    double z = st.b2.value[q];
    for (std::size_t j = 0; j < h; ++j) z += hid[j] * st.w2.value[j * c + q];
    out[q] = z;
  }
  return out;
}

double direct_loss(const TrainState<double>& st, const std::vector<double>& xs, const std::vector<double>& xa,
                   const std::vector<std::int32_t>& y) {
  double total = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto l = direct_logits(st, xs, xa, i);
    double mx = *std::max_element(l.begin(), l.end()), s = 0;
    for (double v : l) s += std::exp(v - mx);
    total += -(l[static_cast<std::size_t>(y[i])] - mx - std::log(s));
  }
  return total / static_cast<double>(y.size());
}

Dataset<double> small_dataset() { return load_dataset<double>("synth:powerlaw:N=400,deg=8,exp=2.1,seed=3", 6, 3); }

SeedBatch batch_of(const Dataset<double>& ds, std::size_t b, std::size_t offset) {
  SeedBatch out;
  for (std::size_t i = 0; i < b; ++i) {
    const auto v = static_cast<NodeId>((offset + i * 7) % ds.graph.num_nodes());
    out.seeds.push_back(v);
    out.labels.push_back(ds.labels[static_cast<std::size_t>(v)]);
  }
  return out;
}

}  // namespace

TEST(Head, ZeroEverythingGivesBiasLogits) {
  TrainState<double> st(3, 4, 2);
  st.b2.value = {0.25, -1.5};
  const std::vector<double> z(2 * 3, 0.0);
  const auto f = head_forward<double>(z, z, 2, st);
  EXPECT_EQ(f.logits.vec(), (std::vector<double>{0.25, -1.5, 0.25, -1.5}));
}

TEST(Head, ZeroSecondLayerGivesBiasLogits) {
  TrainState<double> st(2, 2, 3);
  for (std::size_t k = 0; k < 2; ++k) st.w1.value[k * 2 + k] = 1.0;  // identity slice on x_seed
  st.b2.value = {1, 2, 3};
  const std::vector<double> xs{5, 6}, xa{7, 8};
  EXPECT_EQ(head_forward<double>(xs, xa, 1, st).logits.vec(), (std::vector<double>{1, 2, 3}));
}

TEST(Head, MatchesDirectEvaluation) {
  auto st = TrainState<double>::init(5, 7, 4, 11);
  st.b1.value = rand_vec<double>(7, 1);
  st.b2.value = rand_vec<double>(4, 2);
  const auto xs = rand_vec<double>(6 * 5, 3), xa = rand_vec<double>(6 * 5, 4);
  const auto f = head_forward<double>(xs, xa, 6, st, {3, nullptr});
  for (std::size_t i = 0; i < 6; ++i) {
    const auto l = direct_logits(st, xs, xa, i);
    for (std::size_t q = 0; q < 4; ++q) EXPECT_NEAR(f.logits[i * 4 + q], l[q], 1e-12);
  }
}

TEST(CrossEntropy, TwoEqualLogitsGiveLn2) {
  const std::vector<double> l{0.0, 0.0};
  const std::vector<std::int32_t> y{0};
  const auto ce = cross_entropy<double>(l, y, 2);
  EXPECT_NEAR(ce.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(ce.dlogits[0], -0.5, 1e-15);
  EXPECT_NEAR(ce.dlogits[1], 0.5, 1e-15);
}

TEST(CrossEntropy, HugeCorrectMarginGivesZeroLoss) {
  const std::vector<double> l{1000.0, -1000.0, 0.0};
  const std::vector<std::int32_t> y{0};
  const auto ce = cross_entropy<double>(l, y, 3);
  EXPECT_LT(ce.loss, 1e-12);
  EXPECT_TRUE(std::isfinite(ce.loss));
}

TEST(CrossEntropy, LabelOutOfRangeThrows) {
  const std::vector<double> l{0.0, 0.0};
  const std::vector<std::int32_t> y{2};
  EXPECT_THROW(cross_entropy<double>(l, y, 2), InvalidArgument);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  auto l = rand_vec<double>(5 * 4, 9, 3.0);
  const std::vector<std::int32_t> y{0, 3, 1, 1, 2};
  const auto ce = cross_entropy<double>(l, y, 4);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < l.size(); ++i) {
    const double o = l[i];
    l[i] = o + eps;
    const double p = cross_entropy<double>(l, y, 4).loss;
    l[i] = o - eps;
    const double m = cross_entropy<double>(l, y, 4).loss;
    l[i] = o;
    const double fd = (p - m) / (2 * eps);
    EXPECT_LT(std::abs(fd - ce.dlogits[i]) / std::max({std::abs(fd), std::abs(ce.dlogits[i]), 1e-8}), 1e-6);
  }
}

TEST(HeadBackward, ParameterAndInputGradientsMatchFiniteDifferences) {
  auto st = TrainState<double>::init(3, 5, 3, 4);
  st.b1.value = rand_vec<double>(5, 6, 0.3);
  auto xs = rand_vec<double>(4 * 3, 7), xa = rand_vec<double>(4 * 3, 8);
  const std::vector<std::int32_t> y{0, 2, 1, 2};
  const auto f = head_forward<double>(xs, xa, 4, st);
  const auto ce = cross_entropy<double>(f.logits.span(), y, 3);
  const auto bwd = head_backward<double>(xs, xa, f, ce.dlogits.span(), st, true);
  const double eps = 1e-6;
  auto check = [&](double& slot, double analytic) {
    const double o = slot;
    slot = o + eps;
    const double p = direct_loss(st, xs, xa, y);
    slot = o - eps;
    const double m = direct_loss(st, xs, xa, y);
    slot = o;
    const double fd = (p - m) / (2 * eps);
    EXPECT_LT(std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-7}), 1e-5);
  };
  for (std::size_t i = 0; i < st.w1.size(); ++i) check(st.w1.value[i], bwd.grads.w1[i]);
  for (std::size_t i = 0; i < st.b1.size(); ++i) check(st.b1.value[i], bwd.grads.b1[i]);
  for (std::size_t i = 0; i < st.w2.size(); ++i) check(st.w2.value[i], bwd.grads.w2[i]);
  for (std::size_t i = 0; i < st.b2.size(); ++i) check(st.b2.value[i], bwd.grads.b2[i]);
  for (std::size_t i = 0; i < xa.size(); ++i) check(xa[i], bwd.dx_agg[i]);
  for (std::size_t i = 0; i < xs.size(); ++i) check(xs[i], bwd.dx_seed[i]);
}

TEST(HeadBackward, InputGradientsOnlyWhenRequested) {
  auto st = TrainState<double>::init(2, 3, 2, 1);
  const std::vector<double> x(2, 0.5);
  const auto f = head_forward<double>(x, x, 1, st);
  const std::vector<double> dl{0.1, -0.1};
  const auto b = head_backward<double>(x, x, f, dl, st, false);
  EXPECT_TRUE(b.dx_agg.empty());
  EXPECT_TRUE(b.dx_seed.empty());
}

TEST(AdamW, ZeroGradZeroDecayLeavesParamsUnchanged) {
  AdamWConfig cfg;
  cfg.weight_decay = 0;
  auto st = TrainState<double>::init(2, 3, 2, 5, cfg);
  const auto before = st.w1.value;
  HeadGrads<double> g(st, nullptr);
  adamw_step(st, g);
  EXPECT_EQ(st.w1.value, before);
  EXPECT_EQ(st.step_count, 1u);
}

TEST(AdamW, FirstStepOnUnitGradient) {
  TrainState<double> st(1, 1, 1);
  HeadGrads<double> g(st, nullptr);
  g.w1[0] = 1.0;
  adamw_step(st, g);
  // m_hat = 1, v_hat = 1 -> p = 0 - lr * 1 / (1 + eps).
  EXPECT_NEAR(st.w1.value[0], -3e-3 / (1 + 1e-8), 1e-15);
  EXPECT_NEAR(st.w1.value[0], -0.00299999997, 1e-12);
}

TEST(AdamW, ZeroGradientIsPureMultiplicativeShrink) {
  auto st = TrainState<double>::init(2, 2, 2, 9);
  const auto before = st.w2.value;
  HeadGrads<double> g(st, nullptr);
  adamw_step(st, g);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(st.w2.value[i], before[i] * (1 - 3e-3 * 5e-4), 1e-18);
}

TEST(AdamW, MatchesScalarReferenceOnRandomCases) {
  RngStream rng = derive_stream(2718, 0, 0, 0);
  double worst = 0;
  for (int c = 0; c < 1000; ++c) {
    AdamWConfig cfg;
    cfg.lr = std::pow(10.0, -4 + 3 * uniform_unit(rng));
    cfg.weight_decay = uniform_unit(rng) * 1e-2;
    TrainState<double> st(1, 1, 1, cfg);
    st.w1.value[0] = 4 * uniform_unit(rng) - 2;
    oracle::AdamScalar ref{st.w1.value[0]};
    const int steps = 1 + static_cast<int>(uniform_index(rng, 5));
    for (int t = 1; t <= steps; ++t) {
      HeadGrads<double> g(st, nullptr);
      g.w1[0] = std::ldexp(2 * uniform_unit(rng) - 1, static_cast<int>(uniform_index(rng, 20)) - 10);
      ref.step(g.w1[0], t, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
      adamw_step(st, g);
    }
    worst = std::max(worst, std::abs(st.w1.value[0] - ref.p));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(AdamW, NonFiniteGradientRejectedWithoutTouchingState) {
  auto st = TrainState<double>::init(2, 2, 2, 1);
  const auto before = st.w1.value;
  HeadGrads<double> g(st, nullptr);
  g.b2[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adamw_step(st, g), NonFiniteGradient);
  EXPECT_EQ(st.w1.value, before);
  EXPECT_EQ(st.step_count, 0u);
}

TEST(TrainStep, FusedAndBaselineGiveIdenticalLossesAndParameters) {
  const auto ds = small_dataset();
  auto a = TrainState<double>::init(6, 16, 3, 1), b = a, c = a;
  for (int step = 0; step < 5; ++step) {
    const auto batch = batch_of(ds, 32, static_cast<std::size_t>(step) * 31);
    const auto ra = train_step(ds.graph, ds.features, batch, Fanouts{5, 3}, step_seed(1, step), Variant::Fused, a);
    const auto rb = train_step(ds.graph, ds.features, batch, Fanouts{5, 3}, step_seed(1, step), Variant::Baseline, b);
    const auto rc = train_step(ds.graph, ds.features, batch, Fanouts{5, 3}, step_seed(1, step), Variant::Baseline, c,
                               {}, StepOptions{true, false});
    EXPECT_EQ(ra.loss, rb.loss);
    EXPECT_EQ(ra.loss, rc.loss);
    EXPECT_EQ(ra.sampled_pairs, rb.sampled_pairs);
  }
  EXPECT_EQ(a.w1.value, b.w1.value);
  EXPECT_EQ(a.w2.value, c.w2.value);
}

TEST(TrainStep, OneHopVariantsAgree) {
  const auto ds = small_dataset();
  auto a = TrainState<double>::init(6, 8, 3, 2), b = a;
  const auto batch = batch_of(ds, 16, 5);
  const auto ra = train_step(ds.graph, ds.features, batch, Fanouts{4, 0}, 9, Variant::Fused, a);
  const auto rb = train_step(ds.graph, ds.features, batch, Fanouts{4, 0}, 9, Variant::Baseline, b);
  EXPECT_EQ(ra.loss, rb.loss);
  EXPECT_EQ(a.w1.value, b.w1.value);
}

TEST(TrainStep, RepeatedRunsAreBitwiseIdentical) {
  const auto ds = small_dataset();
  auto run = [&](unsigned workers) {
    auto st = TrainState<double>::init(6, 16, 3, 5);
    std::vector<double> losses;
    for (int step = 0; step < 6; ++step)
      losses.push_back(train_step(ds.graph, ds.features, batch_of(ds, 24, static_cast<std::size_t>(step) * 13),
                                  Fanouts{6, 4}, step_seed(5, step), Variant::Fused, st, {workers, nullptr})
                           .loss);
    return std::make_pair(losses, st.w1.value);
  };
  const auto ref = run(1);
  EXPECT_EQ(run(1), ref);
  EXPECT_EQ(run(4), ref);
  EXPECT_EQ(run(8), ref);
}

TEST(TrainStep, LossDecreasesOnSeparableLabels) {
  const auto ds = load_dataset<double>("synth:uniform:N=600,deg=8,seed=1", 8, 3);
  auto st = TrainState<double>::init(8, 32, 3, 3);
  const auto order = shuffled_nodes(600, 3);
  std::vector<double> losses;
  for (std::size_t step = 0; step < 50; ++step)
    losses.push_back(train_step(ds.graph, ds.features, batch_for_step(order, ds.labels, 64, step), Fanouts{5, 5},
                                step_seed(3, step), Variant::Fused, st)
                         .loss);
  const double first = (losses[0] + losses[1] + losses[2]) / 3;
  const double last = (losses[47] + losses[48] + losses[49]) / 3;
  EXPECT_LT(last, 0.7 * first);
}

TEST(TrainStep, FeatureGradientMatchesFiniteDifferences) {
  const auto ds = load_dataset<double>("synth:uniform:N=30,deg=3,seed=2", 3, 2);
  const auto batch = batch_of(ds, 6, 1);
  const auto st0 = TrainState<double>::init(3, 4, 2, 8);
  auto loss_at = [&](const FeatureMatrix<double>& x) {
    auto st = st0;
    return train_step(ds.graph, x, batch, Fanouts{2, 2}, 4, Variant::Fused, st).loss;
  };
  auto st = st0;
  GradBuffer<double> gx;
  train_step(ds.graph, ds.features, batch, Fanouts{2, 2}, 4, Variant::Fused, st, {}, StepOptions{false, true}, &gx);
  auto x = ds.features;
  const double eps = 1e-6;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const double o = x.values[i];
    x.values[i] = o + eps;
    const double p = loss_at(x);
    x.values[i] = o - eps;
    const double m = loss_at(x);
    x.values[i] = o;
    const double fd = (p - m) / (2 * eps);
    EXPECT_LT(std::abs(fd - gx.values[i]) / std::max({std::abs(fd), std::abs(gx.values[i]), 1e-7}), 1e-5) << i;
  }
}

TEST(TrainStep, TransientAccountingReturnsToZero) {
  const auto ds = small_dataset();
  auto st = TrainState<double>::init(6, 16, 3, 1);
  for (auto v : {Variant::Fused, Variant::Baseline}) {
    MemoryMeter m;
    train_step(ds.graph, ds.features, batch_of(ds, 32, 0), Fanouts{5, 3}, 1, v, st, {1, &m});
    EXPECT_EQ(m.current(), 0u);
    EXPECT_GT(m.peak(), 0u);
  }
}

TEST(TrainStep, RequiresLabels) {
  const auto ds = small_dataset();
  auto st = TrainState<double>::init(6, 4, 3, 1);
  SeedBatch b{{1, 2}, {}};
  EXPECT_THROW(train_step(ds.graph, ds.features, b, Fanouts{2, 2}, 1, Variant::Fused, st), InvalidArgument);
}

TEST(Variant, ParsesNames) {
  EXPECT_EQ(parse_variant("fused"), Variant::Fused);
  EXPECT_EQ(parse_variant("baseline"), Variant::Baseline);
  EXPECT_THROW(parse_variant("dgl"), InvalidArgument);
}
