#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsa/baseline.hpp"
#include "fsa/dense.hpp"
#include "fsa/fused.hpp"

namespace fsa {

enum class Variant { Fused, Baseline };

inline const char* to_string(Variant v) { return v == Variant::Fused ? "fused" : "baseline"; }
inline Variant parse_variant(const std::string& s) {
  if (s == "fused") return Variant::Fused;
  if (s == "baseline") return Variant::Baseline;
  throw InvalidArgument("unknown variant '" + s + "' (expected fused|baseline)");
}

/// Per-hop fanouts; k2 == 0 selects the 1-hop operator.
struct Fanouts {
  std::size_t k1 = 10;
  std::size_t k2 = 10;
  bool two_hop() const noexcept { return k2 > 0; }
};

struct AdamWConfig {
  double lr = 3e-3;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// A parameter tensor with its AdamW moments.
template <class T>
struct Param {
  std::vector<T> value;
  std::vector<T> m;
  std::vector<T> v;

  explicit Param(std::size_t n = 0) : value(n), m(n), v(n) {}
  std::size_t size() const noexcept { return value.size(); }
};

/// Concat-then-MLP head: logits = ReLU([x_seed | x_agg] W1 + b1) W2 + b2,
/// with W1 (2D x H), W2 (H x C).
template <class T>
struct TrainState {
  std::size_t in_dim = 0;
  std::size_t hidden = 256;
  std::size_t classes = 0;
  Param<T> w1, b1, w2, b2;
  std::uint64_t step_count = 0;
  AdamWConfig hp;

  TrainState() = default;
  TrainState(std::size_t d, std::size_t h, std::size_t c, AdamWConfig cfg = {})
      : in_dim(d), hidden(h), classes(c), w1(2 * d * h), b1(h), w2(h * c), b2(c), hp(cfg) {}

  /// Weights uniform in +-1/sqrt(fan_in), zero biases; deterministic in seed.
  static TrainState init(std::size_t d, std::size_t h, std::size_t c, std::uint64_t seed, AdamWConfig cfg = {}) {
    detail::require(d >= 1 && h >= 1 && c >= 1, "TrainState: dims must be >= 1");
    TrainState s(d, h, c, cfg);
    RngStream rng = derive_stream(seed, 0, 0x4EAD, 0);
    auto fill = [&](std::vector<T>& w, std::size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& x : w) x = static_cast<T>((2.0 * uniform_unit(rng) - 1.0) * bound);
    };
    fill(s.w1.value, 2 * d);
    fill(s.w2.value, h);
    return s;
  }

  std::array<Param<T>*, 4> params() noexcept { return {&w1, &b1, &w2, &b2}; }
  std::array<const Param<T>*, 4> params() const noexcept { return {&w1, &b1, &w2, &b2}; }
};

template <class T>
struct HeadGrads {
  TrackedBuffer<T> w1, b1, w2, b2;

  HeadGrads() = default;
  HeadGrads(const TrainState<T>& s, MemoryMeter* meter)
      : w1(s.w1.size(), T{}, meter), b1(s.b1.size(), T{}, meter), w2(s.w2.size(), T{}, meter),
        b2(s.b2.size(), T{}, meter) {}

  std::array<std::span<const T>, 4> spans() const noexcept { return {w1.span(), b1.span(), w2.span(), b2.span()}; }
};

template <class T>
struct HeadForward {
  std::size_t batch = 0;
  TrackedBuffer<T> hidden;  // post-ReLU, B x H
  TrackedBuffer<T> logits;  // B x C
};

template <class T>
HeadForward<T> head_forward(std::span<const T> x_seed, std::span<const T> x_agg, std::size_t batch,
                            const TrainState<T>& s, const ExecContext& ctx = {}) {
  const std::size_t d = s.in_dim, h = s.hidden, c = s.classes;
  detail::require(x_seed.size() == batch * d && x_agg.size() == batch * d, "head_forward: inputs must be B x D");
  HeadForward<T> out{batch, TrackedBuffer<T>(batch * h, T{}, ctx.meter), TrackedBuffer<T>(batch * c, T{}, ctx.meter)};

  for (std::size_t i = 0; i < batch; ++i) std::copy(s.b1.value.begin(), s.b1.value.end(), out.hidden.data() + i * h);
  const std::span<const T> w1(s.w1.value);
  dense::gemm_nn_acc(x_seed, w1.first(d * h), out.hidden.span(), batch, d, h, ctx.workers);
  dense::gemm_nn_acc(x_agg, w1.subspan(d * h), out.hidden.span(), batch, d, h, ctx.workers);
  for (T& v : out.hidden) v = v > T{} ? v : T{};

  for (std::size_t i = 0; i < batch; ++i) std::copy(s.b2.value.begin(), s.b2.value.end(), out.logits.data() + i * c);
  dense::gemm_nn_acc<T>(out.hidden.span(), s.w2.value, out.logits.span(), batch, h, c, ctx.workers);
  return out;
}

template <class T>
struct CrossEntropy {
  double loss = 0;
  TrackedBuffer<T> dlogits;
};

/// Mean negative log-softmax of the labelled class; dlogits = (softmax - onehot)/B.
template <class T>
CrossEntropy<T> cross_entropy(std::span<const T> logits, std::span<const std::int32_t> labels, std::size_t classes,
                              MemoryMeter* meter = nullptr) {
  const std::size_t batch = labels.size();
  detail::require(batch >= 1 && classes >= 1 && logits.size() == batch * classes,
                  "cross_entropy: logits must be B x C");
  CrossEntropy<T> out{0.0, TrackedBuffer<T>(batch * classes, T{}, meter)};
  std::vector<double> p(classes);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto y = labels[i];
    detail::require(y >= 0 && static_cast<std::size_t>(y) < classes, "cross_entropy: label out of range");
    const T* l = logits.data() + i * classes;
    double mx = static_cast<double>(l[0]);
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(l[c]));
    double sum = 0;
    for (std::size_t c = 0; c < classes; ++c) sum += (p[c] = std::exp(static_cast<double>(l[c]) - mx));
    out.loss += -(static_cast<double>(l[y]) - mx - std::log(sum));
    for (std::size_t c = 0; c < classes; ++c) {
      const double grad = p[c] / sum - (static_cast<std::size_t>(y) == c ? 1.0 : 0.0);
      out.dlogits[i * classes + c] = static_cast<T>(grad / static_cast<double>(batch));
    }
  }
  out.loss /= static_cast<double>(batch);
  return out;
}

template <class T>
struct HeadBackward {
  HeadGrads<T> grads;
  TrackedBuffer<T> dx_agg;   // B x D, only when requested
  TrackedBuffer<T> dx_seed;  // B x D, only when requested
};

template <class T>
HeadBackward<T> head_backward(std::span<const T> x_seed, std::span<const T> x_agg, const HeadForward<T>& fwd,
                              std::span<const T> dlogits, const TrainState<T>& s, bool want_input_grads,
                              const ExecContext& ctx = {}) {
  const std::size_t b = fwd.batch, d = s.in_dim, h = s.hidden, c = s.classes;
  detail::require(dlogits.size() == b * c, "head_backward: dlogits must be B x C");
  HeadBackward<T> out{HeadGrads<T>(s, ctx.meter), {}, {}};

  dense::gemm_tn_acc<T>(fwd.hidden.span(), dlogits, out.grads.w2.span(), b, h, c, ctx.workers);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < c; ++j) out.grads.b2[j] += dlogits[i * c + j];

  TrackedBuffer<T> dpre(b * h, T{}, ctx.meter);
  dense::gemm_nt<T>(dlogits, s.w2.value, dpre.span(), b, c, h, ctx.workers, ctx.meter);
  for (std::size_t i = 0; i < b * h; ++i)
    if (!(fwd.hidden[i] > T{})) dpre[i] = T{};

  auto dw1 = out.grads.w1.span();
  dense::gemm_tn_acc<T>(x_seed, dpre.span(), dw1.first(d * h), b, d, h, ctx.workers);
  dense::gemm_tn_acc<T>(x_agg, dpre.span(), dw1.subspan(d * h), b, d, h, ctx.workers);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < h; ++j) out.grads.b1[j] += dpre[i * h + j];

  if (want_input_grads) {
    const std::span<const T> w1(s.w1.value);
    out.dx_agg = TrackedBuffer<T>(b * d, T{}, ctx.meter);
    dense::gemm_nt<T>(dpre.span(), w1.subspan(d * h), out.dx_agg.span(), b, h, d, ctx.workers, ctx.meter);
    out.dx_seed = TrackedBuffer<T>(b * d, T{}, ctx.meter);
    dense::gemm_nt<T>(dpre.span(), w1.first(d * h), out.dx_seed.span(), b, h, d, ctx.workers, ctx.meter);
  }
  return out;
}

/// Decoupled weight decay followed by the bias-corrected Adam update:
///   p *= 1 - lr*wd
///   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
///   p -= (lr / (1-b1^t)) * m / (sqrt(v)/sqrt(1-b2^t) + eps)
/// Throws NonFiniteGradient (state untouched) if any gradient is NaN/Inf.
template <class T>
void adamw_step(TrainState<T>& s, const std::array<std::span<const T>, 4>& grads) {
  auto params = s.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    detail::require(grads[i].size() == params[i]->size(), "adamw_step: gradient shape mismatch");
    for (T g : grads[i])
      if (!std::isfinite(g)) throw NonFiniteGradient("adamw_step: non-finite gradient, step rejected");
  }
  const auto& hp = s.hp;
  const double t = static_cast<double>(s.step_count + 1);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  const double step_size = hp.lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  const double decay = 1.0 - hp.lr * hp.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T>& p = *params[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = static_cast<double>(grads[i][j]);
      const double m = hp.beta1 * static_cast<double>(p.m[j]) + (1.0 - hp.beta1) * g;
      const double v = hp.beta2 * static_cast<double>(p.v[j]) + (1.0 - hp.beta2) * g * g;
      const double denom = std::sqrt(v) / sqrt_bc2 + hp.eps;
      const double value = static_cast<double>(p.value[j]) * decay - step_size * m / denom;
      p.m[j] = static_cast<T>(m);
      p.v[j] = static_cast<T>(v);
      p.value[j] = static_cast<T>(value);
    }
  }
  ++s.step_count;
}

template <class T>
void adamw_step(TrainState<T>& s, const HeadGrads<T>& g) {
  adamw_step(s, g.spans());
}

struct StepOptions {
  bool dedup = false;         // baseline only: gather unique nodes once
  bool feature_grad = false;  // also back-propagate into the feature matrix
};

struct StepResult {
  double loss = 0;
  bool grads_applied = false;
  std::uint64_t sampled_pairs = 0;
};

// One mini-batch step: aggregation forward (saving indices) -> head ->
// cross-entropy -> head backward -> optional aggregation backward -> AdamW.
// Features are treated as frozen inputs unless opts.feature_grad is set, in
// which case the exact feature gradient (aggregation path plus the seed's own
// row) is formed and, if `feature_grad_out` is given, handed back.
template <class T>
StepResult train_step(const CsrGraph& g, const FeatureMatrix<T>& x, const SeedBatch& batch, Fanouts fanouts,
                      std::uint64_t base_seed, Variant variant, TrainState<T>& state, const ExecContext& ctx = {},
                      StepOptions opts = {}, GradBuffer<T>* feature_grad_out = nullptr) {
  detail::require(batch.has_labels(), "train_step: batch needs labels");
  detail::require(x.dim == state.in_dim, "train_step: feature dim does not match head");
  batch.validate(g.num_nodes());
  const std::size_t b = batch.size(), d = x.dim;

  TrackedBuffer<T> x_seed(b * d, T{}, ctx.meter);
  for (std::size_t i = 0; i < b; ++i)
    std::copy_n(x.values.data() + static_cast<std::size_t>(batch.seeds[i]) * d, d, x_seed.data() + i * d);

  std::optional<OneHopResult<T>> one;
  std::optional<TwoHopResult<T>> two;
  std::optional<BaselineResult<T>> base;
  const AggregatedOutput<T>* agg = nullptr;
  StepResult result;
  if (variant == Variant::Fused) {
    if (fanouts.two_hop()) {
      two.emplace(fused_2hop_forward(g, x, batch, fanouts.k1, fanouts.k2, base_seed, true, ctx));
      agg = &two->out;
      result.sampled_pairs = two->sampled_pairs;
    } else {
      one.emplace(fused_1hop_forward(g, x, batch, fanouts.k1, base_seed, true, ctx));
      agg = &one->out;
      result.sampled_pairs = one->sampled_pairs;
    }
  } else {
    base.emplace(fanouts.two_hop()
                     ? baseline_forward(g, x, batch, fanouts.k1, fanouts.k2, base_seed, opts.dedup, ctx)
                     : baseline_1hop_forward(g, x, batch, fanouts.k1, base_seed, opts.dedup, ctx));
    agg = &base->out;
    result.sampled_pairs = base->sampled_pairs;
  }

  auto fwd = head_forward<T>(x_seed.span(), agg->values.span(), b, state, ctx);
  auto ce = cross_entropy<T>(fwd.logits.span(), batch.labels, state.classes, ctx.meter);
  result.loss = ce.loss;
  auto bwd = head_backward<T>(x_seed.span(), agg->values.span(), fwd, ce.dlogits.span(), state, opts.feature_grad, ctx);

  if (opts.feature_grad) {
    std::span<const T> dagg = bwd.dx_agg.span();
    GradBuffer<T> gx = one    ? fused_1hop_backward<T>(dagg, d, one->indices, g.num_nodes(), ctx)
                       : two  ? fused_2hop_backward<T>(dagg, d, two->indices, g.num_nodes(), ctx)
                              : baseline_backward<T>(dagg, base->block, g.num_nodes(), ctx);
    for (std::size_t i = 0; i < b; ++i) {
      T* dst = gx.values.data() + static_cast<std::size_t>(batch.seeds[i]) * d;
      for (std::size_t k = 0; k < d; ++k) dst[k] += bwd.dx_seed[i * d + k];
    }
    if (feature_grad_out) *feature_grad_out = std::move(gx);
  }

  try {
    adamw_step(state, bwd.grads);
    result.grads_applied = true;
  } catch (const NonFiniteGradient&) {
    result.grads_applied = false;
  }
  return result;
}

}  // namespace fsa
