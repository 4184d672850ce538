#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsa/csr_graph.hpp"
#include "fsa/features.hpp"
#include "fsa/parallel.hpp"
#include "fsa/sampling.hpp"
#include "fsa/tensors.hpp"

// Fused neighbor sampling + mean aggregation.
//
// Forward passes sample and accumulate in one sweep per seed: no gathered
// feature block is ever built. Each worker owns a contiguous range of seeds
// and writes only their output rows, with one k (or k1 + k1*k2) scratch
// buffer reused across its seeds. Per output element the accumulation is
// 0 + X[n_0,d] + X[n_1,d] + ... in sample-slot order followed by one division,
// which is the order the materialized baseline reproduces.
//
// Backward passes replay saved indices. Workers split the feature columns,
// and every column is accumulated over seeds in ascending order, so the
// result is bitwise identical for any worker count.

namespace fsa {

template <class T>
struct OneHopResult {
  AggregatedOutput<T> out;
  std::optional<SampledIndices1> indices;
  std::uint64_t sampled_pairs = 0;
};

template <class T>
struct TwoHopResult {
  AggregatedOutput<T> out;
  std::optional<SampledIndices2> indices;
  std::uint64_t sampled_pairs = 0;
};

namespace detail {

template <class T>
void check_aggregation_inputs(const CsrGraph& g, const FeatureMatrix<T>& x, const SeedBatch& seeds) {
  require(x.num_nodes == g.num_nodes(), "feature rows (" + std::to_string(x.num_nodes) +
                                            ") must match graph nodes (" + std::to_string(g.num_nodes()) + ")");
  require(x.values.size() == x.num_nodes * x.dim, "feature matrix size mismatch");
  seeds.validate(g.num_nodes());
}

template <class T>
inline void add_row(std::span<T> acc, const T* src) noexcept {
  T* a = acc.data();
  const std::size_t d = acc.size();
  for (std::size_t i = 0; i < d; ++i) a[i] += src[i];
}

template <class T>
inline void divide_row(std::span<T> acc, std::size_t denom) noexcept {
  const T q = static_cast<T>(denom);
  for (T& v : acc) v /= q;
}

// Sum per-worker counters in worker order.
inline std::uint64_t total(const std::vector<std::uint64_t>& parts) {
  std::uint64_t s = 0;
  for (auto p : parts) s += p;
  return s;
}

}  // namespace detail

/// 1-hop: out[i] = mean of X over up to k neighbors of seeds[i]; zero row for
/// isolated seeds.
template <class T>
OneHopResult<T> fused_1hop_forward(const CsrGraph& g, const FeatureMatrix<T>& x, const SeedBatch& seeds,
                                   std::size_t k, std::uint64_t base_seed, bool save_indices,
                                   const ExecContext& ctx = {}) {
  detail::require(k >= 1, "fanout k must be >= 1");
  detail::check_aggregation_inputs(g, x, seeds);
  const std::size_t batch = seeds.size(), dim = x.dim;

  OneHopResult<T> res{AggregatedOutput<T>(batch, dim, ctx.meter), std::nullopt, 0};
  if (save_indices) res.indices.emplace(batch, k, ctx.meter);
  std::vector<std::uint64_t> pairs(std::max(1u, ctx.workers), 0);

  parallel_chunks(batch, ctx.workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    TrackedBuffer<NodeId> picks(k, kPad, ctx.meter);
    for (std::size_t i = begin; i < end; ++i) {
      RngStream stream = one_hop_stream(base_seed, i);
      const std::size_t take = sample_neighbors_reservoir(g, seeds.seeds[i], k, stream, picks.span());
      auto row = res.out.row(i);
      for (std::size_t t = 0; t < take; ++t)
        detail::add_row(row, x.values.data() + static_cast<std::size_t>(picks[t]) * dim);
      detail::divide_row(row, effective_count(take));
      pairs[w] += take;
      if (save_indices) {
        std::copy_n(picks.data(), take, res.indices->row(i).begin());
        res.indices->takes[i] = static_cast<std::int32_t>(take);
      }
    }
  });
  res.sampled_pairs = detail::total(pairs);
  return res;
}

/// Adjoint of fused_1hop_forward:
/// grad[v] += grad_out[i] / max(1, takes[i]) for every saved pick v of seed i.
template <class T>
GradBuffer<T> fused_1hop_backward(std::span<const T> grad_out, std::size_t dim, const SampledIndices1& idx,
                                  std::size_t num_nodes, const ExecContext& ctx = {}) {
  detail::require(grad_out.size() == idx.batch * dim, "grad_out must be B x D");
  detail::require(idx.samples.size() == idx.batch * idx.fanout && idx.takes.size() == idx.batch,
                  "sampled indices shape mismatch");
  for (std::size_t i = 0; i < idx.batch; ++i) {
    const auto take = idx.takes[i];
    detail::require(take >= 0, "negative take in saved indices");
    detail::require(static_cast<std::size_t>(take) <= idx.fanout, "take exceeds fanout");
    for (std::size_t t = 0; t < static_cast<std::size_t>(take); ++t) {
      const NodeId v = idx.row(i)[t];
      detail::require(v >= 0 && static_cast<std::size_t>(v) < num_nodes, "saved index out of range");
    }
  }

  GradBuffer<T> grad(num_nodes, dim, ctx.meter);
  parallel_chunks(dim, ctx.workers, [&](std::size_t, std::size_t d0, std::size_t d1) {
    for (std::size_t i = 0; i < idx.batch; ++i) {
      const auto take = static_cast<std::size_t>(idx.takes[i]);
      if (take == 0) continue;
      const T denom = static_cast<T>(take);
      const T* g = grad_out.data() + i * dim;
      for (std::size_t t = 0; t < take; ++t) {
        T* dst = grad.values.data() + static_cast<std::size_t>(idx.row(i)[t]) * dim;
        for (std::size_t d = d0; d < d1; ++d) dst[d] += g[d] / denom;
      }
    }
  });
  return grad;
}

/// 2-hop nested mean: out[r] = mean over first-hop picks u of
/// (mean over second-hop picks w of u of X[w]). Denominators are the
/// effective counts max(1, #valid); -1 slots are skipped.
template <class T>
TwoHopResult<T> fused_2hop_forward(const CsrGraph& g, const FeatureMatrix<T>& x, const SeedBatch& roots,
                                   std::size_t k1, std::size_t k2, std::uint64_t base_seed, bool save_indices,
                                   const ExecContext& ctx = {}) {
  detail::require(k1 >= 1 && k2 >= 1, "fanouts k1, k2 must be >= 1");
  detail::check_aggregation_inputs(g, x, roots);
  const std::size_t batch = roots.size(), dim = x.dim;

  TwoHopResult<T> res{AggregatedOutput<T>(batch, dim, ctx.meter), std::nullopt, 0};
  if (save_indices) res.indices.emplace(batch, k1, k2, ctx.meter);
  std::vector<std::uint64_t> pairs(std::max(1u, ctx.workers), 0);

  parallel_chunks(batch, ctx.workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    // Per-worker analogues of the shared U[k1] and W[k1,k2] buffers.
    TrackedBuffer<NodeId> hop1(k1, kPad, ctx.meter);
    TrackedBuffer<NodeId> hop2(k1 * k2, kPad, ctx.meter);
    std::vector<std::size_t> take2(k1);
    TrackedBuffer<T> inner(dim, T{}, ctx.meter);
    for (std::size_t r = begin; r < end; ++r) {
      RngStream s1 = first_hop_stream(base_seed, r);
      const std::size_t take1 = sample_neighbors_reservoir(g, roots.seeds[r], k1, s1, hop1.span());
      for (std::size_t j = 0; j < take1; ++j) {
        RngStream s2 = second_hop_stream(base_seed, r, j);
        take2[j] = sample_neighbors_reservoir(g, hop1[j], k2, s2, hop2.span().subspan(j * k2, k2));
      }

      auto row = res.out.row(r);
      for (std::size_t j = 0; j < take1; ++j) {
        std::fill(inner.begin(), inner.end(), T{});
        for (std::size_t t = 0; t < take2[j]; ++t)
          detail::add_row(inner.span(), x.values.data() + static_cast<std::size_t>(hop2[j * k2 + t]) * dim);
        const T q2 = static_cast<T>(effective_count(take2[j]));
        for (std::size_t d = 0; d < dim; ++d) row[d] += inner[d] / q2;
        pairs[w] += take2[j];
      }
      detail::divide_row(row, effective_count(take1));
      pairs[w] += take1;

      if (save_indices) {
        std::copy_n(hop1.data(), take1, res.indices->hop1(r).begin());
        for (std::size_t j = 0; j < take1; ++j)
          std::copy_n(hop2.data() + j * k2, take2[j], res.indices->hop2(r, j).begin());
      }
    }
  });
  res.sampled_pairs = detail::total(pairs);
  return res;
}

/// Forward-only 2-hop: identical output, no index storage. Its backward is
/// defined as zero (see the optional overload of fused_2hop_backward).
template <class T>
TwoHopResult<T> fused_2hop_forward_nosave(const CsrGraph& g, const FeatureMatrix<T>& x, const SeedBatch& roots,
                                          std::size_t k1, std::size_t k2, std::uint64_t base_seed,
                                          const ExecContext& ctx = {}) {
  return fused_2hop_forward(g, x, roots, k1, k2, base_seed, false, ctx);
}

namespace detail {
// Validates id ranges and the -1 padding pattern.
inline void check_two_hop_indices(const SampledIndices2& idx, std::size_t num_nodes) {
  require(idx.s1.size() == idx.batch * idx.k1 && idx.s2.size() == idx.batch * idx.k1 * idx.k2,
          "sampled indices shape mismatch");
  auto check_ids = [&](std::span<const NodeId> ids) {
    for (NodeId v : ids) {
      require(v >= kPad, "negative id other than -1 in saved indices");
      require(v < 0 || static_cast<std::size_t>(v) < num_nodes, "saved index out of range");
    }
  };
  for (std::size_t r = 0; r < idx.batch; ++r) {
    check_ids(idx.hop1(r));
    for (std::size_t j = 0; j < idx.k1; ++j) {
      check_ids(idx.hop2(r, j));
      if (idx.hop1(r)[j] < 0) require(count_valid(idx.hop2(r, j)) == 0, "second-hop ids under a padded slot");
    }
  }
}
}  // namespace detail

/// Adjoint of fused_2hop_forward: for root r, valid slot j and valid w,
/// grad[w] += grad_out[r] / (k1_eff(r) * k2_eff(r, j)), with effective counts
/// recomputed from the -1 pattern.
template <class T>
GradBuffer<T> fused_2hop_backward(std::span<const T> grad_out, std::size_t dim, const SampledIndices2& idx,
                                  std::size_t num_nodes, const ExecContext& ctx = {}) {
  detail::require(grad_out.size() == idx.batch * dim, "grad_out must be B x D");
  detail::check_two_hop_indices(idx, num_nodes);

  GradBuffer<T> grad(num_nodes, dim, ctx.meter);
  parallel_chunks(dim, ctx.workers, [&](std::size_t, std::size_t d0, std::size_t d1) {
    for (std::size_t r = 0; r < idx.batch; ++r) {
      const auto u = idx.hop1(r);
      const std::size_t k1_eff = effective_count(count_valid(u));
      const T* g = grad_out.data() + r * dim;
      for (std::size_t j = 0; j < idx.k1; ++j) {
        if (u[j] < 0) continue;
        const auto ws = idx.hop2(r, j);
        const T denom = static_cast<T>(k1_eff) * static_cast<T>(effective_count(count_valid(ws)));
        for (NodeId wnode : ws) {
          if (wnode < 0) continue;
          T* dst = grad.values.data() + static_cast<std::size_t>(wnode) * dim;
          for (std::size_t d = d0; d < d1; ++d) dst[d] += g[d] / denom;
        }
      }
    }
  });
  return grad;
}

/// Backward through a forward that may have run without saving indices:
/// with no indices the gradient w.r.t. X is all zeros.
template <class T>
GradBuffer<T> fused_2hop_backward(std::span<const T> grad_out, std::size_t dim,
                                  const std::optional<SampledIndices2>& idx, std::size_t num_nodes,
                                  const ExecContext& ctx = {}) {
  if (!idx) return GradBuffer<T>(num_nodes, dim, ctx.meter);
  return fused_2hop_backward(grad_out, dim, *idx, num_nodes, ctx);
}

template <class T>
GradBuffer<T> fused_1hop_backward(std::span<const T> grad_out, std::size_t dim,
                                  const std::optional<SampledIndices1>& idx, std::size_t num_nodes,
                                  const ExecContext& ctx = {}) {
  if (!idx) return GradBuffer<T>(num_nodes, dim, ctx.meter);
  return fused_1hop_backward(grad_out, dim, *idx, num_nodes, ctx);
}

}  // namespace fsa
