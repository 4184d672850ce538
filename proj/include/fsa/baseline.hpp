#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fsa/csr_graph.hpp"
#include "fsa/features.hpp"
#include "fsa/fused.hpp"
#include "fsa/parallel.hpp"
#include "fsa/sampling.hpp"
#include "fsa/tensors.hpp"

// Unfused comparator: sample -> materialize -> aggregate.
//
// Sampling uses the same reservoir sampler and the same derived streams as the
// fused operators, so the only difference between the two pipelines is the
// block built in between: hop-ID tensors plus a gathered copy of every
// sampled leaf feature row. Every block tensor registers with the meter.

namespace fsa {

/// Materialized sampling block. Leaves are the last-hop slots: B*k for 1-hop,
/// B*k1*k2 for 2-hop. Without dedup `gathered` has one row per leaf slot
/// (zero rows for -1 slots). With dedup it has one row per unique leaf node
/// and `leaf_row` maps each slot to its row (-1 for padded slots).
template <class T>
struct MaterializedBlock {
  std::size_t hops = 2;
  std::size_t batch = 0;
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  std::size_t dim = 0;
  bool dedup = false;
  TrackedBuffer<NodeId> hop1_ids;
  TrackedBuffer<NodeId> hop2_ids;
  TrackedBuffer<NodeId> unique_nodes;
  TrackedBuffer<std::int32_t> leaf_row;
  TrackedBuffer<T> gathered;

  std::size_t leaf_fanout() const noexcept { return hops == 1 ? k1 : k2; }
  std::size_t leaf_slots() const noexcept { return hops == 1 ? batch * k1 : batch * k1 * k2; }
  const TrackedBuffer<NodeId>& leaf_ids() const noexcept { return hops == 1 ? hop1_ids : hop2_ids; }

  /// Gathered row for a leaf slot, or nullptr for a padded slot.
  const T* leaf_features(std::size_t slot) const noexcept {
    if (leaf_ids()[slot] < 0) return nullptr;
    const std::size_t row = dedup ? static_cast<std::size_t>(leaf_row[slot]) : slot;
    return gathered.data() + row * dim;
  }

  std::size_t block_bytes() const noexcept {
    return (hop1_ids.size() + hop2_ids.size() + unique_nodes.size()) * sizeof(NodeId) +
           leaf_row.size() * sizeof(std::int32_t) + gathered.size() * sizeof(T);
  }
};

template <class T>
struct BaselineResult {
  AggregatedOutput<T> out;
  MaterializedBlock<T> block;
  std::uint64_t sampled_pairs = 0;
};

namespace detail {

// Gathers the leaf feature rows of `block` (stage 2).
template <class T>
void materialize_leaves(MaterializedBlock<T>& block, const FeatureMatrix<T>& x, const ExecContext& ctx) {
  const auto& ids = block.leaf_ids();
  const std::size_t dim = x.dim, slots = block.leaf_slots();
  if (!block.dedup) {
    block.gathered = TrackedBuffer<T>(slots * dim, T{}, ctx.meter);
    parallel_for(slots, ctx.workers, [&](std::size_t s) {
      if (ids[s] < 0) return;
      std::copy_n(x.values.data() + static_cast<std::size_t>(ids[s]) * dim, dim, block.gathered.data() + s * dim);
    });
    return;
  }
  std::vector<NodeId> uniq;
  uniq.reserve(slots);
  for (NodeId v : ids)
    if (v >= 0) uniq.push_back(v);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  block.unique_nodes = TrackedBuffer<NodeId>(uniq.size(), ctx.meter);
  std::copy(uniq.begin(), uniq.end(), block.unique_nodes.begin());
  uniq = {};

  block.leaf_row = TrackedBuffer<std::int32_t>(slots, -1, ctx.meter);
  parallel_for(slots, ctx.workers, [&](std::size_t s) {
    if (ids[s] < 0) return;
    auto it = std::lower_bound(block.unique_nodes.begin(), block.unique_nodes.end(), ids[s]);
    block.leaf_row[s] = static_cast<std::int32_t>(it - block.unique_nodes.begin());
  });
  block.gathered = TrackedBuffer<T>(block.unique_nodes.size() * dim, T{}, ctx.meter);
  parallel_for(block.unique_nodes.size(), ctx.workers, [&](std::size_t u) {
    std::copy_n(x.values.data() + static_cast<std::size_t>(block.unique_nodes[u]) * dim, dim,
                block.gathered.data() + u * dim);
  });
}

}  // namespace detail

/// Materialized 2-hop pipeline; value-identical to fused_2hop_forward.
template <class T>
BaselineResult<T> baseline_forward(const CsrGraph& g, const FeatureMatrix<T>& x, const SeedBatch& roots,
                                   std::size_t k1, std::size_t k2, std::uint64_t base_seed, bool dedup,
                                   const ExecContext& ctx = {}) {
  detail::require(k1 >= 1 && k2 >= 1, "fanouts k1, k2 must be >= 1");
  detail::check_aggregation_inputs(g, x, roots);
  const std::size_t batch = roots.size(), dim = x.dim;

  BaselineResult<T> res;
  auto& block = res.block;
  block.hops = 2;
  block.batch = batch;
  block.k1 = k1;
  block.k2 = k2;
  block.dim = dim;
  block.dedup = dedup;

  // Stage 1: sample into hop-ID tensors.
  block.hop1_ids = TrackedBuffer<NodeId>(batch * k1, kPad, ctx.meter);
  block.hop2_ids = TrackedBuffer<NodeId>(batch * k1 * k2, kPad, ctx.meter);
  std::vector<std::uint64_t> pairs(std::max(1u, ctx.workers), 0);
  parallel_chunks(batch, ctx.workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      std::span<NodeId> u(block.hop1_ids.data() + r * k1, k1);
      RngStream s1 = first_hop_stream(base_seed, r);
      const std::size_t take1 = sample_neighbors_reservoir(g, roots.seeds[r], k1, s1, u);
      pairs[w] += take1;
      for (std::size_t j = 0; j < take1; ++j) {
        RngStream s2 = second_hop_stream(base_seed, r, j);
        pairs[w] += sample_neighbors_reservoir(
            g, u[j], k2, s2, std::span<NodeId>(block.hop2_ids.data() + (r * k1 + j) * k2, k2));
      }
    }
  });
  res.sampled_pairs = detail::total(pairs);

  // Stage 2: gather leaf features.
  detail::materialize_leaves(block, x, ctx);

  // Stage 3: nested mean over the gathered rows.
  res.out = AggregatedOutput<T>(batch, dim, ctx.meter);
  parallel_chunks(batch, ctx.workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    TrackedBuffer<T> inner(dim, T{}, ctx.meter);
    for (std::size_t r = begin; r < end; ++r) {
      auto row = res.out.row(r);
      std::size_t take1 = 0;
      for (std::size_t j = 0; j < k1; ++j) {
        if (block.hop1_ids[r * k1 + j] < 0) continue;
        ++take1;
        std::fill(inner.begin(), inner.end(), T{});
        std::size_t take2 = 0;
        for (std::size_t t = 0; t < k2; ++t) {
          const T* src = block.leaf_features((r * k1 + j) * k2 + t);
          if (!src) continue;
          ++take2;
          detail::add_row(inner.span(), src);
        }
        const T q2 = static_cast<T>(effective_count(take2));
        for (std::size_t d = 0; d < dim; ++d) row[d] += inner[d] / q2;
      }
      detail::divide_row(row, effective_count(take1));
    }
  });
  return res;
}

/// Materialized 1-hop pipeline; value-identical to fused_1hop_forward.
template <class T>
BaselineResult<T> baseline_1hop_forward(const CsrGraph& g, const FeatureMatrix<T>& x, const SeedBatch& seeds,
                                        std::size_t k, std::uint64_t base_seed, bool dedup,
                                        const ExecContext& ctx = {}) {
  detail::require(k >= 1, "fanout k must be >= 1");
  detail::check_aggregation_inputs(g, x, seeds);
  const std::size_t batch = seeds.size(), dim = x.dim;

  BaselineResult<T> res;
  auto& block = res.block;
  block.hops = 1;
  block.batch = batch;
  block.k1 = k;
  block.dim = dim;
  block.dedup = dedup;

  block.hop1_ids = TrackedBuffer<NodeId>(batch * k, kPad, ctx.meter);
  std::vector<std::uint64_t> pairs(std::max(1u, ctx.workers), 0);
  parallel_chunks(batch, ctx.workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RngStream s = one_hop_stream(base_seed, i);
      pairs[w] += sample_neighbors_reservoir(g, seeds.seeds[i], k, s,
                                             std::span<NodeId>(block.hop1_ids.data() + i * k, k));
    }
  });
  res.sampled_pairs = detail::total(pairs);

  detail::materialize_leaves(block, x, ctx);

  res.out = AggregatedOutput<T>(batch, dim, ctx.meter);
  parallel_for(batch, ctx.workers, [&](std::size_t i) {
    auto row = res.out.row(i);
    std::size_t take = 0;
    for (std::size_t t = 0; t < k; ++t) {
      const T* src = block.leaf_features(i * k + t);
      if (!src) continue;
      ++take;
      detail::add_row(row, src);
    }
    detail::divide_row(row, effective_count(take));
  });
  return res;
}

/// Reference adjoint of the materialized pipeline: forms the gradient of
/// the gathered block, then scatters it back to node rows in slot order.
template <class T>
GradBuffer<T> baseline_backward(std::span<const T> grad_out, const MaterializedBlock<T>& block,
                                std::size_t num_nodes, const ExecContext& ctx = {}) {
  const std::size_t dim = block.dim, slots = block.leaf_slots(), kl = block.leaf_fanout();
  detail::require(grad_out.size() == block.batch * dim, "grad_out must be B x D");
  detail::require(block.hop1_ids.size() == block.batch * block.k1 && block.leaf_ids().size() == slots,
                  "block shape mismatch");
  for (NodeId v : block.leaf_ids())
    detail::require(v < 0 || static_cast<std::size_t>(v) < num_nodes, "block id out of range");

  // Gradient of the gathered tensor, one row per leaf slot.
  TrackedBuffer<T> grad_leaf(slots * dim, T{}, ctx.meter);
  parallel_chunks(block.batch, ctx.workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const T* g = grad_out.data() + r * dim;
      if (block.hops == 1) {
        const std::size_t take = count_valid(std::span<const NodeId>(block.hop1_ids.data() + r * kl, kl));
        if (take == 0) continue;
        const T denom = static_cast<T>(take);
        for (std::size_t t = 0; t < kl; ++t) {
          if (block.hop1_ids[r * kl + t] < 0) continue;
          T* dst = grad_leaf.data() + (r * kl + t) * dim;
          for (std::size_t d = 0; d < dim; ++d) dst[d] = g[d] / denom;
        }
        continue;
      }
      const std::size_t k1_eff =
          effective_count(count_valid(std::span<const NodeId>(block.hop1_ids.data() + r * block.k1, block.k1)));
      for (std::size_t j = 0; j < block.k1; ++j) {
        if (block.hop1_ids[r * block.k1 + j] < 0) continue;
        const std::size_t base = (r * block.k1 + j) * kl;
        const std::size_t k2_eff =
            effective_count(count_valid(std::span<const NodeId>(block.hop2_ids.data() + base, kl)));
        const T denom = static_cast<T>(k1_eff) * static_cast<T>(k2_eff);
        for (std::size_t t = 0; t < kl; ++t) {
          if (block.hop2_ids[base + t] < 0) continue;
          T* dst = grad_leaf.data() + (base + t) * dim;
          for (std::size_t d = 0; d < dim; ++d) dst[d] = g[d] / denom;
        }
      }
    }
  });

  // Scatter in ascending slot order per column.
  GradBuffer<T> grad(num_nodes, dim, ctx.meter);
  const auto& ids = block.leaf_ids();
  parallel_chunks(dim, ctx.workers, [&](std::size_t, std::size_t d0, std::size_t d1) {
    for (std::size_t s = 0; s < slots; ++s) {
      if (ids[s] < 0) continue;
      const T* src = grad_leaf.data() + s * dim;
      T* dst = grad.values.data() + static_cast<std::size_t>(ids[s]) * dim;
      for (std::size_t d = d0; d < d1; ++d) dst[d] += src[d];
    }
  });
  return grad;
}

}  // namespace fsa
