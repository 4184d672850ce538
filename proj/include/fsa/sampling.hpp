#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fsa/csr_graph.hpp"
#include "fsa/rng.hpp"

namespace fsa {

/// Uniform without-replacement choice of up to k neighbors of u (Vitter's
/// Algorithm R). The first k neighbors fill the reservoir; neighbor i >= k
/// draws j = uniform_index(i+1) and replaces slot j when j < k. If
/// deg(u) <= k all neighbors are returned in CSR order and the stream is not
/// advanced. Writes the picks to out[0, take) and returns take; `out` must
/// hold at least k entries. Slots past take are left untouched.
inline std::size_t sample_neighbors_reservoir(const CsrGraph& g, NodeId u, std::size_t k, RngStream& stream,
                                              std::span<NodeId> out) {
  const auto nbrs = g.neighbors(u);
  const std::size_t deg = nbrs.size();
  if (deg <= k) {
    std::copy(nbrs.begin(), nbrs.end(), out.begin());
    return deg;
  }
  std::copy_n(nbrs.begin(), k, out.begin());
  for (std::size_t i = k; i < deg; ++i) {
    const std::uint64_t j = next_u64(stream) % (i + 1);
    if (j < k) out[j] = nbrs[i];
  }
  return k;
}

inline std::vector<NodeId> sample_neighbors_reservoir(const CsrGraph& g, NodeId u, std::size_t k, RngStream& stream) {
  std::vector<NodeId> out(k, kPad);
  out.resize(sample_neighbors_reservoir(g, u, k, stream, out));
  return out;
}

// Stream keys. Roots are identified by their position in the batch, not by
// node id, so a node repeated within one batch is sampled independently at
// each position.
inline RngStream one_hop_stream(std::uint64_t base_seed, std::size_t position) {
  return derive_stream(base_seed, position, 0, 0);
}
inline RngStream first_hop_stream(std::uint64_t base_seed, std::size_t position) {
  return derive_stream(base_seed, position, 1, 0);
}
inline RngStream second_hop_stream(std::uint64_t base_seed, std::size_t position, std::size_t slot) {
  return derive_stream(base_seed, position, 2, slot);
}

}  // namespace fsa
