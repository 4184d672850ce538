#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsa/common.hpp"

namespace fsa {

/// Adjacency in compressed sparse row form. Neighbor lists are sorted
/// ascending and duplicate-free when produced by build_csr.
class CsrGraph {
 public:
  CsrGraph() = default;

  /// Adopts prebuilt arrays; throws InvalidArgument if they violate the
  /// CSR invariants.
  CsrGraph(std::vector<std::uint32_t> rowptr, std::vector<NodeId> col)
      : rowptr_(std::move(rowptr)), col_(std::move(col)) {
    validate();
  }

  std::size_t num_nodes() const noexcept { return rowptr_.empty() ? 0 : rowptr_.size() - 1; }
  std::size_t num_edges() const noexcept { return col_.size(); }

  std::size_t degree(NodeId u) const noexcept {
    return rowptr_[static_cast<std::size_t>(u) + 1] - rowptr_[static_cast<std::size_t>(u)];
  }
  std::span<const NodeId> neighbors(NodeId u) const noexcept {
    const auto b = rowptr_[static_cast<std::size_t>(u)];
    const auto e = rowptr_[static_cast<std::size_t>(u) + 1];
    return {col_.data() + b, static_cast<std::size_t>(e - b)};
  }
  bool contains(NodeId u) const noexcept {
    return u >= 0 && static_cast<std::size_t>(u) < num_nodes();
  }
  bool has_edge(NodeId u, NodeId v) const {
    auto n = neighbors(u);
    return std::binary_search(n.begin(), n.end(), v);
  }

  const std::vector<std::uint32_t>& rowptr() const noexcept { return rowptr_; }
  const std::vector<NodeId>& col() const noexcept { return col_; }

  double mean_degree() const noexcept {
    return num_nodes() ? static_cast<double>(num_edges()) / static_cast<double>(num_nodes()) : 0.0;
  }

  /// O(N+E) invariant check; throws InvalidArgument naming the violation.
  void validate() const {
    detail::require(!rowptr_.empty(), "csr: rowptr must have N+1 entries");
    detail::require(num_nodes() <= kMaxNodes, "csr: node count exceeds 2^31-1");
    detail::require(rowptr_.front() == 0, "csr: rowptr[0] must be 0");
    for (std::size_t i = 0; i + 1 < rowptr_.size(); ++i)
      detail::require(rowptr_[i] <= rowptr_[i + 1], "csr: rowptr must be non-decreasing");
    detail::require(rowptr_.back() == col_.size(), "csr: rowptr[N] must equal len(col)");
    const auto n = static_cast<std::int64_t>(num_nodes());
    for (NodeId v : col_) detail::require(v >= 0 && v < n, "csr: neighbor id out of range");
    for (std::size_t u = 0; u < num_nodes(); ++u)
      for (auto j = rowptr_[u] + 1; j < rowptr_[u + 1]; ++j)
        detail::require(col_[j - 1] < col_[j], "csr: neighbor lists must be sorted and duplicate-free");
  }

  /// True iff every edge (u,v) has its reverse (v,u).
  bool is_symmetric() const {
    for (std::size_t u = 0; u < num_nodes(); ++u)
      for (NodeId v : neighbors(static_cast<NodeId>(u)))
        if (!has_edge(v, static_cast<NodeId>(u))) return false;
    return true;
  }

  friend bool operator==(const CsrGraph&, const CsrGraph&) = default;

 private:
  std::vector<std::uint32_t> rowptr_;
  std::vector<NodeId> col_;
};

using Edge = std::pair<std::int64_t, std::int64_t>;

/// Builds a CSR graph over `num_nodes` nodes. Neighbor lists come out sorted
/// and de-duplicated; with `make_undirected` every edge is mirrored first.
/// Self-loops are kept.
inline CsrGraph build_csr(std::span<const Edge> edges, std::size_t num_nodes, bool make_undirected) {
  detail::require(num_nodes > 0, "build_csr: N must be positive");
  detail::require(num_nodes <= kMaxNodes, "build_csr: N must be < 2^31");
  const auto n = static_cast<std::int64_t>(num_nodes);
  for (const auto& [u, v] : edges)
    detail::require(u >= 0 && u < n && v >= 0 && v < n,
                    "build_csr: endpoint out of range (" + std::to_string(u) + "," +
                        std::to_string(v) + ") for N=" + std::to_string(num_nodes));

  std::vector<std::uint64_t> counts(num_nodes + 1, 0);
  for (const auto& [u, v] : edges) {
    ++counts[static_cast<std::size_t>(u) + 1];
    if (make_undirected && u != v) ++counts[static_cast<std::size_t>(v) + 1];
  }
  for (std::size_t i = 0; i < num_nodes; ++i) counts[i + 1] += counts[i];
  detail::require(counts.back() <= UINT32_MAX, "build_csr: too many edges for 32-bit offsets");

  std::vector<NodeId> raw(counts.back());
  std::vector<std::uint64_t> fill(counts.begin(), counts.end() - 1);
  for (const auto& [u, v] : edges) {
    raw[fill[static_cast<std::size_t>(u)]++] = static_cast<NodeId>(v);
    if (make_undirected && u != v) raw[fill[static_cast<std::size_t>(v)]++] = static_cast<NodeId>(u);
  }

  std::vector<std::uint32_t> rowptr(num_nodes + 1, 0);
  std::vector<NodeId> col;
  col.reserve(raw.size());
  for (std::size_t u = 0; u < num_nodes; ++u) {
    auto b = raw.begin() + static_cast<std::ptrdiff_t>(counts[u]);
    auto e = raw.begin() + static_cast<std::ptrdiff_t>(counts[u + 1]);
    std::sort(b, e);
    e = std::unique(b, e);
    col.insert(col.end(), b, e);
    rowptr[u + 1] = static_cast<std::uint32_t>(col.size());
  }
  return CsrGraph(std::move(rowptr), std::move(col));
}

inline CsrGraph build_csr(const std::vector<Edge>& edges, std::size_t num_nodes, bool make_undirected) {
  return build_csr(std::span<const Edge>(edges), num_nodes, make_undirected);
}

/// Every stored (u, v) entry, in CSR order.
inline std::vector<Edge> edge_list(const CsrGraph& g) {
  std::vector<Edge> out;
  out.reserve(g.num_edges());
  for (std::size_t u = 0; u < g.num_nodes(); ++u)
    for (NodeId v : g.neighbors(static_cast<NodeId>(u))) out.emplace_back(u, v);
  return out;
}

}  // namespace fsa
