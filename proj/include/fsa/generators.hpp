#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "fsa/csr_graph.hpp"
#include "fsa/rng.hpp"

namespace fsa {

namespace detail {
inline RngStream generator_stream(std::uint64_t seed, std::uint64_t purpose) {
  return derive_stream(seed, 0, 0x6E6 + purpose, 0);
}
}  // namespace detail

// Chung-Lu style undirected graph with a truncated power-law weight profile.
// Node weights are drawn from a continuous Pareto(exponent) on [1, cap] and
// M = round(N * avg_degree / 2) distinct non-loop edges are drawn with both
// endpoints proportional to weight, so the mean degree is 2M/N. Weights are
// clipped so that no node's expected degree exceeds N-1.
inline CsrGraph gen_power_law(std::size_t num_nodes, double avg_degree, double exponent,
                              std::uint64_t rng_seed) {
  detail::require(num_nodes >= 2, "gen_power_law: N must be >= 2");
  detail::require(num_nodes <= kMaxNodes, "gen_power_law: N must be < 2^31");
  detail::require(std::isfinite(avg_degree) && avg_degree >= 1.0, "gen_power_law: avg_degree must be >= 1");
  detail::require(std::isfinite(exponent) && exponent > 1.0, "gen_power_law: exponent must be > 1");
  const double n = static_cast<double>(num_nodes);
  const auto target = static_cast<std::uint64_t>(std::llround(n * avg_degree / 2.0));
  const double max_pairs = n * (n - 1) / 2;
  detail::require(static_cast<double>(target) <= 0.5 * max_pairs || num_nodes == 2,
                  "gen_power_law: avg_degree too large for N");

  RngStream weight_rng = detail::generator_stream(rng_seed, 1);
  const double cap = n - 1;
  const double tail = 1.0 - std::pow(cap, 1.0 - exponent);
  std::vector<double> weight(num_nodes);
  for (auto& w : weight) {
    const double u = uniform_unit(weight_rng);
    w = std::pow(1.0 - u * tail, -1.0 / (exponent - 1.0));
  }
  // Expected degree of node i is 2M * w_i / sum(w); clip hubs to N-1.
  for (int iter = 0; iter < 8; ++iter) {
    double sum = 0;
    for (double w : weight) sum += w;
    const double limit = cap * sum / (2.0 * static_cast<double>(target));
    bool clipped = false;
    for (auto& w : weight)
      if (w > limit) {
        w = limit;
        clipped = true;
      }
    if (!clipped) break;
  }
  std::vector<double> cumulative(num_nodes);
  double acc = 0;
  for (std::size_t i = 0; i < num_nodes; ++i) cumulative[i] = (acc += weight[i]);

  RngStream edge_rng = detail::generator_stream(rng_seed, 2);
  auto pick = [&]() -> std::uint64_t {
    const double x = uniform_unit(edge_rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    return static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                              static_cast<std::ptrdiff_t>(num_nodes) - 1));
  };

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(target * 2);
  std::vector<Edge> edges;
  edges.reserve(target);
  const std::uint64_t max_attempts = 64 * target + 1024;
  for (std::uint64_t attempt = 0; edges.size() < target; ++attempt) {
    detail::require(attempt < max_attempts, "gen_power_law: could not place enough distinct edges");
    std::uint64_t u = pick(), v = pick();
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (seen.insert((u << 32) | v).second) edges.emplace_back(u, v);
  }
  return build_csr(edges, num_nodes, true);
}

/// Each node draws `degree` distinct random partners (never itself); the
/// result is symmetrized, so every degree is at least `degree`.
inline CsrGraph gen_uniform(std::size_t num_nodes, std::size_t degree, std::uint64_t rng_seed) {
  detail::require(num_nodes >= 1 && num_nodes <= kMaxNodes, "gen_uniform: N out of range");
  detail::require(degree < num_nodes, "gen_uniform: degree must be < N");
  std::vector<Edge> edges;
  edges.reserve(num_nodes * degree);
  std::vector<std::uint64_t> chosen;
  for (std::size_t u = 0; u < num_nodes; ++u) {
    RngStream rng = derive_stream(rng_seed, u, 0x57, 0);
    chosen.clear();
    // Floyd's algorithm over the N-1 candidates that are not u.
    const std::uint64_t pool = num_nodes - 1;
    for (std::uint64_t j = pool - degree; j < pool; ++j) {
      std::uint64_t t = uniform_index(rng, j + 1);
      if (std::find(chosen.begin(), chosen.end(), t) != chosen.end()) t = j;
      chosen.push_back(t);
    }
    for (std::uint64_t c : chosen) edges.emplace_back(u, c >= u ? c + 1 : c);
  }
  return build_csr(edges, num_nodes, true);
}

}  // namespace fsa
