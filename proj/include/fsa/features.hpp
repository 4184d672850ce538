#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fsa/common.hpp"
#include "fsa/csr_graph.hpp"
#include "fsa/rng.hpp"

namespace fsa {

/// Dense row-major N x D node features.
template <class T>
struct FeatureMatrix {
  std::size_t num_nodes = 0;
  std::size_t dim = 0;
  std::vector<T> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n, std::size_t d, T fill = T{}) : num_nodes(n), dim(d), values(n * d, fill) {}
  FeatureMatrix(std::size_t n, std::size_t d, std::vector<T> v) : num_nodes(n), dim(d), values(std::move(v)) {
    detail::require(values.size() == n * d, "FeatureMatrix: len(values) must equal N*D");
  }

  std::span<T> row(std::size_t i) noexcept { return {values.data() + i * dim, dim}; }
  std::span<const T> row(std::size_t i) const noexcept { return {values.data() + i * dim, dim}; }
  T& at(std::size_t i, std::size_t d) noexcept { return values[i * dim + d]; }
  T at(std::size_t i, std::size_t d) const noexcept { return values[i * dim + d]; }

  bool all_finite() const {
    for (T v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <class U>
  FeatureMatrix<U> cast() const {
    FeatureMatrix<U> out(num_nodes, dim);
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<U>(values[i]);
    return out;
  }
};

/// A mini-batch frontier: B seed ids, optionally with class labels.
struct SeedBatch {
  std::vector<NodeId> seeds;
  std::vector<std::int32_t> labels;

  std::size_t size() const noexcept { return seeds.size(); }
  bool has_labels() const noexcept { return labels.size() == seeds.size() && !seeds.empty(); }

  void validate(std::size_t num_nodes) const {
    detail::require(!seeds.empty(), "seed batch must not be empty");
    detail::require(labels.empty() || labels.size() == seeds.size(), "seed batch: labels/seeds size mismatch");
    for (NodeId s : seeds)
      detail::require(s >= 0 && static_cast<std::size_t>(s) < num_nodes,
                      "seed " + std::to_string(s) + " out of range for N=" + std::to_string(num_nodes));
  }
};

/// Uniform features in [-1, 1), deterministic in `seed`.
template <class T>
FeatureMatrix<T> random_features(std::size_t num_nodes, std::size_t dim, std::uint64_t seed) {
  FeatureMatrix<T> x(num_nodes, dim);
  RngStream rng = derive_stream(seed, 0, 0xFEA7, 0);
  for (auto& v : x.values) v = static_cast<T>(2.0 * uniform_unit(rng) - 1.0);
  return x;
}

/// Linearly separable labels: argmax over `classes` random projections of
/// each node's features.
template <class T>
std::vector<std::int32_t> projection_labels(const FeatureMatrix<T>& x, std::size_t classes, std::uint64_t seed) {
  detail::require(classes >= 1, "projection_labels: classes must be >= 1");
  std::vector<double> proj(x.dim * classes);
  RngStream rng = derive_stream(seed, 0, 0x1AB, 0);
  for (auto& p : proj) p = 2.0 * uniform_unit(rng) - 1.0;
  std::vector<std::int32_t> labels(x.num_nodes);
  std::vector<double> score(classes);
  for (std::size_t i = 0; i < x.num_nodes; ++i) {
    std::fill(score.begin(), score.end(), 0.0);
    auto r = x.row(i);
    for (std::size_t d = 0; d < x.dim; ++d)
      for (std::size_t c = 0; c < classes; ++c) score[c] += static_cast<double>(r[d]) * proj[d * classes + c];
    labels[i] = static_cast<std::int32_t>(std::max_element(score.begin(), score.end()) - score.begin());
  }
  return labels;
}

}  // namespace fsa
