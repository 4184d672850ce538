#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fsa/common.hpp"
#include "fsa/memory_meter.hpp"

namespace fsa {

/// B x D aggregation result.
template <class T>
struct AggregatedOutput {
  std::size_t batch = 0;
  std::size_t dim = 0;
  TrackedBuffer<T> values;

  AggregatedOutput() = default;
  AggregatedOutput(std::size_t b, std::size_t d, MemoryMeter* meter) : batch(b), dim(d), values(b * d, T{}, meter) {}

  std::span<T> row(std::size_t i) noexcept { return {values.data() + i * dim, dim}; }
  std::span<const T> row(std::size_t i) const noexcept { return {values.data() + i * dim, dim}; }
};

/// N x D gradient w.r.t. the feature matrix; zero-initialized.
template <class T>
struct GradBuffer {
  std::size_t num_nodes = 0;
  std::size_t dim = 0;
  TrackedBuffer<T> values;

  GradBuffer() = default;
  GradBuffer(std::size_t n, std::size_t d, MemoryMeter* meter) : num_nodes(n), dim(d), values(n * d, T{}, meter) {}

  std::span<const T> row(std::size_t i) const noexcept { return {values.data() + i * dim, dim}; }
  T at(std::size_t i, std::size_t d) const noexcept { return values[i * dim + d]; }
  bool all_zero() const {
    for (T v : values)
      if (v != T{}) return false;
    return true;
  }
};

/// Saved 1-hop picks: samples is B x k (-1 padded), takes[i] = valid count.
struct SampledIndices1 {
  std::size_t batch = 0;
  std::size_t fanout = 0;
  TrackedBuffer<NodeId> samples;
  TrackedBuffer<std::int32_t> takes;

  SampledIndices1() = default;
  SampledIndices1(std::size_t b, std::size_t k, MemoryMeter* meter)
      : batch(b), fanout(k), samples(b * k, kPad, meter), takes(b, 0, meter) {}

  std::span<NodeId> row(std::size_t i) noexcept { return {samples.data() + i * fanout, fanout}; }
  std::span<const NodeId> row(std::size_t i) const noexcept { return {samples.data() + i * fanout, fanout}; }
};

/// Saved 2-hop picks: s1 is B x k1, s2 is B x k1 x k2, both -1 padded.
struct SampledIndices2 {
  std::size_t batch = 0;
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  TrackedBuffer<NodeId> s1;
  TrackedBuffer<NodeId> s2;

  SampledIndices2() = default;
  SampledIndices2(std::size_t b, std::size_t f1, std::size_t f2, MemoryMeter* meter)
      : batch(b), k1(f1), k2(f2), s1(b * f1, kPad, meter), s2(b * f1 * f2, kPad, meter) {}

  std::span<NodeId> hop1(std::size_t r) noexcept { return {s1.data() + r * k1, k1}; }
  std::span<const NodeId> hop1(std::size_t r) const noexcept { return {s1.data() + r * k1, k1}; }
  std::span<NodeId> hop2(std::size_t r, std::size_t j) noexcept { return {s2.data() + (r * k1 + j) * k2, k2}; }
  std::span<const NodeId> hop2(std::size_t r, std::size_t j) const noexcept {
    return {s2.data() + (r * k1 + j) * k2, k2};
  }
};

/// Number of non-negative entries in a -1 padded slot row.
inline std::size_t count_valid(std::span<const NodeId> ids) noexcept {
  std::size_t n = 0;
  for (NodeId v : ids) n += v >= 0;
  return n;
}

/// max(1, n): the mean denominator for a slot row holding n valid entries.
inline std::size_t effective_count(std::size_t n) noexcept { return n > 0 ? n : 1; }

}  // namespace fsa
