#pragma once

#include <algorithm>
#include <cstddef>
#include <span>

#include "fsa/parallel.hpp"

// Row-major dense kernels for the training head. Each output element is
// owned by exactly one worker and reduced in a fixed order, so results do
// not depend on the worker count.

namespace fsa::dense {

/// C[M x N] += A[M x K] * B[K x N]
template <class T>
void gemm_nn_acc(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
                 std::size_t n, unsigned workers) {
  parallel_for(m, workers, [&](std::size_t i) {
    T* ci = c.data() + i * n;
    const T* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T{}) continue;
      const T* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  });
}

/// C[K x N] += A[M x K]^T * B[M x N]
template <class T>
void gemm_tn_acc(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
                 std::size_t n, unsigned workers) {
  parallel_chunks(k, workers, [&](std::size_t, std::size_t k0, std::size_t k1) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* ai = a.data() + i * k;
      const T* bi = b.data() + i * n;
      for (std::size_t p = k0; p < k1; ++p) {
        const T av = ai[p];
        if (av == T{}) continue;
        T* cp = c.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
      }
    }
  });
}

/// C[M x K] = A[M x N] * B[K x N]^T, via a transposed copy of B so the
/// inner loop streams contiguous rows.
template <class T>
void gemm_nt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t n,
             std::size_t k, unsigned workers, MemoryMeter* meter = nullptr) {
  TrackedBuffer<T> bt(n * k, T{}, meter);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  std::fill(c.begin(), c.end(), T{});
  gemm_nn_acc<T>(a, bt.span(), c, m, n, k, workers);
}

}  // namespace fsa::dense
