#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "fsa/memory_meter.hpp"

namespace fsa {

/// Worker count: FSA_WORKERS if set to a positive integer, else the
/// hardware concurrency (at least 1).
inline unsigned default_workers() {
  if (const char* env = std::getenv("FSA_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Execution knobs shared by every operator.
struct ExecContext {
  unsigned workers = 1;
  MemoryMeter* meter = nullptr;
};

// Splits [0, n) into `workers` contiguous chunks and calls
// fn(worker, begin, end) for each non-empty one. Chunk w is
// [n*w/W, n*(w+1)/W). All chunks have joined when this returns, so there is
// never deferred work. The first exception thrown by a worker is rethrown.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
  if (n == 0) return;
  const std::size_t w = std::clamp<std::size_t>(workers, 1, n);
  if (w == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  threads.reserve(w - 1);
  auto run = [&](std::size_t i) {
    try {
      fn(i, n * i / w, n * (i + 1) / w);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  for (std::size_t i = 1; i < w; ++i) threads.emplace_back(run, i);
  run(0);
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  parallel_chunks(n, workers, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) fn(i);
  });
}

}  // namespace fsa
