#pragma once

#include <cstdint>

#include "fsa/common.hpp"

namespace fsa {

// Stream derivation and stepping constants. These values are the
// determinism contract of every sampler in the library: changing any of them
// changes every sampled index.
namespace rng_constants {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kRootMul = 0xD1B54A32D192ED03ULL;
inline constexpr std::uint64_t kHopMul = 0xABC98388FB8FAC03ULL;
inline constexpr std::uint64_t kIndexMul = 0x8CB92BA72F3D8DD7ULL;
// Substitute state when the mix lands on xorshift's fixed point.
inline constexpr std::uint64_t kNonZeroFallback = kGolden;
}  // namespace rng_constants

/// splitmix64 output finalizer.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// One xorshift64 generator. State is never zero.
struct RngStream {
  std::uint64_t state = rng_constants::kNonZeroFallback;

  friend constexpr bool operator==(RngStream, RngStream) = default;
};

/// Stream for one (base_seed, root, hop, index) tuple:
/// z = base + GOLDEN * (1 + root*M1 + hop*M2 + index*M3), then splitmix64
/// finalization. All arithmetic wraps mod 2^64.
constexpr RngStream derive_stream(std::uint64_t base_seed, std::uint64_t root, std::uint64_t hop,
                                  std::uint64_t index) noexcept {
  using namespace rng_constants;
  const std::uint64_t lane = 1 + root * kRootMul + hop * kHopMul + index * kIndexMul;
  std::uint64_t z = splitmix64_mix(base_seed + kGolden * lane);
  return RngStream{z == 0 ? kNonZeroFallback : z};
}

/// xorshift64 with shift triple (13, 7, 17); returns the new state.
constexpr std::uint64_t next_u64(RngStream& s) noexcept {
  std::uint64_t x = s.state;
  x ^= x << 13;
  x ^= x >> 7;
  x ^= x << 17;
  s.state = x;
  return x;
}

/// next_u64 reduced modulo `bound`. The modulo bias is at most bound/2^64.
inline std::uint64_t uniform_index(RngStream& s, std::uint64_t bound) {
  detail::require(bound >= 1, "uniform_index: bound must be >= 1");
  return next_u64(s) % bound;
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double uniform_unit(RngStream& s) noexcept {
  return static_cast<double>(next_u64(s) >> 11) * 0x1.0p-53;
}

/// Seed for the step-th mini-batch of a run keyed by `base_seed`.
constexpr std::uint64_t step_seed(std::uint64_t base_seed, std::uint64_t step) noexcept {
  return splitmix64_mix(base_seed ^ splitmix64_mix(step + rng_constants::kGolden));
}

}  // namespace fsa
