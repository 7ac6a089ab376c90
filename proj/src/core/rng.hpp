#pragma once

#include <cstdint>

namespace pf {

struct PhiloxBlock {
  std::uint32_t v[4];
};

/// Philox4x32-10 counter-based generator. A (key, counter) pair maps to four
/// 32-bit words; there is no sequential state, so draws can be indexed freely.
PhiloxBlock philox4x32(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo);

/// i-th standard normal of the (seed, stream) sequence (Box-Muller pairs).
double normal_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t i);

/// i-th uniform draw in the open interval (0, 1).
double uniform_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t i);

/// Convenience handle for one keyed sequence.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double normal(std::uint64_t i) const { return normal_draw(seed, stream, i); }
  double uniform(std::uint64_t i) const { return uniform_draw(seed, stream, i); }
};

}  // namespace pf
