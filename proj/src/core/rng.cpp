#include "core/rng.hpp"

#include <cmath>

namespace pf {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mul_hilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// Uniform on (0,1]: never 0, safe as a log argument.
inline double to_unit_closed(std::uint32_t hi, std::uint32_t lo) {
  std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

// Uniform on (0,1).
inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

PhiloxBlock philox4x32(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo) {
  std::uint32_t c0 = static_cast<std::uint32_t>(ctr_lo);
  std::uint32_t c1 = static_cast<std::uint32_t>(ctr_lo >> 32);
  std::uint32_t c2 = static_cast<std::uint32_t>(ctr_hi);
  std::uint32_t c3 = static_cast<std::uint32_t>(ctr_hi >> 32);
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mul_hilo(kM0, c0, hi0, lo0);
    mul_hilo(kM1, c2, hi1, lo1);
    std::uint32_t n0 = hi1 ^ c1 ^ k0;
    std::uint32_t n1 = lo1;
    std::uint32_t n2 = hi0 ^ c3 ^ k1;
    std::uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    k0 += kW0;
    k1 += kW1;
  }
  return PhiloxBlock{{c0, c1, c2, c3}};
}

double normal_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t i) {
  PhiloxBlock b = philox4x32(seed, stream, i >> 1);
  double u1 = to_unit_closed(b.v[0], b.v[1]);
  double u2 = to_unit_open(b.v[2], b.v[3]);
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 6.283185307179586476925286766559 * u2;
  return (i & 1) ? r * std::sin(theta) : r * std::cos(theta);
}

double uniform_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t i) {
  // Separate counter region so uniform and normal draws never share a block.
  PhiloxBlock b = philox4x32(seed, stream, 0x8000000000000000ull | (i >> 1));
  return (i & 1) ? to_unit_open(b.v[2], b.v[3]) : to_unit_open(b.v[0], b.v[1]);
}

}  // namespace pf
