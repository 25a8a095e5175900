#include "delaymp/rng.hpp"

#include <cmath>
#include <numbers>

namespace delaymp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t path)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      path_lo_(static_cast<std::uint32_t>(path)),
      path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

std::array<double, 2> NoiseStream::uniforms(std::uint64_t step, std::uint32_t slot) const {
  const std::uint32_t step_lo = static_cast<std::uint32_t>(step);
  const std::uint32_t step_hi = static_cast<std::uint32_t>(step >> 32);
  const auto r = philox4x32({step_lo, slot ^ (step_hi << 16), path_lo_, path_hi_}, key_);
  return {to_open_unit(r[0], r[1]), to_open_unit(r[2], r[3])};
}

std::array<double, 2> NoiseStream::normals(std::uint64_t step, std::uint32_t slot) const {
  const auto u = uniforms(step, slot);
  const double rad = std::sqrt(-2.0 * std::log(u[0]));
  const double ang = 2.0 * std::numbers::pi * u[1];
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

}  // namespace delaymp
