#pragma once

#include <array>
#include <cstdint>

namespace delaymp {

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

/// Counter-based stream keyed by (seed, path). Values depend only on
/// (seed, path, step, slot), never on call order.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t path);

  /// Two uniforms in the open interval (0, 1).
  std::array<double, 2> uniforms(std::uint64_t step, std::uint32_t slot) const;
  /// Two independent standard normals (Box-Muller on one block).
  std::array<double, 2> normals(std::uint64_t step, std::uint32_t slot) const;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t path_lo_, path_hi_;
};

}  // namespace delaymp
