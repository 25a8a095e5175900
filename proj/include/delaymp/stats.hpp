#pragma once

#include <cstddef>
#include <vector>

namespace delaymp {

/// Sample mean with its standard error.
struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  double scale = 0.0;  ///< mean absolute sample, used for the round-off floor
};

/// Relative round-off floor admitted by every noise gate.
inline constexpr double kRoundoffFloor = 1e-10;

Estimate summarize(const std::vector<double>& samples);

/// |mean| <= k * stderr, plus the round-off floor.
bool within_noise(const Estimate& e, double k);
/// mean >= -k * stderr, plus the round-off floor.
bool not_below(const Estimate& e, double k);
/// |value| <= k * stderr + floor * scale for a value estimated with the given stderr.
bool within_noise(double value, double stderr_, double scale, double k);

}  // namespace delaymp
