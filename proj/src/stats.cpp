#include "delaymp/stats.hpp"

#include <cmath>

#include "delaymp/kernels.hpp"

namespace delaymp {

Estimate summarize(const std::vector<double>& samples) {
  Estimate e;
  e.n = samples.size();
  if (e.n == 0) return e;
  const double n = static_cast<double>(e.n);
  e.mean = kernels::sum(samples.data(), e.n) / n;
  std::vector<double> work(e.n);
  for (std::size_t i = 0; i < e.n; ++i) work[i] = std::fabs(samples[i]);
  e.scale = kernels::sum(work.data(), e.n) / n;
  if (e.n > 1) {
    for (std::size_t i = 0; i < e.n; ++i) work[i] = samples[i] - e.mean;
    const double ss = kernels::dot(work.data(), work.data(), e.n);
    e.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

bool within_noise(double value, double stderr_, double scale, double k) {
  return std::fabs(value) <= k * stderr_ + kRoundoffFloor * std::fabs(scale);
}

bool within_noise(const Estimate& e, double k) { return within_noise(e.mean, e.stderr_, e.scale, k); }

bool not_below(const Estimate& e, double k) {
  return e.mean >= -(k * e.stderr_ + kRoundoffFloor * e.scale);
}

}  // namespace delaymp
