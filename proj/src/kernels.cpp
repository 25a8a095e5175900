#include "delaymp/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace delaymp::kernels {

namespace scalar {

namespace {

inline void neumaier(double& s, double& c, double x) {
  const double t = s + x;
  if (std::fabs(s) >= std::fabs(x)) {
    c += (s - t) + x;
  } else {
    c += (x - t) + s;
  }
  s = t;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  double l[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int j = 0; j < 4; ++j) l[j] = l[j] + a[i + j] * b[i + j];
  for (int j = 0; i < n; ++i, ++j) l[j] = l[j] + a[i] * b[i];
  return (l[0] + l[1]) + (l[2] + l[3]);
}

double sum(const double* a, std::size_t n) {
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  double c[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int j = 0; j < 4; ++j) neumaier(s[j], c[j], a[i + j]);
  for (int j = 0; i < n; ++i, ++j) neumaier(s[j], c[j], a[i]);
  double total = 0.0, comp = 0.0;
  for (int j = 0; j < 4; ++j) neumaier(total, comp, s[j]);
  for (int j = 0; j < 4; ++j) comp += c[j];
  return total + comp;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
  double l[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int j = 0; j < 4; ++j) {
      const double d = a[i + j] - b[i + j];
      l[j] = l[j] + d * d;
    }
  for (int j = 0; i < n; ++i, ++j) {
    const double d = a[i] - b[i];
    l[j] = l[j] + d * d;
  }
  return (l[0] + l[1]) + (l[2] + l[3]);
}

double weighted_sq_dist(const double* a, const double* b, const double* w, std::size_t n) {
  double l[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int j = 0; j < 4; ++j) {
      const double d = a[i + j] - b[i + j];
      l[j] = l[j] + w[i + j] * (d * d);
    }
  for (int j = 0; i < n; ++i, ++j) {
    const double d = a[i] - b[i];
    l[j] = l[j] + w[i] * (d * d);
  }
  return (l[0] + l[1]) + (l[2] + l[3]);
}

}  // namespace scalar

namespace {

Isa initial_isa() {
  Isa isa = detected_isa();
  if (const char* env = std::getenv("DELAYMP_ISA")) {
    if (std::strcmp(env, "scalar") == 0) isa = Isa::Scalar;
  }
  return isa;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

Isa detected_isa() {
#if defined(__x86_64__) || defined(__i386__)
  if (avx2::compiled() && __builtin_cpu_supports("avx2")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (isa == Isa::Avx2 && detected_isa() != Isa::Avx2) isa = Isa::Scalar;
  current().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

double dot(const double* a, const double* b, std::size_t n) {
  return active_isa() == Isa::Avx2 ? avx2::dot(a, b, n) : scalar::dot(a, b, n);
}

double sum(const double* a, std::size_t n) {
  return active_isa() == Isa::Avx2 ? avx2::sum(a, n) : scalar::sum(a, n);
}

double sq_dist(const double* a, const double* b, std::size_t n) {
  return active_isa() == Isa::Avx2 ? avx2::sq_dist(a, b, n) : scalar::sq_dist(a, b, n);
}

double weighted_sq_dist(const double* a, const double* b, const double* w, std::size_t n) {
  return active_isa() == Isa::Avx2 ? avx2::weighted_sq_dist(a, b, w, n) : scalar::weighted_sq_dist(a, b, w, n);
}

void gram(const double* const* cols, std::size_t k, std::size_t n, double* G) {
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) {
      const double v = dot(cols[i], cols[j], n);
      G[i * k + j] = v;
      G[j * k + i] = v;
    }
}

}  // namespace delaymp::kernels
