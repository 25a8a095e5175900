#include "delaymp/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

#include <cmath>

namespace delaymp::kernels::avx2 {

#if defined(__AVX2__)

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

bool compiled() { return true; }

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  for (int j = 0; i < n; ++i, ++j) l[j] = l[j] + a[i] * b[i];
  return (l[0] + l[1]) + (l[2] + l[3]);
}

double sum(const double* a, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d s = _mm256_setzero_pd();
  __m256d c = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(a + i);
    const __m256d t = _mm256_add_pd(s, x);
    const __m256d keep_s = _mm256_cmp_pd(_mm256_andnot_pd(sign, s), _mm256_andnot_pd(sign, x), _CMP_GE_OQ);
    const __m256d big = _mm256_blendv_pd(x, s, keep_s);
    const __m256d small = _mm256_blendv_pd(s, x, keep_s);
    c = _mm256_add_pd(c, _mm256_add_pd(_mm256_sub_pd(big, t), small));
    s = t;
  }
  alignas(32) double sl[4], cl[4];
  _mm256_store_pd(sl, s);
  _mm256_store_pd(cl, c);
  for (int j = 0; i < n; ++i, ++j) neumaier(sl[j], cl[j], a[i]);
  double total = 0.0, comp = 0.0;
  for (int j = 0; j < 4; ++j) neumaier(total, comp, sl[j]);
  for (int j = 0; j < 4; ++j) comp += cl[j];
  return total + comp;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  for (int j = 0; i < n; ++i, ++j) {
    const double d = a[i] - b[i];
    l[j] = l[j] + d * d;
  }
  return (l[0] + l[1]) + (l[2] + l[3]);
}

double weighted_sq_dist(const double* a, const double* b, const double* w, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(d, d)));
  }
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  for (int j = 0; i < n; ++i, ++j) {
    const double d = a[i] - b[i];
    l[j] = l[j] + w[i] * (d * d);
  }
  return (l[0] + l[1]) + (l[2] + l[3]);
}

#else

bool compiled() { return false; }
double dot(const double* a, const double* b, std::size_t n) { return scalar::dot(a, b, n); }
double sum(const double* a, std::size_t n) { return scalar::sum(a, n); }
double sq_dist(const double* a, const double* b, std::size_t n) { return scalar::sq_dist(a, b, n); }
double weighted_sq_dist(const double* a, const double* b, const double* w, std::size_t n) {
  return scalar::weighted_sq_dist(a, b, w, n);
}

#endif

}  // namespace delaymp::kernels::avx2
