#pragma once

#include <cstddef>

/// Ensemble reductions with a scalar reference and an AVX2 variant chosen at
/// runtime. Both use the same four-lane accumulation order and no fused
/// multiply-add, so they agree bit for bit.
namespace delaymp::kernels {

enum class Isa { Scalar, Avx2 };

Isa detected_isa();
Isa active_isa();
/// Forces a variant; requests for an unsupported variant fall back to scalar.
void set_isa(Isa isa);
const char* isa_name(Isa isa);

double dot(const double* a, const double* b, std::size_t n);
/// Neumaier-compensated sum.
double sum(const double* a, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t n);
double weighted_sq_dist(const double* a, const double* b, const double* w, std::size_t n);
/// G (k x k, row-major) = cols^T cols for k columns of length n.
void gram(const double* const* cols, std::size_t k, std::size_t n, double* G);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t n);
double weighted_sq_dist(const double* a, const double* b, const double* w, std::size_t n);
}  // namespace scalar

namespace avx2 {
bool compiled();
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t n);
double weighted_sq_dist(const double* a, const double* b, const double* w, std::size_t n);
}  // namespace avx2

}  // namespace delaymp::kernels
