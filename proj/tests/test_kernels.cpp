#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "delaymp/kernels.hpp"

using namespace delaymp;
namespace kn = delaymp::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(g);
  return v;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("scalar kernels agree with plain loops") {
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 64u, 1001u}) {
    const auto a = random_vec(n, 1), b = random_vec(n, 2), w = random_vec(n, 3);
    long double dot = 0, sum = 0, sq = 0, wsq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += (long double)a[i] * b[i];
      sum += a[i];
      sq += (long double)(a[i] - b[i]) * (a[i] - b[i]);
      wsq += (long double)w[i] * (a[i] - b[i]) * (a[i] - b[i]);
    }
    CHECK(kn::scalar::dot(a.data(), b.data(), n) == doctest::Approx((double)dot).epsilon(1e-12));
    CHECK(kn::scalar::sum(a.data(), n) == doctest::Approx((double)sum).epsilon(1e-13));
    CHECK(kn::scalar::sq_dist(a.data(), b.data(), n) == doctest::Approx((double)sq).epsilon(1e-12));
    CHECK(kn::scalar::weighted_sq_dist(a.data(), b.data(), w.data(), n) == doctest::Approx((double)wsq).epsilon(1e-10));
  }
}

TEST_CASE("compensated sum survives cancellation") {
  std::vector<double> v = {1e16, 1.0, -1e16, 1.0, 3.0, 1e-3};
  CHECK(kn::scalar::sum(v.data(), v.size()) == doctest::Approx(5.001).epsilon(1e-15));
}

TEST_CASE("avx2 kernels equal the scalar kernels bit for bit") {
  if (!kn::avx2::compiled() || kn::detected_isa() != kn::Isa::Avx2) {
    MESSAGE("AVX2 not available; equivalence not exercised");
    return;
  }
  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 8u, 15u, 16u, 17u, 255u, 4096u, 10007u}) {
    const auto a = random_vec(n, 10 + n, 1e3), b = random_vec(n, 20 + n), w = random_vec(n, 30 + n);
    CHECK(same_bits(kn::avx2::dot(a.data(), b.data(), n), kn::scalar::dot(a.data(), b.data(), n)));
    CHECK(same_bits(kn::avx2::sum(a.data(), n), kn::scalar::sum(a.data(), n)));
    CHECK(same_bits(kn::avx2::sq_dist(a.data(), b.data(), n), kn::scalar::sq_dist(a.data(), b.data(), n)));
    CHECK(same_bits(kn::avx2::weighted_sq_dist(a.data(), b.data(), w.data(), n),
                    kn::scalar::weighted_sq_dist(a.data(), b.data(), w.data(), n)));
  }
}

TEST_CASE("dispatch follows set_isa and gram is symmetric") {
  const std::size_t n = 333;
  const auto a = random_vec(n, 5), b = random_vec(n, 6), c = random_vec(n, 7);
  const double* cols[3] = {a.data(), b.data(), c.data()};
  const kn::Isa saved = kn::active_isa();
  double G0[9], G1[9];
  kn::set_isa(kn::Isa::Scalar);
  CHECK(kn::active_isa() == kn::Isa::Scalar);
  const double d0 = kn::dot(a.data(), b.data(), n);
  kn::gram(cols, 3, n, G0);
  kn::set_isa(kn::Isa::Avx2);
  const double d1 = kn::dot(a.data(), b.data(), n);
  kn::gram(cols, 3, n, G1);
  kn::set_isa(saved);
  CHECK(same_bits(d0, d1));
  for (int i = 0; i < 9; ++i) CHECK(same_bits(G0[i], G1[i]));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(G0[3 * i + j] == G0[3 * j + i]);
  CHECK(G0[1] == doctest::Approx(kn::scalar::dot(a.data(), b.data(), n)));
  CHECK(std::string(kn::isa_name(kn::Isa::Avx2)) == "avx2");
}
