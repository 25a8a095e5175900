#include <doctest.h>

#include <cmath>
#include <random>

#include "delaymp/regression.hpp"

using namespace delaymp;

namespace {

struct Sample {
  std::vector<double> x, y, c;
};

Sample sample(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d(1.0, 2.0);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    s.x.push_back(d(g));
    s.y.push_back(0.5 * d(g));
    s.c.push_back(3.0);
  }
  return s;
}

}  // namespace

TEST_CASE("monomial basis size and exponents") {
  const PolyBasis b(3, 2);
  CHECK(b.size() == 10);
  const PolyBasis b1(1, 3);
  CHECK(b1.size() == 4);
  for (const auto& e : b.exponents()) {
    int deg = 0;
    for (int v : e) deg += v;
    CHECK(deg <= 2);
  }
  double out[4];
  const double z = 2.0;
  b1.eval(&z, out);
  double prod = 1.0;
  std::vector<double> sorted(out, out + 4);
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k < 4; ++k) {
    CHECK(sorted[k] == prod);
    prod *= 2.0;
  }
}

TEST_CASE("targets in the span are reproduced exactly") {
  const Sample s = sample(500, 1);
  const PolyBasis b(2, 2);
  const double* vars[2] = {s.x.data(), s.y.data()};
  const SliceRegression reg(b, std::span<const double* const>(vars, 2), 500);
  auto fn = [](double x, double y) { return 1.0 + 2.0 * x - 3.0 * x * x + 0.5 * x * y + y * y; };
  std::vector<double> t(500), fit(500);
  for (std::size_t i = 0; i < 500; ++i) t[i] = fn(s.x[i], s.y[i]);
  reg.fitted(t.data(), fit.data());
  for (std::size_t i = 0; i < 500; i += 17) CHECK(fit[i] == doctest::Approx(t[i]).epsilon(1e-9));
  const auto coef = reg.fit(t.data());
  const double pt[2] = {0.7, -1.3};
  CHECK(reg.predict(coef, pt) == doctest::Approx(fn(0.7, -1.3)).epsilon(1e-9));
}

TEST_CASE("residuals are orthogonal to the basis and the projection is idempotent") {
  const Sample s = sample(800, 2);
  const PolyBasis b(2, 2);
  const double* vars[2] = {s.x.data(), s.y.data()};
  const SliceRegression reg(b, std::span<const double* const>(vars, 2), 800);
  std::mt19937_64 g(3);
  std::normal_distribution<double> d;
  std::vector<double> t(800), fit(800), res(800), fit_res(800), fit2(800);
  for (std::size_t i = 0; i < 800; ++i) t[i] = std::sin(s.x[i]) + d(g);
  reg.fitted(t.data(), fit.data());
  for (std::size_t i = 0; i < 800; ++i) res[i] = t[i] - fit[i];
  double dot_x = 0.0, dot_1 = 0.0;
  for (std::size_t i = 0; i < 800; ++i) {
    dot_x += res[i] * s.x[i];
    dot_1 += res[i];
  }
  CHECK(std::abs(dot_x) < 1e-9 * 800);
  CHECK(std::abs(dot_1) < 1e-9 * 800);
  reg.fitted(fit.data(), fit2.data());
  for (std::size_t i = 0; i < 800; i += 31) CHECK(fit2[i] == doctest::Approx(fit[i]).epsilon(1e-10));
}

TEST_CASE("constant variables drop out without breaking the fit") {
  const Sample s = sample(300, 4);
  const PolyBasis b(2, 2);
  const double* vars[2] = {s.x.data(), s.c.data()};
  const SliceRegression reg(b, std::span<const double* const>(vars, 2), 300);
  std::vector<double> t(300), fit(300);
  for (std::size_t i = 0; i < 300; ++i) t[i] = 4.0 - s.x[i];
  reg.fitted(t.data(), fit.data());
  for (std::size_t i = 0; i < 300; i += 11) CHECK(fit[i] == doctest::Approx(t[i]).epsilon(1e-9));
}

TEST_CASE("a single sample projects to its own value") {
  const PolyBasis b(1, 2);
  const double x = 1.5;
  const double* vars[1] = {&x};
  const SliceRegression reg(b, std::span<const double* const>(vars, 1), 1);
  const double t = 2.5;
  double out = 0.0;
  reg.fitted(&t, &out);
  CHECK(out == doctest::Approx(2.5));
}
