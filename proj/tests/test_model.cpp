#include <doctest.h>

#include <cmath>

#include "delaymp/errors.hpp"
#include "delaymp/model.hpp"

using namespace delaymp;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ConfigError;
}

}  // namespace

TEST_CASE("grid snaps delay and horizon to whole steps") {
  const TimeGrid g = make_grid(1.0, 0.01, 5.0);
  CHECK(g.m == 100);
  CHECK(g.n == 500);
  CHECK(g.t(250) == doctest::Approx(2.5));
}

TEST_CASE("grid rejects incommensurate steps") {
  CHECK(code_of([] { make_grid(1.0, 0.3, 3.0); }) == ErrorCode::GridMismatch);
  CHECK(code_of([] { make_grid(1.0, 0.1, 2.55); }) == ErrorCode::GridMismatch);
  CHECK(code_of([] { make_grid(1.0, 0.1, 0.5); }) == ErrorCode::GridMismatch);
  CHECK(code_of([] { make_grid(1.0, -0.1, 2.0); }) == ErrorCode::GridMismatch);
}

TEST_CASE("finite-difference gradient matches the analytic one") {
  const ScalarCoefficient c([](const StatePoint& s) { return s.x * s.x * s.y + std::sin(s.a) * s.u; });
  const StatePoint p{0.3, 1.2, -0.7, 0.4, 2.0};
  const Grad4 g = c.grad(p);
  CHECK(g[0] == doctest::Approx(2.0 * 1.2 * -0.7).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(1.44).epsilon(1e-8));
  CHECK(g[2] == doctest::Approx(std::cos(0.4) * 2.0).epsilon(1e-8));
  CHECK(g[3] == doctest::Approx(std::sin(0.4)).epsilon(1e-8));
  CHECK_FALSE(c.has_analytic_grad());
  CHECK(ScalarCoefficient().is_zero());
  CHECK(ScalarCoefficient()(p) == 0.0);
}

TEST_CASE("discrete marks: quadrature, moments and features") {
  const MarkDistribution d = MarkDistribution::discrete({-0.5, 1.0}, {0.25, 0.75});
  CHECK(d.mean() == doctest::Approx(0.625));
  CHECK(d.second_moment() == doctest::Approx(0.25 * 0.25 + 0.75));
  CHECK(d.feature_count() == 2);
  double f[2];
  d.features(1.0, f);
  CHECK(f[0] == 0.0);
  CHECK(f[1] == 1.0);
  CHECK(d.sample(0.1) == -0.5);
  CHECK(d.sample(0.9) == 1.0);
  double w = 0.0;
  for (double x : d.quadrature().weights) w += x;
  CHECK(w == doctest::Approx(1.0));
}

TEST_CASE("uniform marks integrate polynomials exactly") {
  const MarkDistribution u = MarkDistribution::uniform(-1.0, 3.0);
  const auto& q = u.quadrature();
  double m3 = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) m3 += q.weights[i] * std::pow(q.nodes[i], 3);
  // E[Z^3] = (b^4 - a^4) / (4 (b - a))
  CHECK(m3 == doctest::Approx((81.0 - 1.0) / 16.0).epsilon(1e-12));
  CHECK(u.mean() == doctest::Approx(1.0));
  CHECK(u.second_moment() == doctest::Approx((27.0 + 1.0) / 12.0));
  CHECK(u.sample(0.5) == doctest::Approx(1.0));
}

TEST_CASE("bad mark laws raise ConfigError") {
  CHECK(code_of([] { MarkDistribution::discrete({1.0}, {0.5, 0.5}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { MarkDistribution::uniform(1.0, 1.0); }) == ErrorCode::ConfigError);
}

TEST_CASE("nu integral scales the mark expectation by the intensity") {
  ProblemSpec s;
  s.jump = JumpModel{2.0, MarkDistribution::uniform(0.0, 1.0)};
  CHECK(nu_integral(s, [](double z) { return z * z; }) == doctest::Approx(2.0 / 3.0));
  ProblemSpec none;
  CHECK(nu_integral(none, [](double) { return 1.0; }) == 0.0);
}

TEST_CASE("problem validation") {
  ProblemSpec s;
  s.initial_segment = [](double t) { return 1.0 / (t + 0.5); };
  const TimeGrid g = make_grid(1.0, 0.25, 2.0);
  CHECK(code_of([&] { s.validate(g); }) == ErrorCode::NonFiniteSegment);
  s.initial_segment = [](double) { return 1.0; };
  s.validate(g);
  s.u_lo = 1.0;
  s.u_hi = 0.0;
  CHECK(code_of([&] { s.validate(g); }) == ErrorCode::BadInterval);
  ProblemSpec t;
  t.delta = 2.0;
  CHECK(code_of([&] { t.validate(g); }) == ErrorCode::GridMismatch);
}

TEST_CASE("segment values sample [-delta, 0] and end at the initial value") {
  ProblemSpec s;
  s.initial_segment = [](double t) { return 2.0 + t; };
  const TimeGrid g = make_grid(1.0, 0.25, 2.0);
  const auto v = s.segment_values(g);
  REQUIRE(v.size() == 5);
  CHECK(v.front() == doctest::Approx(1.0));
  CHECK(v[2] == doctest::Approx(1.5));
  CHECK(v.back() == doctest::Approx(2.0));
}
