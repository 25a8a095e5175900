#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstring>

#include "delaymp/errors.hpp"
#include "delaymp/forward.hpp"

using namespace delaymp;

namespace {

/// b = ax x + ay y + aa a + bu u, sigma = s0.
ProblemSpec linear_spec(double ax, double ay, double aa, double bu, double s0, double rho = 0.5) {
  ProblemSpec s;
  s.rho = rho;
  s.coeffs.b = ScalarCoefficient([=](const StatePoint& p) { return ax * p.x + ay * p.y + aa * p.a + bu * p.u; },
                                 [=](const StatePoint&) { return Grad4{ax, ay, aa, bu}; });
  if (s0 != 0.0)
    s.coeffs.sigma = ScalarCoefficient([=](const StatePoint&) { return s0; },
                                       [](const StatePoint&) { return Grad4{0, 0, 0, 0}; });
  s.initial_segment = [](double t) { return 1.0 + 0.5 * t + 0.2 * std::sin(3.0 * t); };
  return s;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("Euler scheme of a linear ODE") {
  ProblemSpec s = linear_spec(0.3, 0.0, 0.0, 0.0, 0.0);
  s.initial_segment = [](double) { return 2.0; };
  const TimeGrid g = make_grid(1.0, 0.01, 3.0);
  const PathRecord p = simulate_path(s, g, ControlSpec(), generate_noise(s, g, 1, 0));
  for (std::size_t k = 0; k <= g.n; k += 37) CHECK(p.X[k] == doctest::Approx(2.0 * std::pow(1.003, double(k))).epsilon(1e-12));
  CHECK_FALSE(p.exited);
}

TEST_CASE("exponential average weights integrate linear pieces exactly") {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  for (double rho : {1e-6, 0.1, 3.0, 80.0}) {
    const double dt = 0.02;
    const AverageWeights w = average_weights(rho, dt, 50);
    const double x0 = 1.3, x1 = -0.4;
    const double exact =
        GK::integrate([&](double s) { return std::exp(-rho * (dt - s)) * (x0 + (x1 - x0) * s / dt); }, 0.0, dt, 0);
    CHECK(w.w0 * x0 + w.w1 * x1 == doctest::Approx(exact).epsilon(1e-13));
    CHECK(w.decay_delay == doctest::Approx(std::exp(-rho * 1.0)));
  }
}

TEST_CASE("delayed state is copied and the average matches quadrature") {
  const ProblemSpec s = linear_spec(-0.2, 0.4, 0.3, 0.0, 0.5);
  const TimeGrid g = make_grid(1.0, 0.05, 4.0);
  const PathRecord p = simulate_path(s, g, ControlSpec(), generate_noise(s, g, 3, 2));
  std::vector<double> full(p.segment0);
  full.insert(full.end(), p.X.begin() + 1, p.X.end());
  for (std::size_t k = 0; k <= g.n; ++k) CHECK(same_bits(p.Y[k], full[k]));
  // Exact integral of the piecewise-linear interpolant, piece by piece.
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  for (std::size_t k = 0; k <= g.n; k += 13) {
    double a = 0.0;
    const double t = g.t(k);
    for (std::size_t j = 0; j < g.m; ++j) {
      const double lo = t - g.delta + j * g.dt, x0 = full[k + j], x1 = full[k + j + 1];
      a += GK::integrate([&](double r) { return std::exp(-s.rho * (t - r)) * (x0 + (x1 - x0) * (r - lo) / g.dt); }, lo,
                         lo + g.dt, 0);
    }
    CHECK(p.A[k] == doctest::Approx(a).epsilon(1e-11));
  }
}

TEST_CASE("compensated jumps keep the mean") {
  ProblemSpec s = linear_spec(0.0, 0.0, 0.0, 0.0, 0.0);
  s.initial_segment = [](double) { return 1.0; };
  s.coeffs.theta = MarkCoefficient([](const StatePoint&, double z) { return z; });
  s.jump = JumpModel{2.0, MarkDistribution::uniform(0.2, 1.0)};
  const TimeGrid g = make_grid(1.0, 0.01, 2.0);
  const Ensemble e = simulate_ensemble(s, g, ControlSpec(), 20000, 5);
  double m = 0.0, v = 0.0, jumps = 0.0;
  for (const auto& p : e.paths) {
    m += p.X.back();
    v += (p.X.back() - 1.0) * (p.X.back() - 1.0);
    jumps += p.noise.marks.size();
  }
  m /= e.paths.size();
  v /= e.paths.size();
  jumps /= e.paths.size();
  // Var = intensity T E[Z^2]
  const double var = 2.0 * 2.0 * (1.0 + 0.2 + 0.04) / 3.0;
  CHECK(std::abs(m - 1.0) < 4.0 * std::sqrt(var / 20000));
  CHECK(v == doctest::Approx(var).epsilon(0.05));
  CHECK(jumps == doctest::Approx(4.0).epsilon(0.03));
}

TEST_CASE("ensembles do not depend on the thread count") {
  const ProblemSpec s = linear_spec(-0.2, 0.4, 0.3, 0.0, 0.5);
  const TimeGrid g = make_grid(1.0, 0.05, 3.0);
  const Ensemble a = simulate_ensemble(s, g, ControlSpec(), 301, 17, 1);
  const Ensemble b = simulate_ensemble(s, g, ControlSpec(), 301, 17, 4);
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    CHECK(std::memcmp(a.paths[i].X.data(), b.paths[i].X.data(), a.paths[i].X.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.paths[i].A.data(), b.paths[i].A.data(), a.paths[i].A.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("leaving the domain freezes the path") {
  ProblemSpec s = linear_spec(-1.0, 0.0, 0.0, 0.0, 0.0);
  s.initial_segment = [](double) { return 1.0; };
  s.domain = [](const StatePoint& p) { return p.x > 0.5; };
  const TimeGrid g = make_grid(1.0, 0.1, 3.0);
  const PathRecord p = simulate_path(s, g, ControlSpec::constant(1.0, -INFINITY, INFINITY), generate_noise(s, g, 1, 0));
  REQUIRE(p.exited);
  // 0.9^k <= 0.5 first at k = 7
  CHECK(p.exit_step == 7);
  CHECK(p.last_valid() == 6);
  CHECK(p.X.back() == p.X[7]);
  CHECK(p.u[7] == 0.0);
  CHECK(p.u[6] == 1.0);
}

TEST_CASE("variational process equals the derivative of a linear system") {
  const ProblemSpec s = linear_spec(-0.3, 0.5, 0.4, 1.2, 0.3);
  const TimeGrid g = make_grid(1.0, 0.02, 4.0);
  const PathNoise nz = generate_noise(s, g, 8, 1);
  const ControlSpec u = ControlSpec::feedback([](double t, double, double, double) { return std::cos(t); }, -INFINITY,
                                              INFINITY);
  std::vector<double> beta(g.n + 1);
  for (std::size_t k = 0; k <= g.n; ++k) beta[k] = in_window(g, k, 0.5, 1.5) ? 1.0 : 0.0;
  const PathRecord base = simulate_path(s, g, u, nz);
  const double h = 0.25;
  const PathRecord bumped = simulate_path(s, g, bump_control(u, g, h, 0.5, 1.5), nz);
  const VariationalPath v = simulate_variational(s, g, base, beta);
  for (std::size_t k = 0; k <= g.n; k += 7) {
    CHECK(v.xi[k] == doctest::Approx((bumped.X[k] - base.X[k]) / h).epsilon(1e-9).scale(1.0));
    CHECK(v.xi_a[k] == doctest::Approx((bumped.A[k] - base.A[k]) / h).epsilon(1e-9).scale(1.0));
    CHECK(v.xi_y[k] == doctest::Approx((bumped.Y[k] - base.Y[k]) / h).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("controls clip to their bounds and count the clips") {
  const ControlSpec c = ControlSpec::constant(5.0, 0.0, 1.0);
  ControlContext ctx;
  CHECK(c(ctx) == 1.0);
  CHECK(c(ctx) == 1.0);
  CHECK(c.clip_events() == 2);
  CHECK(c.scaled(-1.0)(ctx) == 0.0);
  CHECK(c.raw(ctx) == 5.0);
}

TEST_CASE("control errors") {
  const TimeGrid g = make_grid(1.0, 0.1, 2.0);
  auto code = [](const std::function<void()>& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code([&] { bump_control(ControlSpec(), g, 1.0, 1.5, 1.0); }) == ErrorCode::BadWindow);
  CHECK(code([&] { bump_control(ControlSpec(), g, 1.0, -0.1, 1.0); }) == ErrorCode::BadWindow);
  CHECK(code([] { ControlSpec::constant(0.0, 1.0, 0.0); }) == ErrorCode::BadInterval);
  ControlContext ctx;
  ctx.k = 5;
  CHECK(code([&] { ControlSpec::open_loop({1.0, 2.0}, -1, 1)(ctx); }) == ErrorCode::GridMismatch);
  CHECK(code([&] { ControlSpec::reference_process(-1, 1)(ctx); }) == ErrorCode::ConfigError);
  CHECK(ControlSpec::reference_process(-1, 1).needs_reference());
}

TEST_CASE("noise is all zero for deterministic problems") {
  const ProblemSpec s = linear_spec(0.1, 0.0, 0.0, 0.0, 0.0);
  const TimeGrid g = make_grid(1.0, 0.1, 2.0);
  const PathNoise nz = generate_noise(s, g, 4, 4);
  for (double d : nz.dB) CHECK(d == 0.0);
  CHECK(nz.marks.empty());
}
