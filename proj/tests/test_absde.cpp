#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstring>

#include "delaymp/absde.hpp"

using namespace delaymp;

namespace {

FunctionDriver linear_driver(double c_now, double c_adv, double g) {
  return FunctionDriver([=](const DriverArgs& a) { return c_now * a.p_now + c_adv * a.p_adv + g * std::exp(-a.t); },
                        std::abs(c_now) + std::abs(c_adv));
}

/// p(t) = -int_t^T [c p(s + delta) 1{s + delta <= T} + e^{-s}] ds.
double delay_oracle(double t, double c, double delta, double T) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double v = std::exp(-T) - std::exp(-t);
  if (t < T - delta) {
    double lo = t;
    while (lo < T - delta) {
      double hi = T - delta;
      for (double bp = T - delta; bp > lo; bp -= delta)
        if (bp > lo + 1e-12) hi = std::min(hi, bp);
      v -= c * GK::integrate([&](double s) { return delay_oracle(s + delta, c, delta, T); }, lo, hi, 0);
      lo = hi;
    }
  }
  return v;
}

/// F = -X(t): p(t) = X(t) (T - t), q = T - t for Brownian X.
class StateDriver : public AdvancedDriver {
 public:
  std::size_t dimension() const override { return 1; }
  double lipschitz() const override { return 0.0; }
  void evaluate(const DriverContext& ctx, double* out) override { out[0] = -ctx.state(ctx.k()).x; }
};

}  // namespace

TEST_CASE("linear equation against its exact solution, second order in dt") {
  const double c = -0.7, T = 3.0;
  FunctionDriver forced([c](const DriverArgs& a) { return c * a.p_now + 1.0; }, std::abs(c));
  for (Schedule sch : {Schedule::Sweep, Schedule::Jacobi}) {
    double errs[2];
    for (int i = 0; i < 2; ++i) {
      const TimeGrid g = make_grid(1.0, i == 0 ? 2e-3 : 1e-3, T);
      PicardConfig cfg;
      cfg.schedule = sch;
      const PicardResult r = picard_solve(forced, g, cfg);
      CHECK(r.report.converged);
      double err = 0.0;
      for (std::size_t k = 0; k <= g.n; ++k) {
        const double t = g.t(k);
        err = std::max(err, std::abs(r.triple.p_at(0, k, 0) - (1.0 / c) * (std::exp(c * (t - T)) - 1.0)));
      }
      errs[i] = err;
    }
    CHECK(errs[1] < 1e-5);
    CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.05));
  }
  const TimeGrid g = make_grid(1.0, 1e-3, T);
  FunctionDriver d = linear_driver(c, 0.0, 0.0);
  PicardConfig cfg;
  const PicardResult zero = picard_solve(d, g, cfg);
  for (std::size_t k = 0; k <= g.n; k += 100) CHECK(zero.triple.p_at(0, k, 0) == 0.0);
}

TEST_CASE("Jacobi and sweep schedules agree to the order of the scheme") {
  const TimeGrid g = make_grid(1.0, 1e-3, 3.0);
  FunctionDriver d = linear_driver(0.5, 0.3, 1.0);
  PicardConfig a, b;
  a.schedule = Schedule::Sweep;
  b.schedule = Schedule::Jacobi;
  const PicardResult ra = picard_solve(d, g, a);
  const PicardResult rb = picard_solve(d, g, b);
  CHECK(ra.report.iterations < rb.report.iterations);
  for (std::size_t k = 0; k <= g.n; k += 50)
    CHECK(ra.triple.p_at(0, k, 0) == doctest::Approx(rb.triple.p_at(0, k, 0)).epsilon(1e-5).scale(1.0));
  CHECK(rb.report.min_adjoint_offset >= 0);
}

TEST_CASE("advanced driver against nested quadrature") {
  const double c = 0.4, T = 3.0;
  const TimeGrid g = make_grid(1.0, 1e-3, T);
  FunctionDriver d = linear_driver(0.0, c, 1.0);
  PicardConfig cfg;
  cfg.schedule = Schedule::Jacobi;
  const PicardResult r = picard_solve(d, g, cfg);
  for (std::size_t k = 0; k <= g.n; k += 250)
    CHECK(r.triple.p_at(0, k, 0) == doctest::Approx(delay_oracle(g.t(k), c, 1.0, T)).epsilon(1e-7).scale(1.0));
  CHECK(r.report.iterations <= 5);
}

TEST_CASE("automatic weight solves its fixed-point equation") {
  for (double C : {0.1, 1.0, 20.0}) {
    const double lam = auto_weight(C, 1.0) / 1.1;
    CHECK(lam == doctest::Approx(C / epsilon_rule(lam, 1.0)).epsilon(1e-12));
  }
  CHECK(epsilon_rule(0.0, 1.0) == doctest::Approx(1.0 / 36.0));
  CHECK(auto_weight(0.0, 1.0) == 0.0);
}

TEST_CASE("too small a weight on a stiff driver is reported as BadWeight") {
  const TimeGrid g = make_grid(1.0, 0.01, 3.0);
  FunctionDriver d = linear_driver(20.0, 0.0, 1.0);
  PicardConfig cfg;
  cfg.schedule = Schedule::Jacobi;
  cfg.weight_lambda = 0.01;
  try {
    picard_solve(d, g, cfg);
    FAIL("no failure raised");
  } catch (const PicardFailure& e) {
    CHECK(e.code() == ErrorCode::BadWeight);
    CHECK(e.partial().report.failure == "BadWeight");
    CHECK(e.partial().report.ratios.size() >= 3);
  }
}

TEST_CASE("iteration limit is reported as NoConvergence") {
  const TimeGrid g = make_grid(1.0, 0.01, 3.0);
  FunctionDriver d = linear_driver(0.5, 0.3, 1.0);
  PicardConfig cfg;
  cfg.schedule = Schedule::Jacobi;
  cfg.max_iter = 2;
  try {
    picard_solve(d, g, cfg);
    FAIL("no failure raised");
  } catch (const PicardFailure& e) {
    CHECK(e.code() == ErrorCode::NoConvergence);
    CHECK(e.partial().report.iterations == 2);
  }
}

TEST_CASE("contraction diagnostics and uniqueness") {
  const TimeGrid g = make_grid(1.0, 0.01, 3.0);
  FunctionDriver d = linear_driver(0.5, 0.3, 1.0);
  PicardConfig cfg;
  cfg.schedule = Schedule::Jacobi;
  const PicardResult r = picard_solve(d, g, cfg);
  const ContractionVerdict v = contraction_diagnostics(r.report, d, 1.0);
  CHECK(v.contracts);
  CHECK_FALSE(v.weight_below_theory);
  CHECK(v.measured_ratio < 0.5);
  const UniquenessResult u = uniqueness_probe(
      d, g, cfg, [](std::size_t, std::size_t, std::size_t) { return 0.0; },
      [](std::size_t, std::size_t k, std::size_t) { return std::sin(0.01 * k) * 10.0; });
  CHECK(u.distance <= 1e-20);
}

TEST_CASE("regression mode recovers a state-dependent solution") {
  ProblemSpec s;
  s.coeffs.sigma = ScalarCoefficient([](const StatePoint&) { return 1.0; });
  s.initial_segment = [](double) { return 0.5; };
  const TimeGrid g = make_grid(1.0, 0.02, 2.0);
  const Ensemble e = simulate_ensemble(s, g, ControlSpec(), 4000, 12);
  StateDriver d;
  PicardConfig cfg;
  cfg.mode = SolveMode::Regression;
  cfg.basis_degree = 2;
  const PicardResult r = picard_solve(d, g, cfg, &e, &s);
  CHECK(r.report.converged);
  // Only Monte Carlo error remains: the solution is linear in X.
  double perr = 0.0, qbias = 0.0;
  for (std::size_t k = 0; k < g.n; ++k) {
    const double tau = g.horizon - g.t(k);
    double se = 0.0;
    for (std::size_t i = 0; i < e.paths.size(); ++i) {
      const double d = r.triple.p_at(0, k, i) - e.paths[i].X[k] * tau;
      se += d * d;
    }
    perr = std::max(perr, std::sqrt(se / e.paths.size()));
    qbias += (r.triple.q_mean(0, k) - tau) / g.n;
  }
  CHECK(perr < 0.05);
  CHECK(std::abs(qbias) < 0.05);
  PicardConfig threaded = cfg;
  threaded.threads = 3;
  const PicardResult r3 = picard_solve(d, g, threaded, &e, &s);
  CHECK(std::memcmp(r.triple.p.data(), r3.triple.p.data(), r.triple.p.size() * sizeof(double)) == 0);
}

TEST_CASE("regression mode without an ensemble is a configuration error") {
  const TimeGrid g = make_grid(1.0, 0.1, 2.0);
  StateDriver d;
  PicardConfig cfg;
  cfg.mode = SolveMode::Regression;
  CHECK_THROWS_AS(picard_solve(d, g, cfg), Error);
}
