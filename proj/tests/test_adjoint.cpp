#include <doctest.h>

#include <cmath>

#include "delaymp/adjoint.hpp"
#include "delaymp/config.hpp"
#include "delaymp/examples.hpp"

using namespace delaymp;

namespace {

Json lq_doc(double s0) {
  Json d = Json::parse(R"({"problem": {"selector": "linear_quadratic", "delta": 1.0, "rho": 0.4, "discount": 0.1,
      "params": {"ax": -0.5, "ay": 0.3, "aa": 0.6, "bu": 1.0, "qx": 1.0, "ru": 1.0, "x0": 1.0}},
      "grid": {"dt": 0.01, "horizon": 3.0}, "mc": {"paths": 1, "seed": 1}})");
  d["problem"]["params"]["s0"] = s0;
  return d;
}

/// Backward Heun on a grid four times finer:
/// p' = e^{-0.1 t} x - ax p - ay p(t + 1) - aa int_t^{t+1} p(s) e^{-rho (s - t)} ds, p(T) = 0.
std::vector<double> lq_oracle(const PathRecord& path, const TimeGrid& g, double rho) {
  const double ax = -0.5, ay = 0.3, aa = 0.6;
  const std::size_t R = 4, N = g.n * R, M = g.m * R;
  const double h = g.dt / R;
  auto x_at = [&](std::size_t i) {
    const std::size_t k = i / R, r = i % R;
    if (r == 0) return path.X[k];
    return path.X[k] + (path.X[k + 1] - path.X[k]) * double(r) / R;
  };
  std::vector<double> P(N + 1, 0.0);
  auto F = [&](std::size_t i, double pi) {
    const double t = i * h;
    double v = std::exp(-0.1 * t) * x_at(i) - ax * pi;
    if (i + M <= N) v -= ay * P[i + M];
    const std::size_t e = std::min(i + M, N);
    double I = 0.0;
    for (std::size_t j = i; j <= e; ++j) {
      const double w = (j == i || j == e) ? 0.5 : 1.0;
      I += w * (j == i ? pi : P[j]) * std::exp(-rho * (j - i) * h);
    }
    return v - aa * h * I;
  };
  for (std::size_t i = N; i-- > 0;) {
    const double f1 = F(i + 1, P[i + 1]);
    const double pred = P[i + 1] - h * f1;
    P[i] = P[i + 1] - 0.5 * h * (f1 + F(i, pred));
  }
  std::vector<double> out(g.n + 1);
  for (std::size_t k = 0; k <= g.n; ++k) out[k] = P[k * R];
  return out;
}

}  // namespace

TEST_CASE("first adjoint of a delayed linear-quadratic problem against a fine-grid solution") {
  const RunConfig run = build_run(lq_doc(0.0));
  const ControlSpec u = ControlSpec::constant(-0.2, run.spec.u_lo, run.spec.u_hi);
  const Ensemble ens = simulate_ensemble(run.spec, run.grid, u, 1, 1);
  const PicardResult r = solve_first_adjoint(run.spec, ens, run.picard());
  CHECK(r.report.converged);
  CHECK(r.report.min_adjoint_offset >= 0);
  const auto oracle = lq_oracle(ens.paths[0], run.grid, run.spec.rho);
  double scale = 0.0, err = 0.0;
  for (std::size_t k = 0; k <= run.grid.n; ++k) {
    scale = std::max(scale, std::abs(oracle[k]));
    err = std::max(err, std::abs(r.triple.p_at(0, k, 0) - oracle[k]));
  }
  CHECK(scale > 0.1);
  CHECK(err < 1e-4 * scale);
}

TEST_CASE("adjoints of the consumption example without noise follow the closed form") {
  Json d = Json::parse(R"({"problem": {"selector": "example_3_4", "delta": 1.0, "rho": 0.1,
      "params": {"gamma": 0.5, "mu": 0.05, "sigma0": 0.0, "x0": 1.0}},
      "grid": {"dt": 0.01, "horizon": 90.0}, "mc": {"paths": 1, "seed": 1}})");
  const RunConfig run = build_run(d);
  const ControlSpec u = make_control(run, "flow");
  const Ensemble ens = simulate_ensemble(run.spec, run.grid, u, 1, 1);
  const PicardResult r1 = solve_first_adjoint(run.spec, ens, run.picard());
  const PicardResult r2 = solve_second_adjoint(run.spec, ens, run.picard());
  const std::size_t n10 = 1000;
  double e1 = 0.0, e2 = 0.0, side = 0.0;
  for (std::size_t k = 0; k <= n10; ++k) {
    const double ref = run.p0 * std::exp(-0.05 * run.grid.t(k));
    e1 = std::max(e1, std::abs(r1.triple.p_at(0, k, 0) / ref - 1.0));
    e2 = std::max(e2, std::abs(r2.triple.p_at(0, k, 0) / ref - 1.0));
    side = std::max({side, std::abs(r2.triple.p_at(1, k, 0)), std::abs(r2.triple.p_at(2, k, 0))});
  }
  CHECK(e1 < 1e-3);
  CHECK(e2 < 1e-3);
  CHECK(side < 1e-12);
  const auto p1 = mean_series(r2.triple, 0, n10);
  CHECK(p1.size() == n10 + 1);
  CHECK(p1[5] == r2.triple.p_at(0, 5, 0));
}

TEST_CASE("second adjoint of the delayed example: flat third component under the constraint") {
  Json d = Json::parse(R"({"problem": {"selector": "example_3_5", "delta": 1.0, "rho": 0.1, "lambda_avg": 0.1,
      "params": {"gamma": 0.5, "mu": 0.05, "beta": 0.05, "alpha": "constraint", "sigma0": 0.0, "x0": 1.0}},
      "grid": {"dt": 0.01, "horizon": 10.0}, "mc": {"paths": 1, "seed": 1}})");
  const RunConfig run = build_run(d);
  const ControlSpec u = make_control(run, "closed_form");
  const Ensemble ens = simulate_ensemble(run.spec, run.grid, u, 1, 1);
  const PicardResult r = solve_second_adjoint(run.spec, ens, run.picard());
  const Flatness f = p3_flatness(mean_series(r.triple, 2, run.grid.n), 1e-6);
  CHECK(f.flat);
  for (std::size_t k = 0; k < run.grid.n; k += 100)
    CHECK(r.triple.p_at(0, k, 0) / r.triple.p_at(1, k, 0) == doctest::Approx(1.0 / run.ex35->kappa()).epsilon(1e-8));
  d["problem"]["params"]["alpha_scale"] = 1.1;
  const RunConfig bad = build_run(d);
  const Ensemble ens_bad = simulate_ensemble(bad.spec, bad.grid, make_control(bad, "closed_form"), 1, 1);
  const PicardResult rb = solve_second_adjoint(bad.spec, ens_bad, bad.picard());
  CHECK_FALSE(p3_flatness(mean_series(rb.triple, 2, bad.grid.n), 1e-6).flat);
}

TEST_CASE("solved adjoints read back their triple; flatness reports the largest value") {
  const RunConfig run = build_run(lq_doc(0.3));
  const ControlSpec u = ControlSpec::constant(0.0, run.spec.u_lo, run.spec.u_hi);
  const Ensemble ens = simulate_ensemble(run.spec, run.grid, u, 200, 2);
  PicardConfig cfg = run.picard();
  CHECK(cfg.mode == SolveMode::Regression);
  const PicardResult r = solve_first_adjoint(run.spec, ens, cfg);
  const SolvedAdjoint adj(run.spec, r.triple);
  const StatePoint s = ens.paths[7].state(40);
  CHECK(adj.p(0, 40, 7, s) == r.triple.p_at(0, 40, 7));
  CHECK(adj.q(0, 40, 7, s) == r.triple.q_at(0, 40, 7));
  CHECK(adj.dimension() == 1);
  const std::vector<double> v = {0.0, -3e-7, 2e-7};
  const Flatness f = p3_flatness(v, 1e-6);
  CHECK(f.flat);
  CHECK(f.max_deviation == doctest::Approx(3e-7));
}

TEST_CASE("closed-form adjoint process of the consumption example") {
  Example34Params P;
  const Ex34Adjoint a(P, 2.0, 3);
  CHECK(a.dimension() == 3);
  StatePoint s;
  s.t = 2.0;
  CHECK(a.p(0, 20, 0, s) == doctest::Approx(ex34_adjoint(P, 2.0, 2.0)));
  CHECK(a.p(1, 20, 0, s) == 0.0);
  CHECK(a.q(0, 20, 0, s) == 0.0);
}
