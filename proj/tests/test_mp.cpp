#include <doctest.h>

#include <cmath>

#include "delaymp/config.hpp"
#include "delaymp/examples.hpp"
#include "delaymp/hamiltonian.hpp"
#include "delaymp/mp.hpp"
#include "delaymp/objective.hpp"

using namespace delaymp;

namespace {

RunConfig det34(double horizon) {
  Json d = Json::parse(R"({"problem": {"selector": "example_3_4", "delta": 1.0, "rho": 0.1,
      "params": {"gamma": 0.5, "mu": 0.05, "sigma0": 0.0, "x0": 1.0}}, "mc": {"paths": 1, "seed": 1}})");
  d["grid"] = {{"dt", 0.01}, {"horizon", horizon}};
  return build_run(d);
}

RunConfig lq(double s0, double horizon = 3.0) {
  Json d = Json::parse(R"({"problem": {"selector": "linear_quadratic", "delta": 1.0, "rho": 0.4, "discount": 0.1,
      "params": {"ax": -0.5, "ay": 0.3, "aa": 0.2, "bu": 1.0, "qx": 1.0, "ru": 1.0, "x0": 1.0}},
      "mc": {"paths": 1, "seed": 1}})");
  d["problem"]["params"]["s0"] = s0;
  d["grid"] = {{"dt", 0.01}, {"horizon", horizon}};
  return build_run(d);
}

}  // namespace

TEST_CASE("probe steps sit at interior midpoints") {
  const TimeGrid g = make_grid(1.0, 0.1, 10.0);
  const auto ks = probe_steps(g, 4);
  REQUIRE(ks.size() == 4);
  CHECK(ks[0] == 13);  // t = 1.25
  CHECK(ks[3] == 88);  // t = 8.75
  for (std::size_t k : probe_steps(g, 500)) {
    CHECK(k >= 1);
    CHECK(k <= g.n - 1);
  }
}

TEST_CASE("information projection") {
  const RunConfig run = lq(0.3);
  const Ensemble e = simulate_ensemble(run.spec, run.grid, ControlSpec(), 400, 3);
  std::vector<double> v(400), w(400);
  const std::size_t k = 200, lag = 50;
  for (std::size_t i = 0; i < 400; ++i) {
    const double xl = e.paths[i].X[k - lag];
    v[i] = 2.0 - xl + 0.5 * xl * xl;
    w[i] = e.paths[i].X[k];
  }
  InfoSpec full;
  CHECK(project_info(e, k, v, full) == v);
  InfoSpec lagged;
  lagged.mode = InfoSpec::Lagged;
  lagged.lag = lag * run.grid.dt;
  lagged.degree = 2;
  const auto pv = project_info(e, k, v, lagged);
  for (std::size_t i = 0; i < 400; i += 23) CHECK(pv[i] == doctest::Approx(v[i]).epsilon(1e-9));
  // Projection of X(t) on X(t - lag) leaves a residual orthogonal to constants.
  const auto pw = project_info(e, k, w, lagged);
  double m = 0.0;
  for (std::size_t i = 0; i < 400; ++i) m += w[i] - pw[i];
  CHECK(std::abs(m) < 1e-9 * 400);
}

TEST_CASE("first-order residual vanishes at the closed form and not at a scaled control") {
  const RunConfig run = det34(20.0);
  const auto adj = closed_form_adjoint(run, 1);
  McConfig mc;
  mc.paths = 1;
  mc.probes = 10;
  const ControlSpec u = make_control(run, "closed_form");
  const Ensemble e = simulate_ensemble(run.spec, run.grid, u, 1, 1);
  const NecessityReport good = necessary_residual(run.spec, run.grid, u, e, *adj, mc, false);
  CHECK(good.residual_pass);
  CHECK(good.significant_fraction == 0.0);
  for (const auto& p : good.probes) CHECK(std::abs(p.residual.mean) < 1e-9);
  const ControlSpec bad = u.scaled(1.2);
  const Ensemble eb = simulate_ensemble(run.spec, run.grid, bad, 1, 1);
  const NecessityReport worse = necessary_residual(run.spec, run.grid, bad, eb, *adj, mc, false);
  CHECK_FALSE(worse.residual_pass);
  CHECK(worse.significant_fraction == 1.0);
  CHECK(worse.sign_consistent);
  CHECK(worse.dominant_sign == -1);  // over-consumption: H_u < 0
  CHECK(worse.verdict == Verdict::Fail);
}

TEST_CASE("bump derivative equals the integral of beta times H_u") {
  // Deterministic delayed LQ problem: dJ/d(eps) = int_s^{s+h} H_u dt with the first adjoint.
  const RunConfig run = lq(0.0);
  const ControlSpec u = ControlSpec::constant(-0.2, run.spec.u_lo, run.spec.u_hi);
  const Ensemble e = simulate_ensemble(run.spec, run.grid, u, 1, 1);
  const PicardResult r = solve_first_adjoint(run.spec, e, run.picard());
  double oracle = 0.0;
  for (std::size_t k = 0; k <= run.grid.n; ++k) {
    if (!in_window(run.grid, k, 0.5, 1.0)) continue;
    const StatePoint s = e.paths[0].state(k);
    const HamArgs1 h{s.t, s.x, s.y, s.a, s.u, r.triple.p_at(0, k, 0), 0.0, {}};
    const bool edge = std::abs(s.t - 0.5) < 1e-9 || std::abs(s.t - 1.5) < 1e-9;
    oracle += (edge ? 0.5 : 1.0) * run.grid.dt * grad_H1(run.spec, h)[3];
  }
  const Estimate d = bump_derivative(run.spec, run.grid, u, 0.5, 1.0, 1.0, 1e-3, 1, 1, 1);
  CHECK(d.mean == doctest::Approx(oracle).epsilon(0.02));
  std::vector<double> beta(run.grid.n + 1);
  for (std::size_t k = 0; k <= run.grid.n; ++k) beta[k] = in_window(run.grid, k, 0.5, 1.0) ? 1.0 : 0.0;
  const VariationalRecord v = variational_consistency(run.spec, run.grid, u, beta, 1, 1, 1);
  CHECK(v.xi.mean == doctest::Approx(oracle).epsilon(0.02));
  CHECK(v.order == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("sufficiency on a concave linear-quadratic problem") {
  const RunConfig run = lq(0.3);
  const ControlSpec u = ControlSpec::constant(-0.1, run.spec.u_lo, run.spec.u_hi);
  const Ensemble e = simulate_ensemble(run.spec, run.grid, u, 300, 5);
  const PicardResult r = solve_first_adjoint(run.spec, e, run.picard());
  const SolvedAdjoint adj(run.spec, r.triple);
  McConfig mc;
  mc.paths = 300;
  mc.seed = 5;
  mc.probes = 6;
  mc.hessian_points = 40;
  const std::vector<ControlSpec> cmp = {u.scaled(0.8)};
  const std::vector<std::string> names = {"x0.8"};
  const SufficiencyReport s = check_sufficient_first(run.spec, run.grid, u, cmp, names, e, adj, mc);
  CHECK(s.concavity.pass);
  CHECK(s.concavity.max_eigenvalue <= 1e-8);
  CHECK(s.integrability.finite);
  CHECK(s.transversality.size() == 1);
  CHECK(s.transversality[0].ladder.size() == 3);
  // u = -0.1 is not the argmax of H, so the Hamiltonian gap is positive.
  CHECK(s.gap_verdict == Verdict::Fail);
  CHECK(s.verdict == Verdict::Fail);
}

TEST_CASE("gamma above one breaks concavity") {
  Json d = Json::parse(R"({"problem": {"selector": "example_3_4", "delta": 1.0, "rho": 0.06,
      "params": {"gamma": 1.5, "mu": 0.05, "sigma0": 0.2, "x0": 1.0}},
      "grid": {"dt": 0.05, "horizon": 10.0}, "mc": {"paths": 100, "seed": 1}})");
  const RunConfig run = build_run(d);
  const ControlSpec u = make_control(run, "closed_form");
  const Ensemble e = simulate_ensemble(run.spec, run.grid, u, 100, 1);
  const auto adj = closed_form_adjoint(run, 1);
  McConfig mc = run.mc;
  mc.probes = 4;
  mc.hessian_points = 20;
  const SufficiencyReport s = check_sufficient_first(run.spec, run.grid, u, {}, {}, e, *adj, mc);
  CHECK_FALSE(s.concavity.pass);
  CHECK(s.concavity.max_eigenvalue > 1.0);
  CHECK(s.concavity_verdict == Verdict::Fail);
}

TEST_CASE("verdict names") {
  CHECK(std::string(to_string(Verdict::Pass)) == "pass");
  CHECK(std::string(to_string(Verdict::Inconclusive)) == "inconclusive");
}
