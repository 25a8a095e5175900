#include "delaymp/mp.hpp"

#include <algorithm>
#include <cmath>

#include "delaymp/errors.hpp"
#include "delaymp/objective.hpp"
#include "delaymp/parallel.hpp"
#include "delaymp/regression.hpp"

namespace delaymp {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

namespace {

Verdict combine(std::initializer_list<Verdict> vs) {
  Verdict out = Verdict::Pass;
  for (Verdict v : vs) {
    if (v == Verdict::Fail) return Verdict::Fail;
    if (v == Verdict::Inconclusive) out = Verdict::Inconclusive;
  }
  return out;
}

/// Adjoint arguments of both formulations at one path point.
struct PointArgs {
  HamArgs2 h;
  std::vector<double> r;
};

PointArgs point_args(const AdjointProcess& adj, const StatePoint& s, std::size_t k, std::size_t path,
                     std::size_t nodes) {
  PointArgs a;
  a.r.assign(nodes, 0.0);
  if (nodes) adj.r_nodes(0, k, path, s, a.r.data());
  a.h.t = s.t;
  a.h.x = s.x;
  a.h.y = s.y;
  a.h.a = s.a;
  a.h.u = s.u;
  const std::size_t d = adj.dimension();
  for (std::size_t c = 0; c < std::min<std::size_t>(d, 3); ++c) a.h.p[c] = adj.p(c, k, path, s);
  for (std::size_t c = 0; c < std::min<std::size_t>(d, 2); ++c) a.h.q[c] = adj.q(c, k, path, s);
  a.h.r = a.r;
  return a;
}

HamArgs1 first_of(const HamArgs2& h) { return {h.t, h.x, h.y, h.a, h.u, h.p[0], h.q[0], h.r}; }

std::size_t node_count(const ProblemSpec& spec) {
  return spec.has_jumps() ? spec.jump->marks.quadrature().nodes.size() : 0;
}

bool valid_at(const PathRecord& rec, std::size_t k) { return !rec.exited || k < rec.exit_step; }

std::size_t step_of(const TimeGrid& grid, double T) {
  const double r = std::round(T / grid.dt);
  return std::min<std::size_t>(grid.n, static_cast<std::size_t>(std::max(0.0, r)));
}

Estimate with_scale(Estimate e, double scale) {
  e.scale = scale;
  return e;
}

std::vector<TransversalityResult> transversality(const ProblemSpec& spec, const TimeGrid& grid,
                                                 std::span<const ControlSpec> comps,
                                                 std::span<const std::string> names, const Ensemble& ens,
                                                 const AdjointProcess& adj, const McConfig& cfg,
                                                 std::size_t components) {
  std::vector<TransversalityResult> out;
  const double T0 = cfg.ladder_T0 > 0.0 ? cfg.ladder_T0 : grid.horizon / 4.0;
  const std::vector<double> ladder = {T0, 2.0 * T0, 4.0 * T0};
  const std::size_t N = ens.paths.size();
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (comps[c].needs_reference())
      fail(ErrorCode::ConfigError, "comparison controls must be rules, not transforms of a reference run");
    const Ensemble other = simulate_ensemble(spec, grid, comps[c], N, ens.seed, cfg.threads);
    for (std::size_t comp = 0; comp < components; ++comp) {
      TransversalityResult tr;
      tr.control = c < names.size() ? names[c] : "control_" + std::to_string(c);
      tr.component = comp;
      for (double T : ladder) {
        if (T > grid.horizon + 1e-9) continue;
        const std::size_t k = step_of(grid, T);
        std::vector<double> v(N);
        for (std::size_t i = 0; i < N; ++i) {
          const StatePoint s = ens.paths[i].state(k);
          const double p = adj.p(comp, k, i, s);
          const double d = comp == 0 ? other.paths[i].X[k] - ens.paths[i].X[k] : other.paths[i].Y[k] - ens.paths[i].Y[k];
          v[i] = p * d;
        }
        tr.ladder.push_back({grid.t(k), summarize(v)});
      }
      if (!tr.ladder.empty()) {
        const Estimate& first = tr.ladder.front().value;
        const Estimate& last = tr.ladder.back().value;
        tr.decreasing = std::abs(last.mean) <= std::abs(first.mean) + 2.0 * (first.stderr_ + last.stderr_) +
                                                   kRoundoffFloor * (first.scale + last.scale);
        tr.pass = not_below(last, 3.0);
      }
      out.push_back(std::move(tr));
    }
  }
  return out;
}

ConcavityResult concavity(const ProblemSpec& spec, const Ensemble& ens, const AdjointProcess& adj,
                          const McConfig& cfg) {
  ConcavityResult res;
  res.max_eigenvalue = -INFINITY;
  const std::size_t N = ens.paths.size(), P = cfg.hessian_points, nodes = node_count(spec);
  for (std::size_t q = 0; q < P; ++q) {
    const std::size_t i = q % N;
    const PathRecord& rec = ens.paths[i];
    const std::size_t L = rec.last_valid();
    if (L == 0) continue;
    const std::size_t k = ((q + 1) * L) / (P + 1);
    const StatePoint s = rec.state(k);
    const PointArgs a = point_args(adj, s, k, i, nodes);
    double ev = 0.0;
    try {
      ev = max_eigenvalue(hessian_H1(spec, first_of(a.h)));
    } catch (const Error& e) {
      // Difference stencil leaves the domain of the coefficients.
      if (e.code() != ErrorCode::NonFinite) throw;
      ++res.skipped;
      continue;
    }
    res.max_eigenvalue = std::max(res.max_eigenvalue, ev);
    ++res.points;
  }
  if (res.points == 0) res.max_eigenvalue = 0.0;
  res.pass = res.max_eigenvalue <= cfg.concavity_tol;
  return res;
}

IntegrabilityResult integrability(const ProblemSpec& spec, const TimeGrid& grid, const Ensemble& ens,
                                  const AdjointProcess& adj) {
  const std::size_t N = ens.paths.size(), nodes = node_count(spec);
  std::vector<double> v(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const PathRecord& rec = ens.paths[i];
    double acc = 0.0, prev = 0.0;
    for (std::size_t k = 0; k <= rec.last_valid(); ++k) {
      const StatePoint s = rec.state(k);
      const PointArgs a = point_args(adj, s, k, i, nodes);
      const double p = a.h.p[0], q = a.h.q[0];
      double term = q * q;
      if (!spec.coeffs.sigma.is_zero()) {
        const double sg = spec.coeffs.sigma(s);
        term += p * p * sg * sg;
      }
      if (nodes) {
        const auto& Q = spec.jump->marks.quadrature();
        double th2 = 0.0, r2 = 0.0;
        for (std::size_t j = 0; j < nodes; ++j) {
          const double th = spec.coeffs.theta(s, Q.nodes[j]);
          th2 += Q.weights[j] * th * th;
          r2 += Q.weights[j] * a.r[j] * a.r[j];
        }
        term += spec.jump->intensity * (p * p * th2 + r2);
      }
      if (k > 0) acc += 0.5 * grid.dt * (prev + term);
      prev = term;
    }
    v[i] = acc;
  }
  const Estimate e = summarize(v);
  return {e.mean, std::isfinite(e.mean)};
}

std::vector<GapProbe> gaps(const ProblemSpec& spec, const TimeGrid& grid, const Ensemble& ens,
                           const AdjointProcess& adj, const McConfig& cfg, bool second) {
  std::vector<GapProbe> out;
  const std::size_t N = ens.paths.size(), nodes = node_count(spec);
  for (std::size_t k : probe_steps(grid, cfg.probes)) {
    std::vector<double> Hhat(N, 0.0);
    std::vector<char> live(N, 0);
    std::vector<PointArgs> args(N);
    double scale = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const PathRecord& rec = ens.paths[i];
      if (!valid_at(rec, k)) continue;
      live[i] = 1;
      args[i] = point_args(adj, rec.state(k), k, i, nodes);
      args[i].h.r = args[i].r;
      Hhat[i] = second ? eval_H2(spec, args[i].h) : eval_H1(spec, first_of(args[i].h));
      scale += std::abs(Hhat[i]);
    }
    std::vector<double> g;
    if (cfg.info.mode == InfoSpec::Full) {
      for (std::size_t i = 0; i < N; ++i) {
        if (!live[i]) continue;
        // The p2 term of the second formulation does not depend on u.
        const ArgmaxResult am = argmax_u_H1(spec, first_of(args[i].h));
        HamArgs1 h1 = first_of(args[i].h);
        const double H1hat = eval_H1(spec, h1);
        g.push_back(std::max(0.0, am.value - H1hat));
      }
    } else {
      // Maximize the projected Hamiltonian over a grid of controls.
      double ulo = INFINITY, uhi = -INFINITY;
      for (std::size_t i = 0; i < N; ++i)
        if (live[i]) {
          ulo = std::min(ulo, args[i].h.u);
          uhi = std::max(uhi, args[i].h.u);
        }
      if (!std::isfinite(ulo)) continue;
      const double pad = 0.5 * std::max(uhi - ulo, 0.5 * (std::abs(ulo) + std::abs(uhi)) + 1e-3);
      const double a = spec.clip(ulo - pad), b = spec.clip(uhi + pad);
      const std::size_t V = 41;
      std::vector<double> Hv(N), proj_best(N, -INFINITY);
      for (std::size_t v = 0; v < V; ++v) {
        const double u = a + (b - a) * static_cast<double>(v) / static_cast<double>(V - 1);
        for (std::size_t i = 0; i < N; ++i) {
          if (!live[i]) {
            Hv[i] = 0.0;
            continue;
          }
          HamArgs1 h1 = first_of(args[i].h);
          h1.u = u;
          Hv[i] = eval_H1(spec, h1);
        }
        const std::vector<double> pv = project_info(ens, k, Hv, cfg.info);
        for (std::size_t i = 0; i < N; ++i) proj_best[i] = std::max(proj_best[i], pv[i]);
      }
      std::vector<double> H1hat(N, 0.0);
      for (std::size_t i = 0; i < N; ++i)
        if (live[i]) H1hat[i] = eval_H1(spec, first_of(args[i].h));
      const std::vector<double> ph = project_info(ens, k, H1hat, cfg.info);
      for (std::size_t i = 0; i < N; ++i)
        if (live[i]) g.push_back(std::max(0.0, proj_best[i] - ph[i]));
    }
    if (g.empty()) continue;
    GapProbe gp;
    gp.t = grid.t(k);
    gp.gap = with_scale(summarize(g), scale / static_cast<double>(g.size()));
    const double floor = kRoundoffFloor * gp.gap.scale;
    if (gp.gap.mean <= cfg.gap_k * gp.gap.stderr_ + floor)
      gp.verdict = Verdict::Pass;
    else if (gp.gap.mean > std::max(3.0, cfg.gap_k) * gp.gap.stderr_ + floor)
      gp.verdict = Verdict::Fail;
    else
      gp.verdict = Verdict::Inconclusive;
    out.push_back(gp);
  }
  return out;
}

SufficiencyReport sufficient(const ProblemSpec& spec, const TimeGrid& grid, std::span<const ControlSpec> comps,
                             std::span<const std::string> names, const Ensemble& ens, const AdjointProcess& adj,
                             const McConfig& cfg, bool second) {
  SufficiencyReport rep;
  rep.formulation = second ? 2 : 1;
  rep.transversality = transversality(spec, grid, comps, names, ens, adj, cfg, second ? 2 : 1);
  rep.concavity = concavity(spec, ens, adj, cfg);
  rep.integrability = integrability(spec, grid, ens, adj);
  rep.gaps = gaps(spec, grid, ens, adj, cfg, second);
  rep.transversality_verdict = Verdict::Pass;
  for (const auto& t : rep.transversality)
    if (!t.pass) rep.transversality_verdict = Verdict::Fail;
  rep.concavity_verdict = rep.concavity.pass ? Verdict::Pass : Verdict::Fail;
  rep.integrability_verdict = rep.integrability.finite ? Verdict::Pass : Verdict::Fail;
  rep.gap_verdict = Verdict::Pass;
  for (const auto& g : rep.gaps) rep.gap_verdict = combine({rep.gap_verdict, g.verdict});
  return rep;
}

}  // namespace

std::vector<std::size_t> probe_steps(const TimeGrid& grid, std::size_t probes) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < probes; ++j) {
    const double t = (static_cast<double>(j) + 0.5) * grid.horizon / static_cast<double>(probes);
    out.push_back(std::clamp<std::size_t>(step_of(grid, t), 1, grid.n > 0 ? grid.n - 1 : 0));
  }
  return out;
}

std::vector<double> project_info(const Ensemble& ens, std::size_t k, const std::vector<double>& values,
                                 const InfoSpec& info) {
  if (info.mode == InfoSpec::Full) return values;
  const std::size_t N = ens.paths.size();
  const long lag = static_cast<long>(std::llround(info.lag / ens.grid.dt));
  const long kl = static_cast<long>(k) - lag;
  std::vector<double> x(N);
  for (std::size_t i = 0; i < N; ++i) {
    const PathRecord& rec = ens.paths[i];
    const long j = std::max(0L, static_cast<long>(ens.grid.m) + kl);
    x[i] = kl >= 0 ? rec.X[static_cast<std::size_t>(kl)] : rec.segment0[static_cast<std::size_t>(j)];
  }
  const PolyBasis basis(1, info.degree);
  const double* vars[1] = {x.data()};
  const SliceRegression reg(basis, std::span<const double* const>(vars, 1), N);
  std::vector<double> out(N);
  reg.fitted(values.data(), out.data());
  return out;
}

SufficiencyReport check_sufficient_first(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec&,
                                         std::span<const ControlSpec> comparisons,
                                         std::span<const std::string> comparison_names, const Ensemble& ensemble,
                                         const AdjointProcess& adjoint, const McConfig& cfg) {
  SufficiencyReport rep = sufficient(spec, grid, comparisons, comparison_names, ensemble, adjoint, cfg, false);
  rep.verdict = combine({rep.transversality_verdict, rep.concavity_verdict, rep.integrability_verdict, rep.gap_verdict});
  return rep;
}

SufficiencyReport check_sufficient_second(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec&,
                                          std::span<const ControlSpec> comparisons,
                                          std::span<const std::string> comparison_names, const Ensemble& ensemble,
                                          const AdjointProcess& adjoint, const McConfig& cfg, double flatness_tol) {
  if (adjoint.dimension() < 3) fail(ErrorCode::AdjointMissing, "the second principle needs a three-component adjoint");
  SufficiencyReport rep = sufficient(spec, grid, comparisons, comparison_names, ensemble, adjoint, cfg, true);
  std::vector<double> p3;
  for (std::size_t i = 0; i < ensemble.paths.size(); ++i) {
    const PathRecord& rec = ensemble.paths[i];
    for (std::size_t k = 0; k <= rec.last_valid(); ++k) p3.push_back(adjoint.p(2, k, i, rec.state(k)));
  }
  rep.has_flatness = true;
  rep.flatness = p3_flatness(p3, flatness_tol);
  rep.flatness_verdict = rep.flatness.flat ? Verdict::Pass : Verdict::Fail;
  rep.verdict = combine({rep.transversality_verdict, rep.concavity_verdict, rep.integrability_verdict, rep.gap_verdict,
                         rep.flatness_verdict});
  return rep;
}

Estimate bump_derivative(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& candidate, double s0,
                         double h, double alpha, double step, std::size_t paths, std::uint64_t seed,
                         std::size_t threads) {
  const ControlSpec base = ControlSpec::reference_process(candidate.lo(), candidate.hi());
  const std::vector<ControlSpec> cs = {candidate, bump_control(base, grid, step * alpha, s0, h),
                                       bump_control(base, grid, -step * alpha, s0, h)};
  const auto J = objectives_crn(spec, grid, cs, paths, seed, threads);
  std::vector<double> d(paths), scale(paths);
  for (std::size_t i = 0; i < paths; ++i) {
    d[i] = (J[1][i] - J[2][i]) / (2.0 * step);
    scale[i] = std::abs(J[0][i]) / step;
  }
  Estimate e = summarize(d);
  e.scale = summarize(scale).mean;
  return e;
}

NecessityReport necessary_residual(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& candidate,
                                   const Ensemble& ens, const AdjointProcess& adj, const McConfig& cfg,
                                   bool run_bumps) {
  NecessityReport rep;
  const std::size_t N = ens.paths.size(), nodes = node_count(spec);
  std::size_t boundary_probes = 0, significant = 0, pos = 0, neg = 0;
  for (std::size_t k : probe_steps(grid, cfg.probes)) {
    ResidualProbe pr;
    pr.k = k;
    pr.t = grid.t(k);
    std::vector<double> hu(N, 0.0);
    std::vector<char> live(N, 0);
    std::size_t at_lo = 0, at_hi = 0, n_live = 0;
    double scale = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const PathRecord& rec = ens.paths[i];
      if (!valid_at(rec, k)) continue;
      live[i] = 1;
      ++n_live;
      const StatePoint s = rec.state(k);
      const PointArgs a = point_args(adj, s, k, i, nodes);
      HamArgs1 h1 = first_of(a.h);
      h1.r = a.r;
      hu[i] = grad_H1(spec, h1)[3];
      // Scale of the terms that cancel in dH/du, for the round-off floor.
      const double fu = spec.coeffs.f.partial(s, Var::u);
      scale += std::abs(fu);
      const double tol = 1e-12 * (1.0 + std::abs(s.u));
      if (std::abs(s.u - spec.u_lo) <= tol) ++at_lo;
      if (std::abs(s.u - spec.u_hi) <= tol) ++at_hi;
    }
    if (n_live == 0) continue;
    const std::vector<double> proj = project_info(ens, k, hu, cfg.info);
    std::vector<double> vals;
    for (std::size_t i = 0; i < N; ++i)
      if (live[i]) vals.push_back(proj[i]);
    pr.residual = with_scale(summarize(vals), scale / static_cast<double>(n_live));
    const double bound = cfg.residual_k * pr.residual.stderr_ + kRoundoffFloor * pr.residual.scale;
    pr.boundary = 2 * (at_lo + at_hi) > n_live;
    if (pr.boundary) {
      ++boundary_probes;
      // Maximization on the boundary: dH/du >= 0 at u_hi, <= 0 at u_lo.
      pr.significant = at_hi >= at_lo ? pr.residual.mean < -bound : pr.residual.mean > bound;
    } else {
      pr.significant = std::abs(pr.residual.mean) > bound;
    }
    // z against the stderr, floored at the round-off allowance.
    const double zden = std::max(pr.residual.stderr_, kRoundoffFloor * pr.residual.scale / cfg.residual_k);
    if (zden > 0.0) rep.max_abs_z = std::max(rep.max_abs_z, std::abs(pr.residual.mean) / zden);
    if (pr.significant) {
      ++significant;
      (pr.residual.mean > 0 ? pos : neg)++;
    }
    rep.probes.push_back(pr);
  }
  const double np = static_cast<double>(std::max<std::size_t>(1, rep.probes.size()));
  rep.boundary_fraction = static_cast<double>(boundary_probes) / np;
  rep.boundary_control = rep.boundary_fraction > 0.5;
  rep.significant_fraction = static_cast<double>(significant) / np;
  rep.dominant_sign = pos > neg ? 1 : (neg > pos ? -1 : 0);
  rep.sign_consistent = significant > 0 && (pos == 0 || neg == 0);
  rep.residual_pass = significant == 0;
  rep.bumps_pass = true;
  if (run_bumps) {
    for (const auto& w : cfg.bump_windows) {
      if (w[0] < 0.0 || w[0] + w[1] > grid.horizon) continue;
      for (double alpha : cfg.bump_alphas)
        for (double step : cfg.bump_steps) {
          BumpDerivative b{w[0], w[1], alpha, step, {}, false};
          b.derivative = bump_derivative(spec, grid, candidate, w[0], w[1], alpha, step, N, ens.seed, cfg.threads);
          b.within = within_noise(b.derivative, cfg.residual_k);
          rep.bumps_pass = rep.bumps_pass && b.within;
          rep.bumps.push_back(b);
        }
    }
  }
  rep.verdict = (rep.residual_pass && rep.bumps_pass) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

VariationalRecord variational_consistency(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& candidate,
                                          std::span<const double> beta, std::size_t paths, std::uint64_t seed,
                                          std::size_t threads, std::vector<double> steps) {
  if (beta.size() != grid.n + 1) fail(ErrorCode::GridMismatch, "beta must have one value per grid point");
  VariationalRecord rec;
  rec.steps = steps;
  const std::size_t S = steps.size();
  std::vector<double> xi_d(paths, 0.0), scale(paths, 0.0);
  std::vector<std::vector<double>> fd(S, std::vector<double>(paths, 0.0));
  const std::vector<double> b(beta.begin(), beta.end());
  const ControlSpec ref = ControlSpec::reference_process(candidate.lo(), candidate.hi());
  parallel_for(paths, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PathNoise nz = generate_noise(spec, grid, seed, i);
      const PathRecord base = simulate_path(spec, grid, candidate, nz, i);
      const VariationalPath v = simulate_variational(spec, grid, base, b);
      const std::size_t L = base.last_valid();
      double acc = 0.0, prev = 0.0;
      for (std::size_t k = 0; k <= L; ++k) {
        const Grad4 g = spec.coeffs.f.grad(base.state(k));
        const double term = g[0] * v.xi[k] + g[1] * v.xi_y[k] + g[2] * v.xi_a[k] + g[3] * b[k];
        if (k > 0) acc += 0.5 * grid.dt * (prev + term);
        prev = term;
      }
      xi_d[i] = acc;
      const double J0 = path_objective(spec, grid, ref, nz, i, base.u.data()).J;
      scale[i] = std::abs(J0);
      for (std::size_t s = 0; s < S; ++s) {
        const double h = steps[s];
        const ControlSpec up = ref.plus([&b, h](std::size_t k, double) { return h * b[k]; });
        fd[s][i] = (path_objective(spec, grid, up, nz, i, base.u.data()).J - J0) / h;
      }
    }
  });
  rec.xi = summarize(xi_d);
  const double sc = summarize(scale).mean;
  for (std::size_t s = 0; s < S; ++s) {
    Estimate e = summarize(fd[s]);
    e.scale = sc / steps[s];
    rec.fd.push_back(e);
    rec.gap.push_back(e.mean - rec.xi.mean);
  }
  if (S >= 2) {
    const double e0 = std::abs(rec.gap[0]), e1 = std::abs(rec.gap[1]);
    rec.order = (e1 > 0.0 && e0 > 0.0) ? std::log10(e0 / e1) / std::log10(steps[0] / steps[1]) : INFINITY;
  }
  if (S >= 1) rec.agree = within_noise(rec.gap.back(), rec.xi.stderr_, rec.fd.back().scale, 2.0);
  return rec;
}

}  // namespace delaymp
