#include "delaymp/hamiltonian.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "delaymp/errors.hpp"
#include "delaymp/parallel.hpp"

namespace delaymp {

namespace {

const MarkQuadrature* jump_quadrature(const ProblemSpec& spec, std::span<const double> r) {
  if (!spec.has_jumps() || r.empty()) return nullptr;
  const MarkQuadrature& q = spec.jump->marks.quadrature();
  if (r.size() != q.nodes.size())
    fail(ErrorCode::NonFinite, "r must be given at every node of the mark quadrature");
  return &q;
}

double jump_term(const ProblemSpec& spec, const StatePoint& s, std::span<const double> r) {
  const MarkQuadrature* q = jump_quadrature(spec, r);
  if (!q) return 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < q->nodes.size(); ++j) acc += q->weights[j] * spec.coeffs.theta(s, q->nodes[j]) * r[j];
  return spec.jump->intensity * acc;
}

Grad4 jump_grad(const ProblemSpec& spec, const StatePoint& s, std::span<const double> r) {
  Grad4 g{};
  const MarkQuadrature* q = jump_quadrature(spec, r);
  if (!q) return g;
  for (std::size_t j = 0; j < q->nodes.size(); ++j) {
    const Grad4 t = spec.coeffs.theta.grad(s, q->nodes[j]);
    for (int i = 0; i < 4; ++i) g[i] += q->weights[j] * t[i] * r[j];
  }
  for (double& v : g) v *= spec.jump->intensity;
  return g;
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::NonFinite, std::string(what) + " is not finite");
  return v;
}

}  // namespace

double eval_H1(const ProblemSpec& spec, const HamArgs1& h) {
  const StatePoint s = state_of(h);
  const auto& c = spec.coeffs;
  double v = c.f(s);
  if (h.p != 0.0) v += c.b(s) * h.p;
  if (h.q != 0.0) v += c.sigma(s) * h.q;
  v += jump_term(spec, s, h.r);
  return checked(v, "Hamiltonian");
}

double eval_H2(const ProblemSpec& spec, const HamArgs2& h) {
  const StatePoint s = state_of(h);
  const auto& c = spec.coeffs;
  const double lam = spec.lambda_avg;
  double v = c.f(s);
  if (h.p[0] != 0.0) v += c.b(s) * h.p[0];
  if (h.p[1] != 0.0) v += (h.x - lam * h.y - std::exp(-lam * spec.delta) * h.a) * h.p[1];
  if (h.q[0] != 0.0) v += c.sigma(s) * h.q[0];
  v += jump_term(spec, s, h.r);
  return checked(v, "Hamiltonian");
}

Grad4 grad_H1(const ProblemSpec& spec, const HamArgs1& h) {
  const StatePoint s = state_of(h);
  const auto& c = spec.coeffs;
  Grad4 g = c.f.grad(s);
  if (h.p != 0.0 && !c.b.is_zero()) {
    const Grad4 gb = c.b.grad(s);
    for (int i = 0; i < 4; ++i) g[i] += gb[i] * h.p;
  }
  if (h.q != 0.0 && !c.sigma.is_zero()) {
    const Grad4 gs = c.sigma.grad(s);
    for (int i = 0; i < 4; ++i) g[i] += gs[i] * h.q;
  }
  const Grad4 gj = jump_grad(spec, s, h.r);
  for (int i = 0; i < 4; ++i) g[i] = checked(g[i] + gj[i], "Hamiltonian gradient");
  return g;
}

Grad4 grad_H2(const ProblemSpec& spec, const HamArgs2& h) {
  HamArgs1 h1{h.t, h.x, h.y, h.a, h.u, h.p[0], h.q[0], h.r};
  Grad4 g = grad_H1(spec, h1);
  const double lam = spec.lambda_avg;
  g[0] += h.p[1];
  g[1] -= lam * h.p[1];
  g[2] -= std::exp(-lam * spec.delta) * h.p[1];
  return g;
}

double grad_H(const ProblemSpec& spec, const HamArgs2& args, Var which, Formulation form) {
  const int i = static_cast<int>(which);
  if (form == Formulation::second) return grad_H2(spec, args)[i];
  HamArgs1 h1{args.t, args.x, args.y, args.a, args.u, args.p[0], args.q[0], args.r};
  return grad_H1(spec, h1)[i];
}

std::array<double, 16> hessian_H1(const ProblemSpec& spec, const HamArgs1& args) {
  std::array<double, 16> H{};
  for (int j = 0; j < 4; ++j) {
    const Var v = static_cast<Var>(j);
    const double step = fd_step(component(state_of(args), v));
    HamArgs1 hp = args, hm = args;
    double* slots_p[4] = {&hp.x, &hp.y, &hp.a, &hp.u};
    double* slots_m[4] = {&hm.x, &hm.y, &hm.a, &hm.u};
    *slots_p[j] += step;
    *slots_m[j] -= step;
    const Grad4 gp = grad_H1(spec, hp), gm = grad_H1(spec, hm);
    for (int i = 0; i < 4; ++i) H[4 * i + j] = (gp[i] - gm[i]) / (2.0 * step);
  }
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) H[4 * i + j] = H[4 * j + i] = 0.5 * (H[4 * i + j] + H[4 * j + i]);
  return H;
}

double max_eigenvalue(const std::array<double, 16>& sym) {
  Eigen::Matrix4d M;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) M(i, j) = sym[4 * i + j];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

ArgmaxResult argmax_scalar(const std::function<double(double)>& h, const std::function<double(double)>& dh,
                           double lo, double hi, double start) {
  if (lo > hi) fail(ErrorCode::BadInterval, "argmax bracket has lo > hi");
  if (lo == hi) return {lo, h(lo)};
  start = std::clamp(std::isfinite(start) ? start : 0.0, lo, hi);
  double L = lo, U = hi;
  // Expand towards infinite bounds until the function stops increasing.
  if (!std::isfinite(U)) {
    double w = std::max(1.0, std::abs(start)), prev = start, fprev = h(start);
    U = start + w;
    for (int i = 0; i < 200; ++i) {
      const double fu = h(U);
      if (!(fu >= fprev)) break;
      prev = U;
      fprev = fu;
      w *= 2.0;
      U = prev + w;
    }
    if (std::isfinite(L)) L = std::max(L, lo);
  }
  if (!std::isfinite(L)) {
    double w = std::max(1.0, std::abs(start)), prev = start, fprev = h(start);
    L = start - w;
    for (int i = 0; i < 200; ++i) {
      const double fl = h(L);
      if (!(fl >= fprev)) break;
      prev = L;
      fprev = fl;
      w *= 2.0;
      L = prev - w;
    }
  }
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = L, b = U;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = h(c), fd = h(d);
  for (int it = 0; it < 300 && (b - a) > 1e-13 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = h(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = h(d);
    }
  }
  ArgmaxResult best{0.5 * (a + b), 0.0};
  best.value = h(best.u);
  for (double e : {L, U}) {
    if (!std::isfinite(e)) continue;
    const double fe = h(e);
    if (fe > best.value) best = {e, fe};
  }
  if (dh) {
    for (int it = 0; it < 3; ++it) {
      const double u = best.u;
      const double s = fd_step(u);
      // Curvature only from interior points; derivatives may blow up at the bounds.
      if (u - s <= L || u + s >= U) break;
      const double d2 = (dh(u + s) - dh(u - s)) / (2.0 * s);
      if (!(d2 < 0.0)) break;
      const double un = std::clamp(u - dh(u) / d2, L, U);
      const double fn = h(un);
      if (!(fn >= best.value)) break;
      best = {un, fn};
    }
  }
  return best;
}

ArgmaxResult argmax_u_H1(const ProblemSpec& spec, const HamArgs1& args) {
  auto h = [&](double v) {
    HamArgs1 a = args;
    a.u = v;
    return eval_H1(spec, a);
  };
  auto dh = [&](double v) {
    HamArgs1 a = args;
    a.u = v;
    return grad_H1(spec, a)[3];
  };
  return argmax_scalar(h, dh, spec.u_lo, spec.u_hi, args.u);
}

double a_drift(const ProblemSpec& spec, double x, double y, double a, ADynamics form) {
  if (form == ADynamics::True) return x - std::exp(-spec.rho * spec.delta) * y - spec.rho * a;
  const double lam = spec.lambda_avg;
  return x - lam * y - std::exp(-lam * spec.delta) * a;
}

Estimate ito_delay_residual(const ProblemSpec& spec, const TimeGrid& grid, const ItoTestFunction& F,
                            const ControlSpec& control, std::size_t n_paths, std::uint64_t seed, std::size_t threads,
                            ADynamics form) {
  std::vector<double> res(n_paths, 0.0);
  const auto& c = spec.coeffs;
  parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PathNoise nz = generate_noise(spec, grid, seed, i);
      PathStepper st(spec, grid, control, nz, i);
      const StatePoint s0 = st.state();
      double integral = 0.0;
      while (!st.exited()) {
        const StatePoint s = st.state();
        double gen = 0.0;
        if (F.F_t) gen += F.F_t(s.t, s.x, s.a);
        const double fx = F.F_x ? F.F_x(s.t, s.x, s.a) : 0.0;
        gen += c.b(s) * fx;
        if (!c.sigma.is_zero() && F.F_xx) {
          const double sg = c.sigma(s);
          gen += 0.5 * sg * sg * F.F_xx(s.t, s.x, s.a);
        }
        if (F.F_a) gen += a_drift(spec, s.x, s.y, s.a, form) * F.F_a(s.t, s.x, s.a);
        if (spec.has_jumps()) {
          const double f0 = F.F(s.t, s.x, s.a);
          gen += nu_integral(spec, [&](double z) {
            const double th = c.theta(s, z);
            return F.F(s.t, s.x + th, s.a) - f0 - th * fx;
          });
        }
        integral += gen * grid.dt;
        if (!st.step()) break;
      }
      const StatePoint sT = st.state();
      const double r = F.F(sT.t, sT.x, sT.a) - F.F(s0.t, s0.x, s0.a) - integral;
      if (!std::isfinite(r)) fail(ErrorCode::NonFinite, "delay Ito residual is not finite on path " + std::to_string(i));
      res[i] = r;
    }
  });
  return summarize(res);
}

}  // namespace delaymp
