#include "delaymp/adjoint.hpp"

#include <algorithm>
#include <cmath>

#include "delaymp/errors.hpp"

namespace delaymp {

MarkNodeMap::MarkNodeMap(const ProblemSpec& spec) {
  if (!spec.has_jumps()) return;
  const auto& marks = spec.jump->marks;
  const auto& q = marks.quadrature();
  nodes_ = q.nodes.size();
  features_ = marks.feature_count();
  phi_.resize(nodes_ * features_);
  for (std::size_t i = 0; i < nodes_; ++i) marks.features(q.nodes[i], phi_.data() + i * features_);
}

void MarkNodeMap::eval(std::span<const double> coef, double* out) const {
  for (std::size_t i = 0; i < nodes_; ++i) {
    double s = 0.0;
    if (!coef.empty())
      for (std::size_t f = 0; f < features_; ++f) s += phi_[i * features_ + f] * coef[f];
    out[i] = s;
  }
}

namespace {

/// Sampled bound on the sensitivity of the drivers to the unknowns.
struct Sensitivity {
  Grad4 b{}, sigma{}, theta{};
};

Sensitivity max_sensitivity(const ProblemSpec& spec, const Ensemble& ens) {
  Sensitivity s;
  const auto& c = spec.coeffs;
  const std::size_t n = ens.grid.n;
  const std::size_t stride = std::max<std::size_t>(1, n / 50);
  const std::size_t pstride = std::max<std::size_t>(1, ens.paths.size() / 20);
  for (std::size_t i = 0; i < ens.paths.size(); i += pstride) {
    const PathRecord& rec = ens.paths[i];
    for (std::size_t k = 0; k <= rec.last_valid(); k += stride) {
      const StatePoint pt = rec.state(k);
      auto upd = [](Grad4& dst, const Grad4& g) {
        for (int j = 0; j < 4; ++j) dst[j] = std::max(dst[j], std::abs(g[j]));
      };
      if (!c.b.is_zero()) upd(s.b, c.b.grad(pt));
      if (!c.sigma.is_zero()) upd(s.sigma, c.sigma.grad(pt));
      if (spec.has_jumps()) {
        Grad4 g{};
        for (int j = 0; j < 4; ++j)
          g[j] = nu_integral(spec, [&](double z) { return std::abs(c.theta.grad(pt, z)[j]); });
        upd(s.theta, g);
      }
    }
  }
  return s;
}

}  // namespace

FirstAdjointDriver::FirstAdjointDriver(const ProblemSpec& spec, const Ensemble& ensemble)
    : spec_(spec), nodes_(spec) {
  const Sensitivity s = max_sensitivity(spec, ensemble);
  double C = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double w = j == 2 ? spec.delta : 1.0;
    if (j == 3) continue;
    C += w * (s.b[j] + s.sigma[j] + s.theta[j]);
  }
  lipschitz_ = C;
}

void FirstAdjointDriver::begin_sweep(std::size_t paths, const TimeGrid& grid) {
  m_ = grid.m;
  n_ = grid.n;
  dt_ = grid.dt;
  slots_ = m_ + 2;
  decay_ = std::exp(-spec_.rho * dt_);
  decay_window_ = std::exp(-spec_.rho * static_cast<double>(m_ + 1) * dt_);
  ring_.assign(paths * slots_, 0.0);
  W_.assign(paths, 0.0);
}

HamArgs1 FirstAdjointDriver::args_at(const DriverContext& ctx, std::size_t j, double* rbuf) const {
  const StatePoint s = ctx.state(j);
  HamArgs1 h{s.t, s.x, s.y, s.a, s.u, ctx.p(0, j), ctx.q(0, j), {}};
  if (nodes_.nodes()) {
    nodes_.eval(ctx.r(0, j), rbuf);
    h.r = {rbuf, nodes_.nodes()};
  }
  return h;
}

void FirstAdjointDriver::evaluate(const DriverContext& ctx, double* out) {
  const std::size_t k = ctx.k(), i = ctx.path();
  std::vector<double> rbuf(nodes_.nodes());
  double* ring = ring_.data() + i * slots_;
  // Hamiltonian partials vanish after the path has left the domain.
  auto grad_at = [&](std::size_t j) {
    return ctx.alive(j) ? grad_H1(spec_, args_at(ctx, j, rbuf.data())) : Grad4{};
  };
  const Grad4 g_now = grad_at(k);
  double mu = -g_now[0];
  if (k + m_ <= n_) mu -= grad_at(k + m_)[1];
  // W(k) = sum_{j=k+1}^{e} dH/da(j) e^{-rho (t_j - t_k)}, e = min(k+m, n).
  if (k < n_) {
    const double g1 = grad_at(k + 1)[2];
    ring[(k + 1) % slots_] = g1;
    double W = decay_ * (g1 + W_[i]);
    if (k + 1 + m_ <= n_) W -= decay_window_ * ring[(k + 1 + m_) % slots_];
    W_[i] = W;
    const std::size_t e = std::min(k + m_, n_);
    const double tail = ring[e % slots_] * std::exp(-spec_.rho * static_cast<double>(e - k) * dt_);
    mu -= dt_ * (0.5 * g_now[2] + W - 0.5 * tail);
  } else {
    W_[i] = 0.0;
  }
  out[0] = mu;
}

SecondAdjointDriver::SecondAdjointDriver(const ProblemSpec& spec, const Ensemble& ensemble)
    : spec_(spec), nodes_(spec) {
  const Sensitivity s = max_sensitivity(spec, ensemble);
  const double lam = spec.lambda_avg;
  const double p2coef[3] = {1.0, lam, std::exp(-lam * spec.delta)};
  for (int j = 0; j < 3; ++j)
    lipschitz_ = std::max(lipschitz_, s.b[j] + s.sigma[j] + s.theta[j] + p2coef[j]);
}

ComponentTraits SecondAdjointDriver::traits(std::size_t comp) const {
  if (comp == 0) return {true, true};
  if (comp == 1) return {true, false};
  return {false, false};
}

void SecondAdjointDriver::evaluate(const DriverContext& ctx, double* out) {
  const std::size_t k = ctx.k();
  if (!ctx.alive(k)) {
    out[0] = out[1] = out[2] = 0.0;
    return;
  }
  const StatePoint s = ctx.state(k);
  std::vector<double> rbuf(nodes_.nodes());
  HamArgs2 h{s.t, s.x, s.y, s.a, s.u, {ctx.p(0, k), ctx.p(1, k), ctx.p(2, k)}, {ctx.q(0, k), ctx.q(1, k)}, {}};
  if (nodes_.nodes()) {
    nodes_.eval(ctx.r(0, k), rbuf.data());
    h.r = rbuf;
  }
  const Grad4 g = grad_H2(spec_, h);
  out[0] = -g[0];
  out[1] = -g[1];
  out[2] = -g[2];
}

PicardResult solve_first_adjoint(const ProblemSpec& spec, const Ensemble& ensemble, const PicardConfig& cfg) {
  FirstAdjointDriver d(spec, ensemble);
  return picard_solve(d, ensemble.grid, cfg, &ensemble, &spec);
}

PicardResult solve_second_adjoint(const ProblemSpec& spec, const Ensemble& ensemble, const PicardConfig& cfg) {
  SecondAdjointDriver d(spec, ensemble);
  return picard_solve(d, ensemble.grid, cfg, &ensemble, &spec);
}

SolvedAdjoint::SolvedAdjoint(const ProblemSpec& spec, AdjointTriple triple) : nodes_(spec), triple_(std::move(triple)) {}

double SolvedAdjoint::p(std::size_t comp, std::size_t k, std::size_t path, const StatePoint&) const {
  return triple_.p_at(comp, k, col(path));
}

double SolvedAdjoint::q(std::size_t comp, std::size_t k, std::size_t path, const StatePoint&) const {
  return triple_.q_at(comp, k, col(path));
}

void SolvedAdjoint::r_nodes(std::size_t comp, std::size_t k, std::size_t path, const StatePoint&, double* out) const {
  if (nodes_.nodes()) nodes_.eval(triple_.r_at(comp, k, col(path)), out);
}

std::vector<double> mean_series(const AdjointTriple& triple, std::size_t comp, std::size_t last) {
  std::vector<double> v(std::min(last, triple.n) + 1);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = triple.p_mean(comp, k);
  return v;
}

std::vector<double> mean_q_series(const AdjointTriple& triple, std::size_t comp, std::size_t last) {
  std::vector<double> v(std::min(last, triple.n) + 1);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = triple.q_mean(comp, k);
  return v;
}

Flatness p3_flatness(std::span<const double> p3, double tol) {
  Flatness f;
  for (double v : p3) f.max_deviation = std::max(f.max_deviation, std::abs(v));
  f.flat = f.max_deviation <= tol;
  return f;
}

}  // namespace delaymp
