#include "delaymp/forward.hpp"

#include <cmath>
#include <string>

#include "delaymp/errors.hpp"
#include "delaymp/parallel.hpp"
#include "delaymp/rng.hpp"

namespace delaymp {

PathNoise generate_noise(const ProblemSpec& spec, const TimeGrid& grid, std::uint64_t seed, std::uint64_t path) {
  PathNoise nz;
  const std::size_t n = grid.n;
  nz.dB.assign(n, 0.0);
  nz.jump_offset.assign(n + 1, 0);
  const NoiseStream stream(seed, path);
  if (!spec.coeffs.sigma.is_zero()) {
    const double sq = std::sqrt(grid.dt);
    for (std::size_t k = 0; k < n; k += 2) {
      const auto z = stream.normals(k / 2, 0);
      nz.dB[k] = sq * z[0];
      if (k + 1 < n) nz.dB[k + 1] = sq * z[1];
    }
  }
  if (spec.has_jumps()) {
    const double lam = spec.jump->intensity * grid.dt;
    const double p0 = std::exp(-lam);
    for (std::size_t k = 0; k < n; ++k) {
      const double u = stream.uniforms(k, 1)[0];
      double p = p0, cdf = p0;
      std::uint32_t count = 0;
      while (u > cdf && count < 256) {
        ++count;
        p *= lam / count;
        cdf += p;
      }
      for (std::uint32_t j = 0; j < count; ++j) {
        const auto v = stream.uniforms(k, 2 + j / 2);
        nz.marks.push_back(spec.jump->marks.sample(v[j % 2]));
      }
      nz.jump_offset[k + 1] = static_cast<std::uint32_t>(nz.marks.size());
    }
  }
  return nz;
}

ControlSpec::ControlSpec() : ControlSpec([](const ControlContext&) { return 0.0; }, -INFINITY, INFINITY) {}

ControlSpec::ControlSpec(Rule rule, double lo, double hi)
    : rule_(std::move(rule)), lo_(lo), hi_(hi), clips_(std::make_shared<std::atomic<std::size_t>>(0)) {
  if (lo > hi) fail(ErrorCode::BadInterval, "control bounds u_lo > u_hi");
}

ControlSpec ControlSpec::constant(double v, double lo, double hi) {
  return ControlSpec([v](const ControlContext&) { return v; }, lo, hi);
}

ControlSpec ControlSpec::feedback(std::function<double(double, double, double, double)> rule, double lo, double hi) {
  return ControlSpec([rule = std::move(rule)](const ControlContext& c) { return rule(c.t, c.x, c.y, c.a); }, lo, hi);
}

ControlSpec ControlSpec::open_loop(std::vector<double> table, double lo, double hi) {
  auto tab = std::make_shared<const std::vector<double>>(std::move(table));
  return ControlSpec(
      [tab](const ControlContext& c) {
        if (c.k >= tab->size()) fail(ErrorCode::GridMismatch, "open-loop control table shorter than the grid");
        return (*tab)[c.k];
      },
      lo, hi);
}

ControlSpec ControlSpec::reference_process(double lo, double hi) {
  ControlSpec c(
      [](const ControlContext& c) {
        if (!c.ref_u) fail(ErrorCode::ConfigError, "reference control process requested without a reference run");
        return c.ref_u[c.k];
      },
      lo, hi);
  c.needs_ref_ = true;
  return c;
}

ControlSpec ControlSpec::scaled(double s) const {
  ControlSpec c([base = rule_, s](const ControlContext& ctx) { return s * base(ctx); }, lo_, hi_);
  c.needs_ref_ = needs_ref_;
  return c;
}

ControlSpec ControlSpec::plus(std::function<double(std::size_t, double)> beta) const {
  ControlSpec c([base = rule_, beta = std::move(beta)](const ControlContext& ctx) { return base(ctx) + beta(ctx.k, ctx.t); },
                lo_, hi_);
  c.needs_ref_ = needs_ref_;
  return c;
}

double ControlSpec::operator()(const ControlContext& c) const {
  const double v = rule_(c);
  if (v < lo_) {
    clips_->fetch_add(1, std::memory_order_relaxed);
    return lo_;
  }
  if (v > hi_) {
    clips_->fetch_add(1, std::memory_order_relaxed);
    return hi_;
  }
  return v;
}

bool in_window(const TimeGrid& grid, std::size_t k, double s, double h) {
  const double t = grid.t(k);
  const double eps = 1e-9 * grid.dt;
  return t >= s - eps && t <= s + h + eps;
}

ControlSpec bump_control(const ControlSpec& base, const TimeGrid& grid, double alpha, double s, double h) {
  if (!(h > 0.0) || s < 0.0 || s + h > grid.horizon + 1e-9 * grid.dt)
    fail(ErrorCode::BadWindow, "bump window must lie inside [0, T]");
  if (alpha == 0.0) return base;
  return base.plus([grid, alpha, s, h](std::size_t k, double) { return in_window(grid, k, s, h) ? alpha : 0.0; });
}

AverageWeights average_weights(double rho, double dt, std::size_t m) {
  AverageWeights w{};
  const double h = rho * dt;
  w.decay_step = std::exp(-h);
  w.decay_delay = std::exp(-rho * static_cast<double>(m) * dt);
  if (h < 0.5) {
    // w0 = dt sum (-h)^k (k+1)/(k+2)!, w1 = dt sum (-h)^k/(k+2)!
    double term = 0.5;  // (-h)^k/(k+2)! at k = 0
    double s0 = 0.0, s1 = 0.0;
    for (int k = 0; k < 30; ++k) {
      s0 += term * (k + 1);
      s1 += term;
      term *= -h / (k + 3);
    }
    w.w0 = dt * s0;
    w.w1 = dt * s1;
  } else {
    const double e = -std::expm1(-h) / rho;
    w.w1 = e - (1.0 - std::exp(-h) * (1.0 + h)) / (rho * rho * dt);
    w.w0 = e - w.w1;
  }
  return w;
}

double update_moving_average(double A, double x_prev, double x_new, double tail0, double tail1,
                             const AverageWeights& w) {
  return w.decay_step * A + (w.w0 * x_prev + w.w1 * x_new) - w.decay_delay * (w.w0 * tail0 + w.w1 * tail1);
}

double moving_average_of_segment(std::span<const double> segment, const AverageWeights& w) {
  double A = 0.0;
  for (std::size_t j = 0; j + 1 < segment.size(); ++j) A = w.decay_step * A + (w.w0 * segment[j] + w.w1 * segment[j + 1]);
  return A;
}

PathStepper::PathStepper(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                         const PathNoise& noise, std::size_t path, const double* ref_u)
    : spec_(spec), grid_(grid), control_(control), noise_(noise), path_(path), ref_u_(ref_u),
      w_(average_weights(spec.rho, grid.dt, grid.m)) {
  ring_ = spec.segment_values(grid);
  head_ = grid.m;
  x_ = ring_[grid.m];
  y_ = ring_[0];
  a_ = moving_average_of_segment(ring_, w_);
  if (spec_.domain && !spec_.domain(StatePoint{0.0, x_, y_, a_, 0.0})) {
    exited_ = true;
    u_ = 0.0;
  } else {
    eval_control();
  }
}

void PathStepper::eval_control() {
  ControlContext c{path_, k_, grid_.t(k_), x_, y_, a_, ref_u_};
  u_ = control_(c);
}

bool PathStepper::step() {
  if (k_ >= grid_.n) return false;
  if (exited_) {
    ++k_;
    return true;
  }
  const StatePoint pt{grid_.t(k_), x_, y_, a_, u_};
  const auto& c = spec_.coeffs;
  double drift = c.b(pt);
  double xn = x_;
  if (spec_.has_jumps()) {
    drift -= nu_integral(spec_, [&](double z) { return c.theta(pt, z); });
    for (double z : noise_.jumps(k_)) xn += c.theta(pt, z);
  }
  xn += drift * grid_.dt;
  if (!c.sigma.is_zero()) xn += c.sigma(pt) * noise_.dB[k_];
  if (!std::isfinite(xn))
    fail(ErrorCode::NonFiniteState, "state became non-finite at step " + std::to_string(k_ + 1));
  const double tail0 = history(0);
  const double tail1 = history(1);
  const double an = update_moving_average(a_, x_, xn, tail0, tail1, w_);
  head_ = (head_ + 1) % ring_.size();
  ring_[head_] = xn;
  ++k_;
  x_ = xn;
  y_ = history(0);
  a_ = an;
  if (spec_.domain && !spec_.domain(StatePoint{grid_.t(k_), x_, y_, a_, 0.0})) {
    exited_ = true;
    u_ = 0.0;
    return true;
  }
  eval_control();
  return true;
}

PathRecord simulate_path(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                         const PathNoise& noise, std::size_t path, const double* ref_u) {
  PathRecord rec;
  const std::size_t n = grid.n;
  rec.t.resize(n + 1);
  rec.X.resize(n + 1);
  rec.Y.resize(n + 1);
  rec.A.resize(n + 1);
  rec.u.resize(n + 1);
  rec.segment0 = spec.segment_values(grid);
  PathStepper st(spec, grid, control, noise, path, ref_u);
  auto record = [&](std::size_t k) {
    const StatePoint s = st.state();
    rec.t[k] = grid.t(k);
    rec.X[k] = s.x;
    rec.Y[k] = s.y;
    rec.A[k] = s.a;
    rec.u[k] = st.exited() ? 0.0 : s.u;
    if (st.exited() && !rec.exited) {
      rec.exited = true;
      rec.exit_step = k;
    }
  };
  record(0);
  while (st.step()) record(st.k());
  rec.noise = noise;
  return rec;
}

Ensemble simulate_ensemble(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                           std::size_t n_paths, std::uint64_t seed, std::size_t threads) {
  Ensemble e;
  e.grid = grid;
  e.seed = seed;
  e.paths.resize(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PathNoise nz = generate_noise(spec, grid, seed, i);
      e.paths[i] = simulate_path(spec, grid, control, nz, i);
    }
  });
  return e;
}

VariationalPath simulate_variational(const ProblemSpec& spec, const TimeGrid& grid, const PathRecord& base,
                                     std::span<const double> beta) {
  const std::size_t n = grid.n, m = grid.m;
  if (base.steps() != n || beta.size() != n + 1)
    fail(ErrorCode::GridMismatch, "variational inputs do not match the grid");
  VariationalPath v;
  v.xi.assign(n + 1, 0.0);
  v.xi_y.assign(n + 1, 0.0);
  v.xi_a.assign(n + 1, 0.0);
  const AverageWeights w = average_weights(spec.rho, grid.dt, m);
  const auto& c = spec.coeffs;
  const std::size_t last = base.last_valid();
  auto xi_at = [&](long j) { return j <= 0 ? 0.0 : v.xi[static_cast<std::size_t>(j)]; };
  for (std::size_t k = 0; k < n; ++k) {
    if (k >= last) {
      v.xi[k + 1] = v.xi[k];
      v.xi_y[k + 1] = v.xi_y[k];
      v.xi_a[k + 1] = v.xi_a[k];
      continue;
    }
    const StatePoint pt = base.state(k);
    const double xi = v.xi[k], xy = v.xi_y[k], xa = v.xi_a[k], bk = beta[k];
    auto lin = [&](const Grad4& g) { return g[0] * xi + g[1] * xy + g[2] * xa + g[3] * bk; };
    double drift = lin(c.b.grad(pt));
    double next = xi;
    if (spec.has_jumps()) {
      drift -= nu_integral(spec, [&](double z) { return lin(c.theta.grad(pt, z)); });
      for (double z : base.noise.jumps(k)) next += lin(c.theta.grad(pt, z));
    }
    next += drift * grid.dt;
    if (!c.sigma.is_zero()) next += lin(c.sigma.grad(pt)) * base.noise.dB[k];
    if (!std::isfinite(next))
      fail(ErrorCode::NonFiniteState, "variational process became non-finite at step " + std::to_string(k + 1));
    v.xi[k + 1] = next;
    const long lk = static_cast<long>(k), lm = static_cast<long>(m);
    v.xi_a[k + 1] = update_moving_average(xa, xi, next, xi_at(lk - lm), xi_at(lk - lm + 1), w);
    v.xi_y[k + 1] = xi_at(lk + 1 - lm);
  }
  return v;
}

}  // namespace delaymp
