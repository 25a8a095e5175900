#include "delaymp/absde.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <mutex>

#include "delaymp/kernels.hpp"
#include "delaymp/parallel.hpp"

namespace delaymp {

const char* to_string(SolveMode m) { return m == SolveMode::Deterministic ? "deterministic" : "regression"; }
const char* to_string(Schedule s) { return s == Schedule::Jacobi ? "jacobi" : "sweep"; }

AdjointTriple::AdjointTriple(std::size_t dim_, std::size_t n_, std::size_t paths_, std::size_t features_)
    : dim(dim_), n(n_), paths(paths_), features(features_) {
  p.assign(dim * (n + 1) * paths, 0.0);
  q.assign(dim * (n + 1) * paths, 0.0);
  r.assign(dim * (n + 1) * paths * features, 0.0);
}

std::span<const double> AdjointTriple::r_at(std::size_t comp, std::size_t k, std::size_t path) const {
  if (features == 0 || k > n) return {};
  return {r.data() + idx(comp, k, path) * features, features};
}

double AdjointTriple::p_mean(std::size_t comp, std::size_t k) const {
  if (k > n) return 0.0;
  return kernels::sum(p.data() + idx(comp, k, 0), paths) / static_cast<double>(paths);
}

double AdjointTriple::q_mean(std::size_t comp, std::size_t k) const {
  if (k > n) return 0.0;
  return kernels::sum(q.data() + idx(comp, k, 0), paths) / static_cast<double>(paths);
}

DriverContext::DriverContext(const TimeGrid& grid, std::size_t k, std::size_t path, const AdjointTriple& prev,
                             const AdjointTriple& cur, Schedule schedule, const Ensemble* ensemble,
                             const std::vector<double>* predictor)
    : grid_(grid), k_(k), path_(path), prev_(prev), cur_(cur), schedule_(schedule), ensemble_(ensemble),
      predictor_(predictor) {}

void DriverContext::note_adj(std::size_t j) const {
  const long off = static_cast<long>(j) - static_cast<long>(k_);
  min_adj_ = std::min(min_adj_, off);
}

const AdjointTriple& DriverContext::source(std::size_t) const {
  return schedule_ == Schedule::Jacobi ? prev_ : cur_;
}

double DriverContext::p(std::size_t comp, std::size_t j) const {
  note_adj(j);
  if (j > grid_.n) return 0.0;
  if (schedule_ == Schedule::Sweep && j == k_ && predictor_) return (*predictor_)[comp];
  const AdjointTriple& s = source(j);
  return s.p_at(comp, j, s.paths == 1 ? 0 : path_);
}

double DriverContext::q(std::size_t comp, std::size_t j) const {
  note_adj(j);
  if (j > grid_.n) return 0.0;
  const AdjointTriple& s = source(j);
  return s.q_at(comp, j, s.paths == 1 ? 0 : path_);
}

std::span<const double> DriverContext::r(std::size_t comp, std::size_t j) const {
  note_adj(j);
  if (j > grid_.n) return {};
  const AdjointTriple& s = source(j);
  return s.r_at(comp, j, s.paths == 1 ? 0 : path_);
}

StatePoint DriverContext::state(std::size_t j) const {
  min_state_ = std::min(min_state_, static_cast<long>(j) - static_cast<long>(k_));
  if (!ensemble_) return {grid_.t(std::min(j, grid_.n)), 0.0, 0.0, 0.0, 0.0};
  const PathRecord& rec = ensemble_->paths[ensemble_->paths.size() == 1 ? 0 : path_];
  return rec.state(std::min(j, grid_.n));
}

bool DriverContext::alive(std::size_t j) const {
  if (!ensemble_) return true;
  const PathRecord& rec = ensemble_->paths[ensemble_->paths.size() == 1 ? 0 : path_];
  return std::min(j, grid_.n) <= rec.last_valid();
}

FunctionDriver::FunctionDriver(Fn fn, double lipschitz, bool uses_segments)
    : fn_(std::move(fn)), lipschitz_(lipschitz), segments_(uses_segments) {}

void FunctionDriver::evaluate(const DriverContext& ctx, double* out) {
  const std::size_t k = ctx.k(), m = ctx.grid().m;
  DriverArgs a;
  a.t = ctx.t();
  a.p_now = ctx.p(0, k);
  a.p_adv = ctx.p(0, k + m);
  a.q_now = ctx.q(0, k);
  a.q_adv = ctx.q(0, k + m);
  a.r_now = ctx.r(0, k);
  a.r_adv = ctx.r(0, k + m);
  std::vector<double> ps, qs, rs;
  if (segments_) {
    ps.resize(m + 1);
    qs.resize(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
      ps[j] = ctx.p(0, k + j);
      qs[j] = ctx.q(0, k + j);
      const auto rj = ctx.r(0, k + j);
      if (!a.r_now.empty()) {
        rs.resize((m + 1) * a.r_now.size(), 0.0);
        std::copy(rj.begin(), rj.end(), rs.begin() + static_cast<long>(j * a.r_now.size()));
      }
    }
    a.p_seg = ps;
    a.q_seg = qs;
    a.r_seg = rs;
  }
  out[0] = fn_(a);
}

PicardFailure::PicardFailure(ErrorCode code, const std::string& what, PicardResult partial)
    : Error(code, what), partial_(std::move(partial)) {}

double epsilon_rule(double lambda, double delta) { return 1.0 / (12.0 * (2.0 + std::exp(-lambda * delta))); }

double auto_weight(double lipschitz, double delta) {
  if (!(lipschitz > 0.0)) return 0.0;
  double lam = 36.0 * lipschitz;
  for (int i = 0; i < 200; ++i) {
    const double next = lipschitz / epsilon_rule(lam, delta);
    if (std::abs(next - lam) <= 1e-15 * lam) break;
    lam = next;
  }
  return 1.1 * lam;
}

namespace {

double jump_norm2(const ProblemSpec* spec, std::span<const double> a, std::span<const double> b) {
  if (!spec || a.empty()) return 0.0;
  const auto& M = spec->jump->marks.feature_gram();
  const std::size_t F = a.size();
  double s = 0.0;
  for (std::size_t i = 0; i < F; ++i)
    for (std::size_t j = 0; j < F; ++j) s += (a[i] - b[i]) * M[i * F + j] * (a[j] - b[j]);
  return spec->jump->intensity * s;
}

/// Per-step mean squared change, summed over components.
std::vector<double> step_changes(const AdjointTriple& a, const AdjointTriple& b, const ProblemSpec* spec,
                                 std::vector<double>* rms) {
  std::vector<double> out(a.n + 1, 0.0);
  if (rms) rms->assign(a.n + 1, 0.0);
  const double np = static_cast<double>(a.paths);
  for (std::size_t c = 0; c < a.dim; ++c) {
    for (std::size_t k = 0; k <= a.n; ++k) {
      const std::size_t o = a.idx(c, k, 0);
      double d = kernels::sq_dist(a.p.data() + o, b.p.data() + o, a.paths) +
                 kernels::sq_dist(a.q.data() + o, b.q.data() + o, a.paths);
      const double pq = d / np;
      if (a.features) {
        for (std::size_t i = 0; i < a.paths; ++i) d += jump_norm2(spec, a.r_at(c, k, i), b.r_at(c, k, i));
      }
      out[k] += d / np;
      if (rms) (*rms)[k] = std::max((*rms)[k], std::sqrt(pq));
    }
  }
  return out;
}

double weighted_integral(const std::vector<double>& per_step, const TimeGrid& grid, double lambda) {
  const double T = grid.t(grid.n);
  double s = 0.0;
  for (std::size_t k = 0; k <= grid.n; ++k) {
    const double w = (k == 0 || k == grid.n) ? 0.5 : 1.0;
    s += w * std::exp(lambda * (grid.t(k) - T)) * per_step[k];
  }
  return s * grid.dt;
}

class Solver {
 public:
  Solver(AdvancedDriver& driver, const TimeGrid& grid, const PicardConfig& cfg, const Ensemble* ens,
         const ProblemSpec* spec)
      : driver_(driver), grid_(grid), cfg_(cfg), ens_(ens), spec_(spec), D_(driver.dimension()),
        basis_(3, cfg.basis_degree) {
    if (cfg.mode == SolveMode::Regression && (!ens || ens->paths.empty()))
      fail(ErrorCode::ConfigError, "regression mode needs a simulated ensemble");
    if (ens && (ens->grid.n != grid.n || ens->grid.m != grid.m))
      fail(ErrorCode::GridMismatch, "ensemble grid does not match the solver grid");
    paths_ = cfg.mode == SolveMode::Regression ? ens->paths.size() : 1;
    features_ = (spec && spec->has_jumps()) ? spec->jump->marks.feature_count() : 0;
    if (features_) {
      // M^{-1} for the mark-feature projection.
      const auto& M = spec->jump->marks.feature_gram();
      Eigen::MatrixXd G(features_, features_);
      for (std::size_t i = 0; i < features_; ++i)
        for (std::size_t j = 0; j < features_; ++j) G(i, j) = M[i * features_ + j];
      Minv_ = G.completeOrthogonalDecomposition().pseudoInverse();
    }
    if (cfg.mode == SolveMode::Regression) load_state();
  }

  std::size_t paths() const { return paths_; }
  std::size_t features() const { return features_; }
  long min_adj = std::numeric_limits<long>::max();
  long min_state = std::numeric_limits<long>::max();

  AdjointTriple sweep(const AdjointTriple& prev) {
    const std::size_t n = grid_.n, N = paths_;
    const double dt = grid_.dt;
    AdjointTriple cur(D_, n, N, features_);
    driver_.begin_sweep(N, grid_);
    std::vector<double> Fnext(D_ * N), Fk(D_ * N), pred(D_ * N, 0.0);
    evaluate_all(n, prev, cur, pred, Fnext);
    std::vector<double> target(N), fitted(N), centered(N), work(N);
    for (std::size_t kk = n; kk-- > 0;) {
      std::unique_ptr<SliceRegression> reg;
      if (cfg_.mode == SolveMode::Regression) {
        const double* vars[3] = {x_[kk].data(), y_[kk].data(), a_[kk].data()};
        reg = std::make_unique<SliceRegression>(basis_, std::span<const double* const>(vars, 3), N);
      }
      auto condexp = [&](const double* in, double* out) {
        if (reg)
          reg->fitted(in, out);
        else
          std::copy(in, in + N, out);
      };
      for (std::size_t c = 0; c < D_; ++c) {
        const ComponentTraits tr = driver_.traits(c);
        const double* pn = cur.p.data() + cur.idx(c, kk + 1, 0);
        condexp(pn, fitted.data());
        for (std::size_t i = 0; i < N; ++i) centered[i] = pn[i] - fitted[i];
        if (tr.diffusion && ens_ && has_diffusion()) {
          for (std::size_t i = 0; i < N; ++i) target[i] = centered[i] * dB(i, kk) / dt;
          condexp(target.data(), cur.q.data() + cur.idx(c, kk, 0));
        }
        if (tr.jump && features_ && ens_) extract_r(cur, c, kk, centered, target, work, condexp);
        if (cfg_.schedule == Schedule::Sweep) {
          for (std::size_t i = 0; i < N; ++i) target[i] = pn[i] - dt * Fnext[c * N + i];
          condexp(target.data(), work.data());
          for (std::size_t i = 0; i < N; ++i) pred[i * D_ + c] = work[i];
        }
      }
      evaluate_all(kk, prev, cur, pred, Fk);
      for (std::size_t c = 0; c < D_; ++c) {
        const double* pn = cur.p.data() + cur.idx(c, kk + 1, 0);
        for (std::size_t i = 0; i < N; ++i) target[i] = pn[i] - 0.5 * dt * (Fk[c * N + i] + Fnext[c * N + i]);
        condexp(target.data(), cur.p.data() + cur.idx(c, kk, 0));
      }
      for (std::size_t i = 0; i < D_ * N; ++i)
        if (!std::isfinite(cur.p[cur.idx(i / N, kk, i % N)]))
          fail(ErrorCode::NonFinite, "adjoint became non-finite at step " + std::to_string(kk));
      std::swap(Fnext, Fk);
    }
    return cur;
  }

 private:
  bool has_diffusion() const { return spec_ ? !spec_->coeffs.sigma.is_zero() : true; }
  double dB(std::size_t i, std::size_t k) const {
    const PathRecord& r = ens_->paths[ens_->paths.size() == 1 ? 0 : i];
    return r.noise.dB.empty() ? 0.0 : r.noise.dB[k];
  }

  void load_state() {
    const std::size_t n = grid_.n, N = paths_;
    x_.assign(n + 1, std::vector<double>(N));
    y_ = x_;
    a_ = x_;
    for (std::size_t i = 0; i < N; ++i) {
      const PathRecord& r = ens_->paths[i];
      for (std::size_t k = 0; k <= n; ++k) {
        x_[k][i] = r.X[k];
        y_[k][i] = r.Y[k];
        a_[k][i] = r.A[k];
      }
    }
  }

  template <class CondExp>
  void extract_r(AdjointTriple& cur, std::size_t c, std::size_t k, const std::vector<double>& centered,
                 std::vector<double>& target, std::vector<double>& work, CondExp& condexp) {
    const std::size_t N = paths_, F = features_;
    const auto& marks = spec_->jump->marks;
    const double lamdt = spec_->jump->intensity * grid_.dt;
    std::vector<double> phi(F), proj(F * N);
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t i = 0; i < N; ++i) {
        const PathRecord& rec = ens_->paths[ens_->paths.size() == 1 ? 0 : i];
        double J = -lamdt * marks.feature_means()[f];
        for (double z : rec.noise.jumps(k)) {
          marks.features(z, phi.data());
          J += phi[f];
        }
        target[i] = centered[i] * J / lamdt;
      }
      condexp(target.data(), work.data());
      for (std::size_t i = 0; i < N; ++i) proj[f * N + i] = work[i];
    }
    for (std::size_t i = 0; i < N; ++i) {
      double* out = cur.r.data() + cur.idx(c, k, i) * F;
      for (std::size_t a = 0; a < F; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < F; ++b) s += Minv_(a, b) * proj[b * N + i];
        out[a] = s;
      }
    }
  }

  void evaluate_all(std::size_t k, const AdjointTriple& prev, const AdjointTriple& cur, const std::vector<double>& pred,
                    std::vector<double>& F) {
    const std::size_t N = paths_;
    std::mutex mu;
    parallel_for(N, cfg_.threads, [&](std::size_t begin, std::size_t end) {
      long ma = std::numeric_limits<long>::max(), ms = ma;
      std::vector<double> out(D_), pv(D_);
      for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t c = 0; c < D_; ++c) pv[c] = pred[i * D_ + c];
        DriverContext ctx(grid_, k, i, prev, cur, cfg_.schedule, ens_, &pv);
        driver_.evaluate(ctx, out.data());
        for (std::size_t c = 0; c < D_; ++c) F[c * N + i] = out[c];
        ma = std::min(ma, ctx.min_adjoint_offset());
        ms = std::min(ms, ctx.min_state_offset());
      }
      std::lock_guard<std::mutex> lock(mu);
      min_adj = std::min(min_adj, ma);
      min_state = std::min(min_state, ms);
    });
  }

  AdvancedDriver& driver_;
  const TimeGrid& grid_;
  const PicardConfig& cfg_;
  const Ensemble* ens_;
  const ProblemSpec* spec_;
  std::size_t D_;
  PolyBasis basis_;
  std::size_t paths_ = 1, features_ = 0;
  Eigen::MatrixXd Minv_;
  std::vector<std::vector<double>> x_, y_, a_;
};

}  // namespace

double weighted_distance(const AdjointTriple& a, const AdjointTriple& b, const TimeGrid& grid, double lambda,
                         const ProblemSpec* spec) {
  return weighted_integral(step_changes(a, b, spec, nullptr), grid, lambda);
}

PicardResult picard_solve(AdvancedDriver& driver, const TimeGrid& grid, const PicardConfig& cfg,
                          const Ensemble* ensemble, const ProblemSpec* spec) {
  Solver solver(driver, grid, cfg, ensemble, spec);
  PicardResult res;
  PicardReport& rep = res.report;
  rep.lipschitz = driver.lipschitz();
  rep.weight_lambda = cfg.weight_lambda > 0.0 ? cfg.weight_lambda : auto_weight(rep.lipschitz, grid.delta);
  rep.lambda_T = rep.weight_lambda * grid.t(grid.n);
  rep.mode = to_string(cfg.mode);
  rep.schedule = to_string(cfg.schedule);
  AdjointTriple prev(driver.dimension(), grid.n, solver.paths(), solver.features());
  if (cfg.init) {
    for (std::size_t c = 0; c < prev.dim; ++c)
      for (std::size_t k = 0; k <= grid.n; ++k)
        for (std::size_t i = 0; i < prev.paths; ++i) prev.p[prev.idx(c, k, i)] = cfg.init(c, k, i);
  }
  const bool weight_ok = rep.weight_lambda >= auto_weight(rep.lipschitz, grid.delta) / 1.1 * (1.0 - 1e-12);
  int bad_run = 0;
  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    AdjointTriple cur = solver.sweep(prev);
    std::vector<double> rms;
    const double d = weighted_integral(step_changes(cur, prev, spec, &rms), grid, rep.weight_lambda);
    const double sup = rms.empty() ? 0.0 : *std::max_element(rms.begin(), rms.end());
    if (!rep.distances.empty()) {
      const double last = rep.distances.back();
      const double ratio = last > 0.0 ? d / last : (d > 0.0 ? INFINITY : 0.0);
      rep.ratios.push_back(ratio);
      bad_run = ratio >= 1.0 ? bad_run + 1 : 0;
    }
    rep.distances.push_back(d);
    rep.sup_rms.push_back(sup);
    rep.iterations = it;
    prev = std::move(cur);
    if (d <= cfg.tol && sup <= cfg.tol) {
      rep.converged = true;
      break;
    }
    if (bad_run >= 3) {
      // With a weight at or above the contraction threshold, growth is a
      // round-off stall rather than a weight that is too small.
      rep.failure = weight_ok ? "Stalled" : "BadWeight";
      break;
    }
  }
  rep.min_adjoint_offset = solver.min_adj;
  rep.min_state_offset = solver.min_state;
  res.triple = std::move(prev);
  if (!rep.converged) {
    if (rep.failure.empty()) rep.failure = "NoConvergence";
    const ErrorCode code = rep.failure == "BadWeight" ? ErrorCode::BadWeight : ErrorCode::NoConvergence;
    const std::string msg = rep.failure == "BadWeight"
                                ? "weighted distance grew for 3 consecutive iterations; weight lambda too small"
                            : rep.failure == "Stalled"
                                ? "weighted distance stalled at the round-off floor before reaching tol"
                                : "Picard iteration did not converge within the iteration limit";
    throw PicardFailure(code, msg, std::move(res));
  }
  return res;
}

ContractionVerdict contraction_diagnostics(const PicardReport& report, const AdvancedDriver& driver, double delta,
                                           double slack) {
  ContractionVerdict v;
  v.slack = slack;
  v.lambda_theory = auto_weight(driver.lipschitz(), delta);
  v.epsilon = epsilon_rule(v.lambda_theory, delta);
  v.weight_below_theory = report.weight_lambda < v.lambda_theory / 1.1;
  const std::size_t from = report.ratios.size() >= 2 ? 1 : 0;
  for (std::size_t i = from; i < report.ratios.size(); ++i) {
    v.measured_ratio = std::max(v.measured_ratio, report.ratios[i]);
    ++v.ratios_used;
  }
  v.contracts = v.measured_ratio <= 0.5 + slack;
  return v;
}

UniquenessResult uniqueness_probe(AdvancedDriver& driver, const TimeGrid& grid, PicardConfig cfg,
                                  std::function<double(std::size_t, std::size_t, std::size_t)> init_a,
                                  std::function<double(std::size_t, std::size_t, std::size_t)> init_b,
                                  const Ensemble* ensemble, const ProblemSpec* spec) {
  cfg.init = std::move(init_a);
  PicardResult a = picard_solve(driver, grid, cfg, ensemble, spec);
  cfg.init = std::move(init_b);
  PicardResult b = picard_solve(driver, grid, cfg, ensemble, spec);
  UniquenessResult u;
  u.distance = weighted_distance(a.triple, b.triple, grid, a.report.weight_lambda, spec);
  u.first = std::move(a.report);
  u.second = std::move(b.report);
  return u;
}

}  // namespace delaymp
