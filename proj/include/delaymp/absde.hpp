#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "delaymp/errors.hpp"
#include "delaymp/forward.hpp"
#include "delaymp/model.hpp"
#include "delaymp/regression.hpp"

namespace delaymp {

enum class SolveMode { Deterministic, Regression };

/// Where the driver's p-arguments come from during one backward sweep.
/// Jacobi: every p-argument from the previous iterate (plain Picard).
/// Sweep: every argument from the current sweep; the current-time value is a
/// Heun predictor, so one sweep already solves the equation.
enum class Schedule { Jacobi, Sweep };

const char* to_string(SolveMode m);
const char* to_string(Schedule s);

/// Grid-sampled solution of a dim-component backward equation over paths.
/// r is stored by its coefficients on the mark features.
struct AdjointTriple {
  std::size_t dim = 1, n = 0, paths = 1, features = 0;
  std::vector<double> p, q, r;

  AdjointTriple() = default;
  AdjointTriple(std::size_t dim, std::size_t n, std::size_t paths, std::size_t features);

  std::size_t idx(std::size_t comp, std::size_t k, std::size_t path) const { return (comp * (n + 1) + k) * paths + path; }
  /// Zero for k > n (truncation convention).
  double p_at(std::size_t comp, std::size_t k, std::size_t path) const { return k > n ? 0.0 : p[idx(comp, k, path)]; }
  double q_at(std::size_t comp, std::size_t k, std::size_t path) const { return k > n ? 0.0 : q[idx(comp, k, path)]; }
  std::span<const double> r_at(std::size_t comp, std::size_t k, std::size_t path) const;
  /// Path average of p at step k.
  double p_mean(std::size_t comp, std::size_t k) const;
  double q_mean(std::size_t comp, std::size_t k) const;
};

struct ComponentTraits {
  bool diffusion = true;
  bool jump = true;
};

class DriverContext;

/// Driver of dp = F dt + q dB + r dN~, evaluated pathwise.
class AdvancedDriver {
 public:
  virtual ~AdvancedDriver() = default;
  virtual std::size_t dimension() const = 0;
  /// Lipschitz constant in the unknowns (declared or estimated).
  virtual double lipschitz() const = 0;
  virtual ComponentTraits traits(std::size_t) const { return {}; }
  /// Called before each backward sweep.
  virtual void begin_sweep(std::size_t /*paths*/, const TimeGrid& /*grid*/) {}
  /// Writes F for every component at (ctx.k(), ctx.path()). For each path the
  /// calls come in decreasing k, once per step and sweep.
  virtual void evaluate(const DriverContext& ctx, double* out) = 0;
};

/// Read access to the unknowns and to the forward state of one path at step
/// k. Adjoint reads must be at steps >= k and state reads at steps >= k - m;
/// the lowest offsets are recorded for the measurability check.
class DriverContext {
 public:
  DriverContext(const TimeGrid& grid, std::size_t k, std::size_t path, const AdjointTriple& prev,
                const AdjointTriple& cur, Schedule schedule, const Ensemble* ensemble,
                const std::vector<double>* predictor);

  std::size_t k() const { return k_; }
  std::size_t path() const { return path_; }
  double t() const { return grid_.t(k_); }
  const TimeGrid& grid() const { return grid_; }

  double p(std::size_t comp, std::size_t j) const;
  double q(std::size_t comp, std::size_t j) const;
  std::span<const double> r(std::size_t comp, std::size_t j) const;
  /// Forward state at step j of the path; steps beyond n read step n.
  StatePoint state(std::size_t j) const;
  bool has_state() const { return ensemble_ != nullptr; }
  /// False once the path has left the domain (the problem stops there).
  bool alive(std::size_t j) const;

  long min_adjoint_offset() const { return min_adj_; }
  long min_state_offset() const { return min_state_; }

 private:
  const AdjointTriple& source(std::size_t j) const;
  void note_adj(std::size_t j) const;

  const TimeGrid& grid_;
  std::size_t k_, path_;
  const AdjointTriple& prev_;
  const AdjointTriple& cur_;
  Schedule schedule_;
  const Ensemble* ensemble_;
  const std::vector<double>* predictor_;  ///< current-time p per component (Sweep)
  mutable long min_adj_ = std::numeric_limits<long>::max();
  mutable long min_state_ = std::numeric_limits<long>::max();
};

/// The ten arguments of the driver signature for a scalar equation.
struct DriverArgs {
  double t = 0.0;
  double p_now = 0.0, p_adv = 0.0;
  std::span<const double> p_seg;  ///< p on [t, t+delta], m+1 values
  double q_now = 0.0, q_adv = 0.0;
  std::span<const double> q_seg;
  std::span<const double> r_now, r_adv;  ///< feature coefficients
  std::span<const double> r_seg;          ///< (m+1) x features
};

/// Scalar driver given as a function of the ten arguments.
class FunctionDriver : public AdvancedDriver {
 public:
  using Fn = std::function<double(const DriverArgs&)>;
  FunctionDriver(Fn fn, double lipschitz, bool uses_segments = false);

  std::size_t dimension() const override { return 1; }
  double lipschitz() const override { return lipschitz_; }
  void evaluate(const DriverContext& ctx, double* out) override;

 private:
  Fn fn_;
  double lipschitz_;
  bool segments_;
};

struct PicardConfig {
  SolveMode mode = SolveMode::Deterministic;
  Schedule schedule = Schedule::Sweep;
  /// <= 0 selects the automatic weight.
  double weight_lambda = 0.0;
  double tol = 1e-12;
  std::size_t max_iter = 60;
  std::size_t basis_degree = 2;
  std::size_t threads = 1;
  /// Initial p per (component, k, path); zero when empty.
  std::function<double(std::size_t, std::size_t, std::size_t)> init;
};

struct PicardReport {
  std::vector<double> distances;  ///< d_i between iterates i+1 and i
  std::vector<double> ratios;     ///< d_{i+1} / d_i (0 when both vanish)
  std::vector<double> sup_rms;    ///< max over t of the RMS change
  std::size_t iterations = 0;
  bool converged = false;
  double weight_lambda = 0.0;
  double lambda_T = 0.0;  ///< distances are scaled by e^{-lambda T}
  double lipschitz = 0.0;
  std::string mode, schedule;
  std::string failure;  ///< empty, NoConvergence, Stalled or BadWeight
  long min_adjoint_offset = 0;
  long min_state_offset = 0;
};

struct PicardResult {
  AdjointTriple triple;
  PicardReport report;
};

/// Raised on NoConvergence and BadWeight; carries the partial result.
class PicardFailure : public Error {
 public:
  PicardFailure(ErrorCode code, const std::string& what, PicardResult partial);
  const PicardResult& partial() const { return partial_; }

 private:
  PicardResult partial_;
};

/// Fixed point of lambda = 12 C (2 + e^{-lambda delta}), times 1.1.
double auto_weight(double lipschitz, double delta);
/// epsilon = 1 / (12 (2 + e^{-lambda delta})).
double epsilon_rule(double lambda, double delta);

/// Weighted squared distance int e^{lambda (t - T)} E|a - b|^2 dt (p, q and r parts).
double weighted_distance(const AdjointTriple& a, const AdjointTriple& b, const TimeGrid& grid, double lambda,
                         const ProblemSpec* spec = nullptr);

/// Solves dp = E[F | F_t] dt + q dB + r dN~ with p = 0 after T.
/// Regression mode needs an ensemble; deterministic mode reads path 0 of
/// the ensemble if one is given.
PicardResult picard_solve(AdvancedDriver& driver, const TimeGrid& grid, const PicardConfig& cfg,
                          const Ensemble* ensemble = nullptr, const ProblemSpec* spec = nullptr);

struct ContractionVerdict {
  double lambda_theory = 0.0;  ///< sufficient weight from the epsilon rule
  double epsilon = 0.0;
  double measured_ratio = 0.0;  ///< max ratio from the second ratio on
  double slack = 0.1;
  bool contracts = false;       ///< measured <= 1/2 + slack
  bool weight_below_theory = false;
  std::size_t ratios_used = 0;
};

ContractionVerdict contraction_diagnostics(const PicardReport& report, const AdvancedDriver& driver, double delta,
                                           double slack = 0.1);

struct UniquenessResult {
  double distance = 0.0;
  PicardReport first, second;
};

/// Solves from two initializations and measures the weighted distance of the
/// converged solutions.
UniquenessResult uniqueness_probe(AdvancedDriver& driver, const TimeGrid& grid, PicardConfig cfg,
                                  std::function<double(std::size_t, std::size_t, std::size_t)> init_a,
                                  std::function<double(std::size_t, std::size_t, std::size_t)> init_b,
                                  const Ensemble* ensemble = nullptr, const ProblemSpec* spec = nullptr);

}  // namespace delaymp
