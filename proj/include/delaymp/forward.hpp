#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "delaymp/model.hpp"

namespace delaymp {

/// Brownian increments and jump marks of one path.
struct PathNoise {
  std::vector<double> dB;                  ///< n increments
  std::vector<std::uint32_t> jump_offset;  ///< n+1 offsets into marks
  std::vector<double> marks;

  std::span<const double> jumps(std::size_t k) const {
    return {marks.data() + jump_offset[k], marks.data() + jump_offset[k + 1]};
  }
};

/// Deterministic in (seed, path); all-zero noise for deterministic problems.
PathNoise generate_noise(const ProblemSpec& spec, const TimeGrid& grid, std::uint64_t seed, std::uint64_t path);

/// What a control rule sees at step k.
struct ControlContext {
  std::size_t path = 0;
  std::size_t k = 0;
  double t = 0.0, x = 0.0, y = 0.0, a = 0.0;
  /// Realized control of the reference run on the same path, if any.
  const double* ref_u = nullptr;
};

/// Feedback rule, open-loop table, or a transform of a reference process.
/// Values are clipped to [lo, hi].
class ControlSpec {
 public:
  using Rule = std::function<double(const ControlContext&)>;

  ControlSpec();
  ControlSpec(Rule rule, double lo, double hi);

  static ControlSpec constant(double v, double lo, double hi);
  static ControlSpec feedback(std::function<double(double, double, double, double)> rule, double lo, double hi);
  static ControlSpec open_loop(std::vector<double> table, double lo, double hi);
  /// The realized control of the reference run (CRN perturbation base).
  static ControlSpec reference_process(double lo, double hi);

  ControlSpec scaled(double s) const;
  ControlSpec plus(std::function<double(std::size_t k, double t)> beta) const;

  double operator()(const ControlContext& c) const;
  double raw(const ControlContext& c) const { return rule_(c); }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool needs_reference() const { return needs_ref_; }
  std::size_t clip_events() const { return clips_->load(); }

 private:
  Rule rule_;
  double lo_, hi_;
  bool needs_ref_ = false;
  std::shared_ptr<std::atomic<std::size_t>> clips_;
};

/// base + alpha * 1_[s, s+h](t), clipped to the base bounds.
ControlSpec bump_control(const ControlSpec& base, const TimeGrid& grid, double alpha, double s, double h);
bool in_window(const TimeGrid& grid, std::size_t k, double s, double h);

struct PathRecord {
  std::vector<double> t, X, Y, A, u;  ///< n+1 grid values
  std::vector<double> segment0;       ///< X on [-delta, 0], m+1 values
  PathNoise noise;
  bool exited = false;
  std::size_t exit_step = 0;  ///< first step outside the domain (valid if exited)

  std::size_t steps() const { return X.empty() ? 0 : X.size() - 1; }
  /// Last step whose state is inside the domain.
  std::size_t last_valid() const { return exited ? exit_step - 1 : steps(); }
  StatePoint state(std::size_t k) const { return {t[k], X[k], Y[k], A[k], u[k]}; }
};

/// One-interval weights of the exact exponential integral of a linear
/// interpolant: int_0^dt e^{-rho(dt-s)} X(s) ds = w0 X(0) + w1 X(dt).
struct AverageWeights {
  double decay_step;   ///< e^{-rho dt}
  double decay_delay;  ///< e^{-rho delta}
  double w0, w1;
};
AverageWeights average_weights(double rho, double dt, std::size_t m);

/// One step of A: head interval [x_prev, x_new] added, tail [tail0, tail1] removed.
double update_moving_average(double A, double x_prev, double x_new, double tail0, double tail1,
                             const AverageWeights& w);
/// A at the start of a segment of m+1 values.
double moving_average_of_segment(std::span<const double> segment, const AverageWeights& w);

/// Advances one path step by step; the observer sees every state.
class PathStepper {
 public:
  PathStepper(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
              const PathNoise& noise, std::size_t path, const double* ref_u = nullptr);

  std::size_t k() const { return k_; }
  bool exited() const { return exited_; }
  StatePoint state() const { return {grid_.t(k_), x_, y_, a_, u_}; }
  /// X(t_k - delta + j dt), j = 0..m
  double history(std::size_t j) const { return ring_[(head_ + 1 + j) % ring_.size()]; }
  /// Moves to k+1. Returns false once the horizon is reached.
  bool step();

 private:
  void eval_control();

  const ProblemSpec& spec_;
  const TimeGrid& grid_;
  const ControlSpec& control_;
  const PathNoise& noise_;
  std::size_t path_;
  const double* ref_u_;
  AverageWeights w_;
  std::vector<double> ring_;  ///< m+1 values, head_ is the newest
  std::size_t head_ = 0;
  std::size_t k_ = 0;
  double x_ = 0.0, y_ = 0.0, a_ = 0.0, u_ = 0.0;
  bool exited_ = false;
};

PathRecord simulate_path(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                         const PathNoise& noise, std::size_t path = 0, const double* ref_u = nullptr);

struct Ensemble {
  TimeGrid grid;
  std::uint64_t seed = 0;
  std::vector<PathRecord> paths;
};

Ensemble simulate_ensemble(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                           std::size_t n_paths, std::uint64_t seed, std::size_t threads = 1);

/// Variational process for the perturbation beta along a base path.
struct VariationalPath {
  std::vector<double> xi, xi_y, xi_a;  ///< n+1 values each
};

/// beta[k] is the perturbation direction at step k (n+1 values).
VariationalPath simulate_variational(const ProblemSpec& spec, const TimeGrid& grid, const PathRecord& base,
                                     std::span<const double> beta);

}  // namespace delaymp
