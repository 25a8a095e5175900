#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace delaymp {

/// Arguments of every coefficient callback.
struct StatePoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;  ///< X(t - delta)
  double a = 0.0;  ///< moving average A(t)
  double u = 0.0;
};

enum class Var : int { x = 0, y = 1, a = 2, u = 3 };

/// Partials ordered (x, y, a, u).
using Grad4 = std::array<double, 4>;

/// Central-difference step used whenever an analytic partial is missing.
inline double fd_step(double v) {
  const double s = 1e-6 * (v < 0 ? -v : v);
  return s > 1e-6 ? s : 1e-6;
}

double component(const StatePoint& s, Var v);
StatePoint shifted(const StatePoint& s, Var v, double h);

/// Coefficient c(t, x, y, a, u) with optional analytic partials.
class ScalarCoefficient {
 public:
  using Fn = std::function<double(const StatePoint&)>;
  using GradFn = std::function<Grad4(const StatePoint&)>;

  ScalarCoefficient() = default;  // identically zero
  explicit ScalarCoefficient(Fn value, GradFn grad = {});

  double operator()(const StatePoint& s) const { return value_ ? value_(s) : 0.0; }
  Grad4 grad(const StatePoint& s) const;
  Grad4 fd_grad(const StatePoint& s) const;
  double partial(const StatePoint& s, Var v) const { return grad(s)[static_cast<int>(v)]; }

  bool is_zero() const { return !value_; }
  bool has_analytic_grad() const { return static_cast<bool>(grad_); }

 private:
  Fn value_;
  GradFn grad_;
};

/// Jump coefficient theta(t, x, y, a, u, z).
class MarkCoefficient {
 public:
  using Fn = std::function<double(const StatePoint&, double)>;
  using GradFn = std::function<Grad4(const StatePoint&, double)>;

  MarkCoefficient() = default;
  explicit MarkCoefficient(Fn value, GradFn grad = {});

  double operator()(const StatePoint& s, double z) const { return value_ ? value_(s, z) : 0.0; }
  Grad4 grad(const StatePoint& s, double z) const;
  Grad4 fd_grad(const StatePoint& s, double z) const;

  bool is_zero() const { return !value_; }
  bool has_analytic_grad() const { return static_cast<bool>(grad_); }

 private:
  Fn value_;
  GradFn grad_;
};

struct Coefficients {
  ScalarCoefficient b;
  ScalarCoefficient sigma;
  MarkCoefficient theta;
  ScalarCoefficient f;
};

/// Probability-weighted nodes; weights sum to one.
struct MarkQuadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Mark law of the compound Poisson driver, either discrete or uniform.
class MarkDistribution {
 public:
  MarkDistribution() = default;
  static MarkDistribution discrete(std::vector<double> values, std::vector<double> probs);
  static MarkDistribution uniform(double lo, double hi);

  bool is_discrete() const { return discrete_; }
  double sample(double u01) const;
  double mean() const { return mean_; }
  double second_moment() const { return second_; }
  const MarkQuadrature& quadrature() const { return quad_; }

  /// Features spanning r(z): indicators of the support (discrete) or {1, z}.
  std::size_t feature_count() const;
  void features(double z, double* out) const;
  /// E[phi_i(Z) phi_j(Z)], row-major feature_count^2.
  const std::vector<double>& feature_gram() const { return feature_gram_; }
  const std::vector<double>& feature_means() const { return feature_means_; }

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  void finish();

  bool discrete_ = true;
  std::vector<double> values_, probs_, cdf_;
  double lo_ = 0.0, hi_ = 0.0;
  double mean_ = 0.0, second_ = 0.0;
  MarkQuadrature quad_;
  std::vector<double> feature_gram_, feature_means_;
};

struct JumpModel {
  double intensity = 0.0;
  MarkDistribution marks;
  bool active() const { return intensity > 0.0; }
};

struct TimeGrid {
  double delta = 1.0;
  double dt = 0.1;
  double horizon = 1.0;
  std::size_t m = 10;  ///< steps per delay
  std::size_t n = 10;  ///< steps to the horizon
  double t(std::size_t k) const { return static_cast<double>(k) * dt; }
};

TimeGrid make_grid(double delta, double dt, double horizon);

struct ProblemSpec {
  double delta = 1.0;
  double rho = 0.1;
  double lambda_avg = 0.1;
  double discount = 0.1;
  Coefficients coeffs;
  double u_lo = -std::numeric_limits<double>::infinity();
  double u_hi = std::numeric_limits<double>::infinity();
  std::function<double(double)> initial_segment;
  std::optional<JumpModel> jump;
  /// States outside the domain end the path (objective truncated there).
  std::function<bool(const StatePoint&)> domain;
  std::string selector = "custom";
  std::vector<std::string> warnings;
  bool alpha_constraint_violated = false;

  bool has_jumps() const { return jump && jump->active() && !coeffs.theta.is_zero(); }
  bool deterministic() const { return coeffs.sigma.is_zero() && !has_jumps(); }
  double clip(double u) const { return u < u_lo ? u_lo : (u > u_hi ? u_hi : u); }
  /// Initial segment sampled at s = -delta + j dt, j = 0..m.
  std::vector<double> segment_values(const TimeGrid& grid) const;
  void validate(const TimeGrid& grid) const;
};

/// intensity * E[g(Z)] under the mark law; zero without jumps.
double nu_integral(const ProblemSpec& spec, const std::function<double(double)>& g);

}  // namespace delaymp
