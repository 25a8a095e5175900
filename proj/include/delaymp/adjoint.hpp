#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "delaymp/absde.hpp"
#include "delaymp/forward.hpp"
#include "delaymp/hamiltonian.hpp"
#include "delaymp/model.hpp"

namespace delaymp {

/// Mark-feature coefficients to values at the mark quadrature nodes.
class MarkNodeMap {
 public:
  explicit MarkNodeMap(const ProblemSpec& spec);
  std::size_t nodes() const { return nodes_; }
  std::size_t features() const { return features_; }
  void eval(std::span<const double> coef, double* out) const;

 private:
  std::size_t nodes_ = 0, features_ = 0;
  std::vector<double> phi_;  ///< nodes x features
};

/// Driver -dH/dx(t) - dH/dy(t+delta) - int_t^{t+delta} dH/da(s) e^{-rho(s-t)} ds
/// of the first formulation, along the paths of an ensemble. Terms beyond
/// the horizon are dropped; the integral is a trapezoid clipped at T.
class FirstAdjointDriver : public AdvancedDriver {
 public:
  FirstAdjointDriver(const ProblemSpec& spec, const Ensemble& ensemble);

  std::size_t dimension() const override { return 1; }
  double lipschitz() const override { return lipschitz_; }
  void begin_sweep(std::size_t paths, const TimeGrid& grid) override;
  void evaluate(const DriverContext& ctx, double* out) override;

 private:
  HamArgs1 args_at(const DriverContext& ctx, std::size_t j, double* rbuf) const;

  const ProblemSpec& spec_;
  MarkNodeMap nodes_;
  double lipschitz_ = 0.0;
  std::size_t m_ = 0, n_ = 0, slots_ = 0;
  double decay_ = 1.0, decay_window_ = 0.0, dt_ = 0.0;
  std::vector<double> ring_;  ///< dH/da at advanced steps, per path
  std::vector<double> W_;     ///< running discounted sum, per path
};

/// Drivers -dH/dx, -dH/dy, -dH/da of the three-component formulation.
/// Component 0 has diffusion and jumps, component 1 diffusion only,
/// component 2 neither.
class SecondAdjointDriver : public AdvancedDriver {
 public:
  SecondAdjointDriver(const ProblemSpec& spec, const Ensemble& ensemble);

  std::size_t dimension() const override { return 3; }
  double lipschitz() const override { return lipschitz_; }
  ComponentTraits traits(std::size_t comp) const override;
  void evaluate(const DriverContext& ctx, double* out) override;

 private:
  const ProblemSpec& spec_;
  MarkNodeMap nodes_;
  double lipschitz_ = 0.0;
};

PicardResult solve_first_adjoint(const ProblemSpec& spec, const Ensemble& ensemble, const PicardConfig& cfg);
PicardResult solve_second_adjoint(const ProblemSpec& spec, const Ensemble& ensemble, const PicardConfig& cfg);

/// Adjoint values along the paths of an ensemble.
class AdjointProcess {
 public:
  virtual ~AdjointProcess() = default;
  virtual std::size_t dimension() const = 0;
  virtual double p(std::size_t comp, std::size_t k, std::size_t path, const StatePoint& s) const = 0;
  virtual double q(std::size_t comp, std::size_t k, std::size_t path, const StatePoint& s) const = 0;
  /// r at the mark quadrature nodes (nothing written without jumps).
  virtual void r_nodes(std::size_t comp, std::size_t k, std::size_t path, const StatePoint& s, double* out) const = 0;
};

/// A solved triple; deterministic solutions are shared by every path.
class SolvedAdjoint : public AdjointProcess {
 public:
  SolvedAdjoint(const ProblemSpec& spec, AdjointTriple triple);
  std::size_t dimension() const override { return triple_.dim; }
  double p(std::size_t comp, std::size_t k, std::size_t path, const StatePoint& s) const override;
  double q(std::size_t comp, std::size_t k, std::size_t path, const StatePoint& s) const override;
  void r_nodes(std::size_t comp, std::size_t k, std::size_t path, const StatePoint& s, double* out) const override;
  const AdjointTriple& triple() const { return triple_; }

 private:
  std::size_t col(std::size_t path) const { return triple_.paths == 1 ? 0 : path; }
  MarkNodeMap nodes_;
  AdjointTriple triple_;
};

/// Path average of component comp of p for k = 0..last.
std::vector<double> mean_series(const AdjointTriple& triple, std::size_t comp, std::size_t last);
std::vector<double> mean_q_series(const AdjointTriple& triple, std::size_t comp, std::size_t last);

struct Flatness {
  bool flat = false;
  double max_deviation = 0.0;
};

/// max_k |p3(t_k)| against tol.
Flatness p3_flatness(std::span<const double> p3, double tol);

}  // namespace delaymp
