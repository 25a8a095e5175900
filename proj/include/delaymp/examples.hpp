#pragma once

#include <cmath>

#include "delaymp/adjoint.hpp"
#include "delaymp/forward.hpp"
#include "delaymp/model.hpp"

namespace delaymp {

/// Consumption problem without delay: b = (mu - u) x, sigma = sigma0 x,
/// f = e^{-rho t} (u x)^gamma / gamma, u >= 0.
struct Example34Params {
  double gamma = 0.5;
  double mu = 0.05;
  double rho = 0.1;
  double sigma0 = 0.2;
  double x0 = 1.0;
  /// Rate used in place of rho inside the p0 integral; NaN keeps rho.
  double p0_lambda = NAN;
  /// Delay of the carrier grid; the problem itself ignores it.
  double delta = 1.0;
  void validate() const;
};

double ex34_adjoint(const Example34Params& P, double t, double p0);
/// Feedback u = p0^{1/(gamma-1)} e^{(rho - mu) t / (gamma - 1)} / x.
double ex34_control(const Example34Params& P, double t, double x, double p0);
/// Consumption rate u x of the closed form.
double ex34_consumption(const Example34Params& P, double t, double p0);
/// [x0 / int_0^inf exp(-(mu + (rho - mu)/(1 - gamma)) s) ds]^{gamma - 1}.
double ex34_p0_star(const Example34Params& P);
/// Same value with the integral done by quadrature on [0, T].
double ex34_p0_quadrature(const Example34Params& P, double T);

ProblemSpec ex34_problem(const Example34Params& P);
/// The closed-form feedback rule.
ControlSpec ex34_closed_form_control(const Example34Params& P, double p0);
/// The closed form evaluated along the exact sigma = 0 trajectory, as a
/// function of t only.
ControlSpec ex34_flow_control(const Example34Params& P, double p0);
/// Exact state of the sigma = 0 flow under the closed form.
double ex34_flow_state(const Example34Params& P, double t, double p0);
/// int_0^T e^{-rho t} c(t)^gamma / gamma dt along the sigma = 0 flow.
double ex34_J_closed(const Example34Params& P, double p0, double T);
/// The closed-form adjoint as an adjoint process (q = r = 0, p2 = p3 = 0).
class Ex34Adjoint : public AdjointProcess {
 public:
  Ex34Adjoint(const Example34Params& P, double p0, std::size_t dim = 1) : P_(P), p0_(p0), dim_(dim) {}
  std::size_t dimension() const override { return dim_; }
  double p(std::size_t comp, std::size_t k, std::size_t, const StatePoint& s) const override;
  double q(std::size_t, std::size_t, std::size_t, const StatePoint&) const override { return 0.0; }
  void r_nodes(std::size_t, std::size_t, std::size_t, const StatePoint&, double*) const override {}

 private:
  Example34Params P_;
  double p0_;
  std::size_t dim_;
};

/// Consumption problem with delay: b = mu x + alpha y + beta a - u (x + y e^{rho delta} beta),
/// f = e^{-rho t} (u (x + y e^{rho delta} beta))^gamma / gamma.
struct Example35Params {
  double gamma = 0.5;
  double mu = 0.05;
  double alpha = 0.0;
  double beta = 0.05;
  double rho = 0.1;
  double delta = 1.0;
  double lambda_avg = 0.1;
  double sigma0 = 0.0;
  double x0 = 1.0;  ///< constant initial segment
  void validate() const;
  double kappa() const { return std::exp(rho * delta) * beta; }
};

/// alpha - e^{rho delta} beta (mu + lambda + e^{rho delta} beta)
double ex35_constraint_residual(const Example35Params& P);
/// The alpha that satisfies the constraint.
double ex35_alpha_for_constraint(const Example35Params& P);
double ex35_adjoint(const Example35Params& P, double t, double p0);
double ex35_control(const Example35Params& P, double t, double x, double y, double p0);
ProblemSpec ex35_problem(const Example35Params& P);
ControlSpec ex35_closed_form_control(const Example35Params& P, double p0);

struct KSearch {
  double horizon = 100.0;
  double dt = 1e-3;
  double tol = 1e-6;
};

/// Smallest p0 whose sigma = 0 flow keeps x + y e^{rho delta} beta > 0 up to
/// the search horizon, by bisection.
double ex35_K(const Example35Params& P, const KSearch& cfg);

}  // namespace delaymp
