#include "delaymp/examples.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "delaymp/errors.hpp"

namespace delaymp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Growth rate of the closed-form consumption: (rho - mu) / (gamma - 1).
double ex34_kappa(const Example34Params& P) { return (P.rho - P.mu) / (P.gamma - 1.0); }

double ex34_rate(const Example34Params& P) {
  const double lam = std::isfinite(P.p0_lambda) ? P.p0_lambda : P.rho;
  return P.mu + (lam - P.mu) / (1.0 - P.gamma);
}

}  // namespace

void Example34Params::validate() const {
  // gamma > 1 is admitted so that the loss of concavity can be exercised.
  if (!(gamma > 0.0) || gamma == 1.0) fail(ErrorCode::ConfigError, "gamma must be positive and different from 1");
  if (!(rho > 0.0)) fail(ErrorCode::ConfigError, "rho must be positive");
  if (!(x0 > 0.0)) fail(ErrorCode::ConfigError, "X0 must be positive");
}

double ex34_adjoint(const Example34Params& P, double t, double p0) { return p0 * std::exp(-P.mu * t); }

double ex34_consumption(const Example34Params& P, double t, double p0) {
  if (!(p0 > 0.0)) fail(ErrorCode::DomainError, "p0 must be positive");
  const double e = 1.0 / (P.gamma - 1.0);
  return std::pow(p0, e) * std::exp(e * (P.rho * t - P.mu * t));
}

double ex34_control(const Example34Params& P, double t, double x, double p0) {
  if (!(x > 0.0)) fail(ErrorCode::DomainError, "the closed-form control needs X > 0");
  return ex34_consumption(P, t, p0) / x;
}

double ex34_p0_star(const Example34Params& P) {
  const double D = ex34_rate(P);
  if (!(D > 0.0)) fail(ErrorCode::DivergentIntegral, "the p0 integral diverges (mu + (rho - mu)/(1 - gamma) <= 0)");
  return std::pow(P.x0 * D, P.gamma - 1.0);
}

double ex34_p0_quadrature(const Example34Params& P, double T) {
  const double D = ex34_rate(P);
  if (!(D > 0.0)) fail(ErrorCode::DivergentIntegral, "the p0 integral diverges");
  const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [D](double s) { return std::exp(-D * s); }, 0.0, T, 15, 1e-14);
  return std::pow(P.x0 / I, P.gamma - 1.0);
}

ProblemSpec ex34_problem(const Example34Params& P) {
  P.validate();
  ProblemSpec s;
  s.selector = "example_3_4";
  s.delta = P.delta;
  s.rho = P.rho;
  s.lambda_avg = P.rho;
  s.discount = P.rho;
  const double mu = P.mu, g = P.gamma, rho = P.rho, s0 = P.sigma0;
  s.coeffs.b = ScalarCoefficient([mu](const StatePoint& z) { return (mu - z.u) * z.x; },
                                 [mu](const StatePoint& z) { return Grad4{mu - z.u, 0.0, 0.0, -z.x}; });
  if (s0 != 0.0)
    s.coeffs.sigma = ScalarCoefficient([s0](const StatePoint& z) { return s0 * z.x; },
                                       [s0](const StatePoint&) { return Grad4{s0, 0.0, 0.0, 0.0}; });
  // The square root is exact for the default gamma and much cheaper than pow.
  const bool half = g == 0.5;
  s.coeffs.f = ScalarCoefficient(
      [g, rho, half](const StatePoint& z) {
        const double w = z.u * z.x;
        return std::exp(-rho * z.t) * (half ? std::sqrt(w) : std::pow(w, g)) / g;
      },
      [g, rho](const StatePoint& z) {
        const double e = std::exp(-rho * z.t);
        return Grad4{e * std::pow(z.u, g) * std::pow(z.x, g - 1.0), 0.0, 0.0,
                     e * std::pow(z.u, g - 1.0) * std::pow(z.x, g)};
      });
  s.u_lo = 0.0;
  s.u_hi = kInf;
  const double x0 = P.x0;
  s.initial_segment = [x0](double) { return x0; };
  s.domain = [](const StatePoint& z) { return z.x > 0.0; };
  return s;
}

ControlSpec ex34_closed_form_control(const Example34Params& P, double p0) {
  const double c0 = ex34_consumption(P, 0.0, p0);
  const double rate = (P.rho - P.mu) / (P.gamma - 1.0);
  return ControlSpec::feedback(
      [c0, rate](double t, double x, double, double) { return x > 0.0 ? c0 * std::exp(rate * t) / x : 0.0; }, 0.0,
      kInf);
}

double ex34_flow_state(const Example34Params& P, double t, double p0) {
  const double c0 = ex34_consumption(P, 0.0, p0);
  const double r = ex34_kappa(P) - P.mu;
  const double I = std::abs(r) < 1e-300 ? t : std::expm1(r * t) / r;
  return std::exp(P.mu * t) * (P.x0 - c0 * I);
}

ControlSpec ex34_flow_control(const Example34Params& P, double p0) {
  return ControlSpec(
      [P, p0](const ControlContext& c) {
        const double X = ex34_flow_state(P, c.t, p0);
        if (!(X > 0.0)) fail(ErrorCode::DomainError, "the sigma = 0 flow is not positive at this time");
        return ex34_consumption(P, c.t, p0) / X;
      },
      0.0, kInf);
}

double ex34_J_closed(const Example34Params& P, double p0, double T) {
  // e^{-rho t} c0^g e^{g kappa t} / g integrated on [0, T].
  const double c0 = ex34_consumption(P, 0.0, p0);
  const double a = P.rho - P.gamma * ex34_kappa(P);
  const double scale = std::pow(c0, P.gamma) / P.gamma;
  if (std::abs(a) < 1e-300) return scale * T;
  return scale * (-std::expm1(-a * T)) / a;
}

double Ex34Adjoint::p(std::size_t comp, std::size_t, std::size_t, const StatePoint& s) const {
  return comp == 0 ? ex34_adjoint(P_, s.t, p0_) : 0.0;
}

void Example35Params::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCode::ConfigError, "gamma must lie strictly inside (0, 1)");
  if (!(rho > 0.0) || !(delta > 0.0)) fail(ErrorCode::ConfigError, "rho and delta must be positive");
  if (!(lambda_avg > 0.0)) fail(ErrorCode::ConfigError, "lambda must be positive");
}

double ex35_constraint_residual(const Example35Params& P) {
  const double k = P.kappa();
  return P.alpha - k * (P.mu + P.lambda_avg + k);
}

double ex35_alpha_for_constraint(const Example35Params& P) {
  const double k = P.kappa();
  return k * (P.mu + P.lambda_avg + k);
}

double ex35_adjoint(const Example35Params& P, double t, double p0) {
  return p0 * std::exp(-(P.mu + P.kappa()) * t);
}

double ex35_control(const Example35Params& P, double t, double x, double y, double p0) {
  const double w = x + y * P.kappa();
  if (!(w > 0.0)) fail(ErrorCode::DomainError, "the closed-form control needs X + Y e^{rho delta} beta > 0");
  if (!(p0 > 0.0)) fail(ErrorCode::DomainError, "p0 must be positive");
  const double e = 1.0 / (P.gamma - 1.0);
  return std::pow(p0, e) * std::exp(e * (P.rho * t - (P.mu * t + P.kappa() * t))) / w;
}

ProblemSpec ex35_problem(const Example35Params& P) {
  P.validate();
  ProblemSpec s;
  s.selector = "example_3_5";
  s.delta = P.delta;
  s.rho = P.rho;
  s.lambda_avg = P.lambda_avg;
  s.discount = P.rho;
  const double mu = P.mu, al = P.alpha, be = P.beta, k = P.kappa(), g = P.gamma, rho = P.rho, s0 = P.sigma0;
  s.coeffs.b = ScalarCoefficient(
      [=](const StatePoint& z) { return mu * z.x + al * z.y + be * z.a - z.u * (z.x + z.y * k); },
      [=](const StatePoint& z) { return Grad4{mu - z.u, al - z.u * k, be, -(z.x + z.y * k)}; });
  if (s0 != 0.0)
    s.coeffs.sigma = ScalarCoefficient([s0](const StatePoint& z) { return s0 * z.x; },
                                       [s0](const StatePoint&) { return Grad4{s0, 0.0, 0.0, 0.0}; });
  s.coeffs.f = ScalarCoefficient(
      [=](const StatePoint& z) { return std::exp(-rho * z.t) * std::pow(z.u * (z.x + z.y * k), g) / g; },
      [=](const StatePoint& z) {
        const double w = z.x + z.y * k;
        const double e = std::exp(-rho * z.t);
        const double fw = e * std::pow(z.u, g) * std::pow(w, g - 1.0);
        return Grad4{fw, fw * k, 0.0, e * std::pow(z.u, g - 1.0) * std::pow(w, g)};
      });
  s.u_lo = 0.0;
  s.u_hi = kInf;
  const double x0 = P.x0;
  s.initial_segment = [x0](double) { return x0; };
  s.domain = [k](const StatePoint& z) { return z.x + z.y * k > 0.0; };
  if (std::abs(ex35_constraint_residual(P)) > 1e-12 * (1.0 + std::abs(P.alpha))) {
    s.alpha_constraint_violated = true;
    s.warnings.push_back("alpha_constraint_violated");
  }
  return s;
}

ControlSpec ex35_closed_form_control(const Example35Params& P, double p0) {
  const double k = P.kappa();
  return ControlSpec::feedback(
      [P, p0, k](double t, double x, double y, double) {
        return x + y * k > 0.0 ? ex35_control(P, t, x, y, p0) : 0.0;
      },
      0.0, kInf);
}

double ex35_K(const Example35Params& Pin, const KSearch& cfg) {
  Example35Params P = Pin;
  P.sigma0 = 0.0;
  const ProblemSpec spec = ex35_problem(P);
  const TimeGrid grid = make_grid(P.delta, cfg.dt, cfg.horizon);
  const PathNoise noise = generate_noise(spec, grid, 0, 0);
  auto positive = [&](double p0) {
    const ControlSpec u = ex35_closed_form_control(P, p0);
    PathStepper st(spec, grid, u, noise, 0);
    while (!st.exited() && st.step()) {
    }
    return !st.exited();
  };
  double hi = 1.0;
  int guard = 0;
  while (!positive(hi)) {
    hi *= 2.0;
    if (++guard > 200) fail(ErrorCode::NoSignChange, "no p0 keeps the composite wealth positive");
  }
  double lo = hi;
  guard = 0;
  do {
    lo *= 0.5;
    if (++guard > 200) fail(ErrorCode::NoSignChange, "every p0 keeps the composite wealth positive");
  } while (positive(lo));
  while (hi - lo > cfg.tol) {
    const double mid = 0.5 * (lo + hi);
    (positive(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace delaymp
