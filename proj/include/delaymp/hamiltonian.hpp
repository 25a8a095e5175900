#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "delaymp/forward.hpp"
#include "delaymp/model.hpp"
#include "delaymp/stats.hpp"

namespace delaymp {

/// r is given by its values at the nodes of the mark quadrature.
struct HamArgs1 {
  double t = 0.0, x = 0.0, y = 0.0, a = 0.0, u = 0.0;
  double p = 0.0;
  double q = 0.0;
  std::span<const double> r;
};

struct HamArgs2 {
  double t = 0.0, x = 0.0, y = 0.0, a = 0.0, u = 0.0;
  std::array<double, 3> p{};
  std::array<double, 2> q{};
  std::span<const double> r;
};

inline StatePoint state_of(const HamArgs1& h) { return {h.t, h.x, h.y, h.a, h.u}; }
inline StatePoint state_of(const HamArgs2& h) { return {h.t, h.x, h.y, h.a, h.u}; }

/// f + b p + sigma q + intensity E[theta(Z) r(Z)]
double eval_H1(const ProblemSpec& spec, const HamArgs1& args);
/// f + b p1 + (x - lambda y - e^{-lambda delta} a) p2 + sigma q1 + intensity E[theta r]
double eval_H2(const ProblemSpec& spec, const HamArgs2& args);

Grad4 grad_H1(const ProblemSpec& spec, const HamArgs1& args);
Grad4 grad_H2(const ProblemSpec& spec, const HamArgs2& args);

enum class Formulation { first = 1, second = 2 };

/// Single partial of either Hamiltonian; HamArgs2 is used for both (p[0],
/// q[0] play p and q in the first formulation).
double grad_H(const ProblemSpec& spec, const HamArgs2& args, Var which, Formulation form);

/// Hessian in (x, y, a, u) by central differences of the analytic gradient,
/// row-major and symmetrized.
std::array<double, 16> hessian_H1(const ProblemSpec& spec, const HamArgs1& args);
double max_eigenvalue(const std::array<double, 16>& sym);

struct ArgmaxResult {
  double u = 0.0;
  double value = 0.0;
};

/// Golden-section search of v -> h(v) on [lo, hi] (infinite bounds are
/// bracketed around start), then up to 3 Newton steps when h'' < 0.
ArgmaxResult argmax_scalar(const std::function<double(double)>& h, const std::function<double(double)>& dh,
                           double lo, double hi, double start);
ArgmaxResult argmax_u_H1(const ProblemSpec& spec, const HamArgs1& args);

/// Test function F(t, x, a) of the delay Ito formula with its partials.
struct ItoTestFunction {
  std::function<double(double, double, double)> F, F_t, F_x, F_xx, F_a;
};

/// Coefficient of dF/da: the true derivative of A or the printed variant.
enum class ADynamics { True, Printed };

double a_drift(const ProblemSpec& spec, double x, double y, double a, ADynamics form);

/// E[F(T, X_T, A_T) - F(0, X_0, A_0) - int (LF + jump compensation + a-drift F_a) dt]
/// with left-point sums.
Estimate ito_delay_residual(const ProblemSpec& spec, const TimeGrid& grid, const ItoTestFunction& F,
                            const ControlSpec& control, std::size_t n_paths, std::uint64_t seed,
                            std::size_t threads = 1, ADynamics form = ADynamics::True);

}  // namespace delaymp
