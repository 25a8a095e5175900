#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "delaymp/adjoint.hpp"
#include "delaymp/forward.hpp"
#include "delaymp/hamiltonian.hpp"
#include "delaymp/model.hpp"
#include "delaymp/stats.hpp"

namespace delaymp {

/// Information available to the controller: everything (full) or the
/// state a fixed lag earlier (lagged).
struct InfoSpec {
  enum Mode { Full, Lagged } mode = Full;
  double lag = 0.0;
  std::size_t degree = 2;
};

enum class Verdict { Pass, Fail, Inconclusive };
const char* to_string(Verdict v);

struct McConfig {
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t probes = 20;
  InfoSpec info;
  std::size_t hessian_points = 200;
  double concavity_tol = 1e-8;
  double gap_k = 2.0;
  double residual_k = 3.0;
  /// Smallest horizon of the transversality ladder; <= 0 means horizon / 4.
  double ladder_T0 = 0.0;
  std::vector<double> bump_steps = {1e-2, 1e-3};
  std::vector<std::array<double, 2>> bump_windows = {{1.0, 1.0}, {10.0, 2.0}};  ///< (s, h)
  std::vector<double> bump_alphas = {1.0, -1.0};
};

struct LadderPoint {
  double T = 0.0;
  Estimate value;
};

struct TransversalityResult {
  std::string control;
  std::size_t component = 0;  ///< 0: p1 against X, 1: p2 against Y
  std::vector<LadderPoint> ladder;
  bool decreasing = false;  ///< |estimate| shrinks along the ladder
  bool pass = false;        ///< the last rung is not significantly negative
};

struct ConcavityResult {
  std::size_t points = 0;
  std::size_t skipped = 0;  ///< stencil left the coefficient domain
  double max_eigenvalue = 0.0;
  bool pass = false;
};

struct IntegrabilityResult {
  double value = 0.0;
  bool finite = false;
};

struct GapProbe {
  double t = 0.0;
  Estimate gap;
  Verdict verdict = Verdict::Pass;
};

struct SufficiencyReport {
  std::size_t formulation = 1;
  std::vector<TransversalityResult> transversality;
  ConcavityResult concavity;
  IntegrabilityResult integrability;
  std::vector<GapProbe> gaps;
  bool has_flatness = false;
  Flatness flatness;
  Verdict transversality_verdict = Verdict::Pass, concavity_verdict = Verdict::Pass,
          integrability_verdict = Verdict::Pass, gap_verdict = Verdict::Pass, flatness_verdict = Verdict::Pass;
  Verdict verdict = Verdict::Pass;
};

struct ResidualProbe {
  double t = 0.0;
  std::size_t k = 0;
  Estimate residual;
  bool significant = false;
  bool boundary = false;
};

struct BumpDerivative {
  double s = 0.0, h = 0.0, alpha = 0.0, step = 0.0;
  Estimate derivative;
  bool within = false;
};

struct NecessityReport {
  std::vector<ResidualProbe> probes;
  std::vector<BumpDerivative> bumps;
  double boundary_fraction = 0.0;
  bool boundary_control = false;  ///< KKT reading used
  double max_abs_z = 0.0;          ///< max |residual| / stderr (stderr floored at round-off)
  double significant_fraction = 0.0;
  bool sign_consistent = false;
  int dominant_sign = 0;
  bool residual_pass = false;
  bool bumps_pass = false;
  Verdict verdict = Verdict::Pass;
};

/// Probe steps: probes equally spaced interior times.
std::vector<std::size_t> probe_steps(const TimeGrid& grid, std::size_t probes);

/// Conditional expectation onto the information set at step k, evaluated
/// on each path of the ensemble (identity for full information).
std::vector<double> project_info(const Ensemble& ens, std::size_t k, const std::vector<double>& values,
                                 const InfoSpec& info);

SufficiencyReport check_sufficient_first(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& candidate,
                                         std::span<const ControlSpec> comparisons,
                                         std::span<const std::string> comparison_names, const Ensemble& ensemble,
                                         const AdjointProcess& adjoint, const McConfig& cfg);

SufficiencyReport check_sufficient_second(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& candidate,
                                          std::span<const ControlSpec> comparisons,
                                          std::span<const std::string> comparison_names, const Ensemble& ensemble,
                                          const AdjointProcess& adjoint, const McConfig& cfg,
                                          double flatness_tol = 1e-6);

NecessityReport necessary_residual(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& candidate,
                                   const Ensemble& ensemble, const AdjointProcess& adjoint, const McConfig& cfg,
                                   bool run_bumps = true);

/// Symmetric bump derivative (J(u + s beta) - J(u - s beta)) / 2s with u the
/// candidate's realized control held fixed per path.
Estimate bump_derivative(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& candidate, double s0,
                         double h, double alpha, double step, std::size_t paths, std::uint64_t seed,
                         std::size_t threads);

struct VariationalRecord {
  std::vector<double> steps;
  std::vector<Estimate> fd;  ///< one-sided difference quotients per step
  Estimate xi;               ///< chain-rule integral
  std::vector<double> gap;   ///< fd - xi per step
  double order = 0.0;        ///< log10 of the error ratio between the first two steps
  bool agree = false;        ///< |gap| of the smallest step within 2 xi stderr
};

/// beta holds n+1 values on the grid.
VariationalRecord variational_consistency(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& candidate,
                                          std::span<const double> beta, std::size_t paths, std::uint64_t seed,
                                          std::size_t threads, std::vector<double> steps = {1e-2, 1e-3});

}  // namespace delaymp
