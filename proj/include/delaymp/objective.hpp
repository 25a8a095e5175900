#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "delaymp/forward.hpp"
#include "delaymp/model.hpp"
#include "delaymp/stats.hpp"

namespace delaymp {

struct ObjectiveEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_paths = 0;
  double truncation_T = 0.0;
  double tail_bound = 0.0;  ///< E|f(T)| / discount, reported and never added
  std::size_t exited_paths = 0;
};

struct PathObjective {
  double J = 0.0;
  double f_end = 0.0;  ///< f at the horizon, zero for exited paths
  bool exited = false;
};

/// Trapezoid integral of f along one path, truncated at domain exit.
/// u_out (n+1 values) receives the realized control when given.
PathObjective path_objective(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                             const PathNoise& noise, std::size_t path, const double* ref_u = nullptr,
                             double* u_out = nullptr);

/// Per-path objectives of several controls under common noise. controls[0]
/// is the reference run whose realized control feeds the others.
std::vector<std::vector<double>> objectives_crn(const ProblemSpec& spec, const TimeGrid& grid,
                                                std::span<const ControlSpec> controls, std::size_t n_paths,
                                                std::uint64_t seed, std::size_t threads = 1,
                                                std::vector<std::vector<double>>* f_end = nullptr);

ObjectiveEstimate estimate_J(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                             std::size_t n_paths, std::uint64_t seed, std::size_t threads = 1,
                             std::vector<double>* per_path = nullptr);

/// Builds the estimate from per-path values and horizon values of f.
ObjectiveEstimate make_objective_estimate(const ProblemSpec& spec, const TimeGrid& grid,
                                          const std::vector<double>& per_path, const std::vector<double>& f_end);

/// Per-path J_a - J_b under identical noise.
Estimate compare_controls(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& ua,
                          const ControlSpec& ub, std::size_t n_paths, std::uint64_t seed, std::size_t threads = 1);

}  // namespace delaymp
