#include "delaymp/objective.hpp"

#include <cmath>

#include "delaymp/errors.hpp"
#include "delaymp/kernels.hpp"
#include "delaymp/parallel.hpp"

namespace delaymp {

PathObjective path_objective(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                             const PathNoise& noise, std::size_t path, const double* ref_u, double* u_out) {
  PathObjective out;
  PathStepper st(spec, grid, control, noise, path, ref_u);
  const double half = 0.5 * grid.dt;
  double f_prev = 0.0;
  bool have_prev = false;
  double acc = 0.0;
  for (;;) {
    const std::size_t k = st.k();
    if (st.exited()) {
      out.exited = true;
      if (u_out) u_out[k] = 0.0;
    } else {
      const StatePoint s = st.state();
      if (u_out) u_out[k] = s.u;
      const double f = spec.coeffs.f(s);
      if (have_prev) acc += half * (f_prev + f);
      f_prev = f;
      have_prev = true;
      if (k == grid.n) out.f_end = f;
    }
    if (!st.step()) break;
  }
  out.J = acc;
  return out;
}

std::vector<std::vector<double>> objectives_crn(const ProblemSpec& spec, const TimeGrid& grid,
                                                std::span<const ControlSpec> controls, std::size_t n_paths,
                                                std::uint64_t seed, std::size_t threads,
                                                std::vector<std::vector<double>>* f_end) {
  const std::size_t nc = controls.size();
  std::vector<std::vector<double>> J(nc, std::vector<double>(n_paths, 0.0));
  if (f_end) f_end->assign(nc, std::vector<double>(n_paths, 0.0));
  if (nc > 0 && controls[0].needs_reference())
    fail(ErrorCode::ConfigError, "the reference control cannot depend on a reference run");
  parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> ref(grid.n + 1);
    for (std::size_t i = begin; i < end; ++i) {
      const PathNoise nz = generate_noise(spec, grid, seed, i);
      for (std::size_t c = 0; c < nc; ++c) {
        const PathObjective po =
            path_objective(spec, grid, controls[c], nz, i, c == 0 ? nullptr : ref.data(), c == 0 ? ref.data() : nullptr);
        J[c][i] = po.J;
        if (f_end) (*f_end)[c][i] = po.f_end;
      }
    }
  });
  for (const auto& row : J)
    for (double v : row)
      if (!std::isfinite(v)) fail(ErrorCode::NonFiniteObjective, "objective is not finite");
  return J;
}

ObjectiveEstimate make_objective_estimate(const ProblemSpec& spec, const TimeGrid& grid,
                                          const std::vector<double>& per_path, const std::vector<double>& f_end) {
  ObjectiveEstimate est;
  const Estimate e = summarize(per_path);
  if (!std::isfinite(e.mean) || !std::isfinite(e.stderr_))
    fail(ErrorCode::NonFiniteObjective, "objective estimate is not finite");
  est.mean = e.mean;
  est.stderr_ = e.stderr_;
  est.n_paths = per_path.size();
  est.truncation_T = grid.horizon;
  std::vector<double> af(f_end.size());
  for (std::size_t i = 0; i < f_end.size(); ++i) af[i] = std::fabs(f_end[i]);
  const double mean_abs_f = af.empty() ? 0.0 : kernels::sum(af.data(), af.size()) / static_cast<double>(af.size());
  est.tail_bound = mean_abs_f / spec.discount;
  return est;
}

ObjectiveEstimate estimate_J(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& control,
                             std::size_t n_paths, std::uint64_t seed, std::size_t threads,
                             std::vector<double>* per_path) {
  std::vector<double> J(n_paths), fe(n_paths);
  std::vector<char> ex(n_paths, 0);
  parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PathNoise nz = generate_noise(spec, grid, seed, i);
      const PathObjective po = path_objective(spec, grid, control, nz, i);
      J[i] = po.J;
      fe[i] = po.f_end;
      ex[i] = po.exited ? 1 : 0;
    }
  });
  ObjectiveEstimate est = make_objective_estimate(spec, grid, J, fe);
  for (char c : ex) est.exited_paths += static_cast<std::size_t>(c);
  if (per_path) *per_path = std::move(J);
  return est;
}

Estimate compare_controls(const ProblemSpec& spec, const TimeGrid& grid, const ControlSpec& ua,
                          const ControlSpec& ub, std::size_t n_paths, std::uint64_t seed, std::size_t threads) {
  std::vector<double> d(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> ref(grid.n + 1);
    for (std::size_t i = begin; i < end; ++i) {
      const PathNoise nz = generate_noise(spec, grid, seed, i);
      const double ja = path_objective(spec, grid, ua, nz, i, nullptr, ref.data()).J;
      const double jb = path_objective(spec, grid, ub, nz, i, ref.data()).J;
      d[i] = ja - jb;
    }
  });
  const Estimate e = summarize(d);
  if (!std::isfinite(e.mean)) fail(ErrorCode::NonFiniteObjective, "paired difference is not finite");
  return e;
}

}  // namespace delaymp
