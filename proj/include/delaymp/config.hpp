#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "delaymp/absde.hpp"
#include "delaymp/adjoint.hpp"
#include "delaymp/examples.hpp"
#include "delaymp/forward.hpp"
#include "delaymp/model.hpp"
#include "delaymp/mp.hpp"

namespace delaymp {

using Json = nlohmann::json;

struct SolverSettings {
  std::size_t max_iter = 60;
  double tol = 1e-12;
  double weight_lambda = 0.0;  ///< <= 0 means automatic
  std::size_t basis_degree = 2;
  Schedule schedule = Schedule::Sweep;
  std::optional<SolveMode> mode;  ///< empty: deterministic iff the problem is
  double pad = 0.0;               ///< extra horizon for adjoint solves
};

/// Optional linear test driver dp = -(c p(t) + c_adv p(t + delta) + g(t)) dt.
struct TestDriverSettings {
  double c_now = 0.0;
  double c_adv = 0.0;
  bool exp_forcing = false;  ///< g(t) = e^{-t}
};

struct RunConfig {
  Json doc;
  std::string selector;
  ProblemSpec spec;
  TimeGrid grid;
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  SolverSettings solver;
  McConfig mc;
  std::optional<TestDriverSettings> driver;
  std::optional<Example34Params> ex34;
  std::optional<Example35Params> ex35;
  /// Initial adjoint value of the closed form (examples only).
  double p0 = NAN;

  PicardConfig picard() const;
};

/// Reads and parses a config file; IoError names the path.
Json load_config(const std::string& path, std::string* bytes = nullptr);

/// Interprets a command-line value: JSON literal when it parses, else a string.
Json parse_value(const std::string& text);

/// Sets a parameter by dotted path ("grid.dt") or by a known short name
/// ("gamma"). Unknown names raise ConfigError.
void set_parameter(Json& doc, const std::string& name, const Json& value);

ProblemSpec build_problem(const Json& doc);
RunConfig build_run(const Json& doc);

/// "closed_form", "closed_form*1.2", "flow" (closed form along the exact
/// sigma = 0 trajectory), "constant:v", "zero" or "file:path.csv".
/// A file has a header "t,u" (open-loop values interpolated on the grid) or
/// "t,scale" (multiplier of the closed form).
ControlSpec make_control(const RunConfig& run, const std::string& desc);

/// Closed-form adjoint of the example selectors; nullptr otherwise.
std::unique_ptr<AdjointProcess> closed_form_adjoint(const RunConfig& run, std::size_t dim);

}  // namespace delaymp
