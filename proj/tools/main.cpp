#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "delaymp/absde.hpp"
#include "delaymp/adjoint.hpp"
#include "delaymp/config.hpp"
#include "delaymp/errors.hpp"
#include "delaymp/examples.hpp"
#include "delaymp/forward.hpp"
#include "delaymp/hamiltonian.hpp"
#include "delaymp/io.hpp"
#include "delaymp/mp.hpp"
#include "delaymp/objective.hpp"

using namespace delaymp;

namespace {

constexpr int kOk = 0, kUsage = 1, kFail = 2, kInconclusive = 3;

/// Raised for problems with the inputs; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out_dir = "out";
  std::vector<std::string> sets;
  std::optional<unsigned long long> seed;
  std::optional<std::size_t> paths, threads;
  std::optional<double> dt, horizon;
};

struct Extra {
  std::string system = "first";
  std::string principle = "necessary";
  std::string control;
  std::string adjoint = "auto";
  std::string param;
  std::string values;
  std::optional<double> weight_lambda;
};

void add_common(CLI::App* c, Common& o) {
  c->add_option("--config", o.config, "Config file")->required();
  c->add_option("--out-dir", o.out_dir, "Output directory");
  c->add_option("--set", o.sets, "Override key=value (repeatable)");
  c->add_option("--seed", o.seed, "Random seed");
  c->add_option("--paths", o.paths, "Monte Carlo paths");
  c->add_option("--threads", o.threads, "Worker threads (results do not depend on it)");
  c->add_option("--dt", o.dt, "Time step");
  c->add_option("--horizon", o.horizon, "Truncation horizon T");
}

/// Loaded config with overrides applied (flags win over the file).
struct Loaded {
  Json doc;
  std::string bytes;
  RunConfig run;
};

Json overridden(const Common& o, std::string* bytes) {
  Json doc = load_config(o.config, bytes);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    set_parameter(doc, s.substr(0, eq), parse_value(s.substr(eq + 1)));
  }
  if (o.seed) set_parameter(doc, "mc.seed", *o.seed);
  if (o.paths) set_parameter(doc, "mc.paths", *o.paths);
  if (o.threads) set_parameter(doc, "mc.threads", *o.threads);
  if (o.dt) set_parameter(doc, "grid.dt", *o.dt);
  if (o.horizon) set_parameter(doc, "grid.horizon", *o.horizon);
  return doc;
}

Loaded load(const Common& o) {
  Loaded l;
  l.doc = overridden(o, &l.bytes);
  l.run = build_run(l.doc);
  for (const auto& w : l.run.spec.warnings) std::cerr << "warning: " << w << "\n";
  return l;
}

class Outputs {
 public:
  Outputs(const Common& o, const Loaded& l, std::string command) : dir_(o.out_dir) {
    ensure_dir(dir_);
    m_.command = std::move(command);
    m_.config_path = o.config;
    m_.config_hash = sha256_hex(l.bytes);
    m_.seed = l.run.seed;
    m_.threads = l.run.threads;
    m_.started = utc_now();
  }
  std::string path(const std::string& name) {
    m_.outputs.push_back(name);
    return (std::filesystem::path(dir_) / name).string();
  }
  void finish() {
    m_.finished = utc_now();
    m_.outputs.push_back("manifest.json");
    write_json((std::filesystem::path(dir_) / "manifest.json").string(), m_.to_json());
  }

 private:
  std::string dir_;
  RunManifest m_;
};

std::string default_control(const RunConfig& run) { return (run.ex34 || run.ex35) ? "closed_form" : "zero"; }

Json estimate_json(const Estimate& e) { return {{"mean", e.mean}, {"stderr", e.stderr_}, {"n", e.n}}; }

Json report_json(const PicardReport& r) {
  return {{"iterations", r.iterations},   {"converged", r.converged},
          {"failure", r.failure},         {"weight_lambda", r.weight_lambda},
          {"lambda_T", r.lambda_T},       {"lipschitz", r.lipschitz},
          {"mode", r.mode},               {"schedule", r.schedule},
          {"distances", r.distances},     {"ratios", r.ratios},
          {"sup_rms", r.sup_rms},         {"min_adjoint_offset", r.min_adjoint_offset},
          {"min_state_offset", r.min_state_offset}};
}

int verdict_code(Verdict v) {
  switch (v) {
    case Verdict::Pass: return kOk;
    case Verdict::Fail: return kFail;
    case Verdict::Inconclusive: return kInconclusive;
  }
  return kFail;
}

std::unique_ptr<AdvancedDriver> test_driver(const TestDriverSettings& d) {
  return std::make_unique<FunctionDriver>(
      [d](const DriverArgs& a) {
        return d.c_now * a.p_now + d.c_adv * a.p_adv + (d.exp_forcing ? std::exp(-a.t) : 0.0);
      },
      std::abs(d.c_now) + std::abs(d.c_adv));
}

/// Ensemble for adjoint solves: one path when the problem is deterministic.
Ensemble adjoint_ensemble(const RunConfig& run, const TimeGrid& grid, const ControlSpec& u) {
  const std::size_t n = run.spec.deterministic() ? 1 : run.paths;
  return simulate_ensemble(run.spec, grid, u, n, run.seed, run.threads);
}

void write_adjoint_csv(const std::string& path, const AdjointTriple& tr, const TimeGrid& grid, std::size_t last) {
  std::vector<std::string> header = {"k", "t"};
  std::vector<std::vector<double>> cols(2);
  for (std::size_t k = 0; k <= last; ++k) {
    cols[0].push_back(static_cast<double>(k));
    cols[1].push_back(grid.t(k));
  }
  for (std::size_t c = 0; c < tr.dim; ++c) {
    header.push_back("p" + std::to_string(c + 1));
    cols.push_back(mean_series(tr, c, last));
  }
  for (std::size_t c = 0; c < std::min<std::size_t>(tr.dim, 2); ++c) {
    header.push_back("q" + std::to_string(c + 1));
    cols.push_back(mean_q_series(tr, c, last));
  }
  write_csv(path, header, cols);
}

int cmd_simulate(const Common& o, const Extra& x) {
  Loaded l = load(o);
  const RunConfig& r = l.run;
  const ControlSpec u = make_control(r, x.control.empty() ? default_control(r) : x.control);
  Outputs out(o, l, "simulate");
  const Ensemble ens = simulate_ensemble(r.spec, r.grid, u, r.paths, r.seed, r.threads);
  std::vector<std::vector<double>> cols(8);
  std::size_t exited = 0;
  for (std::size_t i = 0; i < ens.paths.size(); ++i) {
    const PathRecord& p = ens.paths[i];
    exited += p.exited;
    for (std::size_t k = 0; k <= r.grid.n; ++k) {
      const double v[8] = {static_cast<double>(i), static_cast<double>(k), p.t[k], p.X[k], p.Y[k], p.A[k], p.u[k],
                           (p.exited && k >= p.exit_step) ? 1.0 : 0.0};
      for (int c = 0; c < 8; ++c) cols[c].push_back(v[c]);
    }
  }
  write_csv(out.path("paths.csv"), {"path", "k", "t", "X", "Y", "A", "u", "exited"}, cols);
  write_json(out.path("simulate.json"), {{"paths", r.paths}, {"steps", r.grid.n}, {"exited_paths", exited},
                                         {"clip_events", u.clip_events()}, {"warnings", r.spec.warnings}});
  out.finish();
  std::printf("simulated %zu paths of %zu steps, %zu left the domain\n", r.paths, r.grid.n, exited);
  return kOk;
}

int cmd_objective(const Common& o, const Extra& x) {
  Loaded l = load(o);
  const RunConfig& r = l.run;
  const ControlSpec u = make_control(r, x.control.empty() ? default_control(r) : x.control);
  Outputs out(o, l, "objective");
  const ObjectiveEstimate e = estimate_J(r.spec, r.grid, u, r.paths, r.seed, r.threads);
  write_json(out.path("objective.json"), {{"mean", e.mean},
                                          {"stderr", e.stderr_},
                                          {"n_paths", e.n_paths},
                                          {"truncation_T", e.truncation_T},
                                          {"tail_bound", e.tail_bound},
                                          {"exited_paths", e.exited_paths}});
  out.finish();
  std::printf("J = %.10g +- %.3g (T = %g, tail bound %.3g, %zu exited)\n", e.mean, e.stderr_, e.truncation_T,
              e.tail_bound, e.exited_paths);
  return kOk;
}

int cmd_adjoint(const Common& o, const Extra& x) {
  Loaded l = load(o);
  RunConfig& r = l.run;
  if (x.system != "first" && x.system != "second") throw UsageError("--system must be 'first' or 'second'");
  PicardConfig cfg = r.picard();
  if (x.weight_lambda) cfg.weight_lambda = *x.weight_lambda;
  Outputs out(o, l, "adjoint");
  const TimeGrid solve_grid = make_grid(r.spec.delta, r.grid.dt, r.grid.horizon + r.solver.pad);
  std::unique_ptr<AdvancedDriver> driver;
  std::optional<Ensemble> ens;
  if (r.driver) {
    driver = test_driver(*r.driver);
  } else {
    const ControlSpec u = make_control(r, x.control.empty() ? default_control(r) : x.control);
    ens = adjoint_ensemble(r, solve_grid, u);
    if (x.system == "first")
      driver = std::make_unique<FirstAdjointDriver>(r.spec, *ens);
    else
      driver = std::make_unique<SecondAdjointDriver>(r.spec, *ens);
  }
  const Ensemble* ep = ens ? &*ens : nullptr;
  int code = kOk;
  PicardResult res;
  try {
    res = picard_solve(*driver, solve_grid, cfg, ep, r.driver ? nullptr : &r.spec);
  } catch (const PicardFailure& f) {
    res = f.partial();
    std::fprintf(stderr, "error [%s]: %s\n", to_string(f.code()), f.what());
    code = kFail;
  }
  const ContractionVerdict cv = contraction_diagnostics(res.report, *driver, r.spec.delta);
  Json rep = report_json(res.report);
  rep["contraction"] = {{"lambda_theory", cv.lambda_theory},
                        {"epsilon", cv.epsilon},
                        {"measured_ratio", cv.measured_ratio},
                        {"contracts", cv.contracts},
                        {"weight_below_theory", cv.weight_below_theory}};
  write_json(out.path("picard_report.json"), rep);
  write_adjoint_csv(out.path("adjoint.csv"), res.triple, solve_grid, std::min(r.grid.n, res.triple.n));
  out.finish();
  std::printf("%s after %zu iterations (weight %.4g, last distance %.3g)\n",
              res.report.converged ? "converged" : "not converged", res.report.iterations,
              res.report.weight_lambda, res.report.distances.empty() ? 0.0 : res.report.distances.back());
  return code;
}

Json sufficiency_json(const SufficiencyReport& s) {
  Json tr = Json::array();
  for (const auto& t : s.transversality) {
    Json lad = Json::array();
    for (const auto& p : t.ladder) lad.push_back({{"T", p.T}, {"value", estimate_json(p.value)}});
    tr.push_back({{"control", t.control}, {"component", t.component}, {"ladder", lad},
                  {"decreasing", t.decreasing}, {"pass", t.pass}});
  }
  Json gaps = Json::array();
  for (const auto& g : s.gaps) gaps.push_back({{"t", g.t}, {"gap", estimate_json(g.gap)}, {"verdict", to_string(g.verdict)}});
  Json j = {{"formulation", s.formulation},
            {"transversality", {{"verdict", to_string(s.transversality_verdict)}, {"controls", tr}}},
            {"concavity",
             {{"verdict", to_string(s.concavity_verdict)},
              {"points", s.concavity.points},
              {"max_eigenvalue", s.concavity.max_eigenvalue}}},
            {"integrability", {{"verdict", to_string(s.integrability_verdict)}, {"value", s.integrability.value}}},
            {"gap", {{"verdict", to_string(s.gap_verdict)}, {"probes", gaps}}},
            {"verdict", to_string(s.verdict)}};
  if (s.has_flatness)
    j["p3_flatness"] = {{"verdict", to_string(s.flatness_verdict)}, {"max_deviation", s.flatness.max_deviation}};
  return j;
}

Json necessity_json(const NecessityReport& n) {
  Json probes = Json::array();
  for (const auto& p : n.probes)
    probes.push_back({{"t", p.t}, {"residual", estimate_json(p.residual)}, {"significant", p.significant},
                      {"boundary", p.boundary}});
  Json bumps = Json::array();
  for (const auto& b : n.bumps)
    bumps.push_back({{"s", b.s}, {"h", b.h}, {"alpha", b.alpha}, {"step", b.step},
                     {"derivative", estimate_json(b.derivative)}, {"within", b.within}});
  return {{"probes", probes},
          {"bumps", bumps},
          {"boundary_fraction", n.boundary_fraction},
          {"boundary_control", n.boundary_control},
          {"max_abs_z", n.max_abs_z},
          {"significant_fraction", n.significant_fraction},
          {"sign_consistent", n.sign_consistent},
          {"dominant_sign", n.dominant_sign},
          {"residual_pass", n.residual_pass},
          {"bumps_pass", n.bumps_pass},
          {"verdict", to_string(n.verdict)}};
}

int cmd_check(const Common& o, const Extra& x) {
  Loaded l = load(o);
  const RunConfig& r = l.run;
  const bool second = x.principle == "sufficient2";
  if (x.principle != "sufficient1" && !second && x.principle != "necessary")
    throw UsageError("--principle must be sufficient1, sufficient2 or necessary");
  const std::string cdesc = x.control.empty() ? default_control(r) : x.control;
  const ControlSpec u = make_control(r, cdesc);
  Outputs out(o, l, "check");
  const Ensemble ens = simulate_ensemble(r.spec, r.grid, u, r.paths, r.seed, r.threads);
  const std::size_t dim = second ? 3 : 1;
  std::unique_ptr<AdjointProcess> adj;
  std::string adjoint_source = x.adjoint;
  if (adjoint_source == "auto") adjoint_source = (r.ex34 || r.ex35) ? "closed_form" : "solved";
  if (adjoint_source == "closed_form") {
    adj = closed_form_adjoint(r, dim);
    if (!adj) throw UsageError("this selector has no closed-form adjoint; use --adjoint solved");
  } else if (adjoint_source == "solved") {
    const PicardConfig cfg = r.picard();
    PicardResult res = second ? solve_second_adjoint(r.spec, ens, cfg) : solve_first_adjoint(r.spec, ens, cfg);
    adj = std::make_unique<SolvedAdjoint>(r.spec, std::move(res.triple));
  } else {
    throw UsageError("--adjoint must be auto, closed_form or solved");
  }
  Json rep = {{"principle", x.principle}, {"control", cdesc}, {"adjoint", adjoint_source}};
  Verdict v = Verdict::Pass;
  std::ostringstream txt;
  if (x.principle == "necessary") {
    const NecessityReport n = necessary_residual(r.spec, r.grid, u, ens, *adj, r.mc);
    rep["necessity"] = necessity_json(n);
    v = n.verdict;
    txt << "necessary condition: " << to_string(v) << "\n  residual probes significant: "
        << n.significant_fraction * 100.0 << "%, max |z| " << n.max_abs_z << "\n  bump derivatives within noise: "
        << (n.bumps_pass ? "yes" : "no") << "\n";
  } else {
    std::vector<ControlSpec> comps;
    std::vector<std::string> names;
    if (r.ex34 || r.ex35) {
      for (const char* c : {"closed_form*0.8", "closed_form*1.2", "constant:0.1"}) {
        comps.push_back(make_control(r, c));
        names.emplace_back(c);
      }
    } else {
      comps = {u.scaled(0.8), u.scaled(1.2)};
      names = {"candidate*0.8", "candidate*1.2"};
    }
    const SufficiencyReport s = second ? check_sufficient_second(r.spec, r.grid, u, comps, names, ens, *adj, r.mc)
                                       : check_sufficient_first(r.spec, r.grid, u, comps, names, ens, *adj, r.mc);
    rep["sufficiency"] = sufficiency_json(s);
    v = s.verdict;
    double max_gap = 0.0;
    for (const auto& g : s.gaps) max_gap = std::max(max_gap, g.gap.mean);
    txt << "sufficient condition (" << s.formulation << "): " << to_string(v)
        << "\n  transversality: " << to_string(s.transversality_verdict)
        << "\n  concavity: " << to_string(s.concavity_verdict) << " (max eigenvalue " << s.concavity.max_eigenvalue
        << ")\n  integrability: " << to_string(s.integrability_verdict)
        << "\n  conditional maximum: " << to_string(s.gap_verdict) << " (largest mean gap " << max_gap << ")\n";
    if (s.has_flatness) txt << "  p3 flatness: " << to_string(s.flatness_verdict) << "\n";
  }
  rep["verdict"] = to_string(v);
  write_json(out.path("check.json"), rep);
  write_text(out.path("check.txt"), txt.str());
  out.finish();
  std::cout << txt.str();
  return verdict_code(v);
}

int cmd_example34(const Common& o, const Extra&) {
  Loaded l = load(o);
  const RunConfig& r = l.run;
  if (!r.ex34) throw UsageError("example34 needs the example_3_4 selector");
  const Example34Params& P = *r.ex34;
  Outputs out(o, l, "example34");
  const double p0 = ex34_p0_star(P);
  const double p0q = ex34_p0_quadrature(P, 400.0 / std::max(1e-3, P.mu + (P.rho - P.mu) / (1.0 - P.gamma)));
  const ControlSpec u = ex34_closed_form_control(P, r.p0);
  const ObjectiveEstimate e = estimate_J(r.spec, r.grid, u, r.paths, r.seed, r.threads);
  std::vector<double> ts, ps, cs;
  for (std::size_t k = 0; k <= r.grid.n; k += std::max<std::size_t>(1, r.grid.n / 100)) {
    ts.push_back(r.grid.t(k));
    ps.push_back(ex34_adjoint(P, r.grid.t(k), r.p0));
    cs.push_back(ex34_consumption(P, r.grid.t(k), r.p0));
  }
  write_csv(out.path("example34.csv"), {"t", "p1", "consumption"}, {ts, ps, cs});
  write_json(out.path("example34.json"), {{"p0_star", p0},
                                          {"p0_quadrature", p0q},
                                          {"p0_used", r.p0},
                                          {"J_flow", ex34_J_closed(P, r.p0, r.grid.horizon)},
                                          {"J_estimate", {{"mean", e.mean}, {"stderr", e.stderr_}}},
                                          {"exited_paths", e.exited_paths}});
  out.finish();
  std::printf("p0* = %.12g (quadrature %.12g)\nJ(closed form) = %.10g +- %.3g, sigma = 0 flow value %.10g\n", p0,
              p0q, e.mean, e.stderr_, ex34_J_closed(P, r.p0, r.grid.horizon));
  return kOk;
}

int cmd_example35(const Common& o, const Extra&) {
  Loaded l = load(o);
  const RunConfig& r = l.run;
  if (!r.ex35) throw UsageError("example35 needs the example_3_5 selector");
  const Example35Params& P = *r.ex35;
  Outputs out(o, l, "example35");
  const ControlSpec u = ex35_closed_form_control(P, r.p0);
  const TimeGrid g = make_grid(r.spec.delta, r.grid.dt, r.grid.horizon + r.solver.pad);
  const Ensemble ens = adjoint_ensemble(r, g, u);
  const PicardResult res = solve_second_adjoint(r.spec, ens, r.picard());
  const std::size_t last = std::min(r.grid.n, res.triple.n);
  const auto p1 = mean_series(res.triple, 0, last), p2 = mean_series(res.triple, 1, last),
             p3 = mean_series(res.triple, 2, last);
  double ratio_dev = 0.0;
  for (std::size_t k = 0; k <= last; ++k)
    if (p2[k] != 0.0) ratio_dev = std::max(ratio_dev, std::abs(p1[k] / p2[k] * P.kappa() - 1.0));
  const Flatness fl = p3_flatness(p3, 1e-6);
  write_adjoint_csv(out.path("adjoint.csv"), res.triple, g, last);
  write_json(out.path("example35.json"), {{"alpha", P.alpha},
                                          {"constraint_residual", ex35_constraint_residual(P)},
                                          {"alpha_constraint_violated", r.spec.alpha_constraint_violated},
                                          {"K", r.p0},
                                          {"ratio_relative_deviation", ratio_dev},
                                          {"p3_flat", fl.flat},
                                          {"p3_max_deviation", fl.max_deviation}});
  out.finish();
  std::printf("alpha = %.10g (constraint residual %.3g), K = %.8g\np1/p2 relative deviation %.3g, max |p3| %.3g\n",
              P.alpha, ex35_constraint_residual(P), r.p0, ratio_dev, fl.max_deviation);
  return kOk;
}

int cmd_picard(const Common& o, const Extra& x) {
  Loaded l = load(o);
  const RunConfig& r = l.run;
  PicardConfig cfg = r.picard();
  if (x.weight_lambda) cfg.weight_lambda = *x.weight_lambda;
  Outputs out(o, l, "picard-diagnostics");
  std::unique_ptr<AdvancedDriver> driver;
  std::optional<Ensemble> ens;
  if (r.driver) {
    driver = test_driver(*r.driver);
  } else {
    const ControlSpec u = make_control(r, x.control.empty() ? default_control(r) : x.control);
    ens = adjoint_ensemble(r, r.grid, u);
    driver = std::make_unique<FirstAdjointDriver>(r.spec, *ens);
  }
  const Ensemble* ep = ens ? &*ens : nullptr;
  const ProblemSpec* sp = r.driver ? nullptr : &r.spec;
  int code = kOk;
  PicardResult res;
  try {
    res = picard_solve(*driver, r.grid, cfg, ep, sp);
  } catch (const PicardFailure& f) {
    res = f.partial();
    std::fprintf(stderr, "error [%s]: %s\n", to_string(f.code()), f.what());
    code = kFail;
  }
  const ContractionVerdict cv = contraction_diagnostics(res.report, *driver, r.spec.delta);
  Json rep = report_json(res.report);
  rep["contraction"] = {{"lambda_theory", cv.lambda_theory}, {"epsilon", cv.epsilon},
                        {"measured_ratio", cv.measured_ratio}, {"contracts", cv.contracts},
                        {"weight_below_theory", cv.weight_below_theory}};
  if (code == kOk) {
    try {
      const UniquenessResult u = uniqueness_probe(
          *driver, r.grid, cfg, [](std::size_t, std::size_t, std::size_t) { return 0.0; },
          [](std::size_t, std::size_t, std::size_t) { return 1.0; }, ep, sp);
      rep["uniqueness_distance"] = u.distance;
    } catch (const PicardFailure& f) {
      rep["uniqueness_failure"] = to_string(f.code());
      code = kFail;
    }
  }
  write_json(out.path("picard_diagnostics.json"), rep);
  out.finish();
  std::printf("iterations %zu, measured ratio %.4g (theory weight %.4g, used %.4g), %s\n", res.report.iterations,
              cv.measured_ratio, cv.lambda_theory, res.report.weight_lambda,
              cv.contracts ? "contracts" : "does not contract");
  if (code == kOk && !cv.contracts) code = kFail;
  return code;
}

std::vector<Json> parse_values(const std::string& text) {
  std::vector<Json> out;
  const Json j = parse_value(text);
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (item.find_first_not_of(" \t") != std::string::npos) out.push_back(parse_value(item));
  return out;
}

int cmd_sweep(const Common& o, const Extra& x) {
  if (x.param.empty()) throw UsageError("--param is required");
  const std::vector<Json> values = parse_values(x.values);
  if (values.empty()) throw UsageError("--values is empty");
  std::string bytes;
  const Json base = overridden(o, &bytes);
  std::vector<RunConfig> runs;
  for (const auto& v : values) {
    Json doc = base;
    set_parameter(doc, x.param, v);
    runs.push_back(build_run(doc));
  }
  Loaded l{base, bytes, runs.front()};
  Outputs out(o, l, "sweep");
  std::vector<std::vector<double>> cols(6);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RunConfig& r = runs[i];
    const ControlSpec u = make_control(r, x.control.empty() ? default_control(r) : x.control);
    const ObjectiveEstimate e = estimate_J(r.spec, r.grid, u, r.paths, r.seed, r.threads);
    const double ref = (r.ex34 && r.spec.deterministic()) ? ex34_J_closed(*r.ex34, r.p0, r.grid.horizon) : NAN;
    const double v = values[i].is_number() ? values[i].get<double>() : static_cast<double>(i);
    const double row[6] = {v, e.mean, e.stderr_, ref, static_cast<double>(e.exited_paths), e.tail_bound};
    for (int c = 0; c < 6; ++c) cols[c].push_back(row[c]);
    std::printf("%s = %s: J = %.10g +- %.3g\n", x.param.c_str(), values[i].dump().c_str(), e.mean, e.stderr_);
  }
  write_csv(out.path("sweep.csv"), {"value", "J", "stderr", "J_reference", "exited_paths", "tail_bound"}, cols);
  out.finish();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay stochastic control toolkit: simulation, adjoint equations and maximum-principle checks"};
  app.require_subcommand(1);
  Common common;
  Extra extra;
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Common&, const Extra&);
  };
  const Sub subs[] = {
      {"simulate", "Simulate paths of the controlled delay equation", cmd_simulate},
      {"objective", "Estimate the objective of a control", cmd_objective},
      {"adjoint", "Solve an adjoint equation by Picard iteration", cmd_adjoint},
      {"check", "Check a maximum principle for a candidate control", cmd_check},
      {"example34", "Closed-form quantities of the consumption example without delay", cmd_example34},
      {"example35", "Closed-form quantities and adjoint structure of the delay example", cmd_example35},
      {"picard-diagnostics", "Contraction and uniqueness diagnostics of the Picard solver", cmd_picard},
      {"sweep", "Objective estimates over a list of parameter values", cmd_sweep},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Common&, const Extra&)>> cmds;
  for (const auto& s : subs) {
    CLI::App* c = app.add_subcommand(s.name, s.help);
    add_common(c, common);
    c->add_option("--control", extra.control, "closed_form, closed_form*s, zero, constant:v or file:path.csv");
    const std::string n = s.name;
    if (n == "adjoint") c->add_option("--system", extra.system, "first or second");
    if (n == "adjoint" || n == "picard-diagnostics")
      c->add_option("--weight-lambda", extra.weight_lambda, "Weight of the Picard norm");
    if (n == "check") {
      c->add_option("--principle", extra.principle, "sufficient1, sufficient2 or necessary");
      c->add_option("--adjoint", extra.adjoint, "auto, closed_form or solved");
    }
    if (n == "sweep") {
      c->add_option("--param", extra.param, "Parameter name")->required();
      c->add_option("--values", extra.values, "Comma-separated values or a JSON array")->required();
    }
    cmds.emplace_back(c, s.fn);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  for (const auto& [c, fn] : cmds) {
    if (!c->parsed()) continue;
    try {
      return fn(common, extra);
    } catch (const UsageError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kUsage;
    } catch (const Error& e) {
      std::fprintf(stderr, "error [%s]: %s\n", to_string(e.code()), e.what());
      switch (e.code()) {
        case ErrorCode::ConfigError:
        case ErrorCode::IoError:
        case ErrorCode::GridMismatch:
        case ErrorCode::BadInterval:
        case ErrorCode::NonFiniteSegment:
          return kUsage;
        default:
          return kFail;
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kUsage;
    }
  }
  return kUsage;
}
