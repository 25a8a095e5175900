#include "delaymp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "delaymp/errors.hpp"

namespace delaymp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const Json& section(const Json& doc, const char* name) {
  static const Json empty = Json::object();
  auto it = doc.find(name);
  if (it == doc.end()) return empty;
  if (!it->is_object()) fail(ErrorCode::ConfigError, std::string("section '") + name + "' must be an object");
  return *it;
}

double num(const Json& s, const char* key, double def) {
  auto it = s.find(key);
  if (it == s.end() || it->is_null()) return def;
  if (it->is_string()) {
    const std::string v = it->get<std::string>();
    if (v == "inf" || v == "+inf") return kInf;
    if (v == "-inf") return -kInf;
  }
  if (!it->is_number()) fail(ErrorCode::ConfigError, std::string("'") + key + "' must be a number");
  return it->get<double>();
}

/// Bounds read null as unbounded.
double bound(const Json& s, const char* key, double def) {
  auto it = s.find(key);
  if (it != s.end() && it->is_null()) return def;
  return num(s, key, def);
}

std::size_t count(const Json& s, const char* key, std::size_t def) {
  const double v = num(s, key, static_cast<double>(def));
  if (!(v >= 0.0) || v != std::floor(v)) fail(ErrorCode::ConfigError, std::string("'") + key + "' must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

std::string str(const Json& s, const char* key, const std::string& def) {
  auto it = s.find(key);
  if (it == s.end() || it->is_null()) return def;
  if (!it->is_string()) fail(ErrorCode::ConfigError, std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

/// Monomial c x^i y^j a^k u^l z^m.
struct Term {
  double c = 0.0;
  int e[5] = {0, 0, 0, 0, 0};
};

std::vector<Term> parse_terms(const Json& arr, bool allow_z) {
  std::vector<Term> out;
  if (!arr.is_array()) fail(ErrorCode::ConfigError, "polynomial coefficients must be arrays of terms");
  static const char* names[5] = {"x", "y", "a", "u", "z"};
  for (const auto& t : arr) {
    Term term;
    term.c = num(t, "c", 0.0);
    for (int v = 0; v < 5; ++v) {
      const double e = num(t, names[v], 0.0);
      if (e < 0.0 || e != std::floor(e) || e > 8.0) fail(ErrorCode::ConfigError, "exponents must be integers in [0, 8]");
      if (v == 4 && e > 0.0 && !allow_z) fail(ErrorCode::ConfigError, "only theta may depend on the mark z");
      term.e[v] = static_cast<int>(e);
    }
    out.push_back(term);
  }
  return out;
}

double ipow(double b, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

double poly_value(const std::vector<Term>& ts, const double* v) {
  double s = 0.0;
  for (const auto& t : ts) {
    double m = t.c;
    for (int i = 0; i < 5; ++i) m *= ipow(v[i], t.e[i]);
    s += m;
  }
  return s;
}

Grad4 poly_grad(const std::vector<Term>& ts, const double* v) {
  Grad4 g{};
  for (const auto& t : ts)
    for (int d = 0; d < 4; ++d) {
      if (t.e[d] == 0) continue;
      double m = t.c * t.e[d];
      for (int i = 0; i < 5; ++i) m *= ipow(v[i], i == d ? t.e[i] - 1 : t.e[i]);
      g[d] += m;
    }
  return g;
}

ScalarCoefficient poly_coefficient(std::vector<Term> ts, double discount) {
  if (ts.empty()) return {};
  return ScalarCoefficient(
      [ts, discount](const StatePoint& s) {
        const double v[5] = {s.x, s.y, s.a, s.u, 0.0};
        return std::exp(-discount * s.t) * poly_value(ts, v);
      },
      [ts, discount](const StatePoint& s) {
        const double v[5] = {s.x, s.y, s.a, s.u, 0.0};
        Grad4 g = poly_grad(ts, v);
        const double e = std::exp(-discount * s.t);
        for (double& x : g) x *= e;
        return g;
      });
}

MarkCoefficient poly_mark_coefficient(std::vector<Term> ts) {
  if (ts.empty()) return {};
  return MarkCoefficient(
      [ts](const StatePoint& s, double z) {
        const double v[5] = {s.x, s.y, s.a, s.u, z};
        return poly_value(ts, v);
      },
      [ts](const StatePoint& s, double z) {
        const double v[5] = {s.x, s.y, s.a, s.u, z};
        return poly_grad(ts, v);
      });
}

std::optional<JumpModel> parse_jump(const Json& doc) {
  const Json& j = section(doc, "jump");
  if (j.empty()) return std::nullopt;
  JumpModel jm;
  jm.intensity = num(j, "intensity", 0.0);
  if (!(jm.intensity >= 0.0)) fail(ErrorCode::ConfigError, "jump intensity must be nonnegative");
  const Json& m = section(j, "marks");
  const std::string type = str(m, "type", "discrete");
  if (type == "discrete") {
    if (!m.contains("values") || !m.contains("probs")) fail(ErrorCode::ConfigError, "discrete marks need values and probs");
    jm.marks = MarkDistribution::discrete(m["values"].get<std::vector<double>>(), m["probs"].get<std::vector<double>>());
  } else if (type == "uniform") {
    jm.marks = MarkDistribution::uniform(num(m, "lo", 0.0), num(m, "hi", 1.0));
  } else {
    fail(ErrorCode::ConfigError, "unknown mark distribution '" + type + "'");
  }
  return jm;
}

std::function<double(double)> parse_segment(const Json& p, double x0_default) {
  const Json& s = section(p, "initial_segment");
  const std::string type = str(s, "type", "constant");
  if (type == "constant") {
    const double v = num(s, "value", x0_default);
    return [v](double) { return v; };
  }
  if (type == "linear") {
    const double a = num(s, "a", x0_default), b = num(s, "b", 0.0);
    return [a, b](double t) { return a + b * t; };
  }
  fail(ErrorCode::ConfigError, "unknown initial segment type '" + type + "'");
}

Example34Params ex34_params(const Json& p) {
  const Json& q = section(p, "params");
  Example34Params P;
  P.gamma = num(q, "gamma", P.gamma);
  P.mu = num(q, "mu", P.mu);
  P.rho = num(p, "discount", num(p, "rho", P.rho));
  P.sigma0 = num(q, "sigma0", P.sigma0);
  P.x0 = num(q, "x0", P.x0);
  P.p0_lambda = num(q, "p0_lambda", NAN);
  P.delta = num(p, "delta", P.delta);
  return P;
}

Example35Params ex35_params(const Json& p) {
  const Json& q = section(p, "params");
  Example35Params P;
  P.gamma = num(q, "gamma", P.gamma);
  P.mu = num(q, "mu", P.mu);
  P.beta = num(q, "beta", P.beta);
  P.rho = num(p, "rho", P.rho);
  P.delta = num(p, "delta", P.delta);
  P.lambda_avg = num(p, "lambda_avg", P.rho);
  P.sigma0 = num(q, "sigma0", P.sigma0);
  P.x0 = num(q, "x0", P.x0);
  auto it = q.find("alpha");
  if (it != q.end() && it->is_string()) {
    if (it->get<std::string>() != "constraint") fail(ErrorCode::ConfigError, "alpha must be a number or \"constraint\"");
    P.alpha = ex35_alpha_for_constraint(P);
  } else {
    P.alpha = num(q, "alpha", ex35_alpha_for_constraint(P));
  }
  P.alpha *= num(q, "alpha_scale", 1.0);
  return P;
}

ProblemSpec linear_quadratic(const Json& p) {
  const Json& q = section(p, "params");
  const double ax = num(q, "ax", -0.5), ay = num(q, "ay", 0.0), aa = num(q, "aa", 0.0), bu = num(q, "bu", 1.0);
  const double s0 = num(q, "s0", 0.0), s1 = num(q, "s1", 0.0), th = num(q, "th", 0.0);
  const double qx = num(q, "qx", 1.0), ru = num(q, "ru", 1.0);
  const double disc = num(p, "discount", num(p, "rho", 0.1));
  ProblemSpec s;
  s.coeffs.b = ScalarCoefficient([=](const StatePoint& z) { return ax * z.x + ay * z.y + aa * z.a + bu * z.u; },
                                 [=](const StatePoint&) { return Grad4{ax, ay, aa, bu}; });
  if (s0 != 0.0 || s1 != 0.0)
    s.coeffs.sigma = ScalarCoefficient([=](const StatePoint& z) { return s0 + s1 * z.x; },
                                       [=](const StatePoint&) { return Grad4{s1, 0.0, 0.0, 0.0}; });
  if (th != 0.0)
    s.coeffs.theta = MarkCoefficient([=](const StatePoint&, double z) { return th * z; },
                                     [](const StatePoint&, double) { return Grad4{}; });
  s.coeffs.f = ScalarCoefficient(
      [=](const StatePoint& z) { return -0.5 * std::exp(-disc * z.t) * (qx * z.x * z.x + ru * z.u * z.u); },
      [=](const StatePoint& z) {
        const double e = std::exp(-disc * z.t);
        return Grad4{-e * qx * z.x, 0.0, 0.0, -e * ru * z.u};
      });
  return s;
}

ProblemSpec custom_polynomial(const Json& p) {
  const Json& q = section(p, "params");
  const double disc = num(p, "discount", num(p, "rho", 0.1));
  auto terms = [&](const char* key, bool z) {
    auto it = q.find(key);
    return it == q.end() ? std::vector<Term>{} : parse_terms(*it, z);
  };
  ProblemSpec s;
  s.coeffs.b = poly_coefficient(terms("b", false), 0.0);
  s.coeffs.sigma = poly_coefficient(terms("sigma", false), 0.0);
  s.coeffs.theta = poly_mark_coefficient(terms("theta", true));
  const bool discounted = !q.contains("f_discounted") || q["f_discounted"].get<bool>();
  s.coeffs.f = poly_coefficient(terms("f", false), discounted ? disc : 0.0);
  return s;
}

/// Adjoint p1 = p0 e^{-c t}, p2 = k p1, p3 = 0, no martingale parts.
class ExponentialAdjoint : public AdjointProcess {
 public:
  ExponentialAdjoint(double p0, double rate, double ratio, std::size_t dim)
      : p0_(p0), rate_(rate), ratio_(ratio), dim_(dim) {}
  std::size_t dimension() const override { return dim_; }
  double p(std::size_t comp, std::size_t, std::size_t, const StatePoint& s) const override {
    const double p1 = p0_ * std::exp(-rate_ * s.t);
    return comp == 0 ? p1 : (comp == 1 ? ratio_ * p1 : 0.0);
  }
  double q(std::size_t, std::size_t, std::size_t, const StatePoint&) const override { return 0.0; }
  void r_nodes(std::size_t, std::size_t, std::size_t, const StatePoint&, double*) const override {}

 private:
  double p0_, rate_, ratio_;
  std::size_t dim_;
};

const std::map<std::string, std::string>& short_names() {
  static const std::map<std::string, std::string> m = {
      {"delta", "problem.delta"},
      {"rho", "problem.rho"},
      {"lambda_avg", "problem.lambda_avg"},
      {"discount", "problem.discount"},
      {"selector", "problem.selector"},
      {"u_lo", "problem.control.lo"},
      {"u_hi", "problem.control.hi"},
      {"gamma", "problem.params.gamma"},
      {"mu", "problem.params.mu"},
      {"sigma0", "problem.params.sigma0"},
      {"x0", "problem.params.x0"},
      {"alpha", "problem.params.alpha"},
      {"alpha_scale", "problem.params.alpha_scale"},
      {"beta", "problem.params.beta"},
      {"p0", "problem.params.p0"},
      {"p0_lambda", "problem.params.p0_lambda"},
      {"ax", "problem.params.ax"},
      {"ay", "problem.params.ay"},
      {"aa", "problem.params.aa"},
      {"bu", "problem.params.bu"},
      {"s0", "problem.params.s0"},
      {"s1", "problem.params.s1"},
      {"th", "problem.params.th"},
      {"qx", "problem.params.qx"},
      {"ru", "problem.params.ru"},
      {"intensity", "jump.intensity"},
      {"dt", "grid.dt"},
      {"horizon", "grid.horizon"},
      {"paths", "mc.paths"},
      {"seed", "mc.seed"},
      {"threads", "mc.threads"},
      {"probes", "mc.probes"},
      {"lag", "mc.lag"},
      {"info_degree", "mc.info_degree"},
      {"hessian_points", "mc.hessian_points"},
      {"picard_max_iter", "solver.picard_max_iter"},
      {"picard_tol", "solver.picard_tol"},
      {"weight_lambda", "solver.weight_lambda"},
      {"basis_degree", "solver.basis_degree"},
      {"schedule", "solver.schedule"},
      {"mode", "solver.mode"},
      {"pad", "solver.pad"},
  };
  return m;
}

}  // namespace

Json load_config(const std::string& path, std::string* bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (bytes) *bytes = text;
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::ConfigError, "cannot parse config file '" + path + "': " + e.what());
  }
}

Json parse_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
    return Json(text);
  }
}

void set_parameter(Json& doc, const std::string& name, const Json& value) {
  std::string path = name;
  if (name.find('.') == std::string::npos) {
    auto it = short_names().find(name);
    if (it == short_names().end()) fail(ErrorCode::ConfigError, "unknown parameter '" + name + "'");
    path = it->second;
  } else {
    const std::string head = name.substr(0, name.find('.'));
    static const char* sections[] = {"problem", "jump", "grid", "mc", "solver", "driver"};
    if (std::find(std::begin(sections), std::end(sections), head) == std::end(sections))
      fail(ErrorCode::ConfigError, "unknown parameter '" + name + "'");
  }
  Json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    Json& next = (*node)[key];
    if (next.is_null()) next = Json::object();
    if (!next.is_object()) fail(ErrorCode::ConfigError, "parameter path '" + name + "' crosses a non-object");
    node = &next;
    pos = dot + 1;
  }
}

ProblemSpec build_problem(const Json& doc) {
  if (!doc.is_object()) fail(ErrorCode::ConfigError, "config must be an object");
  const Json& p = section(doc, "problem");
  const std::string sel = str(p, "selector", "");
  ProblemSpec s;
  double lo = -kInf, hi = kInf, x0_default = 1.0;
  if (sel == "example_3_4") {
    s = ex34_problem(ex34_params(p));
    lo = 0.0;
    x0_default = ex34_params(p).x0;
  } else if (sel == "example_3_5") {
    s = ex35_problem(ex35_params(p));
    lo = 0.0;
    x0_default = ex35_params(p).x0;
  } else if (sel == "linear_quadratic") {
    s = linear_quadratic(p);
    x0_default = num(section(p, "params"), "x0", 1.0);
  } else if (sel == "custom_polynomial") {
    s = custom_polynomial(p);
    x0_default = num(section(p, "params"), "x0", 1.0);
  } else {
    fail(ErrorCode::ConfigError, "unknown coefficient selector '" + sel + "'");
  }
  s.selector = sel;
  s.delta = num(p, "delta", 1.0);
  s.rho = num(p, "rho", s.rho);
  s.lambda_avg = num(p, "lambda_avg", s.rho);
  s.discount = num(p, "discount", s.rho);
  const Json& c = section(p, "control");
  s.u_lo = bound(c, "lo", lo);
  s.u_hi = bound(c, "hi", hi);
  if (s.u_lo > s.u_hi) fail(ErrorCode::BadInterval, "control bounds have lo > hi");
  if (p.contains("initial_segment") || sel == "linear_quadratic" || sel == "custom_polynomial")
    s.initial_segment = parse_segment(p, x0_default);
  s.jump = parse_jump(doc);
  if (sel == "example_3_4" || sel == "example_3_5") {
    if (s.jump && s.jump->active() && s.coeffs.theta.is_zero())
      s.warnings.push_back("jump_section_ignored_by_selector");
  }
  return s;
}

RunConfig build_run(const Json& doc) {
  RunConfig r;
  r.doc = doc;
  r.spec = build_problem(doc);
  r.selector = r.spec.selector;
  const Json& g = section(doc, "grid");
  r.grid = make_grid(r.spec.delta, num(g, "dt", 0.01), num(g, "horizon", 10.0));
  r.spec.validate(r.grid);

  const Json& mc = section(doc, "mc");
  r.paths = count(mc, "paths", 1000);
  if (r.paths == 0) fail(ErrorCode::ConfigError, "mc.paths must be positive");
  r.seed = static_cast<std::uint64_t>(num(mc, "seed", 1.0));
  r.threads = count(mc, "threads", 1);
  r.mc.paths = r.paths;
  r.mc.seed = r.seed;
  r.mc.threads = r.threads;
  r.mc.probes = count(mc, "probes", 20);
  r.mc.hessian_points = count(mc, "hessian_points", 200);
  const double lag = num(mc, "lag", 0.0);
  if (lag > 0.0) {
    r.mc.info.mode = InfoSpec::Lagged;
    r.mc.info.lag = lag;
  }
  r.mc.info.degree = count(mc, "info_degree", 2);

  const Json& sv = section(doc, "solver");
  r.solver.max_iter = count(sv, "picard_max_iter", 60);
  r.solver.tol = num(sv, "picard_tol", 1e-12);
  r.solver.weight_lambda = num(sv, "weight_lambda", 0.0);
  r.solver.basis_degree = count(sv, "basis_degree", 2);
  r.solver.pad = num(sv, "pad", 0.0);
  const std::string sched = str(sv, "schedule", "sweep");
  if (sched == "sweep")
    r.solver.schedule = Schedule::Sweep;
  else if (sched == "jacobi")
    r.solver.schedule = Schedule::Jacobi;
  else
    fail(ErrorCode::ConfigError, "solver.schedule must be 'sweep' or 'jacobi'");
  const std::string mode = str(sv, "mode", "auto");
  if (mode == "deterministic")
    r.solver.mode = SolveMode::Deterministic;
  else if (mode == "regression")
    r.solver.mode = SolveMode::Regression;
  else if (mode != "auto")
    fail(ErrorCode::ConfigError, "solver.mode must be 'auto', 'deterministic' or 'regression'");

  const Json& dv = section(doc, "driver");
  if (!dv.empty()) {
    TestDriverSettings d;
    d.c_now = num(dv, "c_now", 0.0);
    d.c_adv = num(dv, "c_adv", 0.0);
    d.exp_forcing = str(dv, "forcing", "none") == "exp";
    r.driver = d;
  }

  const Json& q = section(section(doc, "problem"), "params");
  if (r.selector == "example_3_4") {
    r.ex34 = ex34_params(section(doc, "problem"));
    if (!(r.ex34->gamma < 1.0)) r.spec.warnings.push_back("gamma_outside_concave_range");
    r.p0 = num(q, "p0", NAN);
    if (std::isnan(r.p0)) r.p0 = ex34_p0_star(*r.ex34);
  } else if (r.selector == "example_3_5") {
    r.ex35 = ex35_params(section(doc, "problem"));
    r.p0 = num(q, "p0", NAN);
    if (std::isnan(r.p0)) r.p0 = ex35_K(*r.ex35, KSearch{100.0, r.grid.dt, 1e-6});
  }
  return r;
}

PicardConfig RunConfig::picard() const {
  PicardConfig c;
  c.mode = solver.mode.value_or(spec.deterministic() ? SolveMode::Deterministic : SolveMode::Regression);
  c.schedule = solver.schedule;
  c.weight_lambda = solver.weight_lambda;
  c.tol = solver.tol;
  c.max_iter = solver.max_iter;
  c.basis_degree = solver.basis_degree;
  c.threads = threads;
  return c;
}

namespace {

ControlSpec closed_form(const RunConfig& run) {
  if (run.ex34) return ex34_closed_form_control(*run.ex34, run.p0);
  if (run.ex35) return ex35_closed_form_control(*run.ex35, run.p0);
  fail(ErrorCode::ConfigError, "selector '" + run.selector + "' has no closed-form control");
}

ControlSpec file_control(const RunConfig& run, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open control file '" + path + "'");
  std::string header, line;
  std::getline(in, header);
  header.erase(std::remove_if(header.begin(), header.end(), ::isspace), header.end());
  const bool scale = header == "t,scale";
  if (!scale && header != "t,u") fail(ErrorCode::ConfigError, "control file header must be 't,u' or 't,scale'");
  std::vector<double> ts, vs;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double t = 0.0, v = 0.0;
    char comma = 0;
    if (!(ls >> t >> comma >> v) || comma != ',') fail(ErrorCode::ConfigError, "bad row in control file '" + path + "'");
    if (!ts.empty() && !(t > ts.back())) fail(ErrorCode::ConfigError, "control file times must increase");
    ts.push_back(t);
    vs.push_back(v);
  }
  if (ts.empty()) fail(ErrorCode::ConfigError, "control file '" + path + "' has no rows");
  // Piecewise-linear in t, constant beyond the table.
  std::vector<double> table(run.grid.n + 1);
  for (std::size_t k = 0; k <= run.grid.n; ++k) {
    const double t = run.grid.t(k);
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    if (it == ts.begin()) {
      table[k] = vs.front();
    } else if (it == ts.end()) {
      table[k] = vs.back();
    } else {
      const std::size_t j = static_cast<std::size_t>(it - ts.begin());
      const double w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
      table[k] = (1.0 - w) * vs[j - 1] + w * vs[j];
    }
  }
  if (!scale) return ControlSpec::open_loop(table, run.spec.u_lo, run.spec.u_hi);
  const ControlSpec base = closed_form(run);
  return ControlSpec([base, table](const ControlContext& c) { return table[c.k] * base.raw(c); }, run.spec.u_lo,
                     run.spec.u_hi);
}

}  // namespace

ControlSpec make_control(const RunConfig& run, const std::string& desc) {
  if (desc == "closed_form") return closed_form(run);
  if (desc.rfind("closed_form*", 0) == 0) {
    const double s = std::stod(desc.substr(12));
    return closed_form(run).scaled(s);
  }
  if (desc == "flow") {
    if (!run.ex34) fail(ErrorCode::ConfigError, "the flow control exists only for example_3_4");
    return ex34_flow_control(*run.ex34, run.p0);
  }
  if (desc == "zero") return ControlSpec::constant(0.0, run.spec.u_lo, run.spec.u_hi);
  if (desc.rfind("constant:", 0) == 0)
    return ControlSpec::constant(std::stod(desc.substr(9)), run.spec.u_lo, run.spec.u_hi);
  if (desc.rfind("file:", 0) == 0) return file_control(run, desc.substr(5));
  fail(ErrorCode::ConfigError, "unknown control '" + desc + "'");
}

std::unique_ptr<AdjointProcess> closed_form_adjoint(const RunConfig& run, std::size_t dim) {
  if (run.ex34) return std::make_unique<ExponentialAdjoint>(run.p0, run.ex34->mu, 0.0, dim);
  if (run.ex35)
    return std::make_unique<ExponentialAdjoint>(run.p0, run.ex35->mu + run.ex35->kappa(), run.ex35->kappa(), dim);
  return nullptr;
}

}  // namespace delaymp
