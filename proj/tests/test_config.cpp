#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "delaymp/config.hpp"
#include "delaymp/errors.hpp"
#include "delaymp/io.hpp"

using namespace delaymp;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::NonFinite;  // sentinel: nothing raised
}

Json base() {
  return Json::parse(R"({"problem": {"selector": "linear_quadratic", "delta": 1.0, "rho": 0.1,
      "params": {"ax": -0.5, "s0": 0.3, "x0": 1.0}}, "grid": {"dt": 0.01, "horizon": 5.0},
      "mc": {"paths": 10, "seed": 3}})");
}

fs::path temp_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("delaymp_config_test_" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("command-line values parse as JSON when possible") {
  CHECK(parse_value("0.25") == Json(0.25));
  CHECK(parse_value("[1, 2]") == Json::array({1, 2}));
  CHECK(parse_value("true") == Json(true));
  CHECK(parse_value("sweep") == Json("sweep"));
}

TEST_CASE("parameters by short name and by dotted path") {
  Json d = base();
  set_parameter(d, "dt", Json(0.02));
  set_parameter(d, "gamma", Json(0.7));
  set_parameter(d, "problem.params.ax", Json(-0.9));
  set_parameter(d, "solver.schedule", Json("jacobi"));
  CHECK(d["grid"]["dt"] == Json(0.02));
  CHECK(d["problem"]["params"]["gamma"] == Json(0.7));
  CHECK(d["problem"]["params"]["ax"] == Json(-0.9));
  CHECK(code_of([&] { set_parameter(d, "no_such_parameter", Json(1)); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { set_parameter(d, "elsewhere.x", Json(1)); }) == ErrorCode::ConfigError);
  const RunConfig r = build_run(d);
  CHECK(r.grid.dt == 0.02);
  CHECK(r.solver.schedule == Schedule::Jacobi);
}

TEST_CASE("run configuration defaults and the solver mode") {
  RunConfig r = build_run(base());
  CHECK(r.paths == 10);
  CHECK(r.seed == 3);
  CHECK(r.grid.n == 500);
  CHECK(r.picard().mode == SolveMode::Regression);
  Json d = base();
  d["problem"]["params"]["s0"] = 0.0;
  CHECK(build_run(d).picard().mode == SolveMode::Deterministic);
}

TEST_CASE("configuration errors") {
  Json d = base();
  d["grid"]["dt"] = 0.3;
  CHECK(code_of([&] { build_run(d); }) == ErrorCode::GridMismatch);
  d = base();
  d["problem"]["selector"] = "nothing";
  CHECK(code_of([&] { build_run(d); }) == ErrorCode::ConfigError);
  d = base();
  d["problem"]["control"] = {{"lo", 1.0}, {"hi", 0.0}};
  CHECK(code_of([&] { build_run(d); }) == ErrorCode::BadInterval);
  CHECK(code_of([] { load_config("/nonexistent/delaymp.json"); }) == ErrorCode::IoError);
  const fs::path bad = temp_file("bad.json", "{not json");
  CHECK(code_of([&] { load_config(bad.string()); }) == ErrorCode::ConfigError);
  fs::remove(bad);
}

TEST_CASE("examples: closed-form initial adjoints") {
  Json d = Json::parse(R"({"problem": {"selector": "example_3_4", "delta": 1.0, "rho": 0.1,
      "params": {"gamma": 0.5, "mu": 0.05, "sigma0": 0.0, "x0": 1.0}}, "grid": {"dt": 0.01, "horizon": 10.0}})");
  const RunConfig r = build_run(d);
  CHECK(r.p0 == doctest::Approx(std::pow(0.15, -0.5)));
  CHECK(r.spec.u_lo == 0.0);
  d["problem"]["params"]["gamma"] = 1.5;
  CHECK(code_of([&] { build_run(d); }) == ErrorCode::DivergentIntegral);
  d["problem"]["rho"] = 0.06;
  CHECK_FALSE(build_run(d).spec.warnings.empty());
  Json e = Json::parse(R"({"problem": {"selector": "example_3_5", "delta": 1.0, "rho": 0.1, "lambda_avg": 0.1,
      "params": {"alpha": "constraint", "sigma0": 0.0}}, "grid": {"dt": 0.01, "horizon": 10.0}})");
  const RunConfig r5 = build_run(e);
  REQUIRE(r5.ex35);
  CHECK(std::abs(r5.ex35->alpha - r5.ex35->kappa() * (r5.ex35->mu + r5.ex35->lambda_avg + r5.ex35->kappa())) < 1e-14);
  CHECK(r5.p0 > 0.0);
}

TEST_CASE("custom polynomial coefficients and jumps") {
  Json d = Json::parse(R"({"problem": {"selector": "custom_polynomial", "delta": 1.0, "rho": 0.1, "discount": 0.2,
      "params": {"x0": 1.0, "b": [{"c": 0.5, "x": 1, "u": 1}, {"c": -1.0, "y": 2}], "sigma": [{"c": 0.1}],
      "theta": [{"c": 2.0, "x": 1, "z": 1}], "f": [{"c": -1.0, "u": 2}]},
      "initial_segment": {"type": "linear", "a": 1.0, "b": 0.5}},
      "jump": {"intensity": 1.5, "marks": {"type": "discrete", "values": [-1, 1], "probs": [0.5, 0.5]}},
      "grid": {"dt": 0.1, "horizon": 2.0}})");
  const RunConfig r = build_run(d);
  const StatePoint p{1.0, 2.0, 3.0, 0.0, 0.5};
  CHECK(r.spec.coeffs.b(p) == doctest::Approx(0.5 - 9.0));
  const Grad4 g = r.spec.coeffs.b.grad(p);
  CHECK(g[0] == doctest::Approx(0.25));
  CHECK(g[1] == doctest::Approx(-6.0));
  CHECK(g[3] == doctest::Approx(1.0));
  CHECK(r.spec.coeffs.theta(p, -1.0) == doctest::Approx(-4.0));
  CHECK(r.spec.coeffs.f(p) == doctest::Approx(-0.25 * std::exp(-0.2)));
  CHECK(r.spec.has_jumps());
  CHECK(r.spec.initial_segment(-1.0) == doctest::Approx(0.5));
  d["problem"]["params"]["b"] = Json::parse(R"([{"c": 1.0, "z": 1}])");
  CHECK(code_of([&] { build_run(d); }) == ErrorCode::ConfigError);
}

TEST_CASE("control descriptions") {
  Json d = Json::parse(R"({"problem": {"selector": "example_3_4", "delta": 1.0, "rho": 0.1,
      "params": {"gamma": 0.5, "mu": 0.05, "sigma0": 0.0, "x0": 1.0}}, "grid": {"dt": 0.5, "horizon": 4.0}})");
  const RunConfig r = build_run(d);
  ControlContext c;
  c.t = 1.0;
  c.x = 0.9;
  c.k = 2;
  const double cf = make_control(r, "closed_form")(c);
  CHECK(make_control(r, "closed_form*1.2")(c) == doctest::Approx(1.2 * cf));
  CHECK(make_control(r, "constant:0.3")(c) == 0.3);
  CHECK(make_control(r, "zero")(c) == 0.0);
  CHECK(make_control(r, "flow")(c) == doctest::Approx(0.15 * std::exp(-0.1) / std::exp(-0.1)));
  const fs::path tab = temp_file("u.csv", "t,u\n0,0.1\n2,0.3\n10,0.3\n");
  CHECK(make_control(r, "file:" + tab.string())(c) == doctest::Approx(0.2));
  const fs::path sc = temp_file("s.csv", "t,scale\n0,1.5\n100,1.5\n");
  CHECK(make_control(r, "file:" + sc.string())(c) == doctest::Approx(1.5 * cf));
  CHECK(code_of([&] { make_control(r, "file:/nonexistent.csv"); }) == ErrorCode::IoError);
  CHECK(code_of([&] { make_control(r, "wiggle"); }) == ErrorCode::ConfigError);
  fs::remove(tab);
  fs::remove(sc);
}

TEST_CASE("io helpers") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const fs::path dir = fs::temp_directory_path() / "delaymp_io_test" / "nested";
  ensure_dir(dir.string());
  const std::string csv = (dir / "a.csv").string();
  write_csv(csv, {"a", "b"}, {{1.0, 2.0}, {0.5, 0.25}});
  std::ifstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "a,b");
  CHECK(row == "1,0.5");
  CHECK(code_of([] { write_text("/nonexistent/dir/x.txt", "x"); }) == ErrorCode::IoError);
  RunManifest m;
  m.command = "simulate";
  m.seed = 4;
  const Json j = m.to_json();
  CHECK(j["command"] == "simulate");
  CHECK(j["seed"] == 4);
  fs::remove_all(fs::temp_directory_path() / "delaymp_io_test");
}
