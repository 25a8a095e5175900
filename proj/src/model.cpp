#include "delaymp/model.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "delaymp/errors.hpp"

namespace delaymp {

double component(const StatePoint& s, Var v) {
  switch (v) {
    case Var::x: return s.x;
    case Var::y: return s.y;
    case Var::a: return s.a;
    case Var::u: return s.u;
  }
  return 0.0;
}

StatePoint shifted(const StatePoint& s, Var v, double h) {
  StatePoint r = s;
  switch (v) {
    case Var::x: r.x += h; break;
    case Var::y: r.y += h; break;
    case Var::a: r.a += h; break;
    case Var::u: r.u += h; break;
  }
  return r;
}

ScalarCoefficient::ScalarCoefficient(Fn value, GradFn grad)
    : value_(std::move(value)), grad_(std::move(grad)) {}

Grad4 ScalarCoefficient::grad(const StatePoint& s) const {
  if (!value_) return {0.0, 0.0, 0.0, 0.0};
  if (grad_) return grad_(s);
  return fd_grad(s);
}

Grad4 ScalarCoefficient::fd_grad(const StatePoint& s) const {
  Grad4 g{0.0, 0.0, 0.0, 0.0};
  if (!value_) return g;
  for (int i = 0; i < 4; ++i) {
    const Var v = static_cast<Var>(i);
    const double h = fd_step(component(s, v));
    g[i] = (value_(shifted(s, v, h)) - value_(shifted(s, v, -h))) / (2.0 * h);
  }
  return g;
}

MarkCoefficient::MarkCoefficient(Fn value, GradFn grad)
    : value_(std::move(value)), grad_(std::move(grad)) {}

Grad4 MarkCoefficient::grad(const StatePoint& s, double z) const {
  if (!value_) return {0.0, 0.0, 0.0, 0.0};
  if (grad_) return grad_(s, z);
  return fd_grad(s, z);
}

Grad4 MarkCoefficient::fd_grad(const StatePoint& s, double z) const {
  Grad4 g{0.0, 0.0, 0.0, 0.0};
  if (!value_) return g;
  for (int i = 0; i < 4; ++i) {
    const Var v = static_cast<Var>(i);
    const double h = fd_step(component(s, v));
    g[i] = (value_(shifted(s, v, h), z) - value_(shifted(s, v, -h), z)) / (2.0 * h);
  }
  return g;
}

MarkDistribution MarkDistribution::discrete(std::vector<double> values, std::vector<double> probs) {
  if (values.empty() || values.size() != probs.size())
    fail(ErrorCode::ConfigError, "discrete marks need matching values and probabilities");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 0.0 || !std::isfinite(values[i]))
      fail(ErrorCode::ConfigError, "marks must be finite and nonzero");
    if (!(probs[i] > 0.0)) fail(ErrorCode::ConfigError, "mark probabilities must be positive");
    total += probs[i];
  }
  MarkDistribution d;
  d.discrete_ = true;
  d.values_ = std::move(values);
  d.probs_ = std::move(probs);
  for (auto& p : d.probs_) p /= total;
  d.finish();
  return d;
}

MarkDistribution MarkDistribution::uniform(double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    fail(ErrorCode::ConfigError, "uniform marks need finite lo < hi");
  MarkDistribution d;
  d.discrete_ = false;
  d.lo_ = lo;
  d.hi_ = hi;
  d.finish();
  return d;
}

void MarkDistribution::finish() {
  quad_.nodes.clear();
  quad_.weights.clear();
  if (discrete_) {
    quad_.nodes = values_;
    quad_.weights = probs_;
    cdf_.resize(probs_.size());
    std::partial_sum(probs_.begin(), probs_.end(), cdf_.begin());
    cdf_.back() = 1.0;
  } else {
    using GL = boost::math::quadrature::gauss<double, 64>;
    const auto& absc = GL::abscissa();
    const auto& w = GL::weights();
    const double mid = 0.5 * (lo_ + hi_);
    const double half = 0.5 * (hi_ - lo_);
    for (std::size_t i = absc.size(); i-- > 0;) {
      quad_.nodes.push_back(mid - half * absc[i]);
      quad_.weights.push_back(0.5 * w[i]);
    }
    for (std::size_t i = 0; i < absc.size(); ++i) {
      quad_.nodes.push_back(mid + half * absc[i]);
      quad_.weights.push_back(0.5 * w[i]);
    }
  }
  mean_ = 0.0;
  second_ = 0.0;
  for (std::size_t i = 0; i < quad_.nodes.size(); ++i) {
    mean_ += quad_.weights[i] * quad_.nodes[i];
    second_ += quad_.weights[i] * quad_.nodes[i] * quad_.nodes[i];
  }
  if (!discrete_) {
    mean_ = 0.5 * (lo_ + hi_);
    second_ = (lo_ * lo_ + lo_ * hi_ + hi_ * hi_) / 3.0;
  }
  const std::size_t nf = feature_count();
  feature_means_.assign(nf, 0.0);
  feature_gram_.assign(nf * nf, 0.0);
  std::vector<double> phi(nf);
  for (std::size_t i = 0; i < quad_.nodes.size(); ++i) {
    features(quad_.nodes[i], phi.data());
    for (std::size_t a = 0; a < nf; ++a) {
      feature_means_[a] += quad_.weights[i] * phi[a];
      for (std::size_t b = 0; b < nf; ++b) feature_gram_[a * nf + b] += quad_.weights[i] * phi[a] * phi[b];
    }
  }
}

double MarkDistribution::sample(double u01) const {
  if (!discrete_) return lo_ + (hi_ - lo_) * u01;
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u01);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), values_.size() - 1);
  return values_[i];
}

std::size_t MarkDistribution::feature_count() const { return discrete_ ? values_.size() : 2; }

void MarkDistribution::features(double z, double* out) const {
  if (discrete_) {
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = (z == values_[i]) ? 1.0 : 0.0;
  } else {
    out[0] = 1.0;
    out[1] = z;
  }
}

namespace {

std::size_t snap(double ratio, const char* what) {
  const double r = std::round(ratio);
  if (!(ratio > 0.0) || !std::isfinite(ratio) || r < 1.0 || std::abs(ratio - r) > 1e-12 * r)
    fail(ErrorCode::GridMismatch, std::string(what) + " is not an integer multiple of dt");
  return static_cast<std::size_t>(r);
}

}  // namespace

TimeGrid make_grid(double delta, double dt, double horizon) {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::GridMismatch, "dt must be positive");
  if (!(delta > 0.0)) fail(ErrorCode::GridMismatch, "delta must be positive");
  TimeGrid g;
  g.dt = dt;
  g.m = snap(delta / dt, "delta");
  g.n = snap(horizon / dt, "horizon");
  if (g.n < g.m) fail(ErrorCode::GridMismatch, "horizon must be at least delta");
  g.delta = static_cast<double>(g.m) * dt;
  g.horizon = static_cast<double>(g.n) * dt;
  return g;
}

std::vector<double> ProblemSpec::segment_values(const TimeGrid& grid) const {
  std::vector<double> v(grid.m + 1);
  for (std::size_t j = 0; j <= grid.m; ++j) {
    const double s = -grid.delta + static_cast<double>(j) * grid.dt;
    v[j] = initial_segment ? initial_segment(j == grid.m ? 0.0 : s) : 0.0;
  }
  return v;
}

void ProblemSpec::validate(const TimeGrid& grid) const {
  if (!(delta > 0.0) || !(rho > 0.0) || !(discount > 0.0) || !(lambda_avg > 0.0))
    fail(ErrorCode::ConfigError, "delta, rho, lambda_avg and discount must be positive");
  if (u_lo > u_hi) fail(ErrorCode::BadInterval, "u_lo > u_hi");
  if (std::abs(grid.delta - delta) > 1e-12 * delta)
    fail(ErrorCode::GridMismatch, "grid delay differs from problem delay");
  for (double v : segment_values(grid))
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteSegment, "initial segment is not finite on the grid");
  if (jump && jump->intensity < 0.0) fail(ErrorCode::ConfigError, "jump intensity must be nonnegative");
}

double nu_integral(const ProblemSpec& spec, const std::function<double(double)>& g) {
  if (!spec.jump || !spec.jump->active()) return 0.0;
  const auto& q = spec.jump->marks.quadrature();
  double s = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * g(q.nodes[i]);
  return spec.jump->intensity * s;
}

}  // namespace delaymp
