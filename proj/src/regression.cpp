#include "delaymp/regression.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "delaymp/errors.hpp"
#include "delaymp/kernels.hpp"

namespace delaymp {

namespace {

void enumerate(std::size_t nv, std::size_t left, std::vector<int>& cur, std::size_t pos,
               std::vector<std::vector<int>>& out) {
  if (pos == nv) {
    out.push_back(cur);
    return;
  }
  for (std::size_t e = 0; e <= left; ++e) {
    cur[pos] = static_cast<int>(e);
    enumerate(nv, left - e, cur, pos + 1, out);
  }
  cur[pos] = 0;
}

}  // namespace

PolyBasis::PolyBasis(std::size_t n_vars, std::size_t degree) : n_vars_(n_vars), degree_(degree) {
  // Ordered by total degree so the constant comes first.
  for (std::size_t d = 0; d <= degree; ++d) {
    std::vector<std::vector<int>> all;
    std::vector<int> cur(n_vars, 0);
    enumerate(n_vars, d, cur, 0, all);
    for (auto& e : all) {
      int tot = 0;
      for (int v : e) tot += v;
      if (static_cast<std::size_t>(tot) == d) exps_.push_back(e);
    }
  }
}

void PolyBasis::eval(const double* z, double* out) const {
  for (std::size_t b = 0; b < exps_.size(); ++b) {
    double v = 1.0;
    for (std::size_t j = 0; j < n_vars_; ++j)
      for (int e = 0; e < exps_[b][j]; ++e) v *= z[j];
    out[b] = v;
  }
}

SliceRegression::SliceRegression(const PolyBasis& basis, std::span<const double* const> vars, std::size_t n)
    : basis_(basis), n_(n) {
  const std::size_t nv = basis.n_vars(), K = basis.size();
  if (vars.size() != nv) fail(ErrorCode::ConfigError, "regression variable count does not match the basis");
  if (n == 0) fail(ErrorCode::NonFinite, "regression on an empty slice");
  mean_.assign(nv, 0.0);
  scale_.assign(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    const double m = kernels::sum(vars[v], n) / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (vars[v][i] - m) * (vars[v][i] - m);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    mean_[v] = m;
    scale_[v] = sd > 1e-12 * (1.0 + std::abs(m)) ? 1.0 / sd : 0.0;
  }
  cols_.assign(K, std::vector<double>(n));
  std::vector<double> z(nv), row(K);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < nv; ++v) z[v] = (vars[v][i] - mean_[v]) * scale_[v];
    basis.eval(z.data(), row.data());
    for (std::size_t b = 0; b < K; ++b) cols_[b][i] = row[b];
  }
  std::vector<const double*> ptrs(K);
  for (std::size_t b = 0; b < K; ++b) ptrs[b] = cols_[b].data();
  gram_.assign(K * K, 0.0);
  kernels::gram(ptrs.data(), K, n, gram_.data());
}

std::vector<double> SliceRegression::solve(const std::vector<double>& rhs) const {
  const std::size_t K = basis_.size();
  Eigen::MatrixXd G(K, K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) G(i, j) = gram_[i * K + j];
  Eigen::VectorXd r(K);
  for (std::size_t i = 0; i < K; ++i) r(i) = rhs[i];
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
  cod.setThreshold(1e-12);
  const Eigen::VectorXd c = cod.solve(r);
  return std::vector<double>(c.data(), c.data() + K);
}

std::vector<double> SliceRegression::fit(const double* target) const {
  const std::size_t K = basis_.size();
  std::vector<double> rhs(K);
  for (std::size_t b = 0; b < K; ++b) rhs[b] = kernels::dot(cols_[b].data(), target, n_);
  return solve(rhs);
}

void SliceRegression::fitted(const double* target, double* out) const {
  const std::vector<double> c = fit(target);
  for (std::size_t i = 0; i < n_; ++i) out[i] = 0.0;
  for (std::size_t b = 0; b < c.size(); ++b) {
    if (c[b] == 0.0) continue;
    const double* col = cols_[b].data();
    for (std::size_t i = 0; i < n_; ++i) out[i] += c[b] * col[i];
  }
}

double SliceRegression::predict(const std::vector<double>& coef, const double* point) const {
  const std::size_t nv = basis_.n_vars(), K = basis_.size();
  std::vector<double> z(nv), row(K);
  for (std::size_t v = 0; v < nv; ++v) z[v] = (point[v] - mean_[v]) * scale_[v];
  basis_.eval(z.data(), row.data());
  double s = 0.0;
  for (std::size_t b = 0; b < K; ++b) s += coef[b] * row[b];
  return s;
}

}  // namespace delaymp
