#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace delaymp {

/// Monomials of total degree <= degree in a few standardized variables.
class PolyBasis {
 public:
  PolyBasis(std::size_t n_vars, std::size_t degree);

  std::size_t size() const { return exps_.size(); }
  std::size_t n_vars() const { return n_vars_; }
  std::size_t degree() const { return degree_; }
  const std::vector<std::vector<int>>& exponents() const { return exps_; }
  /// out[size()] for one standardized point.
  void eval(const double* z, double* out) const;

 private:
  std::size_t n_vars_, degree_;
  std::vector<std::vector<int>> exps_;
};

/// Least-squares projection on one time slice: several targets share one
/// design matrix. Variables are standardized with the slice mean and
/// standard deviation; constant variables drop out.
class SliceRegression {
 public:
  /// vars[v][i] is variable v on sample i (n samples).
  SliceRegression(const PolyBasis& basis, std::span<const double* const> vars, std::size_t n);

  std::size_t samples() const { return n_; }
  /// Coefficients of the projection of target (n values).
  std::vector<double> fit(const double* target) const;
  /// In-sample fitted values of the projection of target.
  void fitted(const double* target, double* out) const;
  /// Evaluates coefficients at a raw point.
  double predict(const std::vector<double>& coef, const double* point) const;

 private:
  const PolyBasis& basis_;
  std::size_t n_;
  std::vector<double> mean_, scale_;
  std::vector<std::vector<double>> cols_;  ///< design columns
  std::vector<double> gram_;
  std::vector<double> solve(const std::vector<double>& rhs) const;
};

}  // namespace delaymp
