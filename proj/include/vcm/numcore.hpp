/**
 * @file numcore.hpp
 * @brief Shared numerical kernels: least squares, B-spline bases, spline designs.
 *
 * Matrices are Eigen column-major. B-spline bases use the clamped knot
 * vector convention: the lower and upper boundary are each repeated
 * degree + 1 times around the interior knots, so a basis of degree D with
 * L interior knots has exactly D + L + 1 functions.
 */
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Column-major dense design, one row per observation.
using DesignMatrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (non-finite values, size mismatch).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A spline model with more coefficients than observations.
class OverParameterized : public Error {
 public:
  using Error::Error;
};

struct OlsResult {
  Vector coefficients;
  double rss = 0.0;
  /// rss / n (maximum-likelihood denominator).
  double residual_variance = 0.0;
  Eigen::Index rank = 0;
};

/// Minimum-norm least squares via complete orthogonal decomposition.
/// Pivots below 1e-10 times the largest pivot are treated as zero.
OlsResult ols_fit(const DesignMatrix& design, const Vector& response);

class BSplineBasis {
 public:
  /// Throws InvalidInput unless lower < upper and the interior knots are
  /// strictly increasing and strictly inside (lower, upper).
  BSplineBasis(int degree, std::vector<double> interior_knots, double lower, double upper);

  int degree() const { return degree_; }
  const std::vector<double>& interior_knots() const { return interior_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int n_basis() const { return degree_ + static_cast<int>(interior_.size()) + 1; }

  /// Full clamped knot vector, length n_basis() + degree() + 1.
  const std::vector<double>& knot_vector() const { return knots_; }

  /// Values of the degree()+1 basis functions that may be nonzero at u,
  /// written to out[0..degree()]. Returns the index of the first one.
  /// u outside [lower, upper] is clamped to the boundary.
  int eval_nonzero(double u, std::span<double> out) const;

  /// All n_basis() values at u (clamped).
  Vector eval(double u) const;

  /// Support interval [t_k, t_{k+degree+1}] of basis function k.
  std::pair<double, double> support(int k) const;

 private:
  int find_span(double u) const;

  int degree_;
  std::vector<double> interior_;
  double lower_;
  double upper_;
  std::vector<double> knots_;
};

Vector bspline_eval(const BSplineBasis& basis, double u);

/// Expanded varying-coefficient design: column block j holds
/// X(i, j) * B_{j,k}(u_i) for k = 0..n_basis_j - 1.
DesignMatrix bspline_design(std::span<const BSplineBasis> bases, const Matrix& X, const Vector& u);

/// Throws InvalidInput naming `what` if any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& values, const std::string& what);

/// Population variance (denominator n).
double variance(const Vector& v);

}  // namespace vcm
