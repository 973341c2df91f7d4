#include "vcm/numcore.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace vcm {

void require_finite(const Eigen::Ref<const Matrix>& values, const std::string& what) {
  if (!values.allFinite()) throw InvalidInput(what + " contains non-finite values");
}

double variance(const Vector& v) {
  if (v.size() == 0) return 0.0;
  const double mean = v.mean();
  return (v.array() - mean).square().mean();
}

OlsResult ols_fit(const DesignMatrix& design, const Vector& response) {
  if (design.rows() < 1 || design.cols() < 1) throw InvalidInput("ols_fit: empty design");
  if (design.rows() != response.size()) throw InvalidInput("ols_fit: design rows and response length differ");
  require_finite(design, "ols_fit design");
  require_finite(response, "ols_fit response");

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(1e-10);
  cod.compute(design);

  OlsResult out;
  out.coefficients = cod.solve(response);
  out.rss = (response - design * out.coefficients).squaredNorm();
  out.residual_variance = out.rss / static_cast<double>(design.rows());
  out.rank = cod.rank();
  return out;
}

BSplineBasis::BSplineBasis(int degree, std::vector<double> interior_knots, double lower, double upper)
    : degree_(degree), interior_(std::move(interior_knots)), lower_(lower), upper_(upper) {
  if (degree_ < 0) throw InvalidInput("B-spline degree must be non-negative");
  if (!std::isfinite(lower_) || !std::isfinite(upper_) || !(lower_ < upper_))
    throw InvalidInput("B-spline boundary must satisfy lower < upper");
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    const double d = interior_[k];
    if (!std::isfinite(d) || d <= lower_ || d >= upper_)
      throw InvalidInput("interior knot outside the open boundary interval");
    if (k > 0 && !(interior_[k - 1] < d)) throw InvalidInput("interior knots must be strictly increasing");
  }
  knots_.reserve(interior_.size() + 2 * static_cast<std::size_t>(degree_) + 2);
  knots_.insert(knots_.end(), degree_ + 1, lower_);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), degree_ + 1, upper_);
}

int BSplineBasis::find_span(double u) const {
  const int last = n_basis() - 1;
  if (u >= upper_) return last;
  // largest s in [degree, last] with knots_[s] <= u
  const auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + last + 1, u);
  return static_cast<int>(it - knots_.begin()) - 1;
}

int BSplineBasis::eval_nonzero(double u, std::span<double> out) const {
  u = std::clamp(u, lower_, upper_);
  const int span = find_span(u);
  std::array<double, 16> left{};
  std::array<double, 16> right{};
  std::vector<double> heap_left;
  std::vector<double> heap_right;
  double* lp = left.data();
  double* rp = right.data();
  if (degree_ + 1 > static_cast<int>(left.size())) {
    heap_left.assign(degree_ + 1, 0.0);
    heap_right.assign(degree_ + 1, 0.0);
    lp = heap_left.data();
    rp = heap_right.data();
  }

  out[0] = 1.0;
  for (int j = 1; j <= degree_; ++j) {
    lp[j] = u - knots_[span + 1 - j];
    rp[j] = knots_[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (rp[r + 1] + lp[j - r]);
      out[r] = saved + rp[r + 1] * temp;
      saved = lp[j - r] * temp;
    }
    out[j] = saved;
  }
  return span - degree_;
}

Vector BSplineBasis::eval(double u) const {
  Vector values = Vector::Zero(n_basis());
  std::vector<double> local(degree_ + 1);
  const int first = eval_nonzero(u, local);
  for (int r = 0; r <= degree_; ++r) values[first + r] = local[r];
  return values;
}

std::pair<double, double> BSplineBasis::support(int k) const {
  return {knots_[k], knots_[k + degree_ + 1]};
}

Vector bspline_eval(const BSplineBasis& basis, double u) { return basis.eval(u); }

DesignMatrix bspline_design(std::span<const BSplineBasis> bases, const Matrix& X, const Vector& u) {
  if (X.rows() != u.size()) throw InvalidInput("bspline_design: X rows and u length differ");
  if (static_cast<std::size_t>(X.cols()) != bases.size())
    throw InvalidInput("bspline_design: one basis per predictor required");
  require_finite(X, "predictor matrix");
  require_finite(u, "conditioner");

  Eigen::Index total = 0;
  for (const auto& b : bases) total += b.n_basis();

  DesignMatrix design = DesignMatrix::Zero(X.rows(), total);
  std::vector<double> local;
  Eigen::Index offset = 0;
  for (std::size_t j = 0; j < bases.size(); ++j) {
    const auto& basis = bases[j];
    local.resize(basis.degree() + 1);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int first = basis.eval_nonzero(u[i], local);
      const double x = X(i, static_cast<Eigen::Index>(j));
      for (int r = 0; r <= basis.degree(); ++r) design(i, offset + first + r) = x * local[r];
    }
    offset += basis.n_basis();
  }
  return design;
}

}  // namespace vcm
