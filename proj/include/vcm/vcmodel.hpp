/**
 * @file vcmodel.hpp
 * @brief Varying-coefficient spline fits with adaptively selected knots.
 *
 * One-step fitting selects a single knot set shared by all predictors and
 * tunes lambda0 by BIC. Two-step fitting starts from the one-step model and
 * repeatedly re-selects the knots of one predictor against the residual
 * without it, accepting the predictor whose update lowers BIC the most.
 */
#pragma once

#include "vcm/dataset.hpp"
#include "vcm/knotdp.hpp"

#include <cstddef>
#include <vector>

namespace vcm {

struct PredictorKnots {
  std::vector<std::vector<double>> per_predictor;

  static PredictorKnots shared(std::size_t p, const std::vector<double>& knots) {
    return PredictorKnots{std::vector<std::vector<double>>(p, knots)};
  }
  std::size_t p() const { return per_predictor.size(); }
  std::size_t total() const;
  bool operator==(const PredictorKnots&) const = default;
};

struct VCFit {
  PredictorKnots knots;
  int degree = 3;
  double u_min = 0.0;
  double u_max = 1.0;
  std::vector<Vector> coefficients;  ///< c_j, length L_j + degree + 1
  double rss = 0.0;
  double bic = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;

  std::vector<BSplineBasis> bases() const;
  /// beta_j(u), with u clamped to [u_min, u_max].
  double beta(std::size_t j, double u) const;
};

/// n log(rss / n) + {sum_j L_j + p (degree + 1)} log n. With shared knots the
/// penalty equals p (L + degree + 1) log n.
double bic_value(double rss, std::size_t n, const PredictorKnots& knots, int degree);

/// 25 log-spaced values from 0.01 to 100.
std::vector<double> default_lambda0_grid();

/// `count` log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

struct FitOptions {
  int degree = 3;
  std::vector<double> lambda0_grid = default_lambda0_grid();
  KnotSelectOptions knot_search;
  int max_sweeps = 10;
  /// Start the two-step search from the zero model instead of the one-step fit.
  bool zero_init = false;
};

/// Least-squares spline fit with fixed per-predictor knots and boundary
/// [min u, max u]. Throws OverParameterized when the expanded design has
/// more columns than rows.
VCFit fit_spline(const Dataset& data, const PredictorKnots& knots, int degree);

/// Global knots: for each lambda0, select knots then fit; keep the lowest BIC
/// (ties to fewer knots). Grid points whose fit is over-parameterized are
/// skipped.
VCFit fit_one_step(const Dataset& data, const FitOptions& options = {});

/// r_i = y_i - sum_{j' != j} beta_j'(u_i) x_{i,j'}.
Vector residual_without(const Dataset& data, const VCFit& fit, std::size_t j);

struct TwoStepTrace {
  std::vector<double> bic;            ///< initial BIC, then one entry per accepted update
  std::vector<std::size_t> updated;   ///< predictor accepted at each update
  std::size_t knot_searches = 0;      ///< single-predictor one-step runs performed
};

/// Predictor-specific knots driven by BIC. Each sweep re-selects the knots of
/// every predictor against its residual, refits all blocks jointly, and
/// accepts the best one if it lowers BIC. Stops when nothing improves or
/// after max_sweeps accepted updates.
VCFit fit_two_step(const Dataset& data, const FitOptions& options = {}, TwoStepTrace* trace = nullptr);

/// Two-step search from a given starting fit (ignores options.zero_init).
VCFit fit_two_step_from(const Dataset& data, VCFit initial, const FitOptions& options,
                        TwoStepTrace* trace = nullptr);

/// y_hat = sum_j beta_j(u) x_j with u clamped to the training range.
Vector predict(const VCFit& fit, const Matrix& X_new, const Vector& u_new);

/// |grid| x p matrix of beta_j(u) at each grid point (clamped).
Matrix eval_coefficients(const VCFit& fit, const Vector& u_grid);

/// Fitted beta_j(u_i) at every row of a dataset, n x p.
Matrix coefficient_paths(const VCFit& fit, const Vector& u);

}  // namespace vcm
