/**
 * @file sparsesel.hpp
 * @brief Predictor selection for high-dimensional varying-coefficient models.
 *
 * Pipeline:
 *   1. marginal_knots: one-step knot selection of each predictor against y.
 *   2. group_lasso: one group per predictor's spline block, penalty
 *      lambda1 * sum_j (c_j' R_j c_j)^{1/2} with R_j = E[B_j(u) B_j(u)'].
 *   3. adaptive_group_lasso: same penalty reweighted by the first-stage
 *      group norms; groups zeroed in stage 2 are excluded.
 * lambda1 and lambda2 are tuned by BIC counting only the selected groups.
 *
 * select_with_knots adds two refinements between the stages (both on by
 * default, see SelectOptions): the survivors' knots are re-selected by the
 * two-step search, and their weights come from an unpenalized refit. With
 * only marginal knots a strong coefficient is often fit by a bare cubic, and
 * the structured misfit lets pure-noise predictors lower BIC.
 *
 * The solver works in whitened coordinates theta_j = R_j^{1/2} c_j, where the
 * penalty becomes a plain Euclidean group norm, and minimizes each block
 * exactly (a one-dimensional root find on the block's eigenbasis).
 */
#pragma once

#include "vcm/dataset.hpp"
#include "vcm/knotdp.hpp"
#include "vcm/vcmodel.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace vcm {

/// Group norms at or below this value count as zero.
inline constexpr double kGroupZeroThreshold = 1e-8;

/// Per-predictor matrices R_j with entries (1/n) sum_i B_{j,k1}(u_i) B_{j,k2}(u_i).
struct GroupKernel {
  std::vector<Matrix> R;
};

GroupKernel group_kernel(std::span<const BSplineBasis> bases, const Vector& u);

/// Block j is the n x n_basis_j matrix with entries X(i, j) * B_{j,k}(u_i).
std::vector<Matrix> expand_groups(std::span<const BSplineBasis> bases, const Matrix& X, const Vector& u);

struct GroupLassoOptions {
  double tolerance = 1e-7;  ///< max whitened coefficient change per sweep
  int max_sweeps = 10000;
  bool record_objective = false;
};

struct GroupLassoFit {
  std::vector<Vector> coefficients;  ///< c_j per group
  std::vector<Vector> whitened;      ///< theta_j = R_j^{1/2} c_j (solver state)
  std::vector<double> group_norms;   ///< (c_j' R_j c_j)^{1/2}
  std::vector<double> weights;       ///< penalty factor per group; infinity = excluded
  std::vector<std::size_t> active;   ///< groups with norm > kGroupZeroThreshold
  double lambda = 0.0;
  double objective = 0.0;  ///< (1/n) rss + lambda * sum_j w_j norm_j
  double rss = 0.0;
  /// n log(rss / n) + (sum of active block sizes) log n
  double bic = 0.0;
  bool converged = true;
  int sweeps = 0;
  std::vector<double> objective_trace;  ///< after each sweep, when recorded
};

/// Precomputed whitening and block Gram eigensystems for repeated solves on
/// one design (a lambda path, or both selection stages).
class GroupLassoProblem {
 public:
  GroupLassoProblem(std::vector<Matrix> blocks, Vector y, const GroupKernel& kernel);

  std::size_t groups() const { return blocks_.size(); }
  std::size_t n() const { return static_cast<std::size_t>(y_.size()); }
  Eigen::Index block_size(std::size_t j) const { return blocks_[j].transform.cols(); }

  /// Per group, the smallest lambda at which it stays zero when every group
  /// is zero: ||gradient_j(0)|| / w_j in whitened coordinates. Zero for
  /// excluded groups.
  std::vector<double> entry_lambdas(std::span<const double> weights) const;

  /// Smallest lambda at which every group is zero for the given weights.
  double lambda_max(std::span<const double> weights) const;

  /// Minimizes the weighted group-lasso objective. `warm` (same problem) seeds
  /// the coefficients; groups with infinite weight stay at zero.
  GroupLassoFit solve(double lambda, std::span<const double> weights, const GroupLassoOptions& options,
                      const GroupLassoFit* warm = nullptr) const;

  /// Residual sum of squares of the unpenalized least-squares fit on the
  /// given groups (y itself when empty).
  double refit_rss(const std::vector<std::size_t>& groups) const;

  /// Group norms (c_j' R_j c_j)^{1/2} of that refit, zero for other groups.
  std::vector<double> refit_norms(const std::vector<std::size_t>& groups) const;

  /// Objective recomputed from coefficients.
  double objective(const std::vector<Vector>& coefficients, double lambda, std::span<const double> weights) const;

 private:
  struct Block {
    Matrix transform;  // c = transform * theta
    Matrix kernel;     // floored R_j used for norms
    Matrix whitened;   // Z_j * transform
    Matrix gram_vectors;
    Vector gram_values;  // eigensystem of whitened' whitened / n
  };

  OlsResult refit(const std::vector<std::size_t>& groups) const;
  Vector update_block(const Block& block, const Vector& correlation, double penalty) const;
  GroupLassoFit finish(std::vector<Vector> theta, const Vector& residual, double lambda,
                       std::span<const double> weights) const;

  std::vector<Block> blocks_;
  Vector y_;
};

/// Plain group lasso (unit weights).
GroupLassoFit group_lasso(const std::vector<Matrix>& blocks, const Vector& y, const GroupKernel& kernel,
                          double lambda1, const GroupLassoOptions& options = {});

/// Weights w_j = 1 / first-stage norm, infinite where the first stage is zero.
std::vector<double> adaptive_weights(const GroupLassoFit& first_stage);

GroupLassoFit adaptive_group_lasso(const std::vector<Matrix>& blocks, const Vector& y, const GroupKernel& kernel,
                                   double lambda2, const GroupLassoFit& first_stage,
                                   const GroupLassoOptions& options = {});

struct SelectOptions {
  int degree = 3;
  std::vector<double> lambda0_grid = default_lambda0_grid();
  KnotSelectOptions knot_search;
  std::size_t lambda_grid_size = 25;
  /// First stage spans [ratio * lambda_max, lambda_max]. The adaptive stage
  /// extends down to ratio * (smallest entry lambda of a surviving group),
  /// since adaptive weights spread the entry points over many decades.
  double lambda_min_ratio = 1e-3;
  /// Rescale each predictor to unit standard deviation before penalizing.
  bool standardize = true;
  /// Score lambda with the BIC of a least-squares refit on the selected
  /// groups instead of the penalized fit's own rss.
  bool refit_bic = true;
  /// Adaptive weights from the norms of a least-squares refit on the
  /// first-stage active set rather than the shrunken first-stage norms.
  bool refit_weights = true;
  /// Before the adaptive stage, re-select the knots of the first-stage
  /// survivors by the two-step search on those predictors alone.
  bool refine_knots = true;
  GroupLassoOptions solver;
};

/// Knots from a one-step fit of each predictor alone against y.
PredictorKnots marginal_knots(const Dataset& data, const SelectOptions& options);

struct SelectionReport {
  std::vector<std::size_t> active;  ///< 0-based predictor indices
  std::vector<double> group_norms;  ///< second-stage norms, standardized scale
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double bic = 0.0;
  PredictorKnots knots;
  std::vector<Vector> coefficients;  ///< second-stage c_j on the original predictor scale
  std::vector<double> scale;         ///< divisor applied to each predictor
  std::size_t first_stage_active = 0;
};

/// Stages 2 and 3 starting from the given per-predictor knots. With
/// refine_knots the reported knots of first-stage survivors are the refined ones.
SelectionReport select_with_knots(const Dataset& data, const PredictorKnots& knots, const SelectOptions& options);

/// Full pipeline: marginal knots, then select_with_knots.
SelectionReport select_variables(const Dataset& data, const SelectOptions& options = {});

/// L interior knots at the m / (L + 1) quantiles of u (duplicates dropped).
std::vector<double> quantile_knots(const Vector& u, std::size_t count);

/// Baseline with equally spaced quantile knots shared by all predictors; the
/// knot count is chosen from 1..max_knots by the final BIC. Knots are never
/// refined here.
SelectionReport select_variables_equidistant(const Dataset& data, const SelectOptions& options,
                                             std::size_t max_knots = 10);

}  // namespace vcm
