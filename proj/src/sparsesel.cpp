#include "vcm/sparsesel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

namespace vcm {

GroupKernel group_kernel(std::span<const BSplineBasis> bases, const Vector& u) {
  if (u.size() == 0) throw InvalidInput("group_kernel: empty u sample");
  GroupKernel out;
  out.R.reserve(bases.size());
  const double n = static_cast<double>(u.size());
  std::vector<double> local;
  for (const auto& basis : bases) {
    Matrix r = Matrix::Zero(basis.n_basis(), basis.n_basis());
    local.resize(basis.degree() + 1);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const int first = basis.eval_nonzero(u[i], local);
      for (int a = 0; a <= basis.degree(); ++a)
        for (int b = 0; b <= basis.degree(); ++b) r(first + a, first + b) += local[a] * local[b];
    }
    out.R.push_back(r / n);
  }
  return out;
}

std::vector<Matrix> expand_groups(std::span<const BSplineBasis> bases, const Matrix& X, const Vector& u) {
  if (static_cast<std::size_t>(X.cols()) != bases.size() || X.rows() != u.size())
    throw InvalidInput("expand_groups: dimension mismatch");
  std::vector<Matrix> blocks;
  blocks.reserve(bases.size());
  for (std::size_t j = 0; j < bases.size(); ++j) {
    const Matrix xj = X.col(static_cast<Eigen::Index>(j));
    blocks.push_back(bspline_design(std::span<const BSplineBasis>(&bases[j], 1), xj, u));
  }
  return blocks;
}

GroupLassoProblem::GroupLassoProblem(std::vector<Matrix> blocks, Vector y, const GroupKernel& kernel)
    : y_(std::move(y)) {
  if (blocks.size() != kernel.R.size()) throw InvalidInput("group lasso: one kernel matrix per block required");
  require_finite(y_, "response");
  const double n = static_cast<double>(y_.size());
  blocks_.reserve(blocks.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const Matrix& z = blocks[j];
    const Matrix& r = kernel.R[j];
    if (z.rows() != y_.size() || z.cols() != r.rows() || r.rows() != r.cols())
      throw InvalidInput("group lasso: block " + std::to_string(j + 1) + " has inconsistent dimensions");
    require_finite(z, "group design block");

    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (r + r.transpose()));
    Vector values = eig.eigenvalues();
    const double top = std::max(values.maxCoeff(), 0.0);
    if (!(top > 0.0)) throw InvalidInput("group lasso: kernel matrix " + std::to_string(j + 1) + " is zero");
    values = values.cwiseMax(1e-10 * top);

    Block block;
    block.transform = eig.eigenvectors() * values.cwiseSqrt().cwiseInverse().asDiagonal();
    block.kernel = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    block.whitened = z * block.transform;
    Eigen::SelfAdjointEigenSolver<Matrix> gram((block.whitened.transpose() * block.whitened) / n);
    block.gram_vectors = gram.eigenvectors();
    block.gram_values = gram.eigenvalues().cwiseMax(0.0);
    blocks_.push_back(std::move(block));
  }
}

OlsResult GroupLassoProblem::refit(const std::vector<std::size_t>& groups) const {
  Eigen::Index cols = 0;
  for (const auto j : groups) cols += blocks_[j].whitened.cols();
  Matrix design(y_.size(), cols);
  Eigen::Index offset = 0;
  for (const auto j : groups) {
    design.middleCols(offset, blocks_[j].whitened.cols()) = blocks_[j].whitened;
    offset += blocks_[j].whitened.cols();
  }
  return ols_fit(design, y_);
}

double GroupLassoProblem::refit_rss(const std::vector<std::size_t>& groups) const {
  if (groups.empty()) return y_.squaredNorm();
  return refit(groups).rss;
}

std::vector<double> GroupLassoProblem::refit_norms(const std::vector<std::size_t>& groups) const {
  std::vector<double> norms(blocks_.size(), 0.0);
  if (groups.empty()) return norms;
  const OlsResult ols = refit(groups);
  Eigen::Index offset = 0;
  for (const auto j : groups) {
    const Eigen::Index size = blocks_[j].whitened.cols();
    norms[j] = ols.coefficients.segment(offset, size).norm();
    offset += size;
  }
  return norms;
}

std::vector<double> GroupLassoProblem::entry_lambdas(std::span<const double> weights) const {
  const double n = static_cast<double>(y_.size());
  std::vector<double> out(blocks_.size(), 0.0);
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    if (!std::isfinite(weights[j]) || weights[j] <= 0.0) continue;
    out[j] = 2.0 * (blocks_[j].whitened.transpose() * y_).norm() / n / weights[j];
  }
  return out;
}

double GroupLassoProblem::lambda_max(std::span<const double> weights) const {
  const auto entry = entry_lambdas(weights);
  return entry.empty() ? 0.0 : *std::max_element(entry.begin(), entry.end());
}

// Exact minimizer of theta' A theta - 2 b' theta + penalty ||theta||, with
// A = gram_vectors diag(gram_values) gram_vectors'.
Vector GroupLassoProblem::update_block(const Block& block, const Vector& correlation, double penalty) const {
  const Eigen::Index k = correlation.size();
  const double bnorm = correlation.norm();
  if (2.0 * bnorm <= penalty) return Vector::Zero(k);

  const Vector beta = block.gram_vectors.transpose() * correlation;
  const Vector& lam = block.gram_values;
  const double lam_max = lam.maxCoeff();
  Vector scaled(k);

  if (penalty == 0.0) {
    for (Eigen::Index i = 0; i < k; ++i) scaled[i] = lam[i] > 1e-12 * lam_max ? beta[i] / lam[i] : 0.0;
    return block.gram_vectors * scaled;
  }

  // ||theta|| = t solves sum_i beta_i^2 / (lam_i t + c)^2 = 1, c = penalty / 2.
  // The left side is convex and decreasing in t, so Newton from a point left
  // of the root increases monotonically onto it.
  const double c = 0.5 * penalty;
  double t = (bnorm - c) / lam_max;
  for (int iter = 0; iter < 200; ++iter) {
    double f = -1.0;
    double df = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double d = lam[i] * t + c;
      const double b2 = beta[i] * beta[i];
      f += b2 / (d * d);
      df -= 2.0 * b2 * lam[i] / (d * d * d);
    }
    if (f <= 0.0 || df == 0.0) break;
    const double step = f / df;
    t -= step;
    if (-step <= 1e-15 * t) break;
  }
  for (Eigen::Index i = 0; i < k; ++i) scaled[i] = t * beta[i] / (lam[i] * t + c);
  return block.gram_vectors * scaled;
}

GroupLassoFit GroupLassoProblem::solve(double lambda, std::span<const double> weights,
                                       const GroupLassoOptions& options, const GroupLassoFit* warm) const {
  if (!(lambda >= 0.0)) throw InvalidInput("group lasso: lambda must be non-negative");
  if (weights.size() != blocks_.size()) throw InvalidInput("group lasso: one weight per group required");
  const std::size_t g = blocks_.size();
  const double n = static_cast<double>(y_.size());

  std::vector<Vector> theta(g);
  Vector residual = y_;
  for (std::size_t j = 0; j < g; ++j) {
    theta[j] = Vector::Zero(blocks_[j].transform.cols());
    if (warm && std::isfinite(weights[j]) && warm->whitened.size() == g) {
      theta[j] = warm->whitened[j];
      residual -= blocks_[j].whitened * theta[j];
    }
  }

  std::vector<double> trace;
  auto sweep = [&](bool active_only) {
    double change = 0.0;
    for (std::size_t j = 0; j < g; ++j) {
      if (!std::isfinite(weights[j])) continue;
      if (active_only && theta[j].isZero(0.0)) continue;
      const Block& block = blocks_[j];
      const Vector correlation = block.whitened.transpose() * residual / n +
                                 block.gram_vectors * (block.gram_values.asDiagonal() *
                                                       (block.gram_vectors.transpose() * theta[j]));
      const Vector updated = update_block(block, correlation, lambda * weights[j]);
      const Vector delta = updated - theta[j];
      const double step = delta.lpNorm<Eigen::Infinity>();
      if (step > 0.0) {
        residual -= block.whitened * delta;
        theta[j] = updated;
        change = std::max(change, step);
      }
    }
    if (options.record_objective) {
      double pen = 0.0;
      for (std::size_t j = 0; j < g; ++j)
        if (std::isfinite(weights[j])) pen += weights[j] * theta[j].norm();
      trace.push_back(residual.squaredNorm() / n + lambda * pen);
    }
    return change;
  };

  int sweeps = 0;
  bool converged = false;
  while (sweeps < options.max_sweeps) {
    ++sweeps;
    if (sweep(false) < options.tolerance) {
      converged = true;
      break;
    }
    while (sweeps < options.max_sweeps) {
      ++sweeps;
      if (sweep(true) < options.tolerance) break;
    }
  }

  GroupLassoFit fit = finish(std::move(theta), residual, lambda, weights);
  fit.converged = converged;
  fit.sweeps = sweeps;
  fit.objective_trace = std::move(trace);
  return fit;
}

GroupLassoFit GroupLassoProblem::finish(std::vector<Vector> theta, const Vector& residual, double lambda,
                                        std::span<const double> weights) const {
  const double n = static_cast<double>(y_.size());
  GroupLassoFit fit;
  fit.lambda = lambda;
  fit.weights.assign(weights.begin(), weights.end());
  double penalty = 0.0;
  double df = 0.0;
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const double norm = theta[j].norm();
    fit.coefficients.push_back(blocks_[j].transform * theta[j]);
    fit.whitened.push_back(theta[j]);
    fit.group_norms.push_back(norm);
    if (std::isfinite(weights[j])) penalty += weights[j] * norm;
    if (norm > kGroupZeroThreshold) {
      fit.active.push_back(j);
      df += static_cast<double>(theta[j].size());
    }
  }
  fit.rss = residual.squaredNorm();
  fit.objective = fit.rss / n + lambda * penalty;
  fit.bic = n * std::log(std::max(fit.rss / n, std::numeric_limits<double>::min())) + df * std::log(n);
  return fit;
}

double GroupLassoProblem::objective(const std::vector<Vector>& coefficients, double lambda,
                                    std::span<const double> weights) const {
  const double n = static_cast<double>(y_.size());
  Vector residual = y_;
  double penalty = 0.0;
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const Vector theta = blocks_[j].transform.partialPivLu().solve(coefficients[j]);
    residual -= blocks_[j].whitened * theta;
    if (std::isfinite(weights[j])) penalty += weights[j] * std::sqrt(std::max(
        0.0, coefficients[j].dot(blocks_[j].kernel * coefficients[j])));
  }
  return residual.squaredNorm() / n + lambda * penalty;
}

GroupLassoFit group_lasso(const std::vector<Matrix>& blocks, const Vector& y, const GroupKernel& kernel,
                          double lambda1, const GroupLassoOptions& options) {
  const GroupLassoProblem problem(blocks, y, kernel);
  const std::vector<double> weights(problem.groups(), 1.0);
  return problem.solve(lambda1, weights, options);
}

std::vector<double> adaptive_weights(const GroupLassoFit& first_stage) {
  std::vector<double> w(first_stage.group_norms.size(), std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < w.size(); ++j)
    if (first_stage.group_norms[j] > kGroupZeroThreshold) w[j] = 1.0 / first_stage.group_norms[j];
  return w;
}

GroupLassoFit adaptive_group_lasso(const std::vector<Matrix>& blocks, const Vector& y, const GroupKernel& kernel,
                                   double lambda2, const GroupLassoFit& first_stage,
                                   const GroupLassoOptions& options) {
  if (first_stage.group_norms.size() != blocks.size())
    throw InvalidInput("adaptive group lasso: first stage fitted on different blocks");
  const GroupLassoProblem problem(blocks, y, kernel);
  return problem.solve(lambda2, adaptive_weights(first_stage), options);
}

PredictorKnots marginal_knots(const Dataset& data, const SelectOptions& options) {
  data.validate();
  FitOptions fit_options;
  fit_options.degree = options.degree;
  fit_options.lambda0_grid = options.lambda0_grid;
  fit_options.knot_search = options.knot_search;

  PredictorKnots knots;
  knots.per_predictor.resize(data.p());
  for (std::size_t j = 0; j < data.p(); ++j) {
    try {
      knots.per_predictor[j] = fit_one_step(data.column(j, data.y), fit_options).knots.per_predictor.front();
    } catch (const OverParameterized&) {
      knots.per_predictor[j].clear();
    }
  }
  return knots;
}

namespace {

// Best-BIC fit along a descending log-spaced lambda path with warm starts.
// Fits whose active parameter count exceeds n / 2 are not eligible and end
// the path, since BIC degenerates as the fit approaches interpolation.
std::optional<GroupLassoFit> tune_by_bic(const GroupLassoProblem& problem, std::span<const double> weights,
                                         const SelectOptions& options, bool adaptive) {
  const auto entry = problem.entry_lambdas(weights);
  const double top = entry.empty() ? 0.0 : *std::max_element(entry.begin(), entry.end());
  if (!(top > 0.0)) return std::nullopt;
  double bottom = top;
  if (adaptive) {
    for (const double e : entry)
      if (e > 0.0) bottom = std::min(bottom, e);
  }
  std::vector<double> grid = log_grid(options.lambda_min_ratio * bottom, top, options.lambda_grid_size);
  std::reverse(grid.begin(), grid.end());

  const double n = static_cast<double>(problem.n());
  std::map<std::vector<std::size_t>, double> refit_cache;
  std::optional<GroupLassoFit> best;
  std::optional<GroupLassoFit> previous;
  for (const double lambda : grid) {
    GroupLassoFit fit = problem.solve(lambda, weights, options.solver, previous ? &*previous : nullptr);
    Eigen::Index df = 0;
    for (const std::size_t j : fit.active) df += problem.block_size(j);
    if (2 * static_cast<std::size_t>(df) > problem.n()) break;
    if (options.refit_bic) {
      auto it = refit_cache.find(fit.active);
      if (it == refit_cache.end()) it = refit_cache.emplace(fit.active, problem.refit_rss(fit.active)).first;
      fit.bic = n * std::log(std::max(it->second / n, std::numeric_limits<double>::min())) +
                static_cast<double>(df) * std::log(n);
    }
    if (!best || fit.bic < best->bic) best = fit;
    previous = std::move(fit);
  }
  return best;
}

Vector column_scales(const Matrix& X, bool standardize) {
  Vector scale = Vector::Ones(X.cols());
  if (!standardize) return scale;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt(variance(X.col(j)));
    if (sd > 0.0) scale[j] = sd;
  }
  return scale;
}

}  // namespace

SelectionReport select_with_knots(const Dataset& data, const PredictorKnots& knots, const SelectOptions& options) {
  data.validate();
  if (knots.p() != data.p()) throw InvalidInput("select: one knot vector per predictor required");
  const std::size_t p = data.p();

  SelectionReport report;
  report.knots = knots;
  const Vector scale = column_scales(data.X, options.standardize);
  report.scale.assign(scale.data(), scale.data() + scale.size());
  report.group_norms.assign(p, 0.0);
  report.coefficients.resize(p);

  const double lo = data.u.minCoeff();
  const double hi = data.u.maxCoeff();
  std::vector<BSplineBasis> bases;
  bases.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    bases.emplace_back(options.degree, knots.per_predictor[j], lo, hi);
    report.coefficients[j] = Vector::Zero(bases.back().n_basis());
  }

  const Matrix scaled = data.X * scale.cwiseInverse().asDiagonal();
  const GroupKernel kernel = group_kernel(bases, data.u);
  const GroupLassoProblem problem(expand_groups(bases, scaled, data.u), data.y, kernel);

  const std::vector<double> unit(p, 1.0);
  const auto first = tune_by_bic(problem, unit, options, false);
  const double n = static_cast<double>(data.n());
  report.bic = n * std::log(std::max(data.y.squaredNorm() / n, std::numeric_limits<double>::min()));
  if (!first || first->active.empty()) return report;
  report.lambda1 = first->lambda;
  report.first_stage_active = first->active.size();

  // Stage 2 runs on the first-stage survivors only; every other group has
  // an infinite weight. Their knots may first be refined against partial
  // residuals, which removes the misfit that lets noise groups look useful.
  const std::vector<std::size_t> kept = first->active;
  std::vector<double> weights = adaptive_weights(*first);
  std::vector<BSplineBasis> kept_bases;
  for (const auto j : kept) kept_bases.push_back(bases[j]);

  if (options.refine_knots) {
    Dataset sub;
    sub.X.resize(data.X.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k)
      sub.X.col(static_cast<Eigen::Index>(k)) = data.X.col(static_cast<Eigen::Index>(kept[k]));
    sub.u = data.u;
    sub.y = data.y;
    PredictorKnots start;
    for (const auto j : kept) start.per_predictor.push_back(knots.per_predictor[j]);
    FitOptions fit_options;
    fit_options.degree = options.degree;
    fit_options.lambda0_grid = options.lambda0_grid;
    fit_options.knot_search = options.knot_search;
    try {
      const VCFit refined = fit_two_step_from(sub, fit_spline(sub, start, options.degree), fit_options);
      kept_bases.clear();
      for (std::size_t k = 0; k < kept.size(); ++k) {
        report.knots.per_predictor[kept[k]] = refined.knots.per_predictor[k];
        kept_bases.emplace_back(options.degree, refined.knots.per_predictor[k], lo, hi);
      }
    } catch (const OverParameterized&) {
      // too few rows for a joint spline fit; keep the marginal knots
    }
  }

  Matrix kept_scaled(data.X.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k)
    kept_scaled.col(static_cast<Eigen::Index>(k)) = scaled.col(static_cast<Eigen::Index>(kept[k]));
  const GroupLassoProblem reduced(expand_groups(kept_bases, kept_scaled, data.u), data.y,
                                  group_kernel(kept_bases, data.u));

  std::vector<double> kept_weights(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) kept_weights[k] = weights[kept[k]];
  if (options.refit_weights) {
    std::vector<std::size_t> all(kept.size());
    std::iota(all.begin(), all.end(), 0);
    const auto norms = reduced.refit_norms(all);
    for (std::size_t k = 0; k < kept.size(); ++k)
      if (norms[k] > kGroupZeroThreshold) kept_weights[k] = 1.0 / norms[k];
  }

  const auto second = tune_by_bic(reduced, kept_weights, options, true);
  if (!second) return report;
  report.lambda2 = second->lambda;
  report.bic = second->bic;
  for (const auto k : second->active) report.active.push_back(kept[k]);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    report.group_norms[kept[k]] = second->group_norms[k];
    report.coefficients[kept[k]] = second->coefficients[k] / scale[static_cast<Eigen::Index>(kept[k])];
  }
  return report;
}

SelectionReport select_variables(const Dataset& data, const SelectOptions& options) {
  return select_with_knots(data, marginal_knots(data, options), options);
}

std::vector<double> quantile_knots(const Vector& u, std::size_t count) {
  std::vector<double> sorted(u.data(), u.data() + u.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> knots;
  if (n < 2) return knots;
  for (std::size_t m = 1; m <= count; ++m) {
    const std::size_t idx = std::clamp<std::size_t>(m * n / (count + 1), 1, n - 1);
    const double knot = 0.5 * (sorted[idx - 1] + sorted[idx]);
    if (knot <= sorted.front() || knot >= sorted.back()) continue;
    if (!knots.empty() && knot <= knots.back()) continue;
    knots.push_back(knot);
  }
  return knots;
}

SelectionReport select_variables_equidistant(const Dataset& data, const SelectOptions& options,
                                             std::size_t max_knots) {
  SelectOptions shared = options;
  shared.refine_knots = false;
  std::optional<SelectionReport> best;
  for (std::size_t count = 1; count <= max_knots; ++count) {
    const auto knots = PredictorKnots::shared(data.p(), quantile_knots(data.u, count));
    SelectionReport report = select_with_knots(data, knots, shared);
    if (!best || report.bic < best->bic) best = std::move(report);
  }
  if (!best) throw InvalidInput("equidistant selection needs max_knots >= 1");
  return *best;
}

}  // namespace vcm
