#include "vcm/vcmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vcm {

std::size_t PredictorKnots::total() const {
  std::size_t total = 0;
  for (const auto& k : per_predictor) total += k.size();
  return total;
}

std::vector<BSplineBasis> VCFit::bases() const {
  std::vector<BSplineBasis> out;
  out.reserve(p);
  for (const auto& k : knots.per_predictor) out.emplace_back(degree, k, u_min, u_max);
  return out;
}

double VCFit::beta(std::size_t j, double u) const {
  const BSplineBasis basis(degree, knots.per_predictor[j], u_min, u_max);
  return basis.eval(u).dot(coefficients[j]);
}

double bic_value(double rss, std::size_t n, const PredictorKnots& knots, int degree) {
  const double nd = static_cast<double>(n);
  const double df = static_cast<double>(knots.total()) + static_cast<double>(knots.p()) * (degree + 1);
  const double mean_sq = std::max(rss / nd, std::numeric_limits<double>::min());
  return nd * std::log(mean_sq) + df * std::log(nd);
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (!(lo > 0.0) || !(hi >= lo)) throw InvalidInput("log grid needs 0 < lo <= hi");
  if (count == 1) return {lo};
  std::vector<double> grid(count);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    grid[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double> default_lambda0_grid() { return log_grid(0.01, 100.0, 25); }

VCFit fit_spline(const Dataset& data, const PredictorKnots& knots, int degree) {
  data.validate();
  if (knots.p() != data.p()) throw InvalidInput("fit_spline: one knot vector per predictor required");

  VCFit fit;
  fit.knots = knots;
  fit.degree = degree;
  fit.u_min = data.u.minCoeff();
  fit.u_max = data.u.maxCoeff();
  fit.n = data.n();
  fit.p = data.p();

  const auto bases = fit.bases();
  const DesignMatrix design = bspline_design(bases, data.X, data.u);
  if (design.cols() > design.rows())
    throw OverParameterized("spline design has " + std::to_string(design.cols()) + " columns for " +
                            std::to_string(design.rows()) + " observations");

  const OlsResult ols = ols_fit(design, data.y);
  Eigen::Index offset = 0;
  for (const auto& b : bases) {
    fit.coefficients.push_back(ols.coefficients.segment(offset, b.n_basis()));
    offset += b.n_basis();
  }
  fit.rss = ols.rss;
  fit.bic = bic_value(fit.rss, fit.n, fit.knots, degree);
  return fit;
}

VCFit fit_one_step(const Dataset& data, const FitOptions& options) {
  if (options.lambda0_grid.empty()) throw InvalidInput("lambda0 grid is empty");
  const KnotSearch search(data, options.knot_search);

  std::optional<VCFit> best;
  std::vector<std::vector<double>> seen;
  for (const double lambda0 : options.lambda0_grid) {
    const KnotSet knots = search.select(lambda0);
    if (std::find(seen.begin(), seen.end(), knots.knots) != seen.end()) continue;
    seen.push_back(knots.knots);

    VCFit fit;
    try {
      fit = fit_spline(data, PredictorKnots::shared(data.p(), knots.knots), options.degree);
    } catch (const OverParameterized&) {
      continue;
    }
    if (!best || fit.bic < best->bic ||
        (fit.bic == best->bic && fit.knots.total() < best->knots.total()))
      best = std::move(fit);
  }
  if (!best) throw OverParameterized("every lambda0 on the grid gives an over-parameterized spline fit");
  return *best;
}

Matrix coefficient_paths(const VCFit& fit, const Vector& u) {
  Matrix out(u.size(), static_cast<Eigen::Index>(fit.p));
  std::vector<double> local(fit.degree + 1);
  const auto bases = fit.bases();
  for (std::size_t j = 0; j < fit.p; ++j) {
    const auto& c = fit.coefficients[j];
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const int first = bases[j].eval_nonzero(u[i], local);
      double value = 0.0;
      for (int r = 0; r <= fit.degree; ++r) value += local[r] * c[first + r];
      out(i, static_cast<Eigen::Index>(j)) = value;
    }
  }
  return out;
}

Vector residual_without(const Dataset& data, const VCFit& fit, std::size_t j) {
  if (j >= fit.p || fit.p != data.p()) throw InvalidInput("residual_without: predictor index out of range");
  const Matrix beta = coefficient_paths(fit, data.u);
  Vector r = data.y;
  for (std::size_t k = 0; k < fit.p; ++k) {
    if (k == j) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    r.array() -= beta.col(kk).array() * data.X.col(kk).array();
  }
  return r;
}

namespace {

VCFit zero_model(const Dataset& data, int degree) {
  VCFit fit;
  fit.knots = PredictorKnots::shared(data.p(), {});
  fit.degree = degree;
  fit.u_min = data.u.minCoeff();
  fit.u_max = data.u.maxCoeff();
  fit.n = data.n();
  fit.p = data.p();
  fit.coefficients.assign(fit.p, Vector::Zero(degree + 1));
  fit.rss = data.y.squaredNorm();
  fit.bic = bic_value(fit.rss, fit.n, fit.knots, degree);
  return fit;
}

}  // namespace

VCFit fit_two_step(const Dataset& data, const FitOptions& options, TwoStepTrace* trace) {
  data.validate();
  VCFit initial = options.zero_init ? zero_model(data, options.degree) : fit_one_step(data, options);
  return fit_two_step_from(data, std::move(initial), options, trace);
}

VCFit fit_two_step_from(const Dataset& data, VCFit initial, const FitOptions& options, TwoStepTrace* trace) {
  data.validate();
  if (initial.p != data.p() || initial.degree != options.degree)
    throw InvalidInput("two-step: initial fit does not match the data or degree");
  VCFit current = std::move(initial);
  TwoStepTrace local;
  local.bic.push_back(current.bic);

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    std::optional<VCFit> best;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < data.p(); ++j) {
      const Dataset single = data.column(j, residual_without(data, current, j));
      ++local.knot_searches;
      VCFit marginal;
      try {
        marginal = fit_one_step(single, options);
      } catch (const OverParameterized&) {
        continue;
      }
      const auto& new_knots = marginal.knots.per_predictor.front();
      if (new_knots == current.knots.per_predictor[j]) continue;

      PredictorKnots candidate_knots = current.knots;
      candidate_knots.per_predictor[j] = new_knots;
      VCFit candidate;
      try {
        candidate = fit_spline(data, candidate_knots, options.degree);
      } catch (const OverParameterized&) {
        continue;
      }
      if (!best || candidate.bic < best->bic) {
        best = std::move(candidate);
        best_j = j;
      }
    }
    if (!best || !(best->bic < current.bic)) break;
    current = std::move(*best);
    local.bic.push_back(current.bic);
    local.updated.push_back(best_j);
  }

  if (trace) *trace = std::move(local);
  return current;
}

Vector predict(const VCFit& fit, const Matrix& X_new, const Vector& u_new) {
  if (static_cast<std::size_t>(X_new.cols()) != fit.p || X_new.rows() != u_new.size())
    throw InvalidInput("predict: dimensions do not match the fitted model");
  const Matrix beta = coefficient_paths(fit, u_new);
  return (beta.array() * X_new.array()).rowwise().sum();
}

Matrix eval_coefficients(const VCFit& fit, const Vector& u_grid) { return coefficient_paths(fit, u_grid); }

}  // namespace vcm
