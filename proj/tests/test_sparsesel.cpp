#include "oracles.hpp"
#include "vcm/simbench.hpp"
#include "vcm/sparsesel.hpp"

#include <doctest.h>

#include <random>

using namespace vcm;

namespace {

struct Instance {
  std::vector<BSplineBasis> bases;
  std::vector<Matrix> blocks;
  GroupKernel kernel;
  Vector y;
};

Instance random_instance(std::mt19937_64& rng, std::size_t groups, Eigen::Index n) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix X(n, static_cast<Eigen::Index>(groups));
  Vector u(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    u[i] = U(rng);
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = N(rng);
  }
  Instance inst;
  for (std::size_t j = 0; j < groups; ++j) {
    std::vector<double> knots;
    if (j % 2 == 1) knots = {0.5};
    inst.bases.emplace_back(static_cast<int>(1 + j % 3), knots, u.minCoeff(), u.maxCoeff());
  }
  inst.blocks = expand_groups(inst.bases, X, u);
  inst.kernel = group_kernel(inst.bases, u);
  inst.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    inst.y[i] = (1.0 + u[i]) * X(i, 0) - 2.0 * std::sin(3.0 * u[i]) * X(i, 1) + 0.5 * N(rng);
  return inst;
}

}  // namespace

TEST_SUITE("sparsesel") {

TEST_CASE("kernel matches quadrature of the basis products") {
  const BSplineBasis b(3, {0.3, 0.7}, 0.0, 1.0);
  const Eigen::Index n = 10000;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vector u(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] = U(rng);
  u[0] = 0.0;
  u[1] = 1.0;
  const std::vector<BSplineBasis> bases{b};
  const GroupKernel K = group_kernel(bases, u);

  // Gauss-Legendre on a fine partition, exact for these piecewise polynomials.
  const double nodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  const double wts[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
  const std::vector<double> breaks{0.0, 0.3, 0.7, 1.0};
  Matrix Q = Matrix::Zero(b.n_basis(), b.n_basis());
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], c = breaks[s + 1];
    for (int q = 0; q < 4; ++q) {
      const double x = 0.5 * (a + c) + 0.5 * (c - a) * nodes[q];
      const Vector v = oracle::de_boor_all(3, {0.3, 0.7}, 0.0, 1.0, x);
      Q += 0.5 * (c - a) * wts[q] * v * v.transpose();
    }
  }
  CHECK((K.R[0] - Q).cwiseAbs().maxCoeff() < 0.02);
  CHECK((K.R[0] - K.R[0].transpose()).norm() < 1e-14);
}

TEST_CASE("lambda at or above lambda_max zeroes every group") {
  std::mt19937_64 rng(2);
  const Instance inst = random_instance(rng, 4, 80);
  const GroupLassoProblem problem(inst.blocks, inst.y, inst.kernel);
  const std::vector<double> w(4, 1.0);
  const double top = problem.lambda_max(w);
  CHECK(problem.solve(top * 1.0001, w, {}).active.empty());
  CHECK(!problem.solve(top * 0.9, w, {}).active.empty());
}

TEST_CASE("zero penalty is least squares") {
  std::mt19937_64 rng(3);
  const Instance inst = random_instance(rng, 3, 100);
  GroupLassoOptions opts;
  opts.tolerance = 1e-12;
  const GroupLassoFit fit = group_lasso(inst.blocks, inst.y, inst.kernel, 0.0, opts);
  Matrix D(100, 0);
  for (const auto& b : inst.blocks) {
    Matrix wider(100, D.cols() + b.cols());
    wider << D, b;
    D = wider;
  }
  const double ols_rss = ols_fit(D, inst.y).rss;
  CHECK(fit.rss == doctest::Approx(ols_rss).epsilon(1e-8));
}

TEST_CASE("optimality conditions and monotone objective") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 8; ++trial) {
    const Instance inst = random_instance(rng, 2 + trial % 4, 60 + 5 * trial);
    const GroupLassoProblem problem(inst.blocks, inst.y, inst.kernel);
    const std::vector<double> w(inst.blocks.size(), 1.0);
    const double top = problem.lambda_max(w);
    GroupLassoOptions opts;
    opts.record_objective = true;
    for (const double frac : {0.02, 0.2, 0.6}) {
      const GroupLassoFit fit = problem.solve(frac * top, w, opts);
      CHECK(fit.converged);
      CHECK(oracle::kkt_violation(inst.blocks, inst.y, inst.kernel, fit, frac * top, w) <= 1e-6);
      for (std::size_t s = 1; s < fit.objective_trace.size(); ++s)
        CHECK(fit.objective_trace[s] <= fit.objective_trace[s - 1] + 1e-12);
      CHECK(problem.objective(fit.coefficients, frac * top, w) == doctest::Approx(fit.objective).epsilon(1e-10));
    }
  }
}

TEST_CASE("adaptive stage excludes groups zeroed in the first stage") {
  std::mt19937_64 rng(5);
  const Instance inst = random_instance(rng, 5, 100);
  const GroupLassoProblem problem(inst.blocks, inst.y, inst.kernel);
  const std::vector<double> unit(5, 1.0);
  const GroupLassoFit first = problem.solve(0.5 * problem.lambda_max(unit), unit, {});
  const auto w = adaptive_weights(first);
  for (std::size_t j = 0; j < 5; ++j) {
    if (first.group_norms[j] > kGroupZeroThreshold) CHECK(w[j] == doctest::Approx(1.0 / first.group_norms[j]));
    else CHECK(std::isinf(w[j]));
  }
  const GroupLassoFit second = adaptive_group_lasso(inst.blocks, inst.y, inst.kernel, 1e-3, first);
  for (const auto j : second.active) CHECK(std::isfinite(w[j]));

  // lambda2 = 0 on the survivors is least squares restricted to them
  GroupLassoOptions opts;
  opts.tolerance = 1e-12;
  const GroupLassoFit free = adaptive_group_lasso(inst.blocks, inst.y, inst.kernel, 0.0, first, opts);
  CHECK(free.rss == doctest::Approx(problem.refit_rss(first.active)).epsilon(1e-8));
}

TEST_CASE("active set shrinks along the lambda path") {
  std::mt19937_64 rng(6);
  const Instance inst = random_instance(rng, 5, 120);
  const GroupLassoProblem problem(inst.blocks, inst.y, inst.kernel);
  const std::vector<double> w(5, 1.0);
  const auto grid = log_grid(1e-3 * problem.lambda_max(w), problem.lambda_max(w), 25);
  std::size_t previous = 6;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    const std::size_t size = problem.solve(*it, w, {}).active.size();
    CHECK(size <= previous);
    previous = size;
  }
}

TEST_CASE("quantile knots") {
  const Vector u = Vector::LinSpaced(101, 0.0, 1.0);
  const auto k = quantile_knots(u, 3);
  REQUIRE(k.size() == 3);
  CHECK(k[0] == doctest::Approx(0.245).epsilon(1e-9));
  CHECK(k[1] == doctest::Approx(0.495).epsilon(1e-9));
}

TEST_CASE("selection finds the signal predictors in a small sparse design") {
  LongitudinalDesign design;
  design.n_individuals = 100;
  design.n_schedule = 30;
  const SimulatedData sim = simulate_wei(design, 77, 20);
  SelectOptions opts = table2_select_options();
  const SelectionReport report = select_variables(sim.data, opts);
  CHECK(report.active == sim.true_active);
  CHECK(report.first_stage_active >= report.active.size());
  CHECK(report.lambda1 > 0.0);
  CHECK(report.lambda2 > 0.0);
  CHECK(report.knots.p() == 20);
}

}
