#include "oracles.hpp"
#include "vcm/numcore.hpp"

#include <doctest.h>

#include <random>

using namespace vcm;

TEST_SUITE("numcore") {

TEST_CASE("ols of a constant column is the mean") {
  DesignMatrix X = Matrix::Ones(4, 1);
  Vector y(4);
  y << 1, 2, 3, 4;
  const OlsResult r = ols_fit(X, y);
  CHECK(r.coefficients[0] == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(r.rss == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(r.residual_variance == doctest::Approx(1.25).epsilon(1e-14));
  CHECK(r.rank == 1);
}

TEST_CASE("ols interpolates a square system") {
  Matrix X(3, 3);
  X << 2, 0, 0, 1, 3, 0, 0, 1, 4;
  Vector y(3);
  y << 1.5, -2, 7;
  const OlsResult r = ols_fit(X, y);
  CHECK(r.rss < 1e-24);
}

TEST_CASE("ols agrees with the normal equations") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix X(20, 3);
  Vector y(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = N(rng);
    y[i] = 1.0 - 2.0 * X(i, 0) + 0.5 * X(i, 2) + 0.3 * N(rng);
  }
  const Vector expected = oracle::normal_equations(X, y);
  const OlsResult r = ols_fit(X, y);
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(std::abs(r.coefficients[j] - expected[j]) <= 1e-8 * std::abs(expected[j]));

  // perturbing any coordinate never lowers rss
  for (Eigen::Index j = 0; j < 3; ++j)
    for (const double h : {-1e-4, 1e-4}) {
      Vector c = r.coefficients;
      c[j] += h;
      CHECK((y - X * c).squaredNorm() >= r.rss);
    }
}

TEST_CASE("ols on an exactly linear response") {
  Matrix X(10, 2);
  Vector y(10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = 0.1 * static_cast<double>(i);
    y[i] = 3.0 - 4.0 * X(i, 1);
  }
  CHECK(ols_fit(X, y).rss <= 1e-18 * y.squaredNorm());
}

TEST_CASE("rank-deficient design gives the minimum-norm solution") {
  Matrix X(5, 2);
  Vector y(5);
  for (Eigen::Index i = 0; i < 5; ++i) {
    X(i, 0) = X(i, 1) = static_cast<double>(i + 1);
    y[i] = 2.0 * static_cast<double>(i + 1);
  }
  const OlsResult r = ols_fit(X, y);
  CHECK(r.rank == 1);
  CHECK(r.coefficients[0] == doctest::Approx(1.0));
  CHECK(r.coefficients[1] == doctest::Approx(1.0));
}

TEST_CASE("ols rejects non-finite input") {
  Matrix X = Matrix::Ones(3, 1);
  Vector y(3);
  y << 1, std::nan(""), 2;
  CHECK_THROWS_AS(ols_fit(X, y), InvalidInput);
}

TEST_CASE("degree zero without knots is one indicator") {
  const BSplineBasis b(0, {}, 0.0, 1.0);
  const Vector v = bspline_eval(b, 0.4);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == 1.0);
}

TEST_CASE("cubic with one knot matches the textbook recursion") {
  const BSplineBasis b(3, {0.5}, 0.0, 1.0);
  CHECK(b.n_basis() == 5);
  const Vector v = bspline_eval(b, 0.25);
  const Vector w = oracle::de_boor_all(3, {0.5}, 0.0, 1.0, 0.25);
  REQUIRE(v.size() == w.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) CHECK(std::abs(v[k] - w[k]) <= 1e-12);
}

TEST_CASE("random bases: partition of unity, range and local support") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int degree = trial % 4;
    const int L = static_cast<int>(U(rng) * 9);
    std::vector<double> knots;
    for (int k = 0; k < L; ++k) knots.push_back(-1.0 + 3.0 * U(rng));
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    const BSplineBasis b(degree, knots, -1.0, 2.0);
    for (int i = 0; i < 100; ++i) {
      const double u = -1.0 + 3.0 * U(rng);
      const Vector v = bspline_eval(b, u);
      CHECK(std::abs(v.sum() - 1.0) <= 1e-12);
      const Vector w = oracle::de_boor_all(degree, knots, -1.0, 2.0, u);
      CHECK((v - w).cwiseAbs().maxCoeff() <= 1e-12);
      for (int k = 0; k < v.size(); ++k) {
        CHECK(v[k] >= 0.0);
        CHECK(v[k] <= 1.0 + 1e-15);
        const auto [a, c] = b.support(k);
        if (u < a || u > c) CHECK(v[k] == 0.0);
      }
    }
  }
}

TEST_CASE("evaluation clamps outside the boundary and hits the ends exactly") {
  const BSplineBasis b(2, {0.3, 0.6}, 0.0, 1.0);
  CHECK((bspline_eval(b, -5.0) - bspline_eval(b, 0.0)).norm() == 0.0);
  CHECK((bspline_eval(b, 7.0) - bspline_eval(b, 1.0)).norm() == 0.0);
  CHECK(bspline_eval(b, 0.0)[0] == 1.0);
  CHECK(bspline_eval(b, 1.0)[b.n_basis() - 1] == 1.0);
}

TEST_CASE("invalid bases are rejected") {
  CHECK_THROWS_AS(BSplineBasis(3, {0.5, 0.5}, 0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(BSplineBasis(3, {1.0}, 0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(BSplineBasis(3, {}, 1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(BSplineBasis(-1, {}, 0.0, 1.0), InvalidInput);
}

TEST_CASE("design blocks") {
  SUBCASE("ones with a constant basis") {
    const std::vector<BSplineBasis> bases{BSplineBasis(0, {}, 0.0, 1.0)};
    const Matrix X = Matrix::Ones(6, 1);
    const Vector u = Vector::LinSpaced(6, 0.0, 1.0);
    const DesignMatrix D = bspline_design(bases, X, u);
    CHECK(D.cols() == 1);
    CHECK((D - Matrix::Ones(6, 1)).norm() == 0.0);
  }
  SUBCASE("a zero predictor gives a zero block") {
    const std::vector<BSplineBasis> bases{BSplineBasis(1, {0.5}, 0.0, 1.0), BSplineBasis(2, {}, 0.0, 1.0)};
    Matrix X(4, 2);
    X << 1, 0, 2, 0, 3, 0, 4, 0;
    const Vector u = Vector::LinSpaced(4, 0.0, 1.0);
    const DesignMatrix D = bspline_design(bases, X, u);
    CHECK(D.cols() == 6);
    CHECK(D.rightCols(3).norm() == 0.0);
  }
  SUBCASE("hat functions by hand") {
    const std::vector<BSplineBasis> bases{BSplineBasis(1, {0.5}, 0.0, 1.0)};
    Matrix X(5, 1);
    X << 1, 2, -1, 0.5, 3;
    Vector u(5);
    u << 0.0, 0.25, 0.5, 0.75, 1.0;
    // hats centred at 0, 0.5, 1
    const double hats[5][3] = {{1, 0, 0}, {0.5, 0.5, 0}, {0, 1, 0}, {0, 0.5, 0.5}, {0, 0, 1}};
    const DesignMatrix D = bspline_design(bases, X, u);
    for (int i = 0; i < 5; ++i)
      for (int k = 0; k < 3; ++k) CHECK(D(i, k) == doctest::Approx(X(i, 0) * hats[i][k]).epsilon(1e-15));
  }
  SUBCASE("dimension mismatch") {
    const std::vector<BSplineBasis> bases{BSplineBasis(1, {}, 0.0, 1.0)};
    CHECK_THROWS_AS(bspline_design(bases, Matrix::Ones(3, 2), Vector::Zero(3)), InvalidInput);
  }
}

}
