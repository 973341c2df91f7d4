#include "vcm/simbench.hpp"

#include <doctest.h>

#include <algorithm>

#include <atomic>
#include <set>
#include <sstream>

using namespace vcm;

namespace {

Vector residual_error(const SimulatedData& sim) {
  const Dataset& d = sim.data;
  Vector e = d.y;
  for (Eigen::Index i = 0; i < e.size(); ++i)
    for (std::size_t j = 0; j < sim.signal_predictors; ++j)
      e[i] -= sim.beta(j, d.u[i]) * d.X(i, static_cast<Eigen::Index>(j));
  return e;
}

}  // namespace

TEST_SUITE("simbench") {

TEST_CASE("replicate seeds are deterministic and distinct") {
  CHECK(replicate_seed(1, 0) == replicate_seed(1, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 1000; ++r) seen.insert(replicate_seed(42, r));
  CHECK(seen.size() == 1000);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(97);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, 4);
  for (const auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("tang design layout") {
  LongitudinalDesign design;
  design.n_individuals = 50;
  const SimulatedData a = simulate_tang(design, 9);
  const SimulatedData b = simulate_tang(design, 9);
  CHECK(a.data.y == b.data.y);
  CHECK(a.data.X == b.data.X);
  CHECK(a.data.p() == 4);
  std::set<std::int64_t> ids(a.data.individual_id.begin(), a.data.individual_id.end());
  CHECK(ids.size() == 50);
  CHECK(a.data.u.minCoeff() >= 0.0);
  CHECK(a.data.u.maxCoeff() < 20.0);
  CHECK((a.data.X.col(0).array() == 1.0).all());
  CHECK((a.data.X.col(1).array() * (1.0 - a.data.X.col(1).array()) == 0.0).all());
  // about 40 percent of the 20 visits are kept
  const double per_individual = static_cast<double>(a.data.n()) / 50.0;
  CHECK(per_individual > 6.0);
  CHECK(per_individual < 10.0);
  CHECK(simulate_tang(design, 10).data.y != a.data.y);
}

TEST_CASE("wei design layout") {
  LongitudinalDesign design;
  design.n_individuals = 20;
  design.n_schedule = 30;
  const SimulatedData sim = simulate_wei(design, 4, 40);
  CHECK(sim.data.p() == 40);
  CHECK(sim.true_active == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(sim.data.u.maxCoeff() < 30.0);
  CHECK_THROWS_AS(simulate_wei(design, 4, 5), InvalidInput);
}

TEST_CASE("error process variance and within-individual correlation") {
  LongitudinalDesign design;
  design.n_individuals = 3000;
  const SimulatedData sim = simulate_tang(design, 123);
  const Vector e = residual_error(sim);
  const double n = static_cast<double>(e.size());
  const double mean = e.mean();
  const double var = (e.array() - mean).square().sum() / n;
  CHECK(std::abs(mean) < 0.1);
  CHECK(var == doctest::Approx(8.0).epsilon(0.05));

  // consecutive observations of one individual: E[e_a e_b] = 4 exp(-|t_a - t_b|)
  double cross = 0.0, model = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 1; i < e.size(); ++i) {
    if (sim.data.individual_id[i] != sim.data.individual_id[i - 1]) continue;
    cross += e[i] * e[i - 1];
    model += 4.0 * std::exp(-std::abs(sim.data.u[i] - sim.data.u[i - 1]));
    ++pairs;
  }
  REQUIRE(pairs > 1000);
  CHECK(cross / pairs == doctest::Approx(model / pairs).epsilon(0.15));

  // different individuals are independent
  double between = 0.0;
  std::size_t bpairs = 0;
  for (Eigen::Index i = 1; i < e.size(); ++i) {
    if (sim.data.individual_id[i] == sim.data.individual_id[i - 1]) continue;
    between += e[i] * e[i - 1];
    ++bpairs;
  }
  CHECK(std::abs(between / bpairs) < 0.5);
}

TEST_CASE("normalized coefficient error") {
  const Vector t = Vector::LinSpaced(11, 0.0, 10.0);
  const auto truth = [](std::size_t, double x) { return x; };
  Matrix exact(11, 1);
  exact.col(0) = t;
  CHECK(mse_beta(exact, truth, t)[0] == 0.0);
  Matrix shifted = exact.array() + 1.0;
  // squared error 1 over a squared range of 100
  CHECK(mse_beta(shifted, truth, t)[0] == doctest::Approx(0.01));
  const auto flat = [](std::size_t, double) { return 2.0; };
  CHECK_THROWS_AS(mse_beta(exact, flat, t), InvalidInput);
}

TEST_CASE("table 1 summary schema") {
  const Table1Summary s = run_table1(2, 40, 5, table1_fit_options(), 1);
  REQUIRE(s.replicates.size() == 2);
  std::ostringstream out;
  write_table1_csv(out, s);
  std::istringstream lines(out.str());
  std::string header, one, two, extra;
  std::getline(lines, header);
  std::getline(lines, one);
  std::getline(lines, two);
  CHECK(header.rfind("method,mse1_x100_mean,mse1_x100_sd,", 0) == 0);
  CHECK(std::count(header.begin(), header.end(), ',') == 12);
  CHECK(one.rfind("one-step,", 0) == 0);
  CHECK(two.rfind("two-step,", 0) == 0);
  CHECK(!std::getline(lines, extra));
  const auto k = s.mean_knots(false);
  CHECK(k[0] == k[3]);
}

TEST_CASE("table 2 summary schema") {
  Table2Options options;
  options.p = 12;
  const Table2Summary s = run_table2(2, {30}, 3, options, 1);
  REQUIRE(s.rows.size() == 1);
  CHECK(s.rows[0].reps == 2);
  std::ostringstream out;
  write_table2_csv(out, s);
  CHECK(out.str().rfind("knots,n,reps,selected_mean,no_false_negative_pct,exact_pct\nadaptive,30,2,", 0) == 0);
}

}
