/**
 * @file simbench.hpp
 * @brief Longitudinal simulation designs and replication benchmarks.
 *
 * Two designs generate individuals observed on a jittered schedule: each
 * scheduled time 0..T-1 is skipped with probability skip_prob, otherwise
 * observed at time s + Unif(0, 1). Individuals with no observations are
 * redrawn. The error is v + e with e iid N(0, measurement_var) and v
 * N(0, process_var) correlated as exp(-|t - s|) within an individual.
 *
 *  - Tang design: four predictors (intercept, Bernoulli, uniform, and a
 *    conditionally normal one) with smooth trigonometric/polynomial betas.
 *  - Wei design: p predictors of which the first six carry signal; x_7..x_p
 *    are N(0, 4) with the same exp(-|t - s|) within-individual correlation.
 *
 * Replicate r of a benchmark with master seed S uses replicate_seed(S, r).
 */
#pragma once

#include "vcm/dataset.hpp"
#include "vcm/sparsesel.hpp"
#include "vcm/vcmodel.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace vcm {

struct LongitudinalDesign {
  std::size_t n_individuals = 200;
  std::size_t n_schedule = 20;
  double skip_prob = 0.6;
};

struct ErrorProcess {
  double measurement_var = 4.0;
  double process_var = 4.0;
};

/// beta_j(t), 0-based j.
using CoefficientFunction = std::function<double(std::size_t, double)>;

double tang_beta(std::size_t j, double t);
double wei_beta(std::size_t j, double t);

struct SimulatedData {
  Dataset data;
  CoefficientFunction beta;
  std::size_t signal_predictors = 0;     ///< betas 0..signal_predictors-1 may be nonzero
  std::vector<std::size_t> true_active;  ///< 0-based
};

SimulatedData simulate_tang(const LongitudinalDesign& design, std::uint64_t seed, const ErrorProcess& errors = {});

/// The design's schedule length is used as given; the standard setting is 30.
SimulatedData simulate_wei(const LongitudinalDesign& design, std::uint64_t seed, std::size_t p = 500,
                           const ErrorProcess& errors = {});

/// Normalized coefficient error per predictor:
/// mean_i (beta_hat_j(t_i) - beta_j(t_i))^2 / range(beta_j)^2, with the range
/// taken over the observed t. beta_hat holds one column per predictor.
/// Throws InvalidInput when a true coefficient is constant over t.
Vector mse_beta(const Matrix& beta_hat, const CoefficientFunction& truth, const Vector& t);
Vector mse_beta(const VCFit& fit, const CoefficientFunction& truth, const Vector& t);

/// splitmix64(master + index).
std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index);

/// Runs body(0..count-1) on up to `threads` workers (0 = hardware concurrency).
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, unsigned threads = 0);

struct Table1Replicate {
  Vector mse_one_step;
  Vector mse_two_step;
  std::vector<std::size_t> knots_one_step;  ///< per predictor (all equal)
  std::vector<std::size_t> knots_two_step;
};

struct Table1Summary {
  std::size_t n = 0;
  std::vector<Table1Replicate> replicates;

  Vector mean_mse(bool two_step) const;
  Vector sd_mse(bool two_step) const;
  std::vector<double> mean_knots(bool two_step) const;
};

/// Tang design fit by one-step and two-step spline fitting per replicate.
Table1Summary run_table1(std::size_t reps, std::size_t n, std::uint64_t seed, const FitOptions& options,
                         unsigned threads = 0);

/// Fitting options used for the `bench table1`: quantile candidate grid.
FitOptions table1_fit_options();

/// Header `method,mse1_x100_mean,mse1_x100_sd,...,knots1_mean,...`, one row per method.
void write_table1_csv(std::ostream& out, const Table1Summary& summary);
void write_table1_raw_csv(std::ostream& out, const Table1Summary& summary);

enum class KnotStrategy { Adaptive, Equidistant };
std::string to_string(KnotStrategy strategy);

struct Table2Replicate {
  KnotStrategy strategy = KnotStrategy::Adaptive;
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::vector<std::size_t> selected;
  bool no_false_negative = false;
  bool exact = false;
};

struct Table2Row {
  KnotStrategy strategy = KnotStrategy::Adaptive;
  std::size_t n = 0;
  std::size_t reps = 0;
  double mean_selected = 0.0;
  double pct_no_false_negative = 0.0;
  double pct_exact = 0.0;
};

struct Table2Summary {
  std::vector<Table2Row> rows;
  std::vector<Table2Replicate> replicates;
};

/// Selection options used for the `bench table2`: quantile candidate grid.
SelectOptions table2_select_options();

struct Table2Options {
  SelectOptions select = table2_select_options();
  std::size_t p = 500;
  bool include_equidistant = false;
  std::size_t max_equidistant_knots = 10;
};

/// Wei design variable selection; one row per (strategy, n).
Table2Summary run_table2(std::size_t reps, const std::vector<std::size_t>& n_list, std::uint64_t seed,
                         const Table2Options& options = {}, unsigned threads = 0);

void write_table2_csv(std::ostream& out, const Table2Summary& summary);
void write_table2_raw_csv(std::ostream& out, const Table2Summary& summary);

}  // namespace vcm
