#pragma once

#include "vcm/panel.hpp"
#include "vcm/sparsesel.hpp"
#include "vcm/vcmodel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vcm {

/// Every command-line flag; a --config file holds the same names as
/// `key = value` lines and flags given on the command line win.
struct RunConfig {
  // model
  std::string mode = "two-step";  ///< one-step | two-step
  int degree = 3;
  double alpha = 0.5;
  std::string grid = "auto";  ///< auto | exact | quantile
  std::optional<std::size_t> min_segment;
  double lambda0_min = 0.01;
  double lambda0_max = 100.0;
  std::size_t lambda0_count = 25;
  std::size_t lambda_count = 25;
  double lambda_min_ratio = 1e-3;
  std::string knots = "adaptive";  ///< adaptive | equidistant (select)
  std::size_t max_knots = 10;

  // data and preprocessing
  std::string data;
  ColumnMapping columns;
  bool standardize = false;
  bool add_intercept = false;
  bool rolling_mean = false;
  std::size_t window = 7;
  bool log_response = false;
  int tau_min = 0;
  int tau_max = 14;

  // simulation and benchmarks
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> n;
  std::optional<std::size_t> schedule;
  double skip_prob = 0.6;
  std::size_t p = 500;
  std::size_t days = 120;
  int lag = 3;
  std::size_t predictors = 2;
  std::size_t reps = 100;
  unsigned threads = 0;
  bool equidistant = false;

  // outputs
  std::string out;
  std::string curves;
  std::string raw;
  std::string model;
};

FitOptions fit_options(const RunConfig& config);
SelectOptions select_options(const RunConfig& config);
PreprocessOptions preprocess_options(const RunConfig& config);

/// Exit codes: 0 success, 1 usage error, 2 data or I/O error.
int cli_main(int argc, char** argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace vcm
