// Panel CSV ingestion and the preprocessing used before fitting daily panels:
// forward rolling means, log response, standardized predictors, lag scans.
#pragma once

#include "vcm/dataset.hpp"
#include "vcm/vcmodel.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vcm {

/// Rows (unit, t, y, x_1..x_p), sorted by t within each unit. Units keep the
/// order of their first appearance in the input.
struct PanelTable {
  std::vector<std::string> predictor_names;
  std::vector<std::string> unit;
  std::vector<double> t;
  std::vector<double> y;
  std::vector<std::vector<double>> x;  ///< one row per observation

  std::size_t rows() const { return t.size(); }
  std::size_t p() const { return predictor_names.size(); }
  void push_back(const std::string& unit_id, double t_value, double y_value, std::vector<double> x_row);
};

struct ColumnMapping {
  std::string unit = "unit";
  std::string t = "t";
  std::string y = "y";
  /// Empty means every remaining column, in header order.
  std::vector<std::string> predictors;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_unparseable = 0;
  std::vector<std::string> messages;
};

/// Throws InvalidInput when the header is missing or lacks a mapped column.
PanelTable ingest_csv(std::istream& in, const ColumnMapping& mapping = {}, IngestReport* report = nullptr);
PanelTable ingest_csv_file(const std::string& path, const ColumnMapping& mapping = {},
                           IngestReport* report = nullptr);

/// Header `unit,t,y,<predictor names>`; numbers in shortest round-trip form.
void write_panel_csv(std::ostream& out, const PanelTable& table);

/// Unit ids become the decimal individual id (or "0" when absent); columns x1..xp.
PanelTable panel_from_dataset(const Dataset& data);

struct PreprocessOptions {
  /// Replace y(t) by the mean of y(t), y(t+1), ..., y(t+window-1) of the same
  /// unit. Rows without every one of those exact times are dropped.
  bool rolling_mean = false;
  std::size_t window = 7;
  /// log(y); rows with y <= 0 are dropped.
  bool log_response = false;
  /// Centre and scale each predictor to mean 0, variance 1 (denominator n).
  bool standardize = false;
  /// Prepend a column of ones (never standardized).
  bool add_intercept = false;
};

struct PreprocessReport {
  std::size_t dropped_window = 0;
  std::size_t dropped_nonpositive = 0;
};

PanelTable transform_response(const PanelTable& table, const PreprocessOptions& options,
                              PreprocessReport* report = nullptr);

/// u = t, individual ids number the units in order of appearance. Throws
/// InvalidInput when standardizing a predictor with zero variance.
Dataset to_dataset(const PanelTable& table, const PreprocessOptions& options);

Dataset preprocess(const PanelTable& table, const PreprocessOptions& options, PreprocessReport* report = nullptr);

/// Pearson correlations between predictors, p x p.
Matrix correlation_matrix(const PanelTable& table);

enum class FitMode { OneStep, TwoStep };

struct LagRow {
  int tau = 0;
  std::size_t n = 0;
  double rmse = 0.0;
};

struct LagScanResult {
  std::vector<LagRow> rows;
  std::vector<std::string> warnings;
};

/// For each tau, pairs x at time t with the (transformed) response at time
/// t + tau of the same unit, fits the model and records sqrt(rss / n).
/// Lags leaving fewer than 2 m_s rows are skipped with a warning.
LagScanResult lag_scan(const PanelTable& table, const PreprocessOptions& preprocess_options,
                       const std::vector<int>& taus, FitMode mode, const FitOptions& fit_options);

struct PlantedLagDesign {
  std::size_t units = 5;
  std::size_t days = 120;
  int lag = 3;
  std::size_t predictors = 2;
  double ar = 0.6;       ///< AR(1) coefficient of each predictor series
  double noise_sd = 0.3;
};

/// Daily panel whose response responds to the predictors `lag` days earlier
/// through smooth time-varying coefficients. No intercept column is included.
PanelTable simulate_planted_lag(const PlantedLagDesign& design, std::uint64_t seed);

}  // namespace vcm
