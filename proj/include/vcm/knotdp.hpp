/**
 * @file knotdp.hpp
 * @brief Knot selection by penalized optimal segmentation of u-ordered data.
 *
 * The sample is sorted by u and split into contiguous segments. Each segment
 * is fit by least squares on the 2p regressors (X, u X), and costs
 * |s| log(sigma_s^2) where sigma_s^2 is the ML residual variance. A dynamic
 * program minimizes the summed cost plus lambda per segment; boundaries
 * between segments become knots at the midpoint of the adjacent u values.
 *
 * Segment boundaries are described by "cut positions": position c splits the
 * sorted sample between rows c-1 and c (0-based), so 0 and n delimit the whole
 * sample. A cost table is defined over a set of admissible cut positions,
 * either every position (exact search) or a quantile grid.
 */
#pragma once

#include "vcm/dataset.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace vcm {

/// Data sorted by u, plus the permutation applied (sorted row r came from
/// original row order[r]).
struct SortedSample {
  Matrix X;
  Vector u;
  Vector y;
  std::vector<std::size_t> order;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
};

/// Stable sort by u. Throws InvalidInput when n < 2 * min_segment.
SortedSample order_by_u(const Dataset& data, std::size_t min_segment);

/// Cost of one window [first, last] of sorted rows (inclusive):
/// len * log(max(rss / len, var_floor)) for the fit on (X, u X).
double segment_loss(const SortedSample& sample, std::size_t first, std::size_t last, double var_floor);

/// Default variance floor: 1e-12 * var(y), kept strictly positive.
double default_variance_floor(const Vector& y);

enum class GridMode { Auto, Exact, Quantile };

/// Admissible cut positions. Always contains 0 and n; never contains a
/// position where the neighbouring u values are tied. Quantile mode uses
/// floor(m n / K) for m = 1..K-1 with K = floor(sqrt(n)); Auto picks the
/// quantile grid only for n > 2000.
std::vector<std::size_t> candidate_cuts(const Vector& sorted_u, GridMode mode);

/// Segment costs between every pair of admissible cuts whose segment holds
/// at least min_segment rows. Memory is quadratic in the number of cuts.
class SegmentCostTable {
 public:
  SegmentCostTable(const SortedSample& sample, std::size_t min_segment, std::vector<std::size_t> cuts,
                   double var_floor);

  std::size_t n() const { return n_; }
  std::size_t min_segment() const { return min_segment_; }
  const std::vector<std::size_t>& cuts() const { return cuts_; }
  std::size_t size() const { return cuts_.size(); }

  /// Segment between cut indices a < b has at least min_segment rows.
  bool admissible(std::size_t a, std::size_t b) const {
    return a < b && cuts_[b] - cuts_[a] >= min_segment_;
  }
  /// Cost of the segment between cut indices a < b; requires admissible(a, b).
  double cost(std::size_t a, std::size_t b) const { return cost_[a * cuts_.size() + b]; }

 private:
  std::size_t n_;
  std::size_t min_segment_;
  std::vector<std::size_t> cuts_;
  std::vector<double> cost_;
};

/// Forward-recursion tables, indexed by cut index. loss[0] = 0; loss[b] is the
/// best penalized cost of the rows before cuts[b]; prev[b] the cut index where
/// the last segment starts (-1 when cuts[b] is unreachable).
struct DpTables {
  std::vector<double> loss;
  std::vector<std::ptrdiff_t> prev;
};

/// Loss_b = min over admissible a of Loss_a + cost(a, b) + lambda. A segment
/// may start at cut a only when a == 0 or cuts[a] >= min_segment. Ties go to
/// the smallest a.
DpTables dp_forward(const SegmentCostTable& table, double lambda);

struct KnotSet {
  std::vector<double> knots;                ///< increasing
  std::vector<std::size_t> split_positions; ///< cut positions behind each knot
  double lambda0 = 0.0;
  double alpha = 0.0;
};

/// Walks prev back from the last cut; each interior cut c becomes the knot
/// 0.5 * (u[c-1] + u[c]).
KnotSet dp_backtrace(const Vector& sorted_u, const SegmentCostTable& table, const DpTables& tables);

struct KnotSelectOptions {
  double alpha = 0.5;
  /// Overrides max(ceil(n^alpha), 2p + 3).
  std::optional<std::size_t> min_segment;
  GridMode grid = GridMode::Auto;
};

/// max(ceil(n^alpha), 2p + 3).
std::size_t default_min_segment(std::size_t n, std::size_t p, double alpha);

/// Sorted sample and cost table built once, queried for many lambda0 values.
class KnotSearch {
 public:
  KnotSearch(const Dataset& data, const KnotSelectOptions& options);

  const SortedSample& sample() const { return sample_; }
  const SegmentCostTable& table() const { return table_; }
  double alpha() const { return alpha_; }

  /// Knots minimizing the segmentation loss with lambda = lambda0 * log(n).
  KnotSet select(double lambda0) const;

 private:
  double alpha_;
  SortedSample sample_;
  SegmentCostTable table_;
};

/// order_by_u, cost table, dp_forward with lambda0 * log(n), dp_backtrace.
KnotSet select_knots(const Dataset& data, double lambda0, const KnotSelectOptions& options = {});

}  // namespace vcm
