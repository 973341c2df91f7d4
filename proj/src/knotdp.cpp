#include "vcm/knotdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vcm {
namespace {

// Least squares by Givens row updates of an upper-triangular factor. The
// running rss is accumulated from rotated residual components, so it never
// relies on subtracting large sums.
class IncrementalLeastSquares {
 public:
  explicit IncrementalLeastSquares(std::size_t q) : q_(q), r_(q * q, 0.0), z_(q, 0.0), work_(q, 0.0) {}

  void add(const double* row, double y) {
    std::copy(row, row + q_, work_.begin());
    double b = y;
    for (std::size_t k = 0; k < q_; ++k) {
      const double a = work_[k];
      if (a == 0.0) continue;
      double* rk = &r_[k * q_];
      const double h = std::hypot(rk[k], a);
      const double c = rk[k] / h;
      const double s = a / h;
      rk[k] = h;
      for (std::size_t l = k + 1; l < q_; ++l) {
        const double rl = rk[l];
        const double wl = work_[l];
        rk[l] = c * rl + s * wl;
        work_[l] = c * wl - s * rl;
      }
      const double zk = z_[k];
      z_[k] = c * zk + s * b;
      b = c * b - s * zk;
    }
    rss_ += b * b;
  }

  double rss() const { return rss_; }

 private:
  std::size_t q_;
  std::vector<double> r_;
  std::vector<double> z_;
  std::vector<double> work_;
  double rss_ = 0.0;
};

// Row-major (X, (u - mean u) X) regressors of the sorted sample.
std::vector<double> segment_regressors(const SortedSample& sample) {
  const std::size_t n = sample.n();
  const std::size_t p = sample.p();
  const double center = n > 0 ? sample.u.mean() : 0.0;
  std::vector<double> rows(n * 2 * p);
  for (std::size_t i = 0; i < n; ++i) {
    const double du = sample.u[static_cast<Eigen::Index>(i)] - center;
    for (std::size_t j = 0; j < p; ++j) {
      const double x = sample.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      rows[i * 2 * p + j] = x;
      rows[i * 2 * p + p + j] = du * x;
    }
  }
  return rows;
}

double window_cost(double rss, std::size_t len, double var_floor) {
  const double len_d = static_cast<double>(len);
  return len_d * std::log(std::max(rss / len_d, var_floor));
}

}  // namespace

SortedSample order_by_u(const Dataset& data, std::size_t min_segment) {
  data.validate();
  const std::size_t n = data.n();
  if (n < 2 * min_segment)
    throw InvalidInput("knot selection needs at least 2 * min_segment = " + std::to_string(2 * min_segment) +
                       " observations, got " + std::to_string(n));

  SortedSample out;
  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return data.u[a] < data.u[b]; });

  out.X.resize(static_cast<Eigen::Index>(n), data.X.cols());
  out.u.resize(static_cast<Eigen::Index>(n));
  out.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto src = static_cast<Eigen::Index>(out.order[r]);
    const auto dst = static_cast<Eigen::Index>(r);
    out.X.row(dst) = data.X.row(src);
    out.u[dst] = data.u[src];
    out.y[dst] = data.y[src];
  }
  return out;
}

double default_variance_floor(const Vector& y) {
  return std::max(1e-12 * variance(y), std::numeric_limits<double>::min());
}

double segment_loss(const SortedSample& sample, std::size_t first, std::size_t last, double var_floor) {
  if (first > last || last >= sample.n()) throw InvalidInput("segment_loss: window out of range");
  const std::size_t q = 2 * sample.p();
  const auto rows = segment_regressors(sample);
  IncrementalLeastSquares ls(q);
  for (std::size_t i = first; i <= last; ++i) ls.add(&rows[i * q], sample.y[static_cast<Eigen::Index>(i)]);
  return window_cost(ls.rss(), last - first + 1, var_floor);
}

std::vector<std::size_t> candidate_cuts(const Vector& sorted_u, GridMode mode) {
  const auto n = static_cast<std::size_t>(sorted_u.size());
  if (mode == GridMode::Auto) mode = n > 2000 ? GridMode::Quantile : GridMode::Exact;

  std::vector<std::size_t> raw;
  if (mode == GridMode::Exact) {
    raw.resize(n > 0 ? n - 1 : 0);
    std::iota(raw.begin(), raw.end(), std::size_t{1});
  } else {
    const auto k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    for (std::size_t m = 1; m < k; ++m) raw.push_back(m * n / k);
  }

  std::vector<std::size_t> cuts{0};
  for (const std::size_t c : raw) {
    if (c == 0 || c >= n || c == cuts.back()) continue;
    if (sorted_u[static_cast<Eigen::Index>(c - 1)] == sorted_u[static_cast<Eigen::Index>(c)]) continue;
    cuts.push_back(c);
  }
  cuts.push_back(n);
  return cuts;
}

SegmentCostTable::SegmentCostTable(const SortedSample& sample, std::size_t min_segment,
                                   std::vector<std::size_t> cuts, double var_floor)
    : n_(sample.n()), min_segment_(min_segment), cuts_(std::move(cuts)) {
  if (min_segment_ < 1) throw InvalidInput("min_segment must be positive");
  if (cuts_.size() < 2 || cuts_.front() != 0 || cuts_.back() != n_ ||
      !std::is_sorted(cuts_.begin(), cuts_.end()) ||
      std::adjacent_find(cuts_.begin(), cuts_.end()) != cuts_.end())
    throw InvalidInput("cut positions must be increasing from 0 to n");

  const std::size_t q = 2 * sample.p();
  const std::size_t k = cuts_.size();
  const auto rows = segment_regressors(sample);
  cost_.assign(k * k, std::numeric_limits<double>::quiet_NaN());

  for (std::size_t a = 0; a + 1 < k; ++a) {
    IncrementalLeastSquares ls(q);
    std::size_t row = cuts_[a];
    for (std::size_t b = a + 1; b < k; ++b) {
      for (; row < cuts_[b]; ++row) ls.add(&rows[row * q], sample.y[static_cast<Eigen::Index>(row)]);
      if (admissible(a, b)) cost_[a * k + b] = window_cost(ls.rss(), cuts_[b] - cuts_[a], var_floor);
    }
  }
}

DpTables dp_forward(const SegmentCostTable& table, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidInput("dp_forward: lambda must be non-negative");
  const std::size_t k = table.size();
  const auto& cuts = table.cuts();
  DpTables out;
  out.loss.assign(k, std::numeric_limits<double>::infinity());
  out.prev.assign(k, -1);
  out.loss[0] = 0.0;

  for (std::size_t b = 1; b < k; ++b) {
    double best = std::numeric_limits<double>::infinity();
    std::ptrdiff_t arg = -1;
    for (std::size_t a = 0; a < b; ++a) {
      if (!table.admissible(a, b)) break;  // cuts increase, so later a are shorter
      if (a != 0 && cuts[a] < table.min_segment()) continue;
      const double candidate = out.loss[a] + table.cost(a, b) + lambda;
      if (candidate < best) {
        best = candidate;
        arg = static_cast<std::ptrdiff_t>(a);
      }
    }
    out.loss[b] = best;
    out.prev[b] = arg;
  }
  return out;
}

KnotSet dp_backtrace(const Vector& sorted_u, const SegmentCostTable& table, const DpTables& tables) {
  const auto& cuts = table.cuts();
  KnotSet out;
  std::ptrdiff_t b = static_cast<std::ptrdiff_t>(cuts.size()) - 1;
  if (tables.prev[static_cast<std::size_t>(b)] < 0) throw InvalidInput("dp_backtrace: no admissible segmentation");
  while (true) {
    const std::ptrdiff_t a = tables.prev[static_cast<std::size_t>(b)];
    if (a <= 0) break;
    const std::size_t c = cuts[static_cast<std::size_t>(a)];
    out.split_positions.push_back(c);
    out.knots.push_back(0.5 * (sorted_u[static_cast<Eigen::Index>(c - 1)] + sorted_u[static_cast<Eigen::Index>(c)]));
    b = a;
  }
  std::reverse(out.split_positions.begin(), out.split_positions.end());
  std::reverse(out.knots.begin(), out.knots.end());
  return out;
}

std::size_t default_min_segment(std::size_t n, std::size_t p, double alpha) {
  const auto from_n = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), alpha) - 1e-12));
  return std::max(from_n, 2 * p + 3);
}

namespace {

std::size_t resolve_min_segment(const Dataset& data, const KnotSelectOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  if (options.min_segment) return *options.min_segment;
  return default_min_segment(data.n(), data.p(), options.alpha);
}

}  // namespace

KnotSearch::KnotSearch(const Dataset& data, const KnotSelectOptions& options)
    : alpha_(options.alpha),
      sample_(order_by_u(data, resolve_min_segment(data, options))),
      table_(sample_, resolve_min_segment(data, options), candidate_cuts(sample_.u, options.grid),
             default_variance_floor(sample_.y)) {}

KnotSet KnotSearch::select(double lambda0) const {
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw InvalidInput("lambda0 must be positive");
  const double lambda = lambda0 * std::log(static_cast<double>(sample_.n()));
  KnotSet knots = dp_backtrace(sample_.u, table_, dp_forward(table_, lambda));
  knots.lambda0 = lambda0;
  knots.alpha = alpha_;
  return knots;
}

KnotSet select_knots(const Dataset& data, double lambda0, const KnotSelectOptions& options) {
  return KnotSearch(data, options).select(lambda0);
}

}  // namespace vcm
