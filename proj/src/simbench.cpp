#include "vcm/simbench.hpp"

#include "vcm/format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

namespace vcm {
namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng, double sd) { return std::normal_distribution<double>(0.0, sd)(rng); }

std::vector<double> draw_times(Rng& rng, const LongitudinalDesign& design) {
  std::vector<double> times;
  while (times.empty()) {
    for (std::size_t s = 0; s < design.n_schedule; ++s) {
      if (uniform(rng, 0.0, 1.0) < design.skip_prob) continue;
      times.push_back(static_cast<double>(s) + uniform(rng, 0.0, 1.0));
    }
  }
  return times;
}

// Lower Cholesky factor of variance * exp(-|t_k - t_l|).
Matrix exponential_covariance_factor(const std::vector<double>& times, double variance) {
  const auto k = static_cast<Eigen::Index>(times.size());
  Matrix cov(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) cov(a, b) = variance * std::exp(-std::abs(times[a] - times[b]));
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw Error("exponential covariance is not positive definite");
  return llt.matrixL();
}

Vector correlated_draw(Rng& rng, const Matrix& factor) {
  Vector z(factor.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng, 1.0);
  return factor * z;
}

void validate_design(const LongitudinalDesign& design) {
  if (design.n_individuals == 0 || design.n_schedule == 0) throw InvalidInput("design needs individuals and a schedule");
  if (!(design.skip_prob >= 0.0 && design.skip_prob < 1.0)) throw InvalidInput("skip probability must lie in [0, 1)");
}

struct Builder {
  std::vector<double> t;
  std::vector<double> y;
  std::vector<std::int64_t> id;
  std::vector<double> x;  // row-major
  std::size_t p;

  Dataset finish() const {
    Dataset out;
    const auto n = static_cast<Eigen::Index>(t.size());
    out.X.resize(n, static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) out.X(i, static_cast<Eigen::Index>(j)) = x[static_cast<std::size_t>(i) * p + j];
    out.u = Eigen::Map<const Vector>(t.data(), n);
    out.y = Eigen::Map<const Vector>(y.data(), n);
    out.individual_id = id;
    return out;
  }
};

}  // namespace

double tang_beta(std::size_t j, double t) {
  switch (j) {
    case 0: return 1.0 + 3.5 * std::sin(t - 3.0);
    case 1: return 2.0 - 5.0 * std::cos(0.75 * t - 0.25);
    case 2: return 4.0 - 0.04 * (t - 12.0) * (t - 12.0);
    case 3: return 1.0 + 0.125 * t + 4.6 * std::pow(1.0 - 0.1 * t, 3);
    default: return 0.0;
  }
}

double wei_beta(std::size_t j, double t) {
  constexpr double pi = std::numbers::pi;
  switch (j) {
    case 0: return 15.0 + 20.0 * std::sin(pi * (t + 0.5) / 15.0);
    case 1: return 15.0 + 20.0 * std::cos(pi * (t + 0.5) / 15.0);
    case 2: return 2.0 - 3.0 * std::sin(pi * (t - 24.5) / 15.0);
    case 3: return 2.0 - 3.0 * std::cos(pi * (t - 24.5) / 15.0);
    case 4: return 6.0 - 0.2 * (t + 0.5) * (t + 0.5);
    case 5: return -4.0 + 5e-4 * std::pow(19.5 - t, 3);
    default: return 0.0;
  }
}

SimulatedData simulate_tang(const LongitudinalDesign& design, std::uint64_t seed, const ErrorProcess& errors) {
  validate_design(design);
  Rng rng(seed);
  Builder b{.t = {}, .y = {}, .id = {}, .x = {}, .p = 4};
  const double e_sd = std::sqrt(errors.measurement_var);

  for (std::size_t i = 0; i < design.n_individuals; ++i) {
    const auto times = draw_times(rng, design);
    const Vector v = correlated_draw(rng, exponential_covariance_factor(times, errors.process_var));
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double t = times[k];
      const double x1 = 1.0;
      const double x2 = uniform(rng, 0.0, 1.0) < 0.6 ? 1.0 : 0.0;
      const double x3 = uniform(rng, 0.1 * t, 2.0 + 0.1 * t);
      const double x4 = normal(rng, std::sqrt((1.0 + x3) / (2.0 + x3)));
      const double eps = v[static_cast<Eigen::Index>(k)] + normal(rng, e_sd);
      b.t.push_back(t);
      b.id.push_back(static_cast<std::int64_t>(i));
      b.x.insert(b.x.end(), {x1, x2, x3, x4});
      b.y.push_back(tang_beta(0, t) * x1 + tang_beta(1, t) * x2 + tang_beta(2, t) * x3 + tang_beta(3, t) * x4 + eps);
    }
  }

  SimulatedData out;
  out.data = b.finish();
  out.beta = tang_beta;
  out.signal_predictors = 4;
  out.true_active = {0, 1, 2, 3};
  return out;
}

SimulatedData simulate_wei(const LongitudinalDesign& design, std::uint64_t seed, std::size_t p,
                           const ErrorProcess& errors) {
  validate_design(design);
  if (p < 6) throw InvalidInput("Wei design needs p >= 6");
  Rng rng(seed);
  Builder b{.t = {}, .y = {}, .id = {}, .x = {}, .p = p};
  const double e_sd = std::sqrt(errors.measurement_var);
  std::vector<double> row(p);

  for (std::size_t i = 0; i < design.n_individuals; ++i) {
    const auto times = draw_times(rng, design);
    const auto k = times.size();
    const Vector v = correlated_draw(rng, exponential_covariance_factor(times, errors.process_var));

    // x_7..x_p: each an independent N(0, 4) path with exp(-|t-s|) correlation.
    const Matrix factor = exponential_covariance_factor(times, 4.0);
    Matrix noise_predictors(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p - 6));
    for (std::size_t j = 6; j < p; ++j)
      noise_predictors.col(static_cast<Eigen::Index>(j - 6)) = correlated_draw(rng, factor);

    for (std::size_t obs = 0; obs < k; ++obs) {
      const double t = times[obs];
      row[0] = uniform(rng, 0.05 + 0.1 * t, 2.05 + 0.1 * t);
      const double cond_sd = std::sqrt((1.0 + row[0]) / (2.0 + row[0]));
      for (std::size_t j = 1; j < 5; ++j) row[j] = normal(rng, cond_sd);
      row[5] = 3.0 * std::exp((t + 0.5) / 30.0) + normal(rng, 1.0);
      for (std::size_t j = 6; j < p; ++j)
        row[j] = noise_predictors(static_cast<Eigen::Index>(obs), static_cast<Eigen::Index>(j - 6));

      double signal = 0.0;
      for (std::size_t j = 0; j < 6; ++j) signal += wei_beta(j, t) * row[j];
      b.t.push_back(t);
      b.id.push_back(static_cast<std::int64_t>(i));
      b.x.insert(b.x.end(), row.begin(), row.end());
      b.y.push_back(signal + v[static_cast<Eigen::Index>(obs)] + normal(rng, e_sd));
    }
  }

  SimulatedData out;
  out.data = b.finish();
  out.beta = wei_beta;
  out.signal_predictors = 6;
  out.true_active = {0, 1, 2, 3, 4, 5};
  return out;
}

Vector mse_beta(const Matrix& beta_hat, const CoefficientFunction& truth, const Vector& t) {
  if (beta_hat.rows() != t.size() || t.size() == 0) throw InvalidInput("mse_beta: one row per observation required");
  const Eigen::Index p = beta_hat.cols();
  Vector out(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double b = truth(static_cast<std::size_t>(j), t[i]);
      lo = std::min(lo, b);
      hi = std::max(hi, b);
      const double d = beta_hat(i, j) - b;
      sum += d * d;
    }
    const double range = hi - lo;
    if (!(range > 0.0))
      throw InvalidInput("mse_beta: true coefficient " + std::to_string(j + 1) + " is constant over t");
    out[j] = sum / static_cast<double>(t.size()) / (range * range);
  }
  return out;
}

Vector mse_beta(const VCFit& fit, const CoefficientFunction& truth, const Vector& t) {
  return mse_beta(coefficient_paths(fit, t), truth, t);
}

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + index + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

Vector column_mean(const std::vector<Vector>& rows) {
  Vector mean = Vector::Zero(rows.front().size());
  for (const auto& r : rows) mean += r;
  return mean / static_cast<double>(rows.size());
}

std::vector<Vector> collect(const std::vector<Table1Replicate>& reps, bool two_step) {
  std::vector<Vector> out;
  for (const auto& r : reps) out.push_back(two_step ? r.mse_two_step : r.mse_one_step);
  return out;
}

}  // namespace

Vector Table1Summary::mean_mse(bool two_step) const { return column_mean(collect(replicates, two_step)); }

Vector Table1Summary::sd_mse(bool two_step) const {
  const auto rows = collect(replicates, two_step);
  const Vector mean = column_mean(rows);
  Vector ss = Vector::Zero(mean.size());
  for (const auto& r : rows) ss.array() += (r - mean).array().square();
  if (rows.size() < 2) return Vector::Zero(mean.size());
  return (ss / static_cast<double>(rows.size() - 1)).cwiseSqrt();
}

std::vector<double> Table1Summary::mean_knots(bool two_step) const {
  std::vector<double> mean(replicates.front().knots_one_step.size(), 0.0);
  for (const auto& r : replicates) {
    const auto& k = two_step ? r.knots_two_step : r.knots_one_step;
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += static_cast<double>(k[j]);
  }
  for (auto& m : mean) m /= static_cast<double>(replicates.size());
  return mean;
}

FitOptions table1_fit_options() {
  FitOptions options;
  options.knot_search.grid = GridMode::Quantile;
  return options;
}

Table1Summary run_table1(std::size_t reps, std::size_t n, std::uint64_t seed, const FitOptions& options,
                         unsigned threads) {
  if (reps == 0) throw InvalidInput("run_table1: reps must be positive");
  Table1Summary summary;
  summary.n = n;
  summary.replicates.resize(reps);
  LongitudinalDesign design;
  design.n_individuals = n;
  design.n_schedule = 20;

  parallel_for(reps, [&](std::size_t r) {
    const SimulatedData sim = simulate_tang(design, replicate_seed(seed, r));
    const VCFit one = fit_one_step(sim.data, options);
    const VCFit two = fit_two_step_from(sim.data, one, options);
    Table1Replicate& out = summary.replicates[r];
    out.mse_one_step = mse_beta(one, sim.beta, sim.data.u);
    out.mse_two_step = mse_beta(two, sim.beta, sim.data.u);
    for (const auto& k : one.knots.per_predictor) out.knots_one_step.push_back(k.size());
    for (const auto& k : two.knots.per_predictor) out.knots_two_step.push_back(k.size());
  }, threads);
  return summary;
}

void write_table1_csv(std::ostream& out, const Table1Summary& summary) {
  const std::size_t p = summary.replicates.front().mse_one_step.size();
  out << "method";
  for (std::size_t j = 1; j <= p; ++j) out << ",mse" << j << "_x100_mean,mse" << j << "_x100_sd";
  for (std::size_t j = 1; j <= p; ++j) out << ",knots" << j << "_mean";
  out << "\n";
  for (const bool two : {false, true}) {
    const Vector mean = summary.mean_mse(two) * 100.0;
    const Vector sd = summary.sd_mse(two) * 100.0;
    out << (two ? "two-step" : "one-step");
    for (std::size_t j = 0; j < p; ++j)
      out << "," << format_double(mean[static_cast<Eigen::Index>(j)]) << ","
          << format_double(sd[static_cast<Eigen::Index>(j)]);
    for (const double k : summary.mean_knots(two)) out << "," << format_double(k);
    out << "\n";
  }
}

void write_table1_raw_csv(std::ostream& out, const Table1Summary& summary) {
  const std::size_t p = summary.replicates.front().mse_one_step.size();
  out << "replicate,method";
  for (std::size_t j = 1; j <= p; ++j) out << ",mse" << j;
  for (std::size_t j = 1; j <= p; ++j) out << ",knots" << j;
  out << "\n";
  for (std::size_t r = 0; r < summary.replicates.size(); ++r) {
    const auto& rep = summary.replicates[r];
    for (const bool two : {false, true}) {
      const Vector& mse = two ? rep.mse_two_step : rep.mse_one_step;
      const auto& knots = two ? rep.knots_two_step : rep.knots_one_step;
      out << r << "," << (two ? "two-step" : "one-step");
      for (Eigen::Index j = 0; j < mse.size(); ++j) out << "," << format_double(mse[j]);
      for (const auto k : knots) out << "," << k;
      out << "\n";
    }
  }
}

std::string to_string(KnotStrategy strategy) {
  return strategy == KnotStrategy::Adaptive ? "adaptive" : "equidistant";
}

SelectOptions table2_select_options() {
  SelectOptions options;
  options.knot_search.grid = GridMode::Quantile;
  return options;
}

Table2Summary run_table2(std::size_t reps, const std::vector<std::size_t>& n_list, std::uint64_t seed,
                         const Table2Options& options, unsigned threads) {
  if (reps == 0) throw InvalidInput("run_table2: reps must be positive");
  std::vector<KnotStrategy> strategies{KnotStrategy::Adaptive};
  if (options.include_equidistant) strategies.push_back(KnotStrategy::Equidistant);

  Table2Summary summary;
  for (const KnotStrategy strategy : strategies) {
    for (const std::size_t n : n_list) {
      LongitudinalDesign design;
      design.n_individuals = n;
      design.n_schedule = 30;
      std::vector<Table2Replicate> rows(reps);
      parallel_for(reps, [&](std::size_t r) {
        // Both strategies see the same simulated data for a given (n, r).
        const SimulatedData sim = simulate_wei(design, replicate_seed(seed + n, r), options.p);
        const SelectionReport report =
            strategy == KnotStrategy::Adaptive
                ? select_variables(sim.data, options.select)
                : select_variables_equidistant(sim.data, options.select, options.max_equidistant_knots);
        Table2Replicate& out = rows[r];
        out.strategy = strategy;
        out.n = n;
        out.replicate = r;
        out.selected = report.active;
        out.no_false_negative = std::all_of(sim.true_active.begin(), sim.true_active.end(), [&](std::size_t j) {
          return std::find(report.active.begin(), report.active.end(), j) != report.active.end();
        });
        out.exact = out.no_false_negative && report.active.size() == sim.true_active.size();
      }, threads);

      Table2Row row;
      row.strategy = strategy;
      row.n = n;
      row.reps = reps;
      for (const auto& r : rows) {
        row.mean_selected += static_cast<double>(r.selected.size());
        row.pct_no_false_negative += r.no_false_negative ? 1.0 : 0.0;
        row.pct_exact += r.exact ? 1.0 : 0.0;
      }
      row.mean_selected /= static_cast<double>(reps);
      row.pct_no_false_negative *= 100.0 / static_cast<double>(reps);
      row.pct_exact *= 100.0 / static_cast<double>(reps);
      summary.rows.push_back(row);
      summary.replicates.insert(summary.replicates.end(), rows.begin(), rows.end());
    }
  }
  return summary;
}

void write_table2_csv(std::ostream& out, const Table2Summary& summary) {
  out << "knots,n,reps,selected_mean,no_false_negative_pct,exact_pct\n";
  for (const auto& r : summary.rows)
    out << to_string(r.strategy) << "," << r.n << "," << r.reps << "," << format_double(r.mean_selected) << ","
        << format_double(r.pct_no_false_negative) << "," << format_double(r.pct_exact) << "\n";
}

void write_table2_raw_csv(std::ostream& out, const Table2Summary& summary) {
  out << "knots,n,replicate,selected,no_false_negative,exact,active\n";
  for (const auto& r : summary.replicates) {
    out << to_string(r.strategy) << "," << r.n << "," << r.replicate << "," << r.selected.size() << ","
        << (r.no_false_negative ? 1 : 0) << "," << (r.exact ? 1 : 0) << ",";
    for (std::size_t k = 0; k < r.selected.size(); ++k) out << (k ? ";" : "") << r.selected[k] + 1;
    out << "\n";
  }
}

}  // namespace vcm
