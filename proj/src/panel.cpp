#include "vcm/panel.hpp"

#include "vcm/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_map>

namespace vcm {

void PanelTable::push_back(const std::string& unit_id, double t_value, double y_value, std::vector<double> x_row) {
  unit.push_back(unit_id);
  t.push_back(t_value);
  y.push_back(y_value);
  x.push_back(std::move(x_row));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (const char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& s, double& value) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, value);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(value);
}

// Units in order of first appearance, rows by t within a unit (stable).
PanelTable sorted_by_unit(PanelTable table) {
  std::unordered_map<std::string, std::size_t> rank;
  for (const auto& u : table.unit) rank.emplace(u, rank.size());
  std::vector<std::size_t> order(table.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = rank.at(table.unit[a]);
    const auto rb = rank.at(table.unit[b]);
    if (ra != rb) return ra < rb;
    return table.t[a] < table.t[b];
  });
  PanelTable out;
  out.predictor_names = table.predictor_names;
  for (const auto i : order) out.push_back(table.unit[i], table.t[i], table.y[i], std::move(table.x[i]));
  return out;
}

// Row index by exact time, per unit.
std::unordered_map<std::string, std::map<double, std::size_t>> index_by_time(const PanelTable& table) {
  std::unordered_map<std::string, std::map<double, std::size_t>> index;
  for (std::size_t i = 0; i < table.rows(); ++i) index[table.unit[i]].emplace(table.t[i], i);
  return index;
}

}  // namespace

PanelTable ingest_csv(std::istream& in, const ColumnMapping& mapping, IngestReport* report) {
  IngestReport local;
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw InvalidInput("CSV has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);
  auto locate = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidInput("CSV header lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t unit_col = locate(mapping.unit);
  const std::size_t t_col = locate(mapping.t);
  const std::size_t y_col = locate(mapping.y);

  PanelTable table;
  std::vector<std::size_t> x_cols;
  if (mapping.predictors.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == unit_col || c == t_col || c == y_col) continue;
      x_cols.push_back(c);
      table.predictor_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : mapping.predictors) {
      x_cols.push_back(locate(name));
      table.predictor_names.push_back(name);
    }
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++local.rows_read;
    auto cells = split_line(line);
    for (auto& c : cells) c = trim(c);
    auto cell = [&](std::size_t c) -> const std::string& {
      static const std::string empty;
      return c < cells.size() ? cells[c] : empty;
    };

    bool missing = cell(unit_col).empty() || cell(t_col).empty() || cell(y_col).empty();
    for (const auto c : x_cols) missing = missing || cell(c).empty();
    if (missing) {
      ++local.dropped_missing;
      continue;
    }

    double t = 0.0;
    double y = 0.0;
    std::vector<double> xs(x_cols.size());
    bool ok = parse_double(cell(t_col), t) && parse_double(cell(y_col), y);
    for (std::size_t k = 0; ok && k < x_cols.size(); ++k) ok = parse_double(cell(x_cols[k]), xs[k]);
    if (!ok) {
      ++local.dropped_unparseable;
      local.messages.push_back("line " + std::to_string(line_no) + ": unparseable number, row rejected");
      continue;
    }
    table.push_back(cell(unit_col), t, y, std::move(xs));
  }
  local.rows_kept = table.rows();
  if (report) *report = std::move(local);
  return sorted_by_unit(std::move(table));
}

PanelTable ingest_csv_file(const std::string& path, const ColumnMapping& mapping, IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return ingest_csv(in, mapping, report);
}

void write_panel_csv(std::ostream& out, const PanelTable& table) {
  out << "unit,t,y";
  for (const auto& name : table.predictor_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    out << table.unit[i] << ',' << format_double(table.t[i]) << ',' << format_double(table.y[i]);
    for (const double v : table.x[i]) out << ',' << format_double(v);
    out << '\n';
  }
}

PanelTable panel_from_dataset(const Dataset& data) {
  data.validate();
  PanelTable table;
  for (std::size_t j = 0; j < data.p(); ++j) table.predictor_names.push_back("x" + std::to_string(j + 1));
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    std::vector<double> row(data.p());
    for (std::size_t j = 0; j < data.p(); ++j) row[j] = data.X(ii, static_cast<Eigen::Index>(j));
    const std::string id = data.individual_id.empty() ? "0" : std::to_string(data.individual_id[i]);
    table.push_back(id, data.u[ii], data.y[ii], std::move(row));
  }
  return table;
}

PanelTable transform_response(const PanelTable& table, const PreprocessOptions& options, PreprocessReport* report) {
  PreprocessReport local;
  PanelTable out;
  out.predictor_names = table.predictor_names;

  const auto index = options.rolling_mean ? index_by_time(table)
                                          : std::unordered_map<std::string, std::map<double, std::size_t>>{};
  if (options.rolling_mean && options.window == 0) throw InvalidInput("rolling window must be positive");

  for (std::size_t i = 0; i < table.rows(); ++i) {
    double y = table.y[i];
    if (options.rolling_mean) {
      const auto& times = index.at(table.unit[i]);
      double sum = 0.0;
      bool full = true;
      for (std::size_t k = 0; k < options.window && full; ++k) {
        const auto it = times.find(table.t[i] + static_cast<double>(k));
        if (it == times.end()) full = false;
        else sum += table.y[it->second];
      }
      if (!full) {
        ++local.dropped_window;
        continue;
      }
      y = sum / static_cast<double>(options.window);
    }
    if (options.log_response) {
      if (!(y > 0.0)) {
        ++local.dropped_nonpositive;
        continue;
      }
      y = std::log(y);
    }
    out.push_back(table.unit[i], table.t[i], y, table.x[i]);
  }
  if (report) *report = local;
  return out;
}

Dataset to_dataset(const PanelTable& table, const PreprocessOptions& options) {
  const auto n = static_cast<Eigen::Index>(table.rows());
  const auto p = static_cast<Eigen::Index>(table.p());
  const Eigen::Index offset = options.add_intercept ? 1 : 0;
  if (p + offset == 0) throw InvalidInput("panel has no predictors");

  Dataset data;
  data.X.resize(n, p + offset);
  data.u.resize(n);
  data.y.resize(n);
  std::unordered_map<std::string, std::int64_t> ids;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    data.u[i] = table.t[ii];
    data.y[i] = table.y[ii];
    if (options.add_intercept) data.X(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < p; ++j) data.X(i, j + offset) = table.x[ii][static_cast<std::size_t>(j)];
    const auto it = ids.emplace(table.unit[ii], static_cast<std::int64_t>(ids.size())).first;
    data.individual_id.push_back(it->second);
  }

  if (options.standardize && n > 0) {
    for (Eigen::Index j = offset; j < p + offset; ++j) {
      auto col = data.X.col(j);
      col.array() -= col.mean();
      const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
      if (!(sd > 1e-12)) {
        throw InvalidInput("predictor '" + table.predictor_names[static_cast<std::size_t>(j - offset)] +
                           "' has zero variance and cannot be standardized");
      }
      col /= sd;
    }
  }
  return data;
}

Dataset preprocess(const PanelTable& table, const PreprocessOptions& options, PreprocessReport* report) {
  return to_dataset(transform_response(table, options, report), options);
}

Matrix correlation_matrix(const PanelTable& table) {
  const auto n = static_cast<Eigen::Index>(table.rows());
  const auto p = static_cast<Eigen::Index>(table.p());
  Matrix X(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = table.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  X.rowwise() -= X.colwise().mean();
  const Vector norms = X.colwise().norm();
  Matrix C = X.transpose() * X;
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b) C(a, b) /= norms[a] * norms[b];
  return C;
}

LagScanResult lag_scan(const PanelTable& table, const PreprocessOptions& preprocess_options,
                       const std::vector<int>& taus, FitMode mode, const FitOptions& fit_options) {
  LagScanResult result;
  if (taus.empty()) return result;

  const PanelTable response = transform_response(table, preprocess_options);
  const auto index = index_by_time(response);

  for (const int tau : taus) {
    PanelTable shifted;
    shifted.predictor_names = table.predictor_names;
    for (std::size_t i = 0; i < table.rows(); ++i) {
      const auto unit_it = index.find(table.unit[i]);
      if (unit_it == index.end()) continue;
      const auto it = unit_it->second.find(table.t[i] + static_cast<double>(tau));
      if (it == unit_it->second.end()) continue;
      shifted.push_back(table.unit[i], table.t[i], response.y[it->second], table.x[i]);
    }

    const std::size_t n = shifted.rows();
    const std::size_t p = shifted.p() + (preprocess_options.add_intercept ? 1 : 0);
    const std::size_t m_s =
        fit_options.knot_search.min_segment.value_or(default_min_segment(n, p, fit_options.knot_search.alpha));
    if (n == 0 || n < 2 * m_s) {
      result.warnings.push_back("lag " + std::to_string(tau) + " skipped: " + std::to_string(n) +
                                " aligned rows");
      continue;
    }

    const Dataset data = to_dataset(shifted, preprocess_options);
    VCFit fit;
    try {
      fit = mode == FitMode::TwoStep ? fit_two_step(data, fit_options) : fit_one_step(data, fit_options);
    } catch (const OverParameterized& e) {
      result.warnings.push_back("lag " + std::to_string(tau) + " skipped: " + e.what());
      continue;
    }
    result.rows.push_back({tau, n, std::sqrt(fit.rss / static_cast<double>(n))});
  }
  return result;
}

PanelTable simulate_planted_lag(const PlantedLagDesign& design, std::uint64_t seed) {
  if (design.days == 0 || design.units == 0) throw InvalidInput("planted-lag panel needs units and days");
  if (design.lag < 0) throw InvalidInput("planted lag must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  const auto lag = static_cast<std::size_t>(design.lag);
  const double days = static_cast<double>(design.days);
  const double innovation_sd = std::sqrt(1.0 - design.ar * design.ar);
  auto beta = [&](std::size_t j, double t) {
    const double s = t / days;
    if (j == 0) return 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * s);
    if (j % 2 == 1) return 1.5 + std::cos(2.0 * std::numbers::pi * s);
    return -1.0 + s;
  };

  PanelTable table;
  for (std::size_t j = 0; j < design.predictors; ++j) table.predictor_names.push_back("x" + std::to_string(j + 1));

  for (std::size_t unit = 0; unit < design.units; ++unit) {
    // x[k] is the value at day k - lag, so the response at day t uses x[t].
    std::vector<std::vector<double>> x(design.days + lag, std::vector<double>(design.predictors));
    for (std::size_t j = 0; j < design.predictors; ++j) {
      double value = std_normal(rng);
      for (std::size_t k = 0; k < x.size(); ++k) {
        if (k > 0) value = design.ar * value + innovation_sd * std_normal(rng);
        x[k][j] = value;
      }
    }
    for (std::size_t t = 0; t < design.days; ++t) {
      const double td = static_cast<double>(t);
      double y = beta(0, td);
      for (std::size_t j = 0; j < design.predictors; ++j) y += beta(j + 1, td) * x[t][j];
      y += design.noise_sd * std_normal(rng);
      table.push_back("u" + std::to_string(unit + 1), td, y, x[t + lag]);
    }
  }
  return table;
}

}  // namespace vcm
