#include "vcm/cli.hpp"

#include "vcm/format.hpp"
#include "vcm/model_json.hpp"
#include "vcm/simbench.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace vcm {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

GridMode parse_grid(const std::string& name) {
  if (name == "exact") return GridMode::Exact;
  if (name == "quantile") return GridMode::Quantile;
  return GridMode::Auto;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

std::string csv_of(const PanelTable& table) {
  std::ostringstream out;
  write_panel_csv(out, table);
  return out.str();
}

PanelTable load_panel(const RunConfig& config) {
  require(!config.data.empty(), "--data is required");
  IngestReport report;
  PanelTable table = ingest_csv_file(config.data, config.columns, &report);
  if (report.dropped_missing > 0)
    std::cerr << "dropped " << report.dropped_missing << " row(s) with missing fields\n";
  for (const auto& m : report.messages) std::cerr << m << '\n';
  if (table.rows() == 0) throw InvalidInput("no usable rows in " + config.data);
  return table;
}

Dataset load_dataset(const RunConfig& config, PanelTable* table_out = nullptr) {
  PanelTable table = load_panel(config);
  PreprocessReport report;
  Dataset data = preprocess(table, preprocess_options(config), &report);
  if (report.dropped_window > 0)
    std::cerr << "dropped " << report.dropped_window << " row(s) without a full rolling window\n";
  if (report.dropped_nonpositive > 0)
    std::cerr << "dropped " << report.dropped_nonpositive << " row(s) with non-positive response\n";
  if (table_out) *table_out = std::move(table);
  return data;
}

std::vector<std::string> model_names(const PanelTable& table, const RunConfig& config) {
  std::vector<std::string> names;
  if (config.add_intercept) names.emplace_back("intercept");
  names.insert(names.end(), table.predictor_names.begin(), table.predictor_names.end());
  return names;
}

int run_simulate(const std::string& design, const RunConfig& config) {
  require(config.seed.has_value(), "simulate needs --seed");
  require(!config.out.empty(), "simulate needs --out");
  require(config.n.size() <= 1, "simulate takes a single --n");
  PanelTable table;
  if (design == "panel") {
    PlantedLagDesign d;
    if (!config.n.empty()) d.units = config.n.front();
    d.days = config.days;
    d.lag = config.lag;
    d.predictors = config.predictors;
    table = simulate_planted_lag(d, *config.seed);
  } else {
    LongitudinalDesign d;
    if (!config.n.empty()) d.n_individuals = config.n.front();
    d.skip_prob = config.skip_prob;
    if (design == "tang") {
      d.n_schedule = config.schedule.value_or(20);
      table = panel_from_dataset(simulate_tang(d, *config.seed).data);
    } else {
      d.n_schedule = config.schedule.value_or(30);
      table = panel_from_dataset(simulate_wei(d, *config.seed, config.p).data);
    }
  }
  write_file_atomic(config.out, csv_of(table));
  return 0;
}

int run_fit(const RunConfig& config) {
  require(!config.out.empty(), "fit needs --out for the model JSON");
  PanelTable table;
  const Dataset data = load_dataset(config, &table);
  const FitOptions options = fit_options(config);
  const VCFit fit = config.mode == "one-step" ? fit_one_step(data, options) : fit_two_step(data, options);

  nlohmann::json doc = fit_to_json(fit);
  doc["predictors"] = model_names(table, config);
  write_file_atomic(config.out, dump_json(doc));

  if (!config.curves.empty()) {
    const Vector grid = Vector::LinSpaced(200, fit.u_min, fit.u_max);
    const Matrix beta = eval_coefficients(fit, grid);
    std::ostringstream out;
    out << "u";
    for (const auto& name : model_names(table, config)) out << ',' << name;
    out << '\n';
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      out << format_double(grid[i]);
      for (Eigen::Index j = 0; j < beta.cols(); ++j) out << ',' << format_double(beta(i, j));
      out << '\n';
    }
    write_file_atomic(config.curves, out.str());
  }
  return 0;
}

int run_predict(const RunConfig& config) {
  require(!config.model.empty(), "predict needs --model");
  require(!config.out.empty(), "predict needs --out");
  std::ifstream in(config.model);
  if (!in) throw InvalidInput("cannot open " + config.model);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("model JSON: ") + e.what());
  }
  const VCFit fit = fit_from_json(doc);

  PanelTable table;
  const Dataset data = load_dataset(config, &table);
  const Vector yhat = predict(fit, data.X, data.u);
  std::ostringstream out;
  out << "unit,t,y,y_hat\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << data.individual_id[i] << ',' << format_double(data.u[ii]) << ',' << format_double(data.y[ii]) << ','
        << format_double(yhat[ii]) << '\n';
  }
  write_file_atomic(config.out, out.str());
  return 0;
}

int run_select(const RunConfig& config) {
  require(!config.out.empty(), "select needs --out");
  PanelTable table;
  const Dataset data = load_dataset(config, &table);
  const SelectOptions options = select_options(config);
  const SelectionReport report = config.knots == "equidistant"
                                     ? select_variables_equidistant(data, options, config.max_knots)
                                     : select_variables(data, options);
  const auto names = model_names(table, config);
  nlohmann::json doc;
  doc["active"] = report.active;
  std::vector<std::string> active_names;
  for (const auto j : report.active) active_names.push_back(names[j]);
  doc["active_names"] = active_names;
  doc["group_norms"] = report.group_norms;
  doc["lambda1"] = report.lambda1;
  doc["lambda2"] = report.lambda2;
  doc["bic"] = report.bic;
  doc["knots_per_predictor"] = report.knots.per_predictor;
  write_file_atomic(config.out, dump_json(doc));
  return 0;
}

int run_bench(const std::string& table, const RunConfig& config, bool grid_given) {
  require(config.seed.has_value(), "bench needs --seed");
  require(!config.out.empty(), "bench needs --out");
  require(config.reps > 0, "--reps must be positive");
  std::ostringstream summary;
  std::ostringstream raw;
  if (table == "table1") {
    require(config.n.size() <= 1, "bench table1 takes a single --n");
    FitOptions options = fit_options(config);
    if (!grid_given) options.knot_search.grid = table1_fit_options().knot_search.grid;
    const std::size_t n = config.n.empty() ? 200 : config.n.front();
    const Table1Summary result = run_table1(config.reps, n, *config.seed, options, config.threads);
    write_table1_csv(summary, result);
    write_table1_raw_csv(raw, result);
  } else {
    Table2Options options;
    options.select = select_options(config);
    if (!grid_given) options.select.knot_search.grid = table2_select_options().knot_search.grid;
    options.p = config.p;
    options.include_equidistant = config.equidistant;
    options.max_equidistant_knots = config.max_knots;
    const std::vector<std::size_t> n_list = config.n.empty() ? std::vector<std::size_t>{50, 100} : config.n;
    const Table2Summary result = run_table2(config.reps, n_list, *config.seed, options, config.threads);
    write_table2_csv(summary, result);
    write_table2_raw_csv(raw, result);
  }
  write_file_atomic(config.out, summary.str());
  if (!config.raw.empty()) write_file_atomic(config.raw, raw.str());
  return 0;
}

int run_lagscan(const RunConfig& config) {
  require(!config.out.empty(), "lagscan needs --out");
  const PanelTable table = load_panel(config);
  std::vector<int> taus;
  for (int tau = config.tau_min; tau <= config.tau_max; ++tau) taus.push_back(tau);
  const LagScanResult result = lag_scan(table, preprocess_options(config), taus,
                                        config.mode == "one-step" ? FitMode::OneStep : FitMode::TwoStep,
                                        fit_options(config));
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  std::ostringstream out;
  out << "tau,n,rmse\n";
  for (const auto& row : result.rows) out << row.tau << ',' << row.n << ',' << format_double(row.rmse) << '\n';
  write_file_atomic(config.out, out.str());
  return 0;
}

int run_corr(const RunConfig& config) {
  require(!config.out.empty(), "corr needs --out");
  const PanelTable table = load_panel(config);
  const Matrix C = correlation_matrix(table);
  std::ostringstream out;
  out << "predictor";
  for (const auto& name : table.predictor_names) out << ',' << name;
  out << '\n';
  for (Eigen::Index a = 0; a < C.rows(); ++a) {
    out << table.predictor_names[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < C.cols(); ++b) out << ',' << format_double(C(a, b));
    out << '\n';
  }
  write_file_atomic(config.out, out.str());
  return 0;
}

}  // namespace

FitOptions fit_options(const RunConfig& config) {
  FitOptions options;
  options.degree = config.degree;
  options.lambda0_grid = log_grid(config.lambda0_min, config.lambda0_max, config.lambda0_count);
  options.knot_search.alpha = config.alpha;
  options.knot_search.min_segment = config.min_segment;
  options.knot_search.grid = parse_grid(config.grid);
  return options;
}

SelectOptions select_options(const RunConfig& config) {
  const FitOptions fit = fit_options(config);
  SelectOptions options;
  options.degree = fit.degree;
  options.lambda0_grid = fit.lambda0_grid;
  options.knot_search = fit.knot_search;
  options.lambda_grid_size = config.lambda_count;
  options.lambda_min_ratio = config.lambda_min_ratio;
  return options;
}

PreprocessOptions preprocess_options(const RunConfig& config) {
  PreprocessOptions options;
  options.rolling_mean = config.rolling_mean;
  options.window = config.window;
  options.log_response = config.log_response;
  options.standardize = config.standardize;
  options.add_intercept = config.add_intercept;
  return options;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args);
}

int cli_main(const std::vector<std::string>& args) {
  RunConfig config;
  CLI::App app{"Varying-coefficient models with adaptive knots"};
  app.name("vcm");
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file mirroring the long flag names");

  const std::string model_group = "Model";
  app.add_option("--mode", config.mode, "one-step or two-step")
      ->check(CLI::IsMember({"one-step", "two-step"}))
      ->group(model_group);
  app.add_option("--degree", config.degree, "spline degree")->check(CLI::Range(0, 3))->group(model_group);
  app.add_option("--alpha", config.alpha, "minimum segment exponent")->check(CLI::PositiveNumber)->group(model_group);
  auto* grid_opt = app.add_option("--grid", config.grid, "candidate cut grid: auto, exact or quantile")
                       ->check(CLI::IsMember({"auto", "exact", "quantile"}))
                       ->group(model_group);
  app.add_option("--min-segment", config.min_segment, "override the minimum segment length")->group(model_group);
  app.add_option("--lambda0-min", config.lambda0_min)->check(CLI::PositiveNumber)->group(model_group);
  app.add_option("--lambda0-max", config.lambda0_max)->check(CLI::PositiveNumber)->group(model_group);
  app.add_option("--lambda0-count", config.lambda0_count)->check(CLI::Range(1, 10000))->group(model_group);
  app.add_option("--lambda-count", config.lambda_count, "group lasso path length")
      ->check(CLI::Range(1, 10000))
      ->group(model_group);
  app.add_option("--lambda-min-ratio", config.lambda_min_ratio)->check(CLI::Range(1e-12, 1.0))->group(model_group);
  app.add_option("--knots", config.knots, "select: adaptive or equidistant")
      ->check(CLI::IsMember({"adaptive", "equidistant"}))
      ->group(model_group);
  app.add_option("--max-knots", config.max_knots, "equidistant baseline: largest knot count")->group(model_group);

  const std::string data_group = "Data";
  app.add_option("--data", config.data, "input CSV (unit,t,y,x1..xp)")->group(data_group);
  app.add_option("--col-unit", config.columns.unit)->group(data_group);
  app.add_option("--col-t", config.columns.t)->group(data_group);
  app.add_option("--col-y", config.columns.y)->group(data_group);
  app.add_option("--col-x", config.columns.predictors, "predictor columns, comma separated")
      ->delimiter(',')
      ->group(data_group);
  app.add_flag("--standardize", config.standardize, "centre and scale predictors")->group(data_group);
  app.add_flag("--add-intercept", config.add_intercept, "prepend a column of ones")->group(data_group);
  app.add_flag("--rolling-mean", config.rolling_mean, "forward rolling mean of the response")->group(data_group);
  app.add_option("--window", config.window, "rolling mean length in days")->check(CLI::Range(1, 365))->group(data_group);
  app.add_flag("--log-response", config.log_response)->group(data_group);
  app.add_option("--tau-min", config.tau_min)->check(CLI::Range(-60, 60))->group(data_group);
  app.add_option("--tau-max", config.tau_max)->check(CLI::Range(-60, 60))->group(data_group);

  const std::string sim_group = "Simulation";
  app.add_option("--seed", config.seed, "master seed (required by simulate and bench)")->group(sim_group);
  app.add_option("--n", config.n, "individuals or units; a list for bench table2")->delimiter(',')->group(sim_group);
  app.add_option("--schedule", config.schedule, "scheduled visits per individual")->group(sim_group);
  app.add_option("--skip-prob", config.skip_prob)->check(CLI::Range(0.0, 0.99))->group(sim_group);
  app.add_option("--p", config.p, "predictors in the sparse design")->group(sim_group);
  app.add_option("--days", config.days)->group(sim_group);
  app.add_option("--lag", config.lag)->check(CLI::Range(0, 60))->group(sim_group);
  app.add_option("--predictors", config.predictors, "planted-lag panel predictors")->group(sim_group);
  app.add_option("--reps", config.reps)->group(sim_group);
  app.add_option("--threads", config.threads, "worker threads, 0 = all cores")->group(sim_group);
  app.add_flag("--equidistant", config.equidistant, "bench table2: also run equidistant knots")->group(sim_group);

  const std::string out_group = "Output";
  app.add_option("--out", config.out, "primary output file")->group(out_group);
  app.add_option("--curves", config.curves, "fit: coefficient curves on 200 points")->group(out_group);
  app.add_option("--raw", config.raw, "bench: per-replicate CSV")->group(out_group);
  app.add_option("--model", config.model, "predict: model JSON")->group(out_group);

  std::string sim_design;
  std::string bench_table;
  auto* simulate = app.add_subcommand("simulate", "generate a dataset as CSV");
  simulate->add_option("design", sim_design, "tang, wei or panel")
      ->required()
      ->check(CLI::IsMember({"tang", "wei", "panel"}));
  auto* fit = app.add_subcommand("fit", "spline fit with BIC-tuned knots");
  auto* predict_cmd = app.add_subcommand("predict", "apply a fitted model to a CSV");
  auto* select = app.add_subcommand("select", "adaptive group lasso variable selection");
  auto* bench = app.add_subcommand("bench", "replicated simulation benchmarks");
  bench->add_option("table", bench_table, "table1 or table2")
      ->required()
      ->check(CLI::IsMember({"table1", "table2"}));
  auto* lagscan = app.add_subcommand("lagscan", "RMSE of the fit for each response lag");
  auto* corr = app.add_subcommand("corr", "predictor correlation matrix");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim_design, config);
    if (fit->parsed()) return run_fit(config);
    if (predict_cmd->parsed()) return run_predict(config);
    if (select->parsed()) return run_select(config);
    if (bench->parsed()) return run_bench(bench_table, config, grid_opt->count() > 0);
    if (lagscan->parsed()) return run_lagscan(config);
    if (corr->parsed()) return run_corr(config);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nrun with --help for the list of flags\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace vcm
