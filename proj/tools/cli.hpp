#pragma once

// Command-line front end: test, search, simulate, experiment.
// Exit status: 0 success, 2 invalid usage or input, 1 runtime failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqicp/seqicp.hpp"

namespace seqicp::cli {

enum ExitCode { kOk = 0, kRuntimeError = 1, kValidationError = 2 };

struct StatOptions {
  std::string stat = "decoupled";
  std::string combiner = "max";
  std::string comparison = "f2";
  std::vector<long> grid;
  std::optional<long> min_size;
  std::optional<double> bandwidth;
  int B = 499;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  long lags = 0;
};

struct CliConfig {
  std::string command;
  std::string input_path;
  std::string target = "Y";
  std::string subset;
  StatOptions stat;
  std::vector<long> lag_set;
  std::string strategy = "max-set";
  std::optional<int> max_subset_size;
  bool prune = false;
  std::string output_path;
  std::string format = "json";
  // simulate
  std::string sim_kind = "scm3";
  long n = 200;
  int d = 2;
  int alternative = 1;
  double shock_strength = 0.0;
  double outlier_value = 10.0;
  std::string truth_path;
  // experiment
  std::string exp_kind = "level";
  int replications = 100;
  std::vector<long> sample_sizes;
  std::vector<double> strengths;
  std::vector<long> splits;
  std::vector<std::string> stats;
  std::optional<long> grid_points;
  bool outlier = false;
};

inline Family parse_family(const std::string& s) {
  for (Family f : {Family::T1, Family::T2, Family::T3, Family::T4, Family::T5, Family::Hsic, Family::SmoothMean,
                   Family::SmoothVar})
    if (s == to_string(f)) return f;
  throw Error(ErrorCode::InvalidArgument, "unknown statistic '" + s + "'");
}

inline TestChoice parse_test_choice(const std::string& s) {
  if (s == "decoupled") return {TestKind::Decoupled, Family::T1};
  return {TestKind::Single, parse_family(s)};
}

inline TestConfig make_test_config(const StatOptions& o) {
  TestConfig c;
  c.statistic.family = o.stat == "decoupled" ? Family::T1 : parse_family(o.stat);
  c.statistic.combiner = o.combiner == "sum" ? Combiner::Sum : Combiner::Max;
  c.statistic.layout.kind = o.comparison == "f1" ? ComparisonKind::F1 : ComparisonKind::F2;
  if (!o.grid.empty()) c.statistic.layout.grid = o.grid;
  c.statistic.layout.min_size = o.min_size;
  c.statistic.bandwidth.fixed = o.bandwidth;
  c.B = o.B;
  c.alpha = o.alpha;
  c.seed = o.seed;
  c.lags = o.lags;
  c.validate();
  return c;
}

/// Subset from a comma-separated list of column names or 1-based indices.
inline Subset parse_subset(const std::string& spec, const Dataset& data) {
  std::vector<int> idx;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    int found = -1;
    for (std::size_t j = 0; j < data.column_names.size(); ++j)
      if (data.column_names[j] == item) found = static_cast<int>(j);
    if (found < 0) {
      int k = 0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), k);
      if (ec == std::errc() && ptr == item.data() + item.size() && k >= 1 && k <= data.d()) found = k - 1;
    }
    require(found >= 0, ErrorCode::InvalidArgument, "unknown predictor '" + item + "'");
    idx.push_back(found);
  }
  return Subset::of(idx);
}

inline void emit(const CliConfig& cfg, const std::string& text, std::ostream& out) {
  if (cfg.output_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(cfg.output_path);
  require(static_cast<bool>(file), ErrorCode::InvalidArgument, "cannot write " + cfg.output_path);
  file << text;
}

inline int run_test(const CliConfig& cfg, std::ostream& out) {
  const Dataset data = load_csv(cfg.input_path, cfg.target);
  const TestConfig config = make_test_config(cfg.stat);
  const Subset subset = parse_subset(cfg.subset, data);
  const TestKind kind = cfg.stat.stat == "decoupled" ? TestKind::Decoupled : TestKind::Single;
  const auto result = test_subset(data, subset, config, kind);
  nlohmann::json j = to_json(result, data.column_names);
  j["reject"] = result.outcome.reject;
  if (kind == TestKind::Single) j["null_summary"] = to_json(result.outcome.null_summary);
  j["config"] = config_json(config, kind);
  emit(cfg, j.dump(2) + "\n", out);
  return kOk;
}

inline int run_search(const CliConfig& cfg, std::ostream& out) {
  const Dataset data = load_csv(cfg.input_path, cfg.target);
  const TestConfig config = make_test_config(cfg.stat);
  SearchOptions options;
  options.test = cfg.stat.stat == "decoupled" ? TestKind::Decoupled : TestKind::Single;
  options.max_subset_size = cfg.max_subset_size;
  options.prune = cfg.prune;
  options.full_report = !cfg.prune;
  SearchReport report;
  if (cfg.lag_set.empty()) {
    report = prune_enabled_search(data, config, options);
  } else {
    require(cfg.strategy == "max-set" || cfg.strategy == "bonferroni-union", ErrorCode::InvalidArgument,
            "strategy must be max-set or bonferroni-union");
    report = lag_scan(data, config, cfg.lag_set,
                      cfg.strategy == "max-set" ? LagStrategy::MaxSet : LagStrategy::BonferroniUnion, options);
  }
  emit(cfg, to_json(report).dump(2) + "\n", out);
  return kOk;
}

inline LabeledDataset simulate(const CliConfig& cfg, std::uint64_t seed) {
  const std::string& k = cfg.sim_kind;
  if (k == "changepoint") return gen_changepoint_alternative(cfg.n, cfg.alternative, seed);
  if (k == "scm3") return gen_scm_three_env(cfg.n, seed);
  if (k == "var-shock") return gen_var_shock(cfg.n, cfg.shock_strength, seed);
  if (k == "var-outlier") return gen_var_outlier(cfg.n, cfg.outlier_value, seed);
  if (k == "sign-flip") return gen_sign_flip_example(cfg.n, seed);
  if (k == "linear") return gen_linear_gaussian(cfg.n, cfg.d, seed);
  throw Error(ErrorCode::InvalidArgument, "unknown simulation kind '" + k + "'");
}

inline std::string sidecar_path(const std::string& csv_path) {
  const auto dot = csv_path.find_last_of('.');
  const auto slash = csv_path.find_last_of('/');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return csv_path.substr(0, dot) + ".json";
  return csv_path + ".json";
}

inline int run_simulate(const CliConfig& cfg, std::ostream& out) {
  const auto labeled = simulate(cfg, cfg.stat.seed);
  std::ostringstream csv;
  write_csv(csv, labeled.dataset);
  emit(cfg, csv.str(), out);
  std::string truth = cfg.truth_path;
  if (truth.empty() && !cfg.output_path.empty()) truth = sidecar_path(cfg.output_path);
  if (!truth.empty()) {
    std::ofstream file(truth);
    require(static_cast<bool>(file), ErrorCode::InvalidArgument, "cannot write " + truth);
    file << ground_truth_json(labeled).dump(2) << "\n";
  }
  return kOk;
}

inline int run_experiment_command(const CliConfig& cfg, std::ostream& out) {
  ExperimentParams p;
  p.replications = cfg.replications;
  p.B = cfg.stat.B;
  p.alpha = cfg.stat.alpha;
  p.sample_sizes = cfg.sample_sizes;
  for (const auto& s : cfg.stats) p.tests.push_back(parse_test_choice(s));
  p.grid_points = cfg.grid_points;
  p.comparison = cfg.stat.comparison == "f1" ? ComparisonKind::F1 : ComparisonKind::F2;
  p.strengths = cfg.strengths;
  p.outlier = cfg.outlier;
  if (!cfg.stat.grid.empty()) p.grid = cfg.stat.grid;
  p.lags = cfg.stat.lags == 0 ? 1 : cfg.stat.lags;
  if (!cfg.splits.empty()) p.extra_splits = cfg.splits;

  ExperimentKind kind;
  const std::string& k = cfg.exp_kind;
  if (k == "level") kind = ExperimentKind::Level;
  else if (k == "rate") kind = ExperimentKind::Rate;
  else if (k == "coverage") kind = ExperimentKind::Coverage;
  else if (k == "shock") kind = ExperimentKind::Shock;
  else if (k == "splitting") kind = ExperimentKind::Splitting;
  else throw Error(ErrorCode::InvalidArgument, "unknown experiment kind '" + k + "'");

  const auto table = run_experiment(kind, p, cfg.stat.seed);
  if (cfg.format == "csv") {
    std::ostringstream csv;
    write_csv(csv, table);
    emit(cfg, csv.str(), out);
  } else {
    emit(cfg, to_json(table).dump(2) + "\n", out);
  }
  return kOk;
}

inline void add_stat_options(CLI::App* app, StatOptions& o) {
  app->add_option("--stat", o.stat, "t1|t2|t3|t4|t5|hsic|smooth-mean|smooth-var|decoupled")
      ->check(CLI::IsMember({"t1", "t2", "t3", "t4", "t5", "hsic", "smooth-mean", "smooth-var", "decoupled"}));
  app->add_option("--combiner", o.combiner, "max|sum")->check(CLI::IsMember({"max", "sum"}));
  app->add_option("--comparison", o.comparison, "f1 (disjoint pairs) | f2 (complements)")
      ->check(CLI::IsMember({"f1", "f2"}));
  app->add_option("--grid", o.grid, "comma-separated grid points (time indices)")->delimiter(',');
  app->add_option("--min-size", o.min_size, "minimum environment size");
  app->add_option("--bandwidth", o.bandwidth, "fixed kernel bandwidth for hsic/smooth-*");
  app->add_option("--B", o.B, "number of resamples")->check(CLI::Range(19, 100000000));
  app->add_option("--alpha", o.alpha, "significance level");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--lags", o.lags, "number of lags of all variables in the regression");
}

/// Parses argv and dispatches. Diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  CLI::App app{"Invariant causal prediction for sequentially ordered data", "seqicp"};
  app.require_subcommand(1);

  auto* test = app.add_subcommand("test", "test invariance of one predictor subset");
  test->add_option("--input", cfg.input_path, "CSV file, rows in time order")->required();
  test->add_option("--target", cfg.target, "response column (name or #index)");
  test->add_option("--subset", cfg.subset, "comma-separated predictor names or 1-based indices");
  test->add_option("--output", cfg.output_path, "write JSON here instead of stdout");
  add_stat_options(test, cfg.stat);

  auto* search = app.add_subcommand("search", "estimate the set of causal predictors");
  search->add_option("--input", cfg.input_path, "CSV file, rows in time order")->required();
  search->add_option("--target", cfg.target, "response column (name or #index)");
  search->add_option("--output", cfg.output_path, "write JSON here instead of stdout");
  search->add_option("--max-subset-size", cfg.max_subset_size, "only test subsets up to this size");
  search->add_flag("--prune", cfg.prune, "skip subsets that cannot change the estimate");
  search->add_option("--lag-set", cfg.lag_set, "scan these lag orders")->delimiter(',');
  search->add_option("--strategy", cfg.strategy, "max-set|bonferroni-union")
      ->check(CLI::IsMember({"max-set", "bonferroni-union"}));
  add_stat_options(search, cfg.stat);

  auto* simulate_cmd = app.add_subcommand("simulate", "generate a labeled data set");
  simulate_cmd->add_option("--kind", cfg.sim_kind, "changepoint|scm3|var-shock|var-outlier|sign-flip|linear")
      ->check(CLI::IsMember({"changepoint", "scm3", "var-shock", "var-outlier", "sign-flip", "linear"}));
  simulate_cmd->add_option("--n", cfg.n, "sample size");
  simulate_cmd->add_option("--d", cfg.d, "predictors (linear)");
  simulate_cmd->add_option("--alternative", cfg.alternative, "1|2|3 (changepoint)");
  simulate_cmd->add_option("--shock-strength", cfg.shock_strength, "shock size (var-shock)");
  simulate_cmd->add_option("--outlier-value", cfg.outlier_value, "outlier value (var-outlier)");
  simulate_cmd->add_option("--seed", cfg.stat.seed, "random seed");
  simulate_cmd->add_option("--output", cfg.output_path, "CSV path; ground truth goes next to it as .json");
  simulate_cmd->add_option("--truth", cfg.truth_path, "explicit path for the ground-truth JSON");

  auto* experiment = app.add_subcommand("experiment", "run a Monte-Carlo experiment");
  experiment->add_option("--kind", cfg.exp_kind, "level|rate|coverage|shock|splitting")
      ->check(CLI::IsMember({"level", "rate", "coverage", "shock", "splitting"}));
  experiment->add_option("--reps", cfg.replications, "replications per condition");
  experiment->add_option("--n", cfg.sample_sizes, "sample sizes")->delimiter(',');
  experiment->add_option("--stats", cfg.stats, "tests to compare (level, rate)")->delimiter(',');
  experiment->add_option("--grid-points", cfg.grid_points, "equidistant grid size (coverage)");
  experiment->add_option("--strengths", cfg.strengths, "shock strengths or outlier values")->delimiter(',');
  experiment->add_flag("--outlier", cfg.outlier, "plant outliers instead of shocks");
  experiment->add_option("--splits", cfg.splits, "extra grid points (splitting)")->delimiter(',');
  experiment->add_option("--format", cfg.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  experiment->add_option("--output", cfg.output_path, "write the table here instead of stdout");
  add_stat_options(experiment, cfg.stat);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidationError;
  }

  try {
    if (test->parsed()) return run_test(cfg, out);
    if (search->parsed()) return run_search(cfg, out);
    if (simulate_cmd->parsed()) return run_simulate(cfg, out);
    return run_experiment_command(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kValidationError : kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace seqicp::cli
