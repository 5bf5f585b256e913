#pragma once

// Data generators with ground truth, and the Monte-Carlo experiment harness.
//
// Every generator is a pure function of its arguments: all randomness comes
// from Philox streams keyed by the seed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "seqicp/dataset.hpp"
#include "seqicp/environments.hpp"
#include "seqicp/error.hpp"
#include "seqicp/parallel.hpp"
#include "seqicp/random.hpp"
#include "seqicp/search.hpp"

namespace seqicp {

enum class ScmKind { ChangepointLinear, ScmThreeEnv, VarShock, VarOutlier, SignFlipExample, LinearGaussian };

constexpr std::string_view to_string(ScmKind k) {
  switch (k) {
    case ScmKind::ChangepointLinear: return "changepoint";
    case ScmKind::ScmThreeEnv: return "scm3";
    case ScmKind::VarShock: return "var-shock";
    case ScmKind::VarOutlier: return "var-outlier";
    case ScmKind::SignFlipExample: return "sign-flip";
    case ScmKind::LinearGaussian: return "linear";
  }
  return "?";
}

struct LabeledDataset {
  Dataset dataset;
  Subset true_parents;
  std::vector<long> true_change_points;
  ScmKind kind = ScmKind::LinearGaussian;
  std::uint64_t seed = 0;
  std::map<std::string, double> parameters;
  std::vector<std::map<std::string, double>> environments;  // per true environment
  // Structural noise actually drawn: column 0 for the target, then one per predictor.
  Eigen::MatrixXd noise;
};

namespace detail {

inline RandomStream sim_stream(std::uint64_t seed, std::uint64_t which = 0) {
  return RandomStream({seed, stream_domain::kSimulation, which, 0});
}

inline RandomStream sim_aux_stream(std::uint64_t seed) {
  return RandomStream({seed, stream_domain::kSimulationAux, 0, 0});
}

}  // namespace detail

/// Gaps between the two halves for the rate alternatives: {|beta_e - beta_f|, |sigma_e^2 - sigma_f^2|}.
inline std::pair<double, double> alternative_gaps(long n, int alternative) {
  const double ln = std::log(static_cast<double>(n));
  const double nd = static_cast<double>(n);
  switch (alternative) {
    case 1: return {ln / (20.0 * std::sqrt(nd)), 0.0};
    case 2: return {ln / (20.0 * std::pow(nd, 0.25)), 0.0};
    case 3: return {0.0, ln / std::sqrt(nd)};
    default: throw Error(ErrorCode::InvalidArgument, "alternative must be 1, 2 or 3");
  }
}

/// Y = beta_t X + eps_t with one change point at n/2. The second half has
/// beta = 1, sigma^2 = 1; the first half adds the gaps of the chosen alternative.
inline LabeledDataset gen_changepoint_alternative(long n, int alternative, std::uint64_t seed) {
  require(n >= 20 && n % 2 == 0, ErrorCode::InvalidArgument, "n must be even and at least 20");
  const auto [beta_gap, var_gap] = alternative_gaps(n, alternative);
  const long half = n / 2;
  const double beta[2] = {1.0 + beta_gap, 1.0};
  const double var[2] = {1.0 + var_gap, 1.0};

  LabeledDataset out;
  out.kind = ScmKind::ChangepointLinear;
  out.seed = seed;
  out.dataset.y.resize(n);
  out.dataset.x.resize(n, 1);
  out.dataset.column_names = {"X1"};
  out.noise.resize(n, 2);
  auto rng = detail::sim_stream(seed);
  for (long t = 0; t < n; ++t) {
    const int env = t < half ? 0 : 1;
    const double x = rng.normal();
    const double eps = std::sqrt(var[env]) * rng.normal();
    out.dataset.x(t, 0) = x;
    out.dataset.y(t) = beta[env] * x + eps;
    out.noise(t, 0) = eps;
    out.noise(t, 1) = x;
  }
  out.true_parents = Subset::of({0});
  out.true_change_points = {half};
  out.parameters = {{"alternative", alternative}, {"beta_gap", beta_gap}, {"variance_gap", var_gap}};
  for (int e = 0; e < 2; ++e) out.environments.push_back({{"beta", beta[e]}, {"variance", var[e]}});
  return out;
}

/// Example of a structure change invisible in the pooled residuals:
/// Y = beta_t X + eps, beta = +1 on the first half and -1 on the second.
inline LabeledDataset gen_sign_flip_example(long n, std::uint64_t seed) {
  require(n >= 4 && n % 2 == 0, ErrorCode::InvalidArgument, "n must be even and at least 4");
  LabeledDataset out;
  out.kind = ScmKind::SignFlipExample;
  out.seed = seed;
  out.dataset.y.resize(n);
  out.dataset.x.resize(n, 1);
  out.dataset.column_names = {"X1"};
  out.noise.resize(n, 2);
  auto rng = detail::sim_stream(seed);
  for (long t = 0; t < n; ++t) {
    const double beta = t < n / 2 ? 1.0 : -1.0;
    const double x = rng.normal();
    const double eps = rng.normal();
    out.dataset.x(t, 0) = x;
    out.dataset.y(t) = beta * x + eps;
    out.noise(t, 0) = eps;
    out.noise(t, 1) = x;
  }
  out.true_parents = Subset::of({0});
  out.true_change_points = {n / 2};
  out.environments = {{{"beta", 1.0}, {"variance", 1.0}}, {{"beta", -1.0}, {"variance", 1.0}}};
  return out;
}

/// Invariant linear Gaussian model: Y = 0.5 + sum_j X_j / (j + 1) + eps, X and eps standard normal.
inline LabeledDataset gen_linear_gaussian(long n, int d, std::uint64_t seed) {
  require(n >= 2 && d >= 1, ErrorCode::InvalidArgument, "need n >= 2 and d >= 1");
  LabeledDataset out;
  out.kind = ScmKind::LinearGaussian;
  out.seed = seed;
  out.dataset.y.resize(n);
  out.dataset.x.resize(n, d);
  for (int j = 0; j < d; ++j) out.dataset.column_names.push_back("X" + std::to_string(j + 1));
  out.noise.resize(n, d + 1);
  auto rng = detail::sim_stream(seed);
  for (long t = 0; t < n; ++t) {
    double y = 0.5;
    for (int j = 0; j < d; ++j) {
      const double x = rng.normal();
      out.dataset.x(t, j) = x;
      out.noise(t, j + 1) = x;
      y += x / (j + 1.0);
    }
    const double eps = rng.normal();
    out.noise(t, 0) = eps;
    out.dataset.y(t) = y + eps;
  }
  out.true_parents = Subset::full(d);
  return out;
}

/// Three-environment SCM
///   X1 <- N1,  X2 <- b1 X1 + N2,  Y <- b2 X1 + b3 X2 + N3,  X3 <- b4 Y + N4
/// with N_j ~ N(mu_j, s2_j). Environment 2 replaces N2 by a noise with mean and
/// variance in U[1, 1.5]; environment 3 sets X3 to a noise with mean in
/// U[-1, -0.5] and variance s2_3.
inline LabeledDataset gen_scm_three_env(long n, std::vector<long> change_points, std::uint64_t seed) {
  require(n >= 30, ErrorCode::InvalidArgument, "n must be at least 30");
  auto rng = detail::sim_stream(seed);
  double beta[4], var[4], mu[4];
  for (double& b : beta) b = rng.uniform(0.5, 1.5);
  for (double& v : var) v = rng.uniform(0.1, 0.3);
  for (double& m : mu) m = rng.uniform(0.0, 0.3);
  const double x2_mean = rng.uniform(1.0, 1.5);
  const double x2_var = rng.uniform(1.0, 1.5);
  const double x3_mean = rng.uniform(-1.0, -0.5);
  const double x3_var = var[2];

  if (change_points.empty()) {
    auto aux = detail::sim_aux_stream(seed);
    const long lo = static_cast<long>(std::ceil(0.1 * static_cast<double>(n)));
    const long hi = static_cast<long>(std::floor(0.9 * static_cast<double>(n)));
    const long t1 = aux.uniform_int(lo, hi);
    long t2 = t1;
    while (t2 == t1) t2 = aux.uniform_int(lo, hi);
    change_points = {std::min(t1, t2), std::max(t1, t2)};
  }
  require(change_points.size() == 2 && change_points[0] >= 1 && change_points[0] < change_points[1] &&
              change_points[1] <= n - 1,
          ErrorCode::InvalidChangePoints, "need two increasing change points in {1, ..., n-1}");

  LabeledDataset out;
  out.kind = ScmKind::ScmThreeEnv;
  out.seed = seed;
  out.dataset.y.resize(n);
  out.dataset.x.resize(n, 3);
  out.dataset.column_names = {"X1", "X2", "X3"};
  out.noise.resize(n, 4);
  for (long t = 1; t <= n; ++t) {
    const int env = t <= change_points[0] ? 0 : (t <= change_points[1] ? 1 : 2);
    const double n1 = rng.normal(mu[0], std::sqrt(var[0]));
    const double n2 = env == 1 ? rng.normal(x2_mean, std::sqrt(x2_var)) : rng.normal(mu[1], std::sqrt(var[1]));
    const double n3 = rng.normal(mu[2], std::sqrt(var[2]));
    const double n4 = env == 2 ? rng.normal(x3_mean, std::sqrt(x3_var)) : rng.normal(mu[3], std::sqrt(var[3]));
    const double x1 = n1;
    const double x2 = beta[0] * x1 + n2;
    const double y = beta[1] * x1 + beta[2] * x2 + n3;
    const double x3 = env == 2 ? n4 : beta[3] * y + n4;
    const long r = t - 1;
    out.dataset.x(r, 0) = x1;
    out.dataset.x(r, 1) = x2;
    out.dataset.x(r, 2) = x3;
    out.dataset.y(r) = y;
    out.noise.row(r) << n3, n1, n2, n4;
  }
  out.true_parents = Subset::of({0, 1});
  out.true_change_points = change_points;
  out.parameters = {{"beta1", beta[0]}, {"beta2", beta[1]}, {"beta3", beta[2]}, {"beta4", beta[3]},
                    {"sigma2_1", var[0]}, {"sigma2_2", var[1]}, {"sigma2_3", var[2]}, {"sigma2_4", var[3]},
                    {"mu1", mu[0]}, {"mu2", mu[1]}, {"mu3", mu[2]}, {"mu4", mu[3]}};
  out.environments = {
      {},
      {{"x2_noise_mean", x2_mean}, {"x2_noise_variance", x2_var}},
      {{"x3_noise_mean", x3_mean}, {"x3_noise_variance", x3_var}},
  };
  return out;
}

inline LabeledDataset gen_scm_three_env(long n, std::uint64_t seed) { return gen_scm_three_env(n, {}, seed); }

namespace detail {

inline constexpr long kVarBurnIn = 100;

struct VarSeries {
  Eigen::MatrixXd values;  // columns X, Y, Z
  Eigen::MatrixXd noise;   // columns eps_Y, eps_X, eps_Z
};

/// Structural VAR(1):
///   X_t <- 0.5 X_{t-1} + 0.1 Y_{t-1} + 0.1 Z_{t-1} + e^X
///   Y_t <- 0.5 X_t + 0.1 X_{t-1} + 0.2 Y_{t-1} + 0.2 Z_{t-1} + e^Y
///   Z_t <- 0.2 X_t + 0.2 Y_t + 0.4 X_{t-1} + 0.4 Y_{t-1} + 0.2 Z_{t-1} + e^Z
/// `shock_time` (1-based, after burn-in) replaces the assignment of X once.
inline VarSeries simulate_var(long n, std::optional<long> shock_time, double shock_value, std::uint64_t seed) {
  auto rng = sim_stream(seed);
  VarSeries s{Eigen::MatrixXd(n, 3), Eigen::MatrixXd(n, 3)};
  double x = 0.0, y = 0.0, z = 0.0;
  for (long t = 1 - kVarBurnIn; t <= n; ++t) {
    const double ex = rng.normal();
    const double ey = rng.normal();
    const double ez = rng.normal();
    double xn = 0.5 * x + 0.1 * y + 0.1 * z + ex;
    if (shock_time && t == *shock_time) xn = shock_value;
    const double yn = 0.5 * xn + 0.1 * x + 0.2 * y + 0.2 * z + ey;
    const double zn = 0.2 * xn + 0.2 * yn + 0.4 * x + 0.4 * y + 0.2 * z + ez;
    x = xn;
    y = yn;
    z = zn;
    if (t >= 1) {
      s.values.row(t - 1) << x, y, z;
      s.noise.row(t - 1) << ey, ex, ez;
    }
  }
  return s;
}

inline LabeledDataset var_dataset(const VarSeries& s, ScmKind kind, std::uint64_t seed) {
  LabeledDataset out;
  out.kind = kind;
  out.seed = seed;
  out.dataset.y = s.values.col(1);
  out.dataset.x.resize(s.values.rows(), 2);
  out.dataset.x.col(0) = s.values.col(0);
  out.dataset.x.col(1) = s.values.col(2);
  out.dataset.column_names = {"X", "Z"};
  out.noise = s.noise;
  out.true_parents = Subset::of({0});
  return out;
}

}  // namespace detail

/// VAR with a one-time shock on X at a uniformly drawn time. A zero shock
/// strength means no intervention at all.
inline LabeledDataset gen_var_shock(long n, double shock_strength, std::uint64_t seed) {
  require(n >= 50, ErrorCode::InvalidArgument, "n must be at least 50");
  auto aux = detail::sim_aux_stream(seed);
  const long when = aux.uniform_int(1, n);
  const bool active = shock_strength != 0.0;
  auto out = detail::var_dataset(
      detail::simulate_var(n, active ? std::optional<long>(when) : std::nullopt, shock_strength, seed),
      ScmKind::VarShock, seed);
  out.parameters = {{"shock_strength", shock_strength}, {"shock_time", active ? static_cast<double>(when) : 0.0}};
  return out;
}

/// The stationary VAR with Y replaced by `outlier_value` at one uniformly drawn time.
/// The outlier does not propagate.
inline LabeledDataset gen_var_outlier(long n, double outlier_value, std::uint64_t seed) {
  require(n >= 50, ErrorCode::InvalidArgument, "n must be at least 50");
  auto aux = detail::sim_aux_stream(seed);
  const long when = aux.uniform_int(1, n);
  auto out = detail::var_dataset(detail::simulate_var(n, std::nullopt, 0.0, seed), ScmKind::VarOutlier, seed);
  out.dataset.y(when - 1) = outlier_value;
  out.parameters = {{"outlier_value", outlier_value}, {"outlier_time", static_cast<double>(when)}};
  return out;
}

// ---------------------------------------------------------------------------
// Experiment harness
// ---------------------------------------------------------------------------

enum class ExperimentKind { Level, Rate, Coverage, Shock, Splitting };

/// A test to run: the decoupled test, or a single statistic family.
struct TestChoice {
  TestKind kind = TestKind::Decoupled;
  Family family = Family::T1;

  std::string name() const { return kind == TestKind::Decoupled ? "decoupled" : std::string(to_string(family)); }
};

struct ExperimentParams {
  int replications = 100;
  int B = 199;
  double alpha = 0.05;
  std::vector<long> sample_sizes;        // defaults per kind when empty
  std::vector<TestChoice> tests;         // Level, Rate
  std::vector<int> alternatives{1, 2, 3};
  std::vector<Combiner> combiners{Combiner::Sum, Combiner::Max};  // Coverage
  std::optional<long> grid_points;       // Coverage: equidistant grid size (default grid when unset)
  ComparisonKind comparison = ComparisonKind::F2;
  std::vector<double> strengths;         // Shock: shock strengths or outlier values
  bool outlier = false;                  // Shock: plant outliers instead of shocks
  std::optional<std::vector<long>> grid; // Shock: explicit grid
  long lags = 1;                         // Shock
  std::vector<long> extra_splits{0, 1, 2, 4, 8};  // Splitting
};

using Cell = std::variant<std::string, long long, double>;

struct ExperimentTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  /// Index of a column by name; throws if absent.
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw Error(ErrorCode::InvalidArgument, "no column named " + name);
  }
};

inline double binomial_se(double rate, int replications) {
  return std::sqrt(std::max(rate * (1.0 - rate), 0.0) / static_cast<double>(replications));
}

/// Human-readable subset label, e.g. "{X1,X3}".
inline std::string subset_label(Subset s, const std::vector<std::string>& names) {
  std::string out = "{";
  bool first = true;
  for (int j : s.indices()) {
    if (!first) out += ",";
    out += names.at(static_cast<std::size_t>(j));
    first = false;
  }
  return out + "}";
}

namespace detail {

inline bool test_rejects(const Dataset& data, Subset s, const TestConfig& config, TestKind kind) {
  return test_subset(data, s, config, kind).outcome.reject;
}

inline std::vector<Cell> rate_cells(long long count, int replications) {
  const double rate = static_cast<double>(count) / replications;
  return {static_cast<long long>(replications), count, rate, binomial_se(rate, replications)};
}

inline ExperimentTable level_experiment(const ExperimentParams& p, std::uint64_t seed) {
  ExperimentTable table{{"statistic", "n", "replications", "rejections", "rate", "se"}, {}};
  const auto sizes = p.sample_sizes.empty() ? std::vector<long>{200} : p.sample_sizes;
  auto tests = p.tests;
  if (tests.empty()) {
    for (Family f : {Family::T1, Family::T2, Family::T3, Family::T4, Family::T5, Family::Hsic,
                     Family::SmoothMean, Family::SmoothVar})
      tests.push_back({TestKind::Single, f});
    tests.push_back({TestKind::Decoupled, Family::T1});
  }
  std::uint64_t condition = 0;
  for (long n : sizes)
    for (const auto& test : tests) {
      ++condition;
      std::vector<char> reject(static_cast<std::size_t>(p.replications));
      parallel_for(reject.size(), [&](std::size_t r) {
        const auto data = gen_linear_gaussian(n, 2, derive_seed(seed, 2 * condition, r));
        TestConfig config;
        config.statistic.family = test.family;
        config.B = p.B;
        config.alpha = p.alpha;
        config.seed = derive_seed(seed, 2 * condition + 1, r);
        reject[r] = test_rejects(data.dataset, Subset::full(2), config, test.kind);
      });
      const long long count = std::count(reject.begin(), reject.end(), 1);
      std::vector<Cell> row{test.name(), static_cast<long long>(n)};
      for (auto& c : rate_cells(count, p.replications)) row.push_back(c);
      table.rows.push_back(std::move(row));
    }
  return table;
}

inline ExperimentTable rate_experiment(const ExperimentParams& p, std::uint64_t seed) {
  ExperimentTable table{{"n", "alternative", "test", "replications", "rejections", "rate", "se"}, {}};
  const auto sizes = p.sample_sizes.empty() ? std::vector<long>{200, 500, 1000, 2000} : p.sample_sizes;
  auto tests = p.tests;
  if (tests.empty()) tests = {{TestKind::Decoupled, Family::T1}, {TestKind::Single, Family::T3}};
  std::uint64_t condition = 1000;
  for (long n : sizes)
    for (int alt : p.alternatives) {
      ++condition;
      for (std::size_t ti = 0; ti < tests.size(); ++ti) {
        const auto& test = tests[ti];
        std::vector<char> reject(static_cast<std::size_t>(p.replications));
        parallel_for(reject.size(), [&](std::size_t r) {
          // the same data sets are used for every test
          const auto data = gen_changepoint_alternative(n, alt, derive_seed(seed, 2 * condition, r));
          TestConfig config;
          config.statistic.family = test.family;
          config.statistic.combiner = Combiner::Sum;
          config.statistic.layout = {p.comparison, std::vector<long>{n / 2}, std::nullopt};
          config.B = p.B;
          config.alpha = p.alpha;
          config.seed = derive_seed(seed, 2 * condition + 1, r * 16 + ti);
          reject[r] = test_rejects(data.dataset, Subset::of({0}), config, test.kind);
        });
        const long long count = std::count(reject.begin(), reject.end(), 1);
        std::vector<Cell> row{static_cast<long long>(n), static_cast<long long>(alt),
                              (test.kind == TestKind::Decoupled ? std::string("decoupled")
                                                                : test.family == Family::T3 ? std::string("combined")
                                                                                            : test.name())};
        for (auto& c : rate_cells(count, p.replications)) row.push_back(c);
        table.rows.push_back(std::move(row));
      }
    }
  return table;
}

inline ExperimentTable coverage_experiment(const ExperimentParams& p, std::uint64_t seed) {
  ExperimentTable table{{"n", "combiner", "quantity", "replications", "count", "rate", "se"}, {}};
  const auto sizes = p.sample_sizes.empty() ? std::vector<long>{100, 200, 300, 400, 500} : p.sample_sizes;
  const std::vector<std::string> names{"X1", "X2", "X3"};
  const auto all = enumerate_subsets(3, std::nullopt, 8);
  std::uint64_t condition = 2000;
  for (long n : sizes) {
    ++condition;
    for (Combiner combiner : p.combiners) {
      const auto cs = static_cast<std::size_t>(combiner);
      std::vector<SearchReport> reports(static_cast<std::size_t>(p.replications));
      parallel_for(reports.size(), [&](std::size_t r) {
        const auto data = gen_scm_three_env(n, derive_seed(seed, 2 * condition, r));
        TestConfig config;
        config.statistic.combiner = combiner;
        config.statistic.layout.kind = p.comparison;
        if (p.grid_points) config.statistic.layout.grid = equidistant_grid(n, *p.grid_points);
        config.B = p.B;
        config.alpha = p.alpha;
        config.seed = derive_seed(seed, 2 * condition + 1, r * 4 + cs);
        reports[r] = search(data.dataset, config, {});
      });
      auto add = [&](const std::string& quantity, long long count) {
        std::vector<Cell> row{static_cast<long long>(n), std::string(to_string(combiner)), quantity};
        for (auto& c : rate_cells(count, p.replications)) row.push_back(c);
        table.rows.push_back(std::move(row));
      };
      const Subset parents = Subset::of({0, 1});
      add("coverage", std::count_if(reports.begin(), reports.end(),
                                    [&](const SearchReport& rep) { return rep.estimate.is_subset_of(parents); }));
      for (std::size_t si = 0; si < all.size(); ++si)
        add("reject:" + subset_label(all[si], names),
            std::count_if(reports.begin(), reports.end(),
                          [&](const SearchReport& rep) { return !rep.subset_results[si].accepted; }));
      for (const Subset s : all)
        add("estimate:" + subset_label(s, names),
            std::count_if(reports.begin(), reports.end(), [&](const SearchReport& rep) { return rep.estimate == s; }));
    }
  }
  return table;
}

inline ExperimentTable shock_experiment(const ExperimentParams& p, std::uint64_t seed) {
  ExperimentTable table{{"strength", "quantity", "subset", "replications", "count", "rate", "se"}, {}};
  const long n = p.sample_sizes.empty() ? 200 : p.sample_sizes.front();
  const auto strengths = p.strengths.empty() ? std::vector<double>{0, 10, 20, 30} : p.strengths;
  std::vector<long> grid;
  if (p.grid) {
    grid = *p.grid;
  } else {
    for (long g = 20; g < n; g += 20) grid.push_back(g);
  }
  const std::vector<std::string> names{"X", "Z"};
  const auto all = enumerate_subsets(2, std::nullopt, 4);
  std::uint64_t condition = 3000;
  for (double strength : strengths) {
    ++condition;
    std::vector<SearchReport> reports(static_cast<std::size_t>(p.replications));
    parallel_for(reports.size(), [&](std::size_t r) {
      const auto data_seed = derive_seed(seed, 2 * condition, r);
      const auto data = p.outlier ? gen_var_outlier(n, strength, data_seed) : gen_var_shock(n, strength, data_seed);
      TestConfig config;
      config.statistic.combiner = Combiner::Sum;
      config.statistic.layout = {p.comparison, grid, std::nullopt};
      config.B = p.B;
      config.alpha = p.alpha;
      config.lags = p.lags;
      config.seed = derive_seed(seed, 2 * condition + 1, r);
      reports[r] = search(data.dataset, config, {});
    });
    for (std::size_t si = 0; si < all.size(); ++si) {
      const long long count = std::count_if(reports.begin(), reports.end(),
                                            [&](const SearchReport& rep) { return !rep.subset_results[si].accepted; });
      std::vector<Cell> row{strength, std::string("reject"), subset_label(all[si], names)};
      for (auto& c : rate_cells(count, p.replications)) row.push_back(c);
      table.rows.push_back(std::move(row));
    }
    for (const Subset s : all) {
      const long long count = std::count_if(reports.begin(), reports.end(),
                                            [&](const SearchReport& rep) { return rep.estimate == s; });
      std::vector<Cell> row{strength, std::string("estimate"), subset_label(s, names)};
      for (auto& c : rate_cells(count, p.replications)) row.push_back(c);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

inline ExperimentTable splitting_experiment(const ExperimentParams& p, std::uint64_t seed) {
  ExperimentTable table{{"extra_splits", "quantity", "replications", "count", "rate", "se"}, {}};
  const long n = p.sample_sizes.empty() ? 200 : p.sample_sizes.front();
  const std::vector<long> cps{15, 30};
  std::uint64_t condition = 4000;
  for (long k : p.extra_splits) {
    ++condition;
    std::vector<long> grid = cps;
    for (long i = 1; i <= k; ++i)
      grid.push_back(cps.back() + std::lround(static_cast<double>(i) * static_cast<double>(n - cps.back()) /
                                              static_cast<double>(k + 1)));
    std::vector<SearchReport> reports(static_cast<std::size_t>(p.replications));
    parallel_for(reports.size(), [&](std::size_t r) {
      // the same data sets for every k
      const auto data = gen_scm_three_env(n, cps, derive_seed(seed, 4000, r));
      TestConfig config;
      config.statistic.combiner = Combiner::Sum;
      config.statistic.layout = {p.comparison, grid, std::nullopt};
      config.B = p.B;
      config.alpha = p.alpha;
      config.seed = derive_seed(seed, 2 * condition + 1, r);
      reports[r] = search(data.dataset, config, {});
    });
    for (int j = 0; j < 2; ++j) {
      const long long count = std::count_if(reports.begin(), reports.end(),
                                            [&](const SearchReport& rep) { return rep.estimate.contains(j); });
      std::vector<Cell> row{static_cast<long long>(k), "X" + std::to_string(j + 1) + " in estimate"};
      for (auto& c : rate_cells(count, p.replications)) row.push_back(c);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace detail

inline ExperimentTable run_experiment(ExperimentKind kind, const ExperimentParams& params, std::uint64_t seed) {
  require(params.replications >= 50, ErrorCode::InvalidArgument, "at least 50 replications required");
  require(params.B >= 19, ErrorCode::InvalidArgument, "B must be at least 19");
  switch (kind) {
    case ExperimentKind::Level: return detail::level_experiment(params, seed);
    case ExperimentKind::Rate: return detail::rate_experiment(params, seed);
    case ExperimentKind::Coverage: return detail::coverage_experiment(params, seed);
    case ExperimentKind::Shock: return detail::shock_experiment(params, seed);
    case ExperimentKind::Splitting: return detail::splitting_experiment(params, seed);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown experiment kind");
}

}  // namespace seqicp
