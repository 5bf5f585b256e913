#pragma once

// Exact resampling tests of set invariance.
//
// Under the null, the scaled residuals of a Gaussian linear model are a fixed
// function of the design and of a standard normal vector. Drawing fresh normal
// vectors, projecting out the design and normalizing therefore samples the
// exact conditional null law of any statistic of the scaled residuals.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "seqicp/dataset.hpp"
#include "seqicp/error.hpp"
#include "seqicp/parallel.hpp"
#include "seqicp/random.hpp"
#include "seqicp/regression.hpp"
#include "seqicp/statistics.hpp"

namespace seqicp {

struct TestConfig {
  StatisticSpec statistic;
  int B = 499;
  double alpha = 0.05;
  long lags = 0;
  std::uint64_t seed = 0;

  void validate() const {
    require(B >= 19, ErrorCode::InvalidArgument, "B must be at least 19");
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    require(lags >= 0, ErrorCode::LagTooLarge, "lag order must be non-negative");
  }
};

struct NullSummary {
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  double q95 = 0.0;
  double q99 = 0.0;
};

struct TestOutcome {
  double statistic_value = 0.0;  // |T| of the observed scaled residuals
  double p_value = 1.0;
  bool reject = false;
  NullSummary null_summary;
};

/// p = (1 + #{b : null_b >= observed}) / (B + 1). Ties count against rejection.
inline double resampling_p_value(double observed, const std::vector<double>& null_values) {
  const auto exceed = std::count_if(null_values.begin(), null_values.end(),
                                    [observed](double v) { return v >= observed; });
  return static_cast<double>(1 + exceed) / static_cast<double>(null_values.size() + 1);
}

inline NullSummary summarize_null(std::vector<double> values) {
  NullSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  // type-7 empirical quantile
  auto quantile = [&values](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  s.min = values.front();
  s.max = values.back();
  s.q50 = quantile(0.5);
  s.q90 = quantile(0.9);
  s.q95 = quantile(0.95);
  s.q99 = quantile(0.99);
  return s;
}

/// B draws of |T| under the null for a fixed design. Draw b uses the stream
/// (seed, domain, stream_key, b), so the output does not depend on scheduling.
inline std::vector<double> resample_null(const ResidualProjector& projector, const Statistic& statistic, int B,
                                         std::uint64_t seed, std::uint64_t domain = stream_domain::kResample,
                                         std::uint64_t stream_key = 0) {
  require(B >= 1, ErrorCode::InvalidArgument, "B must be positive");
  const Eigen::Index n = projector.rows();
  std::vector<double> out(static_cast<std::size_t>(B));
  parallel_for(out.size(), [&](std::size_t b) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      RandomStream rng({seed, domain | (attempt << 32), stream_key, b});
      Eigen::VectorXd eps(n);
      for (Eigen::Index i = 0; i < n; ++i) eps(i) = rng.normal();
      Eigen::VectorXd r = projector.residuals(eps);
      const double norm = r.norm();
      if (!(norm > 1e-12)) continue;  // probability zero, redraw on a fresh stream
      r /= norm;
      out[b] = statistic.evaluate(r);
      return;
    }
  });
  return out;
}

inline std::vector<double> resample_null(const DesignMatrix& design, const StatisticSpec& spec, int B,
                                         std::uint64_t seed) {
  const ResidualProjector projector(design);
  const auto statistic = make_statistic(spec, design);
  return resample_null(projector, *statistic, B, seed);
}

namespace detail {

inline TestOutcome run_resampling_test(const ResidualProjector& projector, const Statistic& statistic,
                                       const ScaledResiduals& observed, int B, double alpha,
                                       std::uint64_t seed, std::uint64_t domain, std::uint64_t stream_key) {
  TestOutcome out;
  out.statistic_value = std::abs(statistic.evaluate(observed.values));
  const auto null_values = resample_null(projector, statistic, B, seed, domain, stream_key);
  out.p_value = resampling_p_value(out.statistic_value, null_values);
  out.reject = out.p_value <= alpha;
  out.null_summary = summarize_null(null_values);
  return out;
}

}  // namespace detail

/// Resampling test of H_{0,S} with p lags (config.lags).
inline TestOutcome test_invariance(const Dataset& data, Subset subset, const TestConfig& config) {
  config.validate();
  const auto lagged = build_lagged_design(data, subset, config.lags);
  const ResidualProjector projector(lagged.design);
  const auto observed = projector.scaled(lagged.response);
  const auto statistic = make_statistic(config.statistic, lagged.design);
  return detail::run_resampling_test(projector, *statistic, observed, config.B, config.alpha, config.seed,
                                     stream_domain::kResample, subset.mask());
}

/// Bonferroni combination of two p-values: min(1, 2 * min(p1, p2)).
inline double bonferroni_pair(double p1, double p2) { return std::min(1.0, 2.0 * std::min(p1, p2)); }

struct DecoupledOutcome {
  TestOutcome coefficient;  // T1, tested at alpha / 2
  TestOutcome variance;     // T2, tested at alpha / 2
  double p_value = 1.0;
  bool reject = false;
};

/// Coefficient-shift (T1) and variance-shift (T2) tests at alpha/2 each; the
/// statistic family in `config` is ignored, combiner and layout are used.
inline DecoupledOutcome decoupled_test(const Dataset& data, Subset subset, const TestConfig& config) {
  config.validate();
  const auto lagged = build_lagged_design(data, subset, config.lags);
  const ResidualProjector projector(lagged.design);
  const auto observed = projector.scaled(lagged.response);

  StatisticSpec coef_spec = config.statistic;
  coef_spec.family = Family::T1;
  StatisticSpec var_spec = config.statistic;
  var_spec.family = Family::T2;
  const auto coef_stat = make_statistic(coef_spec, lagged.design);
  const auto var_stat = make_statistic(var_spec, lagged.design);

  DecoupledOutcome out;
  const double half = config.alpha / 2.0;
  out.coefficient = detail::run_resampling_test(projector, *coef_stat, observed, config.B, half, config.seed,
                                                stream_domain::kResampleCoef, subset.mask());
  out.variance = detail::run_resampling_test(projector, *var_stat, observed, config.B, half, config.seed,
                                             stream_domain::kResampleVar, subset.mask());
  out.p_value = bonferroni_pair(out.coefficient.p_value, out.variance.p_value);
  out.reject = out.p_value <= config.alpha;
  return out;
}

}  // namespace seqicp
