#pragma once

// Subset search and the intersection estimator of the causal predictors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "seqicp/dataset.hpp"
#include "seqicp/error.hpp"
#include "seqicp/parallel.hpp"
#include "seqicp/resampling.hpp"

namespace seqicp {

enum class TestKind { Single, Decoupled };
enum class LagStrategy { MaxSet, BonferroniUnion };

struct SearchOptions {
  TestKind test = TestKind::Decoupled;
  std::optional<int> max_subset_size;
  std::uint64_t subset_budget = std::uint64_t{1} << 20;
  // Skip subsets that cannot change the running intersection. Ignored when
  // full_report is set.
  bool prune = false;
  bool full_report = true;
};

struct SubsetResult {
  Subset subset;
  TestOutcome outcome;  // for the decoupled test: p-value and decision of the combination
  bool accepted = false;
  std::optional<DecoupledOutcome> decoupled;
};

struct SearchReport {
  Subset estimate;
  std::vector<SubsetResult> subset_results;  // in enumeration order
  // Per predictor: max of p_S over tested S not containing it. NaN if no such S was tested.
  std::vector<double> variable_p_values;
  std::vector<std::string> column_names;
  TestConfig config;
  TestKind test = TestKind::Decoupled;
  std::size_t tested = 0;
  std::size_t skipped = 0;
  bool any_accepted = false;

  // Lag scans only.
  std::optional<LagStrategy> strategy;
  std::vector<long> lag_set;
  std::vector<SearchReport> per_lag;
};

/// Subsets of {0..d-1} with at most `max_size` elements, ordered by size, then mask.
inline std::vector<Subset> enumerate_subsets(int d, std::optional<int> max_size, std::uint64_t budget) {
  require(d >= 0 && d <= 63, ErrorCode::TooManySubsets, "subset enumeration supports at most 63 predictors");
  const int cap = std::min(d, max_size.value_or(d));
  long double count = 0;
  for (int k = 0; k <= cap; ++k) {
    long double c = 1;
    for (int i = 0; i < k; ++i) c = c * (d - i) / (i + 1);
    count += c;
  }
  require(count <= static_cast<long double>(budget), ErrorCode::TooManySubsets,
          "number of subsets exceeds the budget; set a maximum subset size");

  std::vector<Subset> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k <= cap; ++k) {
    if (k == 0) {
      out.emplace_back(0);
      continue;
    }
    // Gosper's hack: next mask with the same popcount
    std::uint64_t mask = (std::uint64_t{1} << k) - 1;
    const std::uint64_t limit = std::uint64_t{1} << d;
    while (mask < limit) {
      out.emplace_back(mask);
      const std::uint64_t low = mask & (~mask + 1);
      const std::uint64_t ripple = mask + low;
      mask = (((ripple ^ mask) >> 2) / low) | ripple;
    }
  }
  return out;
}

inline SubsetResult test_subset(const Dataset& data, Subset subset, const TestConfig& config, TestKind test) {
  SubsetResult result;
  result.subset = subset;
  if (test == TestKind::Single) {
    result.outcome = test_invariance(data, subset, config);
  } else {
    auto dec = decoupled_test(data, subset, config);
    result.outcome.statistic_value = dec.coefficient.statistic_value;
    result.outcome.null_summary = dec.coefficient.null_summary;
    result.outcome.p_value = dec.p_value;
    result.outcome.reject = dec.reject;
    result.decoupled = std::move(dec);
  }
  result.accepted = result.outcome.p_value > config.alpha;
  return result;
}

namespace detail {

inline void finalize_report(SearchReport& report, int d) {
  report.any_accepted = false;
  Subset running = Subset::full(d);
  for (const auto& r : report.subset_results) {
    if (!r.accepted) continue;
    running = report.any_accepted ? (running & r.subset) : r.subset;
    report.any_accepted = true;
  }
  report.estimate = report.any_accepted ? running : Subset();

  report.variable_p_values.assign(static_cast<std::size_t>(d), std::numeric_limits<double>::quiet_NaN());
  for (int j = 0; j < d; ++j) {
    double best = -1.0;
    for (const auto& r : report.subset_results)
      if (!r.subset.contains(j)) best = std::max(best, r.outcome.p_value);
    if (best >= 0.0) report.variable_p_values[static_cast<std::size_t>(j)] = best;
  }
  report.tested = report.subset_results.size();
}

inline SearchReport empty_report(const Dataset& data, const TestConfig& config, TestKind test) {
  SearchReport report;
  report.column_names = data.column_names;
  report.config = config;
  report.test = test;
  return report;
}

}  // namespace detail

/// Tests every subset (up to the size cap) and intersects the accepted ones.
inline SearchReport search(const Dataset& data, const TestConfig& config, const SearchOptions& options = {}) {
  data.validate();
  config.validate();
  const int d = static_cast<int>(data.d());
  const auto subsets = enumerate_subsets(d, options.max_subset_size, options.subset_budget);

  SearchReport report = detail::empty_report(data, config, options.test);
  report.subset_results.resize(subsets.size());
  parallel_for(subsets.size(), [&](std::size_t i) {
    report.subset_results[i] = test_subset(data, subsets[i], config, options.test);
  });
  detail::finalize_report(report, d);
  return report;
}

/// Same estimate as `search`. Subsets containing the running intersection of
/// the accepted sets cannot change it and are skipped unless a full report is
/// requested. Per-subset p-values are identical to `search` because every
/// subset owns its random streams.
inline SearchReport prune_enabled_search(const Dataset& data, const TestConfig& config,
                                         const SearchOptions& options = {}) {
  if (options.full_report || !options.prune) return search(data, config, options);
  data.validate();
  config.validate();
  const int d = static_cast<int>(data.d());
  const auto subsets = enumerate_subsets(d, options.max_subset_size, options.subset_budget);

  SearchReport report = detail::empty_report(data, config, options.test);
  std::optional<Subset> running;
  for (const Subset s : subsets) {
    if (running && running->is_subset_of(s)) {
      ++report.skipped;
      continue;
    }
    auto result = test_subset(data, s, config, options.test);
    if (result.accepted) running = running ? (*running & s) : s;
    report.subset_results.push_back(std::move(result));
  }
  detail::finalize_report(report, d);
  return report;
}

/// Runs the search for every lag order in `lag_set`.
///  MaxSet: each at level alpha; returns the lag with the largest estimate (ties: smallest lag).
///  BonferroniUnion: each at alpha / |L|; the estimate is the union of the estimates.
inline SearchReport lag_scan(const Dataset& data, const TestConfig& config, std::vector<long> lag_set,
                             LagStrategy strategy, const SearchOptions& options = {}) {
  require(!lag_set.empty(), ErrorCode::InvalidArgument, "lag set must not be empty");
  std::sort(lag_set.begin(), lag_set.end());
  lag_set.erase(std::unique(lag_set.begin(), lag_set.end()), lag_set.end());
  for (long p : lag_set)
    require(p >= 0 && p <= data.n() - 2, ErrorCode::LagTooLarge, "lag order exceeds n - 2");

  const double level =
      strategy == LagStrategy::MaxSet ? config.alpha : config.alpha / static_cast<double>(lag_set.size());
  std::vector<SearchReport> per_lag;
  for (long p : lag_set) {
    TestConfig c = config;
    c.lags = p;
    c.alpha = level;
    per_lag.push_back(prune_enabled_search(data, c, options));
  }

  SearchReport out;
  if (strategy == LagStrategy::MaxSet) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < per_lag.size(); ++i)
      if (per_lag[i].estimate.size() > per_lag[best].estimate.size()) best = i;
    out = per_lag[best];
  } else {
    out = detail::empty_report(data, config, options.test);
    out.config.alpha = config.alpha;
    const int d = static_cast<int>(data.d());
    out.variable_p_values.assign(static_cast<std::size_t>(d), std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : per_lag) {
      out.estimate = out.estimate | r.estimate;
      out.any_accepted = out.any_accepted || r.any_accepted;
      out.tested += r.tested;
      out.skipped += r.skipped;
      for (int j = 0; j < d; ++j) {
        const double pj = r.variable_p_values[static_cast<std::size_t>(j)];
        if (std::isnan(pj)) continue;
        const double adjusted = std::min(1.0, pj * static_cast<double>(lag_set.size()));
        double& slot = out.variable_p_values[static_cast<std::size_t>(j)];
        slot = std::isnan(slot) ? adjusted : std::min(slot, adjusted);
      }
    }
  }
  out.strategy = strategy;
  out.lag_set = lag_set;
  out.per_lag = std::move(per_lag);
  return out;
}

}  // namespace seqicp
