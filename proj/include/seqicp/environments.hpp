#pragma once

// Block-wise environments and the comparison sets built from them.
//
// Indices here are 1-based and inclusive, matching the way change points are
// usually quoted: the environment {k+1, ..., l} is Environment{k + 1, l}.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "seqicp/error.hpp"

namespace seqicp {

struct Environment {
  long start = 1;  // inclusive, 1-based
  long end = 1;    // inclusive

  long size() const { return end - start + 1; }
  bool operator==(const Environment&) const = default;
  auto operator<=>(const Environment&) const = default;
};

struct EnvironmentCollection {
  std::vector<Environment> environments;
  long n = 0;
};

enum class ComparisonKind { F1, F2 };

/// One side of a comparison: a contiguous block, or the complement of one.
struct EnvironmentSide {
  Environment block;
  bool complement = false;

  long size(long n) const { return complement ? n - block.size() : block.size(); }
  bool contains(long t) const {
    const bool inside = t >= block.start && t <= block.end;
    return complement ? !inside : inside;
  }
  bool operator==(const EnvironmentSide&) const = default;
};

struct ComparisonPair {
  EnvironmentSide e;
  EnvironmentSide f;
  bool operator==(const ComparisonPair&) const = default;
};

struct ComparisonSet {
  std::vector<ComparisonPair> pairs;
  ComparisonKind kind = ComparisonKind::F2;
  long n = 0;
};

/// All intervals {k+1..l} with k < l drawn from {0, g_1, ..., g_m, n}.
inline EnvironmentCollection grid_environments(long n, const std::vector<long>& grid) {
  require(n >= 1, ErrorCode::InvalidGrid, "sample size must be positive");
  long previous = 0;
  for (long g : grid) {
    require(g > previous && g < n, ErrorCode::InvalidGrid,
            "grid must be strictly increasing inside (0, n)");
    previous = g;
  }
  std::vector<long> points;
  points.reserve(grid.size() + 2);
  points.push_back(0);
  points.insert(points.end(), grid.begin(), grid.end());
  points.push_back(n);

  EnvironmentCollection out{{}, n};
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      out.environments.push_back({points[i] + 1, points[j]});
  return out;
}

/// The L+1 consecutive blocks cut at the change points.
inline EnvironmentCollection changepoint_environments(long n, const std::vector<long>& change_points) {
  require(n >= 1, ErrorCode::InvalidChangePoints, "sample size must be positive");
  EnvironmentCollection out{{}, n};
  long start = 1;
  for (long cp : change_points) {
    require(cp >= start && cp <= n - 1, ErrorCode::InvalidChangePoints,
            "change points must be strictly increasing in {1, ..., n-1}");
    out.environments.push_back({start, cp});
    start = cp + 1;
  }
  out.environments.push_back({start, n});
  return out;
}

/// F1: ordered pairs of disjoint environments. F2: each environment against its
/// complement. Pairs with a side smaller than `min_size` are dropped.
inline ComparisonSet comparison_set(const EnvironmentCollection& env, ComparisonKind kind, long min_size) {
  require(min_size >= 2, ErrorCode::InvalidArgument, "min_size must be at least 2");
  ComparisonSet out{{}, kind, env.n};
  if (kind == ComparisonKind::F1) {
    for (const auto& e : env.environments)
      for (const auto& f : env.environments) {
        const bool disjoint = e.end < f.start || f.end < e.start;
        if (disjoint && e.size() >= min_size && f.size() >= min_size)
          out.pairs.push_back({{e, false}, {f, false}});
      }
  } else {
    for (const auto& e : env.environments) {
      const long rest = env.n - e.size();
      if (rest > 0 && e.size() >= min_size && rest >= min_size)
        out.pairs.push_back({{e, false}, {e, true}});
    }
  }
  require(!out.pairs.empty(), ErrorCode::EmptyComparisonSet, "no comparison pair survives filtering");
  return out;
}

/// floor(ln n) equidistant interior points, round(i * n / (m + 1)).
inline std::vector<long> default_grid(long n) {
  require(n >= 4, ErrorCode::InvalidArgument, "default grid needs n >= 4");
  const long m = std::max(1L, static_cast<long>(std::floor(std::log(static_cast<double>(n)))));
  std::set<long> points;
  for (long i = 1; i <= m; ++i) {
    const long g = std::lround(static_cast<double>(i) * static_cast<double>(n) / static_cast<double>(m + 1));
    if (g > 0 && g < n) points.insert(g);
  }
  return {points.begin(), points.end()};
}

/// Grid with `count` equidistant interior points.
inline std::vector<long> equidistant_grid(long n, long count) {
  std::set<long> points;
  for (long i = 1; i <= count; ++i) {
    const long g = std::lround(static_cast<double>(i) * static_cast<double>(n) / static_cast<double>(count + 1));
    if (g > 0 && g < n) points.insert(g);
  }
  return {points.begin(), points.end()};
}

/// How environments and comparisons are chosen for block statistics. Grid points
/// are time indices of the original series; for a design that drops the first
/// `row_offset` time points they are shifted onto the design rows.
struct BlockLayout {
  ComparisonKind kind = ComparisonKind::F2;
  std::optional<std::vector<long>> grid;  // default_grid(rows) when unset
  std::optional<long> min_size;           // design width + 5 when unset
};

inline ComparisonSet resolve_comparison(const BlockLayout& layout, long rows, long width, long row_offset) {
  std::vector<long> grid;
  if (layout.grid) {
    for (long g : *layout.grid) {
      const long shifted = g - row_offset;
      if (shifted > 0 && shifted < rows) grid.push_back(shifted);
    }
  } else {
    grid = default_grid(rows);
  }
  const long min_size = layout.min_size.value_or(width + 5);
  require(min_size >= std::max(2L, width + 1), ErrorCode::InvalidArgument,
          "min_size must exceed the regression width");
  return comparison_set(grid_environments(rows, grid), layout.kind, min_size);
}

}  // namespace seqicp
