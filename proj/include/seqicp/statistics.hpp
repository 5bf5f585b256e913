#pragma once

// Test statistics computed from scaled residuals.
//
// The free functions (env_fit, t1_coef, ..., hsic_time, smooth_shift) evaluate
// one statistic directly and are the reference implementations. The
// `Statistic` classes compute the same quantities for a fixed design many times
// over (once per resample), caching everything that depends on the design only.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqicp/environments.hpp"
#include "seqicp/error.hpp"
#include "seqicp/regression.hpp"

namespace seqicp {

enum class Family { T1, T2, T3, T4, T5, Hsic, SmoothMean, SmoothVar };
enum class Combiner { Max, Sum };
enum class Moment { First, Second };

constexpr bool is_block_family(Family f) {
  return f == Family::T1 || f == Family::T2 || f == Family::T3 || f == Family::T4 || f == Family::T5;
}

constexpr bool needs_regression(Family f) {
  return f == Family::T1 || f == Family::T2 || f == Family::T3;
}

constexpr std::string_view to_string(Family f) {
  switch (f) {
    case Family::T1: return "t1";
    case Family::T2: return "t2";
    case Family::T3: return "t3";
    case Family::T4: return "t4";
    case Family::T5: return "t5";
    case Family::Hsic: return "hsic";
    case Family::SmoothMean: return "smooth-mean";
    case Family::SmoothVar: return "smooth-var";
  }
  return "?";
}

constexpr std::string_view to_string(Combiner c) { return c == Combiner::Max ? "max" : "sum"; }

/// Kernel bandwidth. Unset means automatic: the median heuristic for HSIC and
/// `smoother_scale * n^(-1/5)` (on time rescaled to (0, 1]) for the smoother.
struct Bandwidth {
  std::optional<double> fixed;
  double smoother_scale = 1.0;
};

struct StatisticSpec {
  Family family = Family::T1;
  Combiner combiner = Combiner::Max;  // block families only
  BlockLayout layout;                 // block families only
  Bandwidth bandwidth;                // HSIC and smoother only
};

// ---------------------------------------------------------------------------
// Reference implementations
// ---------------------------------------------------------------------------

/// Regression of the scaled residuals on the design restricted to one environment.
struct PerEnvironmentFit {
  Eigen::VectorXd gamma_hat;
  double s2_hat = 0.0;  // RSS / |h|
  long size = 0;
};

namespace detail {

inline std::vector<Eigen::Index> side_rows(const EnvironmentSide& side, long n) {
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(side.size(n)));
  for (long t = 1; t <= n; ++t)
    if (side.contains(t)) rows.push_back(t - 1);
  return rows;
}

inline Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace detail

inline PerEnvironmentFit env_fit(const ScaledResiduals& residuals, const DesignMatrix& design,
                                 const EnvironmentSide& env) {
  const long n = static_cast<long>(design.rows());
  require(residuals.values.size() == design.rows(), ErrorCode::InvalidArgument,
          "residuals and design disagree in length");
  const auto rows = detail::side_rows(env, n);
  require(static_cast<Eigen::Index>(rows.size()) >= design.width(), ErrorCode::RankDeficient,
          "environment has fewer rows than the design has columns");
  const Eigen::MatrixXd xh = detail::take_rows(design.columns(), rows);
  const Eigen::VectorXd rh = detail::take(residuals.values, rows);
  require(numerical_rank(xh) == xh.cols(), ErrorCode::RankDeficient, "restricted design is rank deficient");
  PerEnvironmentFit fit;
  fit.gamma_hat = xh.householderQr().solve(rh);
  fit.size = static_cast<long>(rows.size());
  fit.s2_hat = (rh - xh * fit.gamma_hat).squaredNorm() / static_cast<double>(fit.size);
  return fit;
}

inline PerEnvironmentFit env_fit(const ScaledResiduals& residuals, const DesignMatrix& design,
                                 const Environment& env) {
  return env_fit(residuals, design, EnvironmentSide{env, false});
}

inline double t1_coef(const PerEnvironmentFit& e, const PerEnvironmentFit& f) {
  require(e.gamma_hat.size() == f.gamma_hat.size(), ErrorCode::InvalidArgument,
          "coefficient dimensions differ");
  return (e.gamma_hat - f.gamma_hat).norm();
}

inline double t2_var(const PerEnvironmentFit& e, const PerEnvironmentFit& f) {
  require(f.s2_hat > 1e-14, ErrorCode::ZeroDenominator, "variance of the reference environment is zero");
  return e.s2_hat / f.s2_hat - 1.0;
}

/// Chow-type statistic: how well f's coefficients fit e, relative to f's own fit.
inline double t3_chow(const ScaledResiduals& residuals, const DesignMatrix& design,
                      const EnvironmentSide& env_e, const PerEnvironmentFit& fit_f) {
  require(fit_f.s2_hat > 1e-14, ErrorCode::ZeroDenominator, "variance of the reference environment is zero");
  const long n = static_cast<long>(design.rows());
  const auto rows = detail::side_rows(env_e, n);
  const Eigen::MatrixXd xe = detail::take_rows(design.columns(), rows);
  const Eigen::VectorXd re = detail::take(residuals.values, rows);
  const double numerator = (re - xe * fit_f.gamma_hat).squaredNorm();
  return numerator / (fit_f.s2_hat * static_cast<double>(rows.size())) - 1.0;
}

inline double t3_chow(const ScaledResiduals& residuals, const DesignMatrix& design, const Environment& env_e,
                      const PerEnvironmentFit& fit_f) {
  return t3_chow(residuals, design, EnvironmentSide{env_e, false}, fit_f);
}

inline double t4_mean(const ScaledResiduals& residuals, const EnvironmentSide& e, const EnvironmentSide& f) {
  const long n = static_cast<long>(residuals.values.size());
  require(e.size(n) > 0 && f.size(n) > 0, ErrorCode::InvalidArgument, "environments must be non-empty");
  const Eigen::VectorXd re = detail::take(residuals.values, detail::side_rows(e, n));
  const Eigen::VectorXd rf = detail::take(residuals.values, detail::side_rows(f, n));
  return re.mean() - rf.mean();
}

inline double t5_var(const ScaledResiduals& residuals, const EnvironmentSide& e, const EnvironmentSide& f) {
  const long n = static_cast<long>(residuals.values.size());
  const double num = detail::take(residuals.values, detail::side_rows(e, n)).squaredNorm();
  const double den = detail::take(residuals.values, detail::side_rows(f, n)).squaredNorm();
  require(den > 1e-300, ErrorCode::ZeroDenominator, "residual energy of the reference environment is zero");
  return num / den - 1.0;
}

inline double t4_mean(const ScaledResiduals& r, const Environment& e, const Environment& f) {
  return t4_mean(r, EnvironmentSide{e, false}, EnvironmentSide{f, false});
}

inline double t5_var(const ScaledResiduals& r, const Environment& e, const Environment& f) {
  return t5_var(r, EnvironmentSide{e, false}, EnvironmentSide{f, false});
}

inline double combine(const std::vector<double>& values, Combiner combiner) {
  require(!values.empty(), ErrorCode::EmptyComparisonSet, "nothing to combine");
  double out = 0.0;
  for (double v : values) out = combiner == Combiner::Max ? std::max(out, std::abs(v)) : out + std::abs(v);
  return out;
}

namespace detail {

/// Lower median of the pairwise distances |v_i - v_j|, i < j.
inline double median_pairwise_distance(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back(std::abs(v(i) - v(j)));
  if (dist.empty()) return 0.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>((dist.size() - 1) / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (*mid > 0.0) return *mid;
  // heavy ties: fall back to the median of the positive distances
  std::vector<double> positive;
  for (double x : dist)
    if (x > 0.0) positive.push_back(x);
  if (positive.empty()) return 0.0;
  auto pmid = positive.begin() + static_cast<std::ptrdiff_t>((positive.size() - 1) / 2);
  std::nth_element(positive.begin(), pmid, positive.end());
  return *pmid;
}

inline Eigen::VectorXd normalized_time(Eigen::Index n) {
  return Eigen::VectorXd::LinSpaced(n, 1.0, static_cast<double>(n)) / static_cast<double>(n);
}

inline Eigen::MatrixXd gaussian_gram(const Eigen::VectorXd& v, double bandwidth) {
  const Eigen::Index n = v.size();
  Eigen::MatrixXd k(n, n);
  const double scale = -0.5 / (bandwidth * bandwidth);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double diff = v(i) - v(j);
      k(i, j) = std::exp(scale * diff * diff);
    }
  return k;
}

inline Eigen::MatrixXd double_center(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd row_mean = m.rowwise().mean();
  const Eigen::RowVectorXd col_mean = m.colwise().mean();
  const double grand = m.mean();
  return (m.colwise() - row_mean).rowwise() - col_mean + Eigen::MatrixXd::Constant(m.rows(), m.cols(), grand);
}

inline double hsic_bandwidth(const Eigen::VectorXd& v, const Bandwidth& policy) {
  if (policy.fixed) {
    require(*policy.fixed > 0.0, ErrorCode::InvalidArgument, "bandwidth must be positive");
    return *policy.fixed;
  }
  const double h = median_pairwise_distance(v);
  require(h > 0.0, ErrorCode::DegenerateKernel, "all pairwise distances are zero");
  return h;
}

inline double smoother_bandwidth(Eigen::Index n, const Bandwidth& policy) {
  if (policy.fixed) {
    require(*policy.fixed > 0.0, ErrorCode::InvalidArgument, "bandwidth must be positive");
    return *policy.fixed;
  }
  return policy.smoother_scale * std::pow(static_cast<double>(n), -0.2);
}

/// Row-stochastic Nadaraya-Watson weights on normalized time.
inline Eigen::MatrixXd smoother_weights(Eigen::Index n, double bandwidth) {
  Eigen::MatrixXd w = gaussian_gram(normalized_time(n), bandwidth);
  const Eigen::VectorXd row_sum = w.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) w.row(i) /= row_sum(i);
  return w;
}

inline Eigen::VectorXd smoother_input(const Eigen::VectorXd& r, Moment moment) {
  if (moment == Moment::First) return r;
  Eigen::VectorXd sq = r.array().square();
  sq.array() -= sq.mean();
  return sq;
}

}  // namespace detail

/// Biased HSIC between the residuals and normalized time, (1/n^2) tr(K H L H).
inline double hsic_time(const ScaledResiduals& residuals, const Bandwidth& policy = {}) {
  const Eigen::VectorXd& r = residuals.values;
  const Eigen::Index n = r.size();
  require(n >= 4, ErrorCode::InvalidArgument, "HSIC needs at least 4 observations");
  const Eigen::VectorXd time = detail::normalized_time(n);
  const Eigen::MatrixXd k = detail::gaussian_gram(r, detail::hsic_bandwidth(r, policy));
  const Eigen::MatrixXd l = detail::gaussian_gram(time, detail::hsic_bandwidth(time, policy));
  const double value = (k.array() * detail::double_center(l).array()).sum() / static_cast<double>(n * n);
  return std::max(value, 0.0);
}

/// Mean squared Nadaraya-Watson fit of the residuals (or centred squared
/// residuals) against time. Zero for a flat smoother.
inline double smooth_shift(const ScaledResiduals& residuals, Moment moment, const Bandwidth& policy = {}) {
  const Eigen::Index n = residuals.values.size();
  require(n >= 8, ErrorCode::InvalidArgument, "smoother needs at least 8 observations");
  const Eigen::VectorXd v = detail::smoother_input(residuals.values, moment);
  const Eigen::VectorXd time = detail::normalized_time(n);
  const double h = detail::smoother_bandwidth(n, policy);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = (time(i) - time(j)) / h;
      const double k = std::exp(-0.5 * u * u);
      num += k * v(j);
      den += k;
    }
    const double fitted = num / den;
    total += fitted * fitted;
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Cached evaluators
// ---------------------------------------------------------------------------

/// A statistic bound to one design; `evaluate` returns |T| of a residual vector.
class Statistic {
 public:
  virtual ~Statistic() = default;
  virtual double evaluate(const Eigen::VectorXd& residuals) const = 0;
};

/// Block statistics T1..T5 over a comparison set. Per-environment Gram matrices
/// are factorized once; each evaluation needs only prefix sums of the residuals,
/// so one call costs O(n * width + |F| * width^2).
class BlockStatistic final : public Statistic {
 public:
  BlockStatistic(Family family, Combiner combiner, const DesignMatrix& design, ComparisonSet comparisons)
      : family_(family), combiner_(combiner), comparisons_(std::move(comparisons)),
        x_(design.columns()), n_(static_cast<long>(design.rows())) {
    require(is_block_family(family), ErrorCode::InvalidArgument, "not a block statistic");
    require(comparisons_.n == n_, ErrorCode::InvalidArgument, "comparison set and design disagree in length");
    require(!comparisons_.pairs.empty(), ErrorCode::EmptyComparisonSet, "empty comparison set");
    for (const auto& pair : comparisons_.pairs) {
      pair_index_.push_back({side_index(pair.e), side_index(pair.f)});
    }
    if (needs_regression(family_)) {
      require(!design.rank_deficient(), ErrorCode::RankDeficient, "design is rank deficient");
      for (auto& side : sides_) {
        const auto rows = detail::side_rows(side.side, n_);
        const Eigen::MatrixXd xh = detail::take_rows(x_, rows);
        require(xh.rows() >= xh.cols() && numerical_rank(xh) == xh.cols(), ErrorCode::RankDeficient,
                "design restricted to an environment is rank deficient");
        side.gram = xh.transpose() * xh;
        side.chol = side.gram.llt();
      }
    }
  }

  const ComparisonSet& comparisons() const { return comparisons_; }

  double evaluate(const Eigen::VectorXd& r) const override {
    const Eigen::Index m = x_.cols();
    const bool regress = needs_regression(family_);

    // prefix sums over rows 0..t-1 at index t
    Eigen::VectorXd sum_r(n_ + 1), sum_r2(n_ + 1);
    Eigen::MatrixXd sum_xr;
    sum_r(0) = 0.0;
    sum_r2(0) = 0.0;
    if (regress) {
      sum_xr.resize(m, n_ + 1);
      sum_xr.col(0).setZero();
    }
    for (long t = 0; t < n_; ++t) {
      sum_r(t + 1) = sum_r(t) + r(t);
      sum_r2(t + 1) = sum_r2(t) + r(t) * r(t);
      if (regress) sum_xr.col(t + 1) = sum_xr.col(t) + x_.row(t).transpose() * r(t);
    }

    struct Moments {
      double sum = 0.0, energy = 0.0, size = 0.0, s2 = 0.0;
      Eigen::VectorXd xr, gamma;
    };
    std::vector<Moments> mom(sides_.size());
    for (std::size_t s = 0; s < sides_.size(); ++s) {
      const auto& side = sides_[s].side;
      const long a = side.block.start - 1;
      const long b = side.block.end;
      Moments& mm = mom[s];
      mm.sum = sum_r(b) - sum_r(a);
      mm.energy = sum_r2(b) - sum_r2(a);
      mm.size = static_cast<double>(side.size(n_));
      if (regress) mm.xr = sum_xr.col(b) - sum_xr.col(a);
      if (side.complement) {
        mm.sum = sum_r(n_) - mm.sum;
        mm.energy = sum_r2(n_) - mm.energy;
        if (regress) mm.xr = sum_xr.col(n_) - mm.xr;
      }
      if (regress) {
        mm.gamma = sides_[s].chol.solve(mm.xr);
        mm.s2 = std::max(mm.energy - mm.xr.dot(mm.gamma), 0.0) / mm.size;
      }
    }

    double out = 0.0;
    for (std::size_t p = 0; p < pair_index_.size(); ++p) {
      const Moments& e = mom[pair_index_[p].first];
      const Moments& f = mom[pair_index_[p].second];
      double value = 0.0;
      switch (family_) {
        case Family::T1:
          value = (e.gamma - f.gamma).norm();
          break;
        case Family::T2:
          require(f.s2 > 1e-14, ErrorCode::ZeroDenominator, "variance of the reference environment is zero");
          value = e.s2 / f.s2 - 1.0;
          break;
        case Family::T3: {
          require(f.s2 > 1e-14, ErrorCode::ZeroDenominator, "variance of the reference environment is zero");
          const Eigen::MatrixXd& gram_e = sides_[pair_index_[p].first].gram;
          const double rss = e.energy - 2.0 * f.gamma.dot(e.xr) + f.gamma.dot(gram_e * f.gamma);
          value = std::max(rss, 0.0) / (f.s2 * e.size) - 1.0;
          break;
        }
        case Family::T4:
          value = e.sum / e.size - f.sum / f.size;
          break;
        case Family::T5:
          require(f.energy > 1e-300, ErrorCode::ZeroDenominator, "residual energy of the reference is zero");
          value = e.energy / f.energy - 1.0;
          break;
        default:
          break;
      }
      out = combiner_ == Combiner::Max ? std::max(out, std::abs(value)) : out + std::abs(value);
    }
    return out;
  }

 private:
  struct SideCache {
    EnvironmentSide side;
    Eigen::MatrixXd gram;
    Eigen::LLT<Eigen::MatrixXd> chol;
  };

  std::size_t side_index(const EnvironmentSide& side) {
    for (std::size_t i = 0; i < sides_.size(); ++i)
      if (sides_[i].side == side) return i;
    sides_.push_back({side, {}, {}});
    return sides_.size() - 1;
  }

  Family family_;
  Combiner combiner_;
  ComparisonSet comparisons_;
  Eigen::MatrixXd x_;
  long n_;
  std::vector<SideCache> sides_;
  std::vector<std::pair<std::size_t, std::size_t>> pair_index_;
};

class HsicStatistic final : public Statistic {
 public:
  HsicStatistic(Eigen::Index n, Bandwidth policy) : policy_(policy), n_(n) {
    require(n >= 4, ErrorCode::InvalidArgument, "HSIC needs at least 4 observations");
    const Eigen::VectorXd time = detail::normalized_time(n);
    centered_time_gram_ = detail::double_center(detail::gaussian_gram(time, detail::hsic_bandwidth(time, policy)));
  }

  double evaluate(const Eigen::VectorXd& r) const override {
    const double h = detail::hsic_bandwidth(r, policy_);
    const double scale = -0.5 / (h * h);
    double total = 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) {
      // diagonal of K is 1
      total += centered_time_gram_(j, j);
      for (Eigen::Index i = j + 1; i < n_; ++i) {
        const double diff = r(i) - r(j);
        total += 2.0 * std::exp(scale * diff * diff) * centered_time_gram_(i, j);
      }
    }
    return std::max(total / static_cast<double>(n_ * n_), 0.0);
  }

 private:
  Bandwidth policy_;
  Eigen::Index n_;
  Eigen::MatrixXd centered_time_gram_;
};

class SmootherStatistic final : public Statistic {
 public:
  SmootherStatistic(Eigen::Index n, Moment moment, Bandwidth policy) : moment_(moment) {
    require(n >= 8, ErrorCode::InvalidArgument, "smoother needs at least 8 observations");
    weights_ = detail::smoother_weights(n, detail::smoother_bandwidth(n, policy));
  }

  double evaluate(const Eigen::VectorXd& r) const override {
    const Eigen::VectorXd fitted = weights_ * detail::smoother_input(r, moment_);
    return fitted.squaredNorm() / static_cast<double>(fitted.size());
  }

 private:
  Moment moment_;
  Eigen::MatrixXd weights_;
};

inline std::unique_ptr<Statistic> make_statistic(const StatisticSpec& spec, const DesignMatrix& design) {
  switch (spec.family) {
    case Family::Hsic:
      return std::make_unique<HsicStatistic>(design.rows(), spec.bandwidth);
    case Family::SmoothMean:
      return std::make_unique<SmootherStatistic>(design.rows(), Moment::First, spec.bandwidth);
    case Family::SmoothVar:
      return std::make_unique<SmootherStatistic>(design.rows(), Moment::Second, spec.bandwidth);
    default: {
      auto comparisons = resolve_comparison(spec.layout, static_cast<long>(design.rows()),
                                            static_cast<long>(design.width()),
                                            static_cast<long>(design.row_offset()));
      return std::make_unique<BlockStatistic>(spec.family, spec.combiner, design, std::move(comparisons));
    }
  }
}

}  // namespace seqicp
