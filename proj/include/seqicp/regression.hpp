#pragma once

// Dense least-squares primitives on (possibly lagged) designs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "seqicp/dataset.hpp"
#include "seqicp/error.hpp"

namespace seqicp {

/// Numerical rank of `a` with the singular-value cutoff sigma_max * max(rows, cols) * eps.
inline Eigen::Index numerical_rank(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0;
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues();
  const double tol = sv(0) * static_cast<double>(std::max(a.rows(), a.cols())) *
                     std::numeric_limits<double>::epsilon();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return rank;
}

/// Regression design. Rows are the usable (time-aligned) observations; `row_offset`
/// is the number of leading time points dropped (the lag order for lagged designs).
class DesignMatrix {
 public:
  DesignMatrix(Eigen::MatrixXd columns, bool has_intercept, Eigen::Index row_offset = 0)
      : columns_(std::move(columns)), has_intercept_(has_intercept), row_offset_(row_offset) {
    require(columns_.cols() >= 1, ErrorCode::InvalidArgument, "design needs at least one column");
    require(columns_.allFinite(), ErrorCode::InvalidArgument, "design has non-finite entries");
    if (has_intercept_)
      require((columns_.col(0).array() == 1.0).all(), ErrorCode::InvalidArgument,
              "intercept column must be all ones");
    rank_deficient_ = columns_.rows() < columns_.cols() || numerical_rank(columns_) < columns_.cols();
  }

  const Eigen::MatrixXd& columns() const { return columns_; }
  Eigen::Index rows() const { return columns_.rows(); }
  Eigen::Index width() const { return columns_.cols(); }
  bool has_intercept() const { return has_intercept_; }
  Eigen::Index row_offset() const { return row_offset_; }
  bool rank_deficient() const { return rank_deficient_; }

 private:
  Eigen::MatrixXd columns_;
  bool has_intercept_;
  Eigen::Index row_offset_;
  bool rank_deficient_;
};

/// Least-squares coefficients via Householder QR.
inline Eigen::VectorXd ols_fit(const DesignMatrix& design, const Eigen::VectorXd& y) {
  require(design.rows() == y.size(), ErrorCode::InvalidArgument, "design rows must match response length");
  require(!design.rank_deficient(), ErrorCode::RankDeficient, "design is rank deficient");
  return design.columns().householderQr().solve(y);
}

/// Unit-norm residual vector of a projection onto the orthogonal complement of the design.
struct ScaledResiduals {
  Eigen::VectorXd values;
};

/// Applies Id - P for a fixed design. Holds the thin Q factor so repeated
/// projections (one per resample) cost O(n * width).
class ResidualProjector {
 public:
  explicit ResidualProjector(const DesignMatrix& design) {
    require(!design.rank_deficient(), ErrorCode::RankDeficient, "design is rank deficient");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(design.columns());
    q_ = qr.householderQ() * Eigen::MatrixXd::Identity(design.rows(), design.width());
  }

  Eigen::Index rows() const { return q_.rows(); }

  Eigen::VectorXd residuals(const Eigen::VectorXd& v) const {
    Eigen::VectorXd r = v - q_ * (q_.transpose() * v);
    // a second pass removes the rounding left by the first
    r -= q_ * (q_.transpose() * r);
    return r;
  }

  /// Throws DegenerateResiduals when `v` is (numerically) inside the column space.
  ScaledResiduals scaled(const Eigen::VectorXd& v) const {
    Eigen::VectorXd r = residuals(v);
    const double norm = r.norm();
    require(norm >= 1e-12 * std::max(1.0, v.norm()), ErrorCode::DegenerateResiduals,
            "response lies in the column space of the design");
    r /= norm;
    return {std::move(r)};
  }

 private:
  Eigen::MatrixXd q_;
};

inline ScaledResiduals scaled_residuals(const DesignMatrix& design, const Eigen::VectorXd& y) {
  require(design.rows() == y.size(), ErrorCode::InvalidArgument, "design rows must match response length");
  return ResidualProjector(design).scaled(y);
}

/// Lagged design and the response aligned with it.
struct LaggedDesign {
  DesignMatrix design;
  Eigen::VectorXd response;
};

/// Row for time t (t = p+1..n) holds 1, X_t^S, then (Y_{t-k}, X_{t-k}) for k = 1..p.
inline LaggedDesign build_lagged_design(const Dataset& data, Subset subset, Eigen::Index lags) {
  const Eigen::Index n = data.n();
  const Eigen::Index d = data.d();
  require(lags >= 0, ErrorCode::LagTooLarge, "lag order must be non-negative");
  require(lags <= n - 2, ErrorCode::LagTooLarge, "lag order exceeds n - 2");
  require(subset.is_subset_of(Subset::full(static_cast<int>(d))), ErrorCode::InvalidArgument,
          "subset refers to a column outside the dataset");

  const auto chosen = subset.indices();
  const Eigen::Index rows = n - lags;
  const Eigen::Index width = 1 + static_cast<Eigen::Index>(chosen.size()) + lags * (d + 1);
  Eigen::MatrixXd z(rows, width);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index t = r + lags;  // 0-based time index of this row
    Eigen::Index c = 0;
    z(r, c++) = 1.0;
    for (int j : chosen) z(r, c++) = data.x(t, j);
    for (Eigen::Index k = 1; k <= lags; ++k) {
      z(r, c++) = data.y(t - k);
      for (Eigen::Index j = 0; j < d; ++j) z(r, c++) = data.x(t - k, j);
    }
  }
  return {DesignMatrix(std::move(z), true, lags), data.y.tail(rows)};
}

}  // namespace seqicp
