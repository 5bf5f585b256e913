#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "seqicp/error.hpp"

namespace seqicp {

/// Time-ordered response and predictors. Row order is time order.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> column_names;  // one per predictor column
  std::string target_name = "Y";

  Eigen::Index n() const { return y.size(); }
  Eigen::Index d() const { return x.cols(); }

  void validate() const {
    require(n() >= 2, ErrorCode::InvalidArgument, "dataset needs at least 2 rows");
    require(x.rows() == n(), ErrorCode::InvalidArgument, "predictor rows must match response length");
    require(static_cast<Eigen::Index>(column_names.size()) == d(), ErrorCode::InvalidArgument,
            "one column name per predictor required");
    require(y.allFinite() && x.allFinite(), ErrorCode::InvalidArgument, "dataset has non-finite entries");
    require(d() <= 64, ErrorCode::InvalidArgument, "at most 64 predictors are supported");
  }
};

/// Subset of predictor columns, stored as a bit mask (bit j = column j, 0-based).
class Subset {
 public:
  constexpr Subset() = default;
  constexpr explicit Subset(std::uint64_t mask) : mask_(mask) {}

  static Subset of(const std::vector<int>& indices) {
    std::uint64_t mask = 0;
    for (int j : indices) {
      require(j >= 0 && j < 64, ErrorCode::InvalidArgument, "subset index out of range");
      mask |= std::uint64_t{1} << j;
    }
    return Subset(mask);
  }

  static constexpr Subset full(int d) {
    return Subset(d >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << d) - 1);
  }

  constexpr std::uint64_t mask() const { return mask_; }
  constexpr bool contains(int j) const { return (mask_ >> j) & 1U; }
  constexpr int size() const { return std::popcount(mask_); }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr bool is_subset_of(Subset other) const { return (mask_ & ~other.mask_) == 0; }

  constexpr Subset operator&(Subset other) const { return Subset(mask_ & other.mask_); }
  constexpr Subset operator|(Subset other) const { return Subset(mask_ | other.mask_); }
  constexpr bool operator==(const Subset&) const = default;

  /// Column indices in increasing order (0-based).
  std::vector<int> indices() const {
    std::vector<int> out;
    for (std::uint64_t m = mask_; m != 0; m &= m - 1) out.push_back(std::countr_zero(m));
    return out;
  }

 private:
  std::uint64_t mask_ = 0;
};

}  // namespace seqicp
