#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <tuple>

#include "seqicp/random.hpp"
#include "seqicp/regression.hpp"
#include "seqicp/statistics.hpp"

using namespace seqicp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd normals(Eigen::Index n, RandomStream& rng) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

MatrixXd design_columns(Eigen::Index n, Eigen::Index width, RandomStream& rng) {
  MatrixXd x(n, width);
  x.col(0).setOnes();
  for (Eigen::Index j = 1; j < width; ++j) x.col(j) = normals(n, rng);
  return x;
}

PerEnvironmentFit fit_with(VectorXd gamma, double s2, long size) { return {std::move(gamma), s2, size}; }

// Direct evaluation of a block statistic: one QR fit per side of every pair.
double reference_block(Family family, Combiner combiner, const ScaledResiduals& r, const DesignMatrix& design,
                       const ComparisonSet& set) {
  std::vector<double> values;
  for (const auto& p : set.pairs) {
    switch (family) {
      case Family::T1: values.push_back(t1_coef(env_fit(r, design, p.e), env_fit(r, design, p.f))); break;
      case Family::T2: values.push_back(t2_var(env_fit(r, design, p.e), env_fit(r, design, p.f))); break;
      case Family::T3: values.push_back(t3_chow(r, design, p.e, env_fit(r, design, p.f))); break;
      case Family::T4: values.push_back(t4_mean(r, p.e, p.f)); break;
      case Family::T5: values.push_back(t5_var(r, p.e, p.f)); break;
      default: ADD_FAILURE();
    }
  }
  return combine(values, combiner);
}

}  // namespace

TEST(Combine, Examples) {
  EXPECT_EQ(combine({-3.0, 2.0}, Combiner::Max), 3.0);
  EXPECT_EQ(combine({-3.0, 2.0}, Combiner::Sum), 5.0);
  EXPECT_EQ(combine({-1.5}, Combiner::Max), 1.5);
  EXPECT_EQ(combine({-1.5}, Combiner::Sum), 1.5);
  try {
    combine({}, Combiner::Max);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyComparisonSet);
  }
}

TEST(PairStatistics, CoefficientDistance) {
  const auto a = fit_with((VectorXd(2) << 1, 0).finished(), 0.1, 10);
  const auto b = fit_with((VectorXd(2) << 0, 1).finished(), 0.2, 10);
  EXPECT_EQ(t1_coef(a, a), 0.0);
  EXPECT_NEAR(t1_coef(a, b), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(t1_coef(a, b), t1_coef(b, a));
}

TEST(PairStatistics, VarianceRatio) {
  const VectorXd g = VectorXd::Zero(2);
  const auto a = fit_with(g, 0.4, 10), b = fit_with(g, 0.2, 10);
  EXPECT_EQ(t2_var(b, b), 0.0);
  EXPECT_NEAR(t2_var(a, b), 1.0, 1e-15);
  EXPECT_NEAR((1.0 + t2_var(a, b)) * (1.0 + t2_var(b, a)), 1.0, 1e-15);
  try {
    t2_var(a, fit_with(g, 0.0, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroDenominator);
  }
}

TEST(PairStatistics, MeanAndEnergyHandExample) {
  const ScaledResiduals r{(VectorXd(4) << 0.6, 0.0, 0.0, 0.8).finished()};
  const Environment e{1, 2}, f{3, 4};
  EXPECT_NEAR(t4_mean(r, e, f), -0.1, 1e-15);
  EXPECT_NEAR(t5_var(r, e, f), -0.4375, 1e-15);
  EXPECT_EQ(t4_mean(r, e, e), 0.0);
  EXPECT_EQ(t5_var(r, f, f), 0.0);
  EXPECT_EQ(t4_mean(r, e, f), -t4_mean(r, f, e));
}

TEST(EnvFit, FullRangeOfOrthogonalResiduals) {
  RandomStream rng({1, 0, 0, 0});
  const DesignMatrix design(design_columns(30, 3, rng), true);
  const auto r = scaled_residuals(design, normals(30, rng));
  const auto fit = env_fit(r, design, Environment{1, 30});
  EXPECT_LT(fit.gamma_hat.norm(), 1e-12);
  EXPECT_NEAR(fit.s2_hat, 1.0 / 30.0, 1e-14);
  EXPECT_EQ(fit.size, 30);
}

TEST(EnvFit, SaturatedEnvironment) {
  RandomStream rng({2, 0, 0, 0});
  const DesignMatrix design(design_columns(20, 3, rng), true);
  const auto r = scaled_residuals(design, normals(20, rng));
  EXPECT_NEAR(env_fit(r, design, Environment{5, 7}).s2_hat, 0.0, 1e-14);
  EXPECT_THROW(env_fit(r, design, Environment{5, 6}), Error);
}

TEST(Chow, SelfComparisonIsZero) {
  RandomStream rng({3, 0, 0, 0});
  const DesignMatrix design(design_columns(40, 2, rng), true);
  const auto r = scaled_residuals(design, normals(40, rng));
  const Environment e{1, 25};
  EXPECT_NEAR(t3_chow(r, design, e, env_fit(r, design, e)), 0.0, 1e-12);
}

// T3 + 1 written in terms of the true coefficients and noise of the two environments,
// with beta_f estimated by ordinary least squares on f alone.
TEST(Chow, MatchesNoiseExpansion) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RandomStream rng({seed, 5, 0, 0});
    const Eigen::Index n = 60 + static_cast<Eigen::Index>(rng.uniform_int(0, 40));
    const Eigen::Index width = 1 + static_cast<Eigen::Index>(rng.uniform_int(0, 2));
    const Eigen::Index cp = n / 2 + static_cast<Eigen::Index>(rng.uniform_int(-10, 10));
    const MatrixXd x = design_columns(n, width, rng);
    VectorXd beta_e(width), beta_f(width);
    for (Eigen::Index j = 0; j < width; ++j) {
      beta_e(j) = rng.normal();
      beta_f(j) = rng.normal();
    }
    const double sd_e = rng.uniform(0.5, 2.0), sd_f = rng.uniform(0.5, 2.0);
    VectorXd eps = normals(n, rng);
    eps.head(cp) *= sd_e;
    eps.tail(n - cp) *= sd_f;
    VectorXd y(n);
    y.head(cp) = x.topRows(cp) * beta_e + eps.head(cp);
    y.tail(n - cp) = x.bottomRows(n - cp) * beta_f + eps.tail(n - cp);

    const DesignMatrix design(x, true);
    const auto r = scaled_residuals(design, y);
    const Environment e{1, static_cast<long>(cp)}, f{static_cast<long>(cp) + 1, static_cast<long>(n)};
    const double t3 = t3_chow(r, design, e, env_fit(r, design, f));

    const MatrixXd xf = x.bottomRows(n - cp);
    const MatrixXd xe = x.topRows(cp);
    const VectorXd beta_hat_f = (xf.transpose() * xf).inverse() * (xf.transpose() * y.tail(n - cp));
    const double num = (eps.head(cp) + xe * (beta_e - beta_hat_f)).squaredNorm() / static_cast<double>(cp);
    const double den =
        (eps.tail(n - cp) + xf * (beta_f - beta_hat_f)).squaredNorm() / static_cast<double>(n - cp);
    EXPECT_NEAR(t3, num / den - 1.0, 1e-8) << "seed " << seed;
  }
}

using BlockCase = std::tuple<Family, Combiner, ComparisonKind>;

class CachedBlock : public ::testing::TestWithParam<BlockCase> {};

TEST_P(CachedBlock, AgreesWithDirectEvaluation) {
  const auto [family, combiner, kind] = GetParam();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RandomStream rng({seed, 6, 0, 0});
    const Eigen::Index n = 80, width = 3;
    const DesignMatrix design(design_columns(n, width, rng), true);
    const auto set = comparison_set(grid_environments(n, default_grid(n)), kind, width + 5);
    const BlockStatistic stat(family, combiner, design, set);
    const auto r = scaled_residuals(design, normals(n, rng));
    EXPECT_NEAR(stat.evaluate(r.values), reference_block(family, combiner, r, design, set), 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllBlockFamilies, CachedBlock,
    ::testing::Combine(::testing::Values(Family::T1, Family::T2, Family::T3, Family::T4, Family::T5),
                       ::testing::Values(Combiner::Max, Combiner::Sum),
                       ::testing::Values(ComparisonKind::F1, ComparisonKind::F2)));

TEST(Hsic, MatchesDoubleSumForm) {
  const VectorXd r = (VectorXd(4) << 0.5, -0.1, 0.7, -0.4).finished();
  const VectorXd t = (VectorXd(4) << 0.25, 0.5, 0.75, 1.0).finished();
  const int n = 4;
  auto k = [&](int i, int j) { return std::exp(-0.5 * (r(i) - r(j)) * (r(i) - r(j))); };
  auto l = [&](int i, int j) { return std::exp(-0.5 * (t(i) - t(j)) * (t(i) - t(j))); };
  double a = 0, sk = 0, sl = 0, c = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      a += k(i, j) * l(i, j);
      sk += k(i, j);
      sl += l(i, j);
      for (int q = 0; q < n; ++q) c += k(i, j) * l(i, q);
    }
  const double expected = a / (n * n) + sk * sl / std::pow(n, 4) - 2.0 * c / std::pow(n, 3);

  Bandwidth unit;
  unit.fixed = 1.0;
  EXPECT_NEAR(hsic_time(ScaledResiduals{r}, unit), expected, 1e-10);
  EXPECT_NEAR(HsicStatistic(4, unit).evaluate(r), expected, 1e-10);
}

TEST(Hsic, CachedAgreesWithDirectAndIsNonNegative) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomStream rng({seed, 7, 0, 0});
    const VectorXd r = normals(50, rng).normalized();
    const double direct = hsic_time(ScaledResiduals{r});
    EXPECT_GE(direct, 0.0);
    EXPECT_NEAR(HsicStatistic(50, {}).evaluate(r), direct, 1e-10);
  }
}

TEST(Hsic, ConstantResidualsGiveZero) {
  Bandwidth fixed;
  fixed.fixed = 0.5;
  EXPECT_NEAR(hsic_time(ScaledResiduals{VectorXd::Constant(10, 0.3)}, fixed), 0.0, 1e-14);
  try {
    hsic_time(ScaledResiduals{VectorXd::Constant(10, 0.3)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateKernel);
  }
}

TEST(Smoother, MatchesKernelAverage) {
  RandomStream rng({8, 0, 0, 0});
  const Eigen::Index n = 12;
  const VectorXd r = normals(n, rng).normalized();
  Bandwidth bw;
  bw.fixed = 0.2;
  for (Moment moment : {Moment::First, Moment::Second}) {
    VectorXd v = r;
    if (moment == Moment::Second) v = (r.array().square() - r.squaredNorm() / n).matrix();
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double num = 0, den = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double u = static_cast<double>(i - j) / static_cast<double>(n) / 0.2;
        num += std::exp(-u * u / 2) * v(j);
        den += std::exp(-u * u / 2);
      }
      total += (num / den) * (num / den);
    }
    EXPECT_NEAR(smooth_shift(ScaledResiduals{r}, moment, bw), total / n, 1e-12);
    EXPECT_NEAR(SmootherStatistic(n, moment, bw).evaluate(r), total / n, 1e-12);
  }
}

TEST(Smoother, FlatLimitIsZero) {
  // antisymmetric halves: zero mean, so a very wide kernel returns the flat mean 0
  VectorXd r(16);
  for (int i = 0; i < 8; ++i) {
    r(i) = 0.1 * (i + 1);
    r(15 - i) = -0.1 * (i + 1);
  }
  Bandwidth wide;
  wide.fixed = 1e6;
  EXPECT_NEAR(smooth_shift(ScaledResiduals{r.normalized()}, Moment::First, wide), 0.0, 1e-20);
  EXPECT_GE(smooth_shift(ScaledResiduals{r.normalized()}, Moment::First), 0.0);
}

TEST(Smoother, DefaultBandwidthScale) {
  EXPECT_NEAR(detail::smoother_bandwidth(32, {}), 0.5, 1e-12);
  Bandwidth b;
  b.smoother_scale = 2.0;
  EXPECT_NEAR(detail::smoother_bandwidth(32, b), 1.0, 1e-12);
}

// Every statistic is a function of the scaled residuals only: y and
// X beta0 + c (y - X beta_hat) give the same value.
TEST(AllStatistics, DependOnYOnlyThroughScaledResiduals) {
  RandomStream rng({9, 0, 0, 0});
  const Eigen::Index n = 90;
  const MatrixXd x = design_columns(n, 3, rng);
  const DesignMatrix design(x, true);
  const VectorXd y = normals(n, rng);
  const VectorXd beta_hat = ols_fit(design, y);
  const VectorXd beta0 = normals(3, rng);
  const VectorXd y2 = x * beta0 + 3.7 * (y - x * beta_hat);
  const auto r1 = scaled_residuals(design, y);
  const auto r2 = scaled_residuals(design, y2);

  for (Family f : {Family::T1, Family::T2, Family::T3, Family::T4, Family::T5, Family::Hsic, Family::SmoothMean,
                   Family::SmoothVar}) {
    StatisticSpec spec;
    spec.family = f;
    const auto stat = make_statistic(spec, design);
    const double a = stat->evaluate(r1.values), b = stat->evaluate(r2.values);
    EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a))) << to_string(f);
  }
}

TEST(MakeStatistic, LayoutOptions) {
  RandomStream rng({10, 0, 0, 0});
  const DesignMatrix design(design_columns(100, 2, rng), true);
  StatisticSpec spec;
  spec.layout.grid = std::vector<long>{50};
  spec.layout.kind = ComparisonKind::F1;
  const auto stat = make_statistic(spec, design);
  const auto* block = dynamic_cast<const BlockStatistic*>(stat.get());
  ASSERT_NE(block, nullptr);
  EXPECT_EQ(block->comparisons().pairs.size(), 2u);
}
