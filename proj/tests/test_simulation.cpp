#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "seqicp/simulation.hpp"

using namespace seqicp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct OlsResult {
  VectorXd beta;
  VectorXd se;
};

// Normal-equation OLS with classical standard errors.
OlsResult ols(const MatrixXd& x, const VectorXd& y) {
  const MatrixXd gram_inv = (x.transpose() * x).inverse();
  OlsResult r;
  r.beta = gram_inv * x.transpose() * y;
  const double s2 = (y - x * r.beta).squaredNorm() / static_cast<double>(x.rows() - x.cols());
  r.se = (s2 * gram_inv.diagonal()).array().sqrt();
  return r;
}

MatrixXd with_intercept(const MatrixXd& x) {
  MatrixXd out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

}  // namespace

TEST(ChangepointAlternative, Gaps) {
  const auto [b1, v1] = alternative_gaps(400, 1);
  // ln(400) / (20 * 20)
  EXPECT_NEAR(b1, std::log(400.0) / 400.0, 1e-15);
  EXPECT_NEAR(b1, 0.014979, 1e-6);
  EXPECT_EQ(v1, 0.0);
  const auto [b2, v2] = alternative_gaps(256, 2);
  EXPECT_NEAR(b2, std::log(256.0) / 80.0, 1e-15);
  const auto [b3, v3] = alternative_gaps(400, 3);
  EXPECT_EQ(b3, 0.0);
  EXPECT_NEAR(v3, std::log(400.0) / 20.0, 1e-15);
  EXPECT_THROW(alternative_gaps(400, 4), Error);
}

TEST(ChangepointAlternative, PlantedParameters) {
  for (int alt : {1, 2, 3}) {
    const auto ld = gen_changepoint_alternative(400, alt, 1);
    ASSERT_EQ(ld.environments.size(), 2u);
    const auto [bg, vg] = alternative_gaps(400, alt);
    EXPECT_NEAR(ld.environments[0].at("beta") - ld.environments[1].at("beta"), bg, 1e-15);
    EXPECT_NEAR(ld.environments[0].at("variance") - ld.environments[1].at("variance"), vg, 1e-15);
    EXPECT_EQ(ld.environments[1].at("beta"), 1.0);
    EXPECT_EQ(ld.true_change_points, std::vector<long>{200});
    if (alt == 3) EXPECT_EQ(ld.environments[0].at("beta"), ld.environments[1].at("beta"));
  }
}

TEST(ChangepointAlternative, PerEnvironmentFitsRecoverPlantedValues) {
  const long n = 4000;
  for (int alt : {2, 3}) {
    const auto ld = gen_changepoint_alternative(n, alt, 7);
    for (int e = 0; e < 2; ++e) {
      const MatrixXd x = with_intercept(ld.dataset.x.middleRows(e * n / 2, n / 2));
      const VectorXd y = ld.dataset.y.segment(e * n / 2, n / 2);
      const auto fit = ols(x, y);
      EXPECT_NEAR(fit.beta(1), ld.environments[e].at("beta"), 3 * fit.se(1)) << alt << " " << e;
      const double s2 = (y - x * fit.beta).squaredNorm() / (n / 2 - 2);
      const double var = ld.environments[e].at("variance");
      EXPECT_NEAR(s2, var, 3 * var * std::sqrt(2.0 / (n / 2)));
    }
  }
}

TEST(SignFlip, PooledSlopeNearZeroHalvesNearPlusMinusOne) {
  double pooled_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ld = gen_sign_flip_example(200, seed);
    const auto pooled = ols(with_intercept(ld.dataset.x), ld.dataset.y);
    EXPECT_LT(std::abs(pooled.beta(1)), 3.5 * pooled.se(1)) << seed;
    pooled_sum += pooled.beta(1);
    const auto first = ols(with_intercept(ld.dataset.x.topRows(100)), ld.dataset.y.head(100));
    const auto second = ols(with_intercept(ld.dataset.x.bottomRows(100)), ld.dataset.y.tail(100));
    EXPECT_NEAR(first.beta(1), 1.0, 3 * first.se(1));
    EXPECT_NEAR(second.beta(1), -1.0, 3 * second.se(1));
  }
  EXPECT_LT(std::abs(pooled_sum / 50.0), 0.15);
}

TEST(ScmThreeEnv, StructureAndSelfConsistency) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ld = gen_scm_three_env(300, seed);
    EXPECT_EQ(ld.true_parents, Subset::of({0, 1}));
    ASSERT_EQ(ld.true_change_points.size(), 2u);
    EXPECT_GE(ld.true_change_points[0], 30);
    EXPECT_LT(ld.true_change_points[0], ld.true_change_points[1]);
    EXPECT_LE(ld.true_change_points[1], 270);
    const auto& p = ld.parameters;
    for (const char* b : {"beta1", "beta2", "beta3", "beta4"}) {
      EXPECT_GE(p.at(b), 0.5);
      EXPECT_LE(p.at(b), 1.5);
    }
    for (const char* v : {"sigma2_1", "sigma2_2", "sigma2_3", "sigma2_4"}) {
      EXPECT_GE(p.at(v), 0.1);
      EXPECT_LE(p.at(v), 0.3);
    }
    EXPECT_GE(ld.environments[1].at("x2_noise_mean"), 1.0);
    EXPECT_LE(ld.environments[2].at("x3_noise_mean"), -0.5);
    // Y equation holds exactly in every block; X3 equation only outside block 3
    const auto& d = ld.dataset;
    for (long t = 0; t < 300; ++t) {
      EXPECT_NEAR(d.y(t), p.at("beta2") * d.x(t, 0) + p.at("beta3") * d.x(t, 1) + ld.noise(t, 0), 1e-12);
      EXPECT_NEAR(d.x(t, 0), ld.noise(t, 1), 1e-15);
      EXPECT_NEAR(d.x(t, 1), p.at("beta1") * d.x(t, 0) + ld.noise(t, 2), 1e-12);
      if (t + 1 > ld.true_change_points[1])
        EXPECT_EQ(d.x(t, 2), ld.noise(t, 3));
      else
        EXPECT_NEAR(d.x(t, 2), p.at("beta4") * d.y(t) + ld.noise(t, 3), 1e-12);
    }
  }
}

TEST(ScmThreeEnv, ExplicitChangePointsAndDeterminism) {
  const auto a = gen_scm_three_env(100, {20, 60}, 3);
  const auto b = gen_scm_three_env(100, {20, 60}, 3);
  EXPECT_EQ(a.true_change_points, (std::vector<long>{20, 60}));
  EXPECT_EQ(a.dataset.x, b.dataset.x);
  EXPECT_EQ(a.dataset.y, b.dataset.y);
  EXPECT_THROW(gen_scm_three_env(100, {60, 20}, 3), Error);
}

TEST(ScmThreeEnv, InvariantAcrossBlocksForTrueParents) {
  const long n = 6000;
  const auto ld = gen_scm_three_env(n, {2000, 4000}, 11);
  const MatrixXd x = ld.dataset.x.leftCols(2);
  for (int e = 0; e < 3; ++e) {
    const auto fit = ols(with_intercept(x.middleRows(e * 2000, 2000)), ld.dataset.y.segment(e * 2000, 2000));
    EXPECT_NEAR(fit.beta(1), ld.parameters.at("beta2"), 3.5 * fit.se(1));
    EXPECT_NEAR(fit.beta(2), ld.parameters.at("beta3"), 3.5 * fit.se(2));
  }
}

TEST(Var, LongRunOlsRecoversCoefficients) {
  const long n = 5000;
  const auto ld = gen_var_shock(n, 0.0, 5);
  const VectorXd x = ld.dataset.x.col(0), z = ld.dataset.x.col(1), y = ld.dataset.y;
  MatrixXd lagged(n - 1, 3);
  lagged << x.head(n - 1), y.head(n - 1), z.head(n - 1);

  struct Equation {
    VectorXd response;
    MatrixXd regressors;
    std::vector<double> expected;
  };
  MatrixXd ry(n - 1, 4), rz(n - 1, 5);
  ry << x.tail(n - 1), lagged;
  rz << x.tail(n - 1), y.tail(n - 1), lagged;
  const std::vector<Equation> equations = {
      {x.tail(n - 1), lagged, {0.5, 0.1, 0.1}},
      {y.tail(n - 1), ry, {0.5, 0.1, 0.2, 0.2}},
      {z.tail(n - 1), rz, {0.2, 0.2, 0.4, 0.4, 0.2}},
  };
  for (const auto& eq : equations) {
    const auto fit = ols(with_intercept(eq.regressors), eq.response);
    EXPECT_NEAR(fit.beta(0), 0.0, 3 * fit.se(0));
    for (std::size_t k = 0; k < eq.expected.size(); ++k)
      EXPECT_NEAR(fit.beta(static_cast<Eigen::Index>(k) + 1), eq.expected[k], 3 * fit.se(static_cast<Eigen::Index>(k) + 1));
  }
}

TEST(Var, ZeroShockIsNoIntervention) {
  const auto a = gen_var_shock(100, 0.0, 9);
  EXPECT_EQ(a.parameters.at("shock_time"), 0.0);
  const auto b = gen_var_shock(100, 5.0, 9);
  const long when = static_cast<long>(b.parameters.at("shock_time"));
  // identical before the shock, X equals the shock value at the shock time
  for (long t = 0; t + 1 < when; ++t) EXPECT_EQ(a.dataset.y(t), b.dataset.y(t));
  EXPECT_EQ(b.dataset.x(when - 1, 0), 5.0);
}

TEST(Var, OutlierChangesExactlyOneEntry) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto base = gen_var_shock(100, 0.0, seed);
    const auto out = gen_var_outlier(100, 30.0, seed);
    EXPECT_EQ(base.dataset.x, out.dataset.x);
    int diff = 0;
    for (long t = 0; t < 100; ++t) diff += base.dataset.y(t) != out.dataset.y(t) ? 1 : 0;
    EXPECT_EQ(diff, 1);
    EXPECT_EQ(out.dataset.y(static_cast<long>(out.parameters.at("outlier_time")) - 1), 30.0);
  }
}

TEST(Generators, DeterministicUnderSeed) {
  EXPECT_EQ(gen_linear_gaussian(50, 3, 4).dataset.y, gen_linear_gaussian(50, 3, 4).dataset.y);
  EXPECT_NE(gen_linear_gaussian(50, 3, 4).dataset.y, gen_linear_gaussian(50, 3, 5).dataset.y);
  EXPECT_EQ(gen_var_outlier(80, 3.0, 2).dataset.y, gen_var_outlier(80, 3.0, 2).dataset.y);
}

namespace {

ExperimentParams small_params() {
  ExperimentParams p;
  p.replications = 50;
  p.B = 19;
  return p;
}

}  // namespace

TEST(Experiment, LevelTable) {
  auto p = small_params();
  p.replications = 200;
  p.tests = {{TestKind::Single, Family::T4}};
  const auto t = run_experiment(ExperimentKind::Level, p, 1);
  ASSERT_EQ(t.rows.size(), 1u);
  const double rate = std::get<double>(t.rows[0][t.column("rate")]);
  const double se = binomial_se(0.05, 200);
  EXPECT_NEAR(rate, 0.05, 2.5 * se);
  EXPECT_EQ(std::get<long long>(t.rows[0][t.column("replications")]), 200);
}

TEST(Experiment, RateSchema) {
  auto p = small_params();
  p.sample_sizes = {100, 200};
  const auto t = run_experiment(ExperimentKind::Rate, p, 2);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"n", "alternative", "test", "replications", "rejections", "rate", "se"}));
  EXPECT_EQ(t.rows.size(), 2u * 3u * 2u);
  std::set<std::tuple<long long, long long, std::string>> keys;
  for (const auto& row : t.rows)
    keys.insert({std::get<long long>(row[0]), std::get<long long>(row[1]), std::get<std::string>(row[2])});
  EXPECT_EQ(keys.size(), t.rows.size());
}

TEST(Experiment, ShockSchema) {
  auto p = small_params();
  p.strengths = {0, 20};
  p.sample_sizes = {100};
  const auto t = run_experiment(ExperimentKind::Shock, p, 3);
  // per strength: 4 subsets rejected, 4 estimates
  EXPECT_EQ(t.rows.size(), 16u);
  EXPECT_EQ(std::get<std::string>(t.rows[0][t.column("quantity")]), "reject");
}

TEST(Experiment, RequiresEnoughReplications) {
  auto p = small_params();
  p.replications = 49;
  EXPECT_THROW(run_experiment(ExperimentKind::Level, p, 0), Error);
}
