#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"

namespace opcost {
namespace {

const Vector kReturns{{0.01, 0.02, 0.06}};

// Central differences written out here so the check does not go through
// the library's own finite-difference code.
template <typename F>
Vector central_diff(F f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector up = x, down = x;
    up[k] += h;
    down[k] -= h;
    g[k] = (f(up) - f(down)) / (2 * h);
  }
  return g;
}

TEST(EvalInvr, VerticesAndMixture) {
  const ReturnModel rm{kReturns, Vector::Zero(3)};
  EXPECT_DOUBLE_EQ(eval_invr(Vector{{1.0, 0.0, 0.0}}, rm), 0.01);
  EXPECT_DOUBLE_EQ(eval_invr(Vector{{0.0, 0.0, 1.0}}, rm), 0.06);
  // 0.2 * 0.01 + 0.3 * 0.02 + 0.5 * 0.06
  EXPECT_NEAR(eval_invr(Vector{{0.2, 0.3, 0.5}}, rm), 0.002 + 0.006 + 0.03, 1e-15);
  EXPECT_NEAR(eval_invr(Vector{{0.2, 0.3, 0.5}}, rm), 0.038, 1e-15);
}

TEST(EvalInvr, DimensionMismatch) {
  const ReturnModel rm{kReturns, Vector::Zero(3)};
  EXPECT_THROW(eval_invr(Vector{{0.5, 0.5}}, rm), DimensionError);
}

TEST(EvalProfit, Decomposition) {
  auto p = testing::d1().params;
  EXPECT_DOUBLE_EQ(eval_profit(Vector{{0.0, 0.0, 1.0}}, p), 0.06);
  p.liability_drift = 0.01;
  EXPECT_NEAR(eval_profit(Vector{{0.2, 0.3, 0.5}}, p), 0.028, 1e-15);
  p.nbv = 0.005;
  p.liability_drift = 0.005;
  const Vector x{{0.1, 0.7, 0.2}};
  EXPECT_NEAR(eval_profit(x, p), eval_invr(x, p.returns), 1e-16);
}

TEST(EvalProfit, AffineInAllocation) {
  auto p = testing::d1().params;
  p.liability_drift = 0.013;
  p.nbv = 0.002;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vector x = testing::random_simplex_point(rng, 3);
    const Vector y = testing::random_simplex_point(rng, 3);
    const double a = u(rng);
    EXPECT_NEAR(eval_profit(a * x + (1 - a) * y, p),
                a * eval_profit(x, p) + (1 - a) * eval_profit(y, p), 1e-12);
  }
}

TEST(EvalMetric, ExpectedProfitIsProfit) {
  const auto p = testing::d1().params;
  const Vector x{{0.2, 0.3, 0.5}};
  EXPECT_EQ(eval_metric(x, p, {MetricKind::ExpectedProfit, "IFRS BOP"}), eval_profit(x, p));
}

TEST(EvalMetric, ReturnOnCapital) {
  ProfitMetricSpec roc{MetricKind::ReturnOnCapital, "RoC"};
  auto p = testing::d1().params;
  p.solvency.stress_charges = Vector{{0.0, 0.0, 0.4}};
  p.solvency.correlation = Matrix::Identity(3, 3);
  // single-asset SCR = 0.4, P = 0.06
  EXPECT_NEAR(eval_metric(Vector{{0.0, 0.0, 1.0}}, p, roc), 0.15, 1e-15);

  p.solvency.stress_charges = Vector{{0.0, 0.05, 0.4}};
  EXPECT_THROW(eval_metric(Vector{{1.0, 0.0, 0.0}}, p, roc), SingularMetricError);
  EXPECT_THROW(profit_gradient(Vector{{1.0, 0.0, 0.0}}, p, roc), SingularMetricError);
}

TEST(EvalMetric, ReturnOnCapitalIsScaleConsistent) {
  ProfitMetricSpec roc{MetricKind::ReturnOnCapital, "RoC"};
  auto p = testing::d1().params;
  auto doubled = p;
  doubled.solvency.stress_charges *= 2.0;
  doubled.returns.expected *= 2.0;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const Vector x = testing::random_simplex_point(rng, 3);
    const double base = eval_metric(x, p, roc);
    EXPECT_NEAR(eval_metric(x, doubled, roc), base, 1e-10 * std::max(1.0, std::abs(base)));
  }
}

TEST(ProfitGradient, ExpectedProfitIsConstant) {
  const auto p = testing::d1().params;
  const ProfitMetricSpec m{};
  const Vector g1 = profit_gradient(Vector{{0.2, 0.3, 0.5}}, p, m);
  const Vector g2 = profit_gradient(Vector{{0.9, 0.05, 0.05}}, p, m);
  EXPECT_EQ(g1, kReturns);
  EXPECT_EQ(g1, g2);
}

TEST(ProfitGradient, ReturnOnCapitalMatchesCentralDifferences) {
  const ProfitMetricSpec roc{MetricKind::ReturnOnCapital, "RoC"};
  const auto p = testing::d1().params;
  auto f = [&](const Vector& x) { return eval_metric(x, p, roc); };

  const Vector vertex{{0.0, 0.0, 1.0}};
  const Vector g = profit_gradient(vertex, p, roc);
  EXPECT_LE((g - central_diff(f, vertex)).lpNorm<Eigen::Infinity>(),
            1e-6 * (1 + g.lpNorm<Eigen::Infinity>()));

  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Vector x = testing::random_simplex_point(rng, 3);
    const Vector ga = profit_gradient(x, p, roc);
    EXPECT_LE((ga - central_diff(f, x)).lpNorm<Eigen::Infinity>(),
              1e-6 * (1 + ga.lpNorm<Eigen::Infinity>()));
  }
}

}  // namespace
}  // namespace opcost
