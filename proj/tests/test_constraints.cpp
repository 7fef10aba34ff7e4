#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/fixtures.hpp"

namespace opcost {
namespace {

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

// Quadratic form written as explicit double sums.
double scr_by_loops(const Vector& x, const SolvencyModel& sm) {
  double q = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      q += sm.stress_charges[i] * x[i] * sm.correlation(i, j) * sm.stress_charges[j] * x[j];
    }
  }
  return std::sqrt(std::max(0.0, q));
}

TEST(SimplexConstraint, ValueAndGradient) {
  const auto c = build_simplex_constraint();
  EXPECT_EQ(c.kind, ConstraintKind::Equality);
  EXPECT_NEAR(c.value(Vector{{0.3, 0.3, 0.4}}), 0.0, 1e-16);
  EXPECT_DOUBLE_EQ(c.value(Vector{{0.5, 0.5, 0.5}}), 0.5);
  EXPECT_EQ(c.gradient(Vector{{0.1, 0.2, 0.3}}), Vector::Ones(3));
}

TEST(CashConstraint, CanonicalValues) {
  auto inst = testing::d1();
  const auto c = build_cash_constraint(inst.assets, inst.params);
  EXPECT_DOUBLE_EQ(c.value(Vector{{0.05, 0.5, 0.45}}), 0.0);
  EXPECT_NEAR(c.value(Vector{{0.10, 0.5, 0.40}}), -0.05, 1e-16);
  EXPECT_NEAR(c.value(Vector{{0.02, 0.5, 0.48}}), 0.03, 1e-16);
  EXPECT_EQ(c.gradient(Vector{{0.2, 0.3, 0.5}}), (Vector{{-1.0, 0.0, 0.0}}));
  EXPECT_TRUE(c.satisfied(Vector{{0.05, 0.5, 0.45}}));
  EXPECT_FALSE(c.satisfied(Vector{{0.02, 0.5, 0.48}}));
}

TEST(CashConstraint, RequiresCashClass) {
  auto inst = testing::d1();
  inst.assets[0].is_cash = false;
  EXPECT_THROW(build_cash_constraint(inst.assets, inst.params), ConfigurationError);
}

TEST(LiquidityConstraint, CanonicalValues) {
  auto p = testing::d1().params;
  const auto c = build_liquidity_constraint(p);
  // 0.6 - (0.2 * 1.0 + 0.3 * 0.9 + 0.5 * 0.7)
  EXPECT_NEAR(c.value(Vector{{0.2, 0.3, 0.5}}), 0.6 - (0.2 + 0.27 + 0.35), 1e-15);
  EXPECT_NEAR(c.value(Vector{{0.2, 0.3, 0.5}}), -0.22, 1e-15);

  p.haircuts = Vector::Ones(3);
  p.liquidity_floor = 1.0;
  const auto always = build_liquidity_constraint(p);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(always.value(testing::random_simplex_point(rng, 3)), 0.0, 1e-15);
  }

  p.haircuts = Vector{{1.0, 0.0, 0.0}};
  p.liquidity_floor = 0.6;
  EXPECT_NEAR(build_liquidity_constraint(p).value(Vector{{0.4, 0.3, 0.3}}), 0.2, 1e-15);
}

TEST(LiquidityConstraint, RequiresALiquidClass) {
  auto p = testing::d1().params;
  p.haircuts = Vector::Zero(3);
  EXPECT_THROW(build_liquidity_constraint(p), ConfigurationError);
}

TEST(LiquidityConstraint, StrictlyDecreasingInLiquidWeights) {
  const auto p = testing::d1().params;
  const auto c = build_liquidity_constraint(p);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vector x = testing::random_simplex_point(rng, 3);
    for (Eigen::Index k = 0; k < 3; ++k) {
      Vector y = x;
      y[k] += 0.01;
      EXPECT_LT(c.value(y), c.value(x));
    }
  }
}

TEST(Solvency, AfrExamples) {
  SolvencyModel sm = testing::d1().params.solvency;
  EXPECT_DOUBLE_EQ(eval_afr(Vector{{0.3, 0.3, 0.4}}, sm), 0.2);
  sm.afr_sensitivity = Vector{{0.0, 0.01, -0.02}};
  EXPECT_NEAR(eval_afr(Vector{{0.0, 1.0, 0.0}}, sm), 0.21, 1e-16);
  EXPECT_NEAR(eval_afr(Vector{{0.0, 0.0, 1.0}}, sm), 0.18, 1e-16);
}

TEST(Solvency, ScrExamples) {
  SolvencyModel sm = testing::d1().params.solvency;
  sm.correlation = Matrix::Identity(3, 3);
  EXPECT_DOUBLE_EQ(eval_scr(Vector{{0.0, 0.0, 1.0}}, sm), 0.4);
  EXPECT_EQ(eval_scr(Vector{{1.0, 0.0, 0.0}}, sm), 0.0);

  sm.correlation(1, 2) = sm.correlation(2, 1) = 0.25;
  const Vector x{{0.0, 0.5, 0.5}};
  const double expected = std::sqrt(0.025 * 0.025 + 0.2 * 0.2 + 2 * 0.25 * 0.025 * 0.2);
  EXPECT_NEAR(expected, std::sqrt(0.043125), 1e-15);
  EXPECT_NEAR(eval_scr(x, sm), expected, 1e-15);
  EXPECT_NEAR(eval_scr(x, sm), scr_by_loops(x, sm), 1e-15);
  EXPECT_NEAR(eval_scr(x, sm), 0.20767, 1e-5);
}

TEST(Solvency, ScrMatchesLoopOracleAndIsHomogeneous) {
  const SolvencyModel sm = testing::d1().params.solvency;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const Vector x = testing::random_simplex_point(rng, 3);
    const double scr = eval_scr(x, sm);
    EXPECT_NEAR(scr, scr_by_loops(x, sm), 1e-14);
    const double a = u(rng);
    EXPECT_NEAR(eval_scr(a * x, sm), a * scr, 1e-10 * std::max(scr * a, 1e-300));
  }
}

TEST(Solvency, NonPsdCorrelationIsAModelError) {
  SolvencyModel sm = testing::d1().params.solvency;
  sm.stress_charges = Vector{{0.3, 0.3, 0.0}};
  sm.correlation = Matrix::Identity(3, 3);
  sm.correlation(0, 1) = sm.correlation(1, 0) = -1.5;
  EXPECT_THROW(eval_scr(Vector{{0.5, 0.5, 0.0}}, sm), ModelError);
}

TEST(Solvency, RatioExamples) {
  SolvencyModel sm = testing::d1().params.solvency;
  sm.correlation = Matrix::Identity(3, 3);
  EXPECT_DOUBLE_EQ(eval_sr(Vector{{0.0, 0.0, 1.0}}, sm), 0.5);
  EXPECT_TRUE(std::isinf(eval_sr(Vector{{1.0, 0.0, 0.0}}, sm)));
  // SCR = 0.1: 0.25 in equities alone.
  EXPECT_NEAR(eval_sr(Vector{{0.75, 0.0, 0.25}}, sm), 2.0, 1e-15);
}

TEST(SolvencyConstraint, ScrForm) {
  const auto p = testing::d1().params;
  const auto c = build_solvency_constraint(p);
  EXPECT_NEAR(c.value(Vector{{0.0, 0.0, 1.0}}), 1.5 * 0.4 - 0.2, 1e-15);
  EXPECT_GT(c.value(Vector{{0.0, 0.0, 1.0}}), 0.0);
  EXPECT_DOUBLE_EQ(c.value(Vector{{1.0, 0.0, 0.0}}), -0.2);
  // Binding locus: pure equities weight e with 1.5 * 0.4 e = 0.2.
  const double e = 0.2 / 0.6;
  EXPECT_NEAR(c.value(Vector{{1.0 - e, 0.0, e}}), 0.0, 1e-15);
}

TEST(SolvencyConstraint, ScrFormAgreesWithRatioForm) {
  auto p = testing::d1().params;
  p.solvency.afr_sensitivity = Vector{{0.0, 0.01, -0.03}};
  const auto c = build_solvency_constraint(p);
  std::mt19937_64 rng(6);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vector x = testing::random_simplex_point(rng, 3);
    const double scr = eval_scr(x, p.solvency);
    if (scr <= 1e-9) continue;
    const double canonical = c.value(x);
    const double ratio_gap = p.solvency_target - eval_sr(x, p.solvency);
    EXPECT_EQ(std::signbit(canonical), std::signbit(ratio_gap));
    ++checked;
  }
  EXPECT_GT(checked, 990);
}

TEST(SolvencyConstraint, GradientIsFiniteAtTheRisklessVertex) {
  const auto c = build_solvency_constraint(testing::d1().params);
  const Vector g = c.gradient(Vector{{1.0, 0.0, 0.0}});
  EXPECT_TRUE(g.allFinite());
}

TEST(ConstraintGradients, MatchCentralDifferences) {
  const auto inst = testing::d1();
  const auto cs = assemble(inst);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Vector x = testing::random_simplex_point(rng, 3);
    auto check = [&](const ConstraintFn& c) {
      const Vector g = c.gradient(x);
      const Vector fd = central_diff(c.value, x);
      EXPECT_LE((g - fd).lpNorm<Eigen::Infinity>(), 1e-6 * (1 + g.lpNorm<Eigen::Infinity>()))
          << c.id << " at " << x.transpose();
    };
    for (const auto& c : cs.equalities) check(c);
    for (const auto& c : cs.inequalities) check(c);
  }
}

TEST(Assemble, CountsAndOrder) {
  auto inst = testing::d1();
  auto cs = assemble(inst);
  EXPECT_EQ(cs.size(), 4U);
  EXPECT_EQ(cs.equalities.size(), 1U);
  EXPECT_EQ(cs.equalities[0].id, "simplex");
  ASSERT_EQ(cs.inequalities.size(), 3U);
  EXPECT_EQ(cs.inequalities[0].id, "cash");
  EXPECT_EQ(cs.inequalities[1].id, "liquidity");
  EXPECT_EQ(cs.inequalities[2].id, "solvency");

  inst.enabled_constraints.clear();
  EXPECT_EQ(assemble(inst).size(), 1U);

  inst.enabled_constraints = {"cash", "cash"};
  EXPECT_EQ(assemble(inst).size(), 2U);

  inst.enabled_constraints = {"tied_assets"};
  EXPECT_THROW(assemble(inst), ConfigurationError);
}

TEST(ConstraintSet, ViolationsListsOffendingIds) {
  const auto cs = assemble(testing::infeasible());
  const auto v = cs.violations(Vector{{0.9, 0.1, 0.0}});
  ASSERT_EQ(v.size(), 1U);
  EXPECT_EQ(v[0].first, "liquidity");
  EXPECT_NEAR(v[0].second, 0.6 - 0.45 - 0.09, 1e-15);
  EXPECT_FALSE(cs.feasible(Vector{{0.9, 0.1, 0.0}}));
}

}  // namespace
}  // namespace opcost
