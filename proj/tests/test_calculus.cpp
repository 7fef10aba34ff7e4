#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"

namespace opcost {
namespace {

const ScalarField kSquaredNorm{[](const Vector& x) { return x.squaredNorm(); }};

ScalarField scr_field() {
  const SolvencyModel sm = testing::d1().params.solvency;
  return {[sm](const Vector& x) { return eval_scr(x, sm); }};
}

// Closed-form SCR gradient: diag(s) C (s o x) / SCR.
Vector scr_gradient_closed_form(const Vector& x) {
  const SolvencyModel sm = testing::d1().params.solvency;
  const Vector e = sm.stress_charges.cwiseProduct(x);
  const double q = std::sqrt(e.dot(sm.correlation * e));
  return sm.stress_charges.cwiseProduct(sm.correlation * e) / q;
}

TEST(FdGradient, AffineAndQuadratic) {
  const Vector r{{0.01, 0.02, 0.06}};
  const ScalarField linear{[&](const Vector& x) { return r.dot(x); }};
  EXPECT_LE((fd_gradient(linear, Vector{{0.2, 0.3, 0.5}}) - r).lpNorm<Eigen::Infinity>(), 1e-9);

  const Vector x{{0.2, 0.3, 0.5}};
  EXPECT_LE((fd_gradient(kSquaredNorm, x) - Vector{{0.4, 0.6, 1.0}}).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(FdGradient, ScrMatchesAnalyticGradient) {
  const Vector x{{0.0, 0.5, 0.5}};
  const Vector g = scr_gradient_closed_form(x);
  EXPECT_LE((fd_gradient(scr_field(), x) - g).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_LE((scr_gradient(x, testing::d1().params.solvency) - g).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(FdGradient, SecondOrderConvergence) {
  const Vector x{{0.1, 0.5, 0.4}};
  const Vector g = scr_gradient_closed_form(x);
  const double e1 = (fd_gradient(scr_field(), x, 2e-2) - g).lpNorm<Eigen::Infinity>();
  const double e2 = (fd_gradient(scr_field(), x, 1e-2) - g).lpNorm<Eigen::Infinity>();
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
}

TEST(FdGradient, EvaluatorFailureCarriesCoordinate) {
  const ScalarField f{[](const Vector& x) {
    if (x[1] > 0.5) throw ModelError("boom");
    return x.sum();
  }};
  try {
    fd_gradient(f, Vector{{0.2, 0.5, 0.1}}, 1e-3);
    FAIL() << "expected FdEvaluationError";
  } catch (const FdEvaluationError& e) {
    EXPECT_EQ(e.coordinate(), 1);
  }
  EXPECT_THROW(fd_gradient(f, Vector{{0.2, 0.1, 0.1}}, 0.0), ConfigurationError);
}

TEST(FdHessian, AffineQuadraticAndScrSquared) {
  const Vector r{{0.01, 0.02, 0.06}};
  const ScalarField linear{[&](const Vector& x) { return r.dot(x) + 3.0; }};
  const Vector x{{0.2, 0.3, 0.5}};
  EXPECT_LE(fd_hessian(linear, x).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((fd_hessian(kSquaredNorm, x) - 2.0 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-6);

  const SolvencyModel sm = testing::d1().params.solvency;
  const ScalarField scr2{[&](const Vector& p) { return std::pow(eval_scr(p, sm), 2); }};
  const Matrix d = sm.stress_charges.asDiagonal();
  const Matrix expected = 2.0 * d * sm.correlation * d;
  const Matrix h = fd_hessian(scr2, Vector{{0.0, 0.5, 0.5}});
  EXPECT_LE((h - expected).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(h, h.transpose());
}

TEST(TaylorEval, ExactForPolynomialsOfMatchingOrder) {
  const Vector r{{0.01, 0.02, 0.06}};
  const ScalarField linear{[&](const Vector& x) { return r.dot(x) - 0.4; }};
  const Vector x0{{0.3, 0.3, 0.4}};
  const Vector x{{0.1, 0.6, 0.3}};
  EXPECT_NEAR(taylor_eval(linear, x0, x, 1), linear(x), 1e-8);

  const ScalarField quad{[](const Vector& p) { return p.squaredNorm() - 2.0 * p[0] * p[2]; }};
  EXPECT_NEAR(taylor_eval(quad, x0, x, 2), quad(x), 1e-6);
  EXPECT_THROW(taylor_eval(quad, x0, x, 3), ConfigurationError);
}

TEST(TaylorEval, ScrRemainderIsThirdOrder) {
  const ScalarField f = scr_field();
  const Vector x0{{0.0, 0.5, 0.5}};
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  double ratio_sum = 0.0;
  const int directions = 20;
  for (int i = 0; i < directions; ++i) {
    Vector d{{n(rng), n(rng), n(rng)}};
    d.array() -= d.mean();
    d.normalize();
    const double err_h = std::abs(taylor_eval(f, x0, x0 + 0.01 * d, 2) - f(x0 + 0.01 * d));
    const double err_h2 = std::abs(taylor_eval(f, x0, x0 + 0.005 * d, 2) - f(x0 + 0.005 * d));
    EXPECT_LE(err_h, 1e-4);
    ratio_sum += err_h / err_h2;
  }
  const double mean_ratio = ratio_sum / directions;
  EXPECT_GE(mean_ratio, 6.0);
  EXPECT_LE(mean_ratio, 10.0);
}

TEST(ParameterVector, FlattenRoundTrip) {
  const auto p = testing::d1().params;
  const Vector tau = flatten_parameters(p);
  EXPECT_EQ(tau.size(), parameter_count(3));
  EXPECT_EQ(flatten_parameters(unflatten_parameters(tau, 3)), tau);
  // Documented positions.
  EXPECT_EQ(tau[2], 0.06);       // returns.expected[2]
  EXPECT_EQ(tau[6], 0.0);        // liability_drift
  EXPECT_EQ(tau[11], 0.2);       // afr_base
  EXPECT_EQ(tau.tail(1)[0], 1.5);  // solvency_target
}

ScenarioPath path_with(std::vector<double> ts, std::vector<ExternalParameters> snaps) {
  return ScenarioPath{std::move(ts), std::move(snaps)};
}

TEST(DpDt, ConstantPathIsZero) {
  const auto p = testing::d1().params;
  const auto path = path_with({0, 1, 2}, {p, p, p});
  const Vector x{{0.2, 0.3, 0.5}};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(dP_dt(path, x, i, {}), 0.0, 1e-10);
}

TEST(DpDt, LinearReturnDrift) {
  auto p0 = testing::d1().params;
  std::vector<ExternalParameters> snaps;
  for (int q = 0; q < 4; ++q) {
    auto p = p0;
    p.returns.expected[2] += 0.01 * q;
    snaps.push_back(p);
  }
  const auto path = path_with({0, 1, 2, 3}, snaps);
  const Vector x{{0.0, 0.0, 1.0}};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(dP_dt(path, x, i, {}), 0.01, 1e-6);
}

TEST(DpDt, LiabilityDrift) {
  auto p0 = testing::d1().params;
  std::vector<ExternalParameters> snaps;
  for (int q = 0; q < 3; ++q) {
    auto p = p0;
    p.liability_drift = 0.002 * q;
    snaps.push_back(p);
  }
  const auto path = path_with({0, 1, 2}, snaps);
  EXPECT_NEAR(dP_dt(path, Vector{{0.2, 0.3, 0.5}}, 1, {}), -0.002, 1e-9);
}

TEST(DpDt, TooShortPath) {
  const auto p = testing::d1().params;
  EXPECT_THROW(dP_dt(path_with({0}, {p}), Vector{{0.2, 0.3, 0.5}}, 0, {}), ConfigurationError);
}

TEST(DpDt, ChainRuleMatchesDirectDifferenceOnSmoothPath) {
  // tau(t) moves linearly in several coordinates; the metric is the
  // nonlinear return on capital.
  const auto base = testing::d1().params;
  auto direction = base;
  direction.returns.expected = Vector{{0.001, 0.004, -0.01}};
  direction.liability_drift = 0.003;
  direction.solvency.stress_charges = Vector{{0.0, 0.02, 0.05}};
  const Vector v = flatten_parameters(direction) - flatten_parameters(base);
  const Vector tau0 = flatten_parameters(base);
  const double dt = 1e-3;
  std::vector<ExternalParameters> snaps;
  std::vector<double> ts;
  for (int i = 0; i < 5; ++i) {
    ts.push_back(i * dt);
    snaps.push_back(unflatten_parameters(tau0 + i * dt * v, 3));
  }
  const auto path = path_with(ts, snaps);
  const ProfitMetricSpec roc{MetricKind::ReturnOnCapital, "RoC"};
  const Vector x{{0.2, 0.4, 0.4}};
  for (std::size_t i = 1; i + 1 < snaps.size(); ++i) {
    const double chain = dP_dt(path, x, i, roc);
    const double direct = (eval_metric(x, snaps[i + 1], roc) - eval_metric(x, snaps[i - 1], roc)) /
                          (ts[i + 1] - ts[i - 1]);
    EXPECT_LE(std::abs(chain - direct), 1e-6 * (1 + std::abs(chain)));
  }
}

TEST(DpDt, ProfitIgnoresTheTimeLabel) {
  const auto p = testing::d1().params;
  auto moved = p;
  moved.returns.expected[1] += 0.01;
  const auto a = path_with({0, 1}, {p, moved});
  const auto b = path_with({10, 11}, {p, moved});
  const Vector x{{0.3, 0.3, 0.4}};
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(eval_metric(x, a.snapshots[i], {}), eval_metric(x, b.snapshots[i], {}));
    EXPECT_EQ(dP_dt(a, x, i, {}), dP_dt(b, x, i, {}));
  }
}

TEST(InterpolateParameters, PiecewiseLinear) {
  const auto p = testing::d1().params;
  auto q = p;
  q.returns.expected[2] = 0.08;
  q.liability_drift = 0.01;
  const auto path = path_with({0, 2}, {p, q});
  const auto mid = interpolate_parameters(path, 1.0);
  EXPECT_NEAR(mid.returns.expected[2], 0.07, 1e-15);
  EXPECT_NEAR(mid.liability_drift, 0.005, 1e-15);
  EXPECT_EQ(interpolate_parameters(path, -1.0).returns.expected, p.returns.expected);
}

TEST(ValidatePath, Ordering) {
  const auto p = testing::d1().params;
  EXPECT_TRUE(validate_path(path_with({0, 1}, {p, p})).empty());
  EXPECT_FALSE(validate_path(path_with({1, 1}, {p, p})).empty());
  EXPECT_FALSE(validate_path(path_with({0}, {p})).empty());
}

}  // namespace
}  // namespace opcost
