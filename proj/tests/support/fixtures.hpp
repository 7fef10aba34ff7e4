// Shared test instances.
#pragma once

#include <random>

#include "opcost/opcost.hpp"

namespace opcost::testing {

/// Reference instance D1: cash, bonds, equities under all four constraints.
inline ProblemInstance d1() {
  ProblemInstance inst;
  inst.assets = {{0, "Cash", true}, {1, "Bonds", false}, {2, "Equities", false}};
  auto& p = inst.params;
  p.returns.expected = Vector{{0.01, 0.02, 0.06}};
  p.returns.vol = Vector{{0.0, 0.04, 0.16}};
  p.liability_drift = 0.0;
  p.nbv = 0.0;
  p.haircuts = Vector{{1.0, 0.9, 0.7}};
  p.cash_floor = 0.05;
  p.liquidity_floor = 0.6;
  p.solvency.afr_base = 0.2;
  p.solvency.afr_sensitivity = Vector::Zero(3);
  p.solvency.stress_charges = Vector{{0.0, 0.05, 0.4}};
  p.solvency.correlation = Matrix::Identity(3, 3);
  p.solvency.correlation(1, 2) = p.solvency.correlation(2, 1) = 0.25;
  p.solvency_target = 1.5;
  inst.enabled_constraints = {"cash", "liquidity", "solvency"};
  inst.metric = {MetricKind::ExpectedProfit, "IFRS BOP"};
  inst.actual_allocation = Vector{{0.5, 0.4, 0.1}};
  return inst;
}

/// D1 data with only the simplex constraint.
inline ProblemInstance simplex_only() {
  ProblemInstance inst = d1();
  inst.enabled_constraints.clear();
  inst.actual_allocation = Vector{{1.0, 0.0, 0.0}};
  return inst;
}

/// Cash floor forces a liquidity shortfall: cash >= 0.9 caps liquidity at
/// 0.9 * 0.5 + 0.1 * 0.9 = 0.54 < 0.6.
inline ProblemInstance infeasible() {
  ProblemInstance inst = d1();
  inst.params.cash_floor = 0.9;
  inst.params.haircuts = Vector{{0.5, 0.9, 0.7}};
  inst.params.liquidity_floor = 0.6;
  return inst;
}

inline Vector random_simplex_point(std::mt19937_64& rng, Eigen::Index n) {
  std::exponential_distribution<double> e(1.0);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = e(rng);
  return v / v.sum();
}

/// Seeded perturbation of D1; may or may not be feasible.
inline ProblemInstance random_d1_variant(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProblemInstance inst = d1();
  auto& p = inst.params;
  p.returns.expected = Vector{{0.005 + 0.015 * u(rng), 0.01 + 0.03 * u(rng), 0.03 + 0.06 * u(rng)}};
  p.haircuts = Vector{{1.0, 0.8 + 0.2 * u(rng), 0.5 + 0.3 * u(rng)}};
  p.cash_floor = 0.1 * u(rng);
  p.liquidity_floor = 0.4 + 0.4 * u(rng);
  p.solvency.afr_base = 0.1 + 0.2 * u(rng);
  p.solvency.afr_sensitivity = Vector{{0.0, 0.02 * (u(rng) - 0.5), -0.03 * u(rng)}};
  p.solvency.stress_charges = Vector{{0.0, 0.03 + 0.07 * u(rng), 0.25 + 0.25 * u(rng)}};
  p.solvency.correlation = Matrix::Identity(3, 3);
  p.solvency.correlation(1, 2) = p.solvency.correlation(2, 1) = -0.2 + 0.7 * u(rng);
  p.solvency_target = 1.0 + 1.0 * u(rng);
  inst.actual_allocation = random_simplex_point(rng, 3);
  return inst;
}

}  // namespace opcost::testing
