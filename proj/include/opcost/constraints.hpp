/**
 * @file constraints.hpp
 * @brief Constraint catalog in canonical form.
 *
 * Equalities read c(x) = 0. Inequalities read c~(x) = h - c(x) <= 0, so a
 * positive value is a violation and a negative value is slack. The box
 * 0 <= x <= 1 is implicit in every set and handled by the solver.
 */

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "opcost/domain_model.hpp"
#include "opcost/solvency.hpp"

namespace opcost {

enum class ConstraintKind { Equality, Inequality };

struct ConstraintFn {
  std::string id;
  ConstraintKind kind = ConstraintKind::Inequality;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;

  bool satisfied(const Vector& x, double tol = kFeasibilityTol) const {
    const double v = value(x);
    return kind == ConstraintKind::Equality ? std::abs(v) <= tol : v <= tol;
  }
};

struct ConstraintSet {
  Eigen::Index dimension = 0;
  std::vector<ConstraintFn> equalities;    ///< simplex first
  std::vector<ConstraintFn> inequalities;

  std::size_t size() const { return equalities.size() + inequalities.size(); }

  /// Largest violation over all constraints and the box.
  double max_violation(const Vector& x) const {
    double worst = std::max(0.0, -x.minCoeff());
    worst = std::max(worst, x.maxCoeff() - 1.0);
    for (const auto& c : equalities) worst = std::max(worst, std::abs(c.value(x)));
    for (const auto& c : inequalities) worst = std::max(worst, c.value(x));
    return worst;
  }

  bool feasible(const Vector& x, double tol = kFeasibilityTol) const {
    return max_violation(x) <= tol;
  }

  /// Ids and magnitudes of every constraint violated by more than `tol`.
  std::vector<std::pair<std::string, double>> violations(const Vector& x,
                                                         double tol = kFeasibilityTol) const {
    std::vector<std::pair<std::string, double>> out;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      if (x[k] < -tol) out.emplace_back("box_lower[" + std::to_string(k) + "]", -x[k]);
      if (x[k] > 1.0 + tol) out.emplace_back("box_upper[" + std::to_string(k) + "]", x[k] - 1.0);
    }
    for (const auto& c : equalities) {
      const double v = std::abs(c.value(x));
      if (v > tol) out.emplace_back(c.id, v);
    }
    for (const auto& c : inequalities) {
      const double v = c.value(x);
      if (v > tol) out.emplace_back(c.id, v);
    }
    return out;
  }
};

inline ConstraintFn build_simplex_constraint() {
  return {constraint_id::kSimplex, ConstraintKind::Equality,
          [](const Vector& x) { return x.sum() - 1.0; },
          [](const Vector& x) { return Vector::Ones(x.size()).eval(); }};
}

/// l_Cash - x_cash <= 0.
inline ConstraintFn build_cash_constraint(const std::vector<AssetClass>& assets,
                                          const ExternalParameters& params) {
  int cash = -1;
  for (const auto& a : assets) {
    if (a.is_cash) {
      if (cash >= 0) throw ConfigurationError("more than one asset class flagged is_cash");
      cash = a.index;
    }
  }
  if (cash < 0) throw ConfigurationError("cash constraint requires an asset flagged is_cash");
  const double floor = params.cash_floor;
  return {constraint_id::kCash, ConstraintKind::Inequality,
          [=](const Vector& x) { return floor - x[cash]; },
          [=](const Vector& x) {
            Vector g = Vector::Zero(x.size());
            g[cash] = -1.0;
            return g;
          }};
}

/// l_liquid - sum_k haircut_k x_k <= 0. The liquid set is {k : haircut_k > 0}.
inline ConstraintFn build_liquidity_constraint(const ExternalParameters& params) {
  const Vector haircuts = params.haircuts;
  if (haircuts.size() == 0 || (haircuts.array() <= 0.0).all()) {
    throw ConfigurationError("liquidity constraint requires at least one positive haircut");
  }
  const double floor = params.liquidity_floor;
  return {constraint_id::kLiquidity, ConstraintKind::Inequality,
          [=](const Vector& x) {
            detail::require_size(haircuts.size(), x.size(), "haircuts");
            return floor - haircuts.dot(x);
          },
          [=](const Vector&) { return Vector(-haircuts); }};
}

/// T * SCR(x) - AFR(x) <= 0, the SCR form of AFR / SCR >= T. Smooth at the
/// riskless vertex where the ratio form is singular.
inline ConstraintFn build_solvency_constraint(const ExternalParameters& params) {
  if (!(params.solvency_target > 0.0)) {
    throw ConfigurationError("solvency target must be positive");
  }
  const SolvencyModel sm = params.solvency;
  const double target = params.solvency_target;
  return {constraint_id::kSolvency, ConstraintKind::Inequality,
          [=](const Vector& x) { return target * eval_scr(x, sm) - eval_afr(x, sm); },
          [=](const Vector& x) {
            return Vector(target * scr_gradient(x, sm) - sm.afr_sensitivity);
          }};
}

/// Simplex plus each enabled inequality once, in the fixed order cash,
/// liquidity, solvency.
inline ConstraintSet assemble(const ProblemInstance& instance) {
  for (const auto& id : instance.enabled_constraints) {
    if (!is_known_constraint(id)) throw ConfigurationError("unknown constraint id '" + id + "'");
  }
  ConstraintSet set;
  set.dimension = instance.dimension();
  set.equalities.push_back(build_simplex_constraint());
  if (instance.has_constraint(constraint_id::kCash)) {
    set.inequalities.push_back(build_cash_constraint(instance.assets, instance.params));
  }
  if (instance.has_constraint(constraint_id::kLiquidity)) {
    set.inequalities.push_back(build_liquidity_constraint(instance.params));
  }
  if (instance.has_constraint(constraint_id::kSolvency)) {
    set.inequalities.push_back(build_solvency_constraint(instance.params));
  }
  return set;
}

}  // namespace opcost
