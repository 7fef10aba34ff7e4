/**
 * @file domain_model.hpp
 * @brief Problem instance: asset classes, allocations, external parameters.
 *
 * All monetary quantities are fractions of total invested assets at the
 * start of the period, so profit, own funds, capital requirement and the
 * liquidity and cash floors are directly commensurate.
 *
 * Everything here is a plain value type. Functions are pure.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "opcost/errors.hpp"

namespace opcost {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Tolerance on the simplex sum and on constraint satisfaction.
inline constexpr double kFeasibilityTol = 1e-8;

/// Constraint identifiers understood by the instance format.
namespace constraint_id {
inline constexpr const char* kSimplex = "simplex";
inline constexpr const char* kCash = "cash";
inline constexpr const char* kLiquidity = "liquidity";
inline constexpr const char* kSolvency = "solvency";
}  // namespace constraint_id

inline bool is_known_constraint(const std::string& id) {
  return id == constraint_id::kSimplex || id == constraint_id::kCash ||
         id == constraint_id::kLiquidity || id == constraint_id::kSolvency;
}

struct AssetClass {
  int index = 0;
  std::string name;
  bool is_cash = false;
};

/// A point on the unit simplex. Only obtainable through checked factories,
/// so holding one means the weights are in [0, 1] and sum to one.
class AllocationVector {
 public:
  /// Throws DimensionError if `weights` is empty and ConfigurationError if
  /// it is off the simplex by more than `tol`.
  static AllocationVector checked(Vector weights, double tol = kFeasibilityTol) {
    if (weights.size() == 0) throw DimensionError("allocation vector is empty");
    for (Eigen::Index k = 0; k < weights.size(); ++k) {
      if (!std::isfinite(weights[k]) || weights[k] < -tol || weights[k] > 1.0 + tol) {
        std::ostringstream msg;
        msg << "allocation weight " << k << " = " << weights[k] << " outside [0, 1]";
        throw ConfigurationError(msg.str());
      }
    }
    const double sum = weights.sum();
    if (std::abs(sum - 1.0) > tol) {
      std::ostringstream msg;
      msg << "allocation weights sum to " << sum << ", expected 1";
      throw ConfigurationError(msg.str());
    }
    return AllocationVector(std::move(weights));
  }

  const Vector& weights() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return weights_.size(); }
  double operator[](Eigen::Index k) const { return weights_[k]; }

  friend bool operator==(const AllocationVector& a, const AllocationVector& b) {
    return a.weights_.size() == b.weights_.size() && a.weights_ == b.weights_;
  }

 private:
  explicit AllocationVector(Vector w) : weights_(std::move(w)) {}
  friend AllocationVector project_to_simplex(const Vector& v);

  Vector weights_;
};

struct ReturnModel {
  Vector expected;  ///< E[R_k], per-period rate
  Vector vol;       ///< carried as data, never sampled
};

/// Own funds are affine in the allocation; the capital requirement is a
/// correlation-aggregated square root of per-class stress charges.
struct SolvencyModel {
  double afr_base = 0.0;
  Vector afr_sensitivity;
  Vector stress_charges;
  Matrix correlation;
};

struct ExternalParameters {
  ReturnModel returns;
  double liability_drift = 0.0;
  double nbv = 0.0;
  Vector haircuts;
  double cash_floor = 0.0;
  double liquidity_floor = 0.0;
  SolvencyModel solvency;
  double solvency_target = 1.0;
};

enum class MetricKind { ExpectedProfit, ReturnOnCapital };

inline const char* to_string(MetricKind kind) {
  return kind == MetricKind::ExpectedProfit ? "expected_profit" : "return_on_capital";
}

/// `label` only tags reports ("IFRS BOP", "SST NIAT"); `kind` picks the formula.
struct ProfitMetricSpec {
  MetricKind kind = MetricKind::ExpectedProfit;
  std::string label = "expected_profit";
};

struct ProblemInstance {
  std::vector<AssetClass> assets;
  ExternalParameters params;
  std::vector<std::string> enabled_constraints;
  ProfitMetricSpec metric;
  Vector actual_allocation;

  Eigen::Index dimension() const { return static_cast<Eigen::Index>(assets.size()); }

  bool has_constraint(const std::string& id) const {
    return std::find(enabled_constraints.begin(), enabled_constraints.end(), id) !=
           enabled_constraints.end();
  }

  /// Index of the class flagged `is_cash`, or -1.
  int cash_index() const {
    for (const auto& a : assets) {
      if (a.is_cash) return a.index;
    }
    return -1;
  }
};

struct Violation {
  std::string code;
  std::string message;
};

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace detail

/// Checks an allocation vector against the simplex invariants. Appends to `out`.
inline void validate_allocation(const Vector& x, const std::string& field,
                                std::vector<Violation>& out) {
  if (x.size() == 0) {
    out.push_back({"DIMENSION", field + " is empty"});
    return;
  }
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k]) || x[k] < -kFeasibilityTol || x[k] > 1.0 + kFeasibilityTol) {
      out.push_back({"WEIGHT_RANGE", field + "[" + std::to_string(k) + "] = " +
                                         detail::fmt_num(x[k]) + " outside [0, 1]"});
    }
  }
  const double sum = x.sum();
  if (!(std::abs(sum - 1.0) <= kFeasibilityTol)) {
    out.push_back({"SIMPLEX_SUM", field + " sums to " + detail::fmt_num(sum) + ", expected 1"});
  }
}

/// Every invariant violation of `instance`. Never throws on a well-formed
/// object; checks whose inputs have the wrong size are skipped after the
/// size mismatch is reported.
inline std::vector<Violation> validate_instance(const ProblemInstance& instance) {
  std::vector<Violation> out;
  const Eigen::Index n = instance.dimension();
  const auto& p = instance.params;
  const auto& sm = p.solvency;

  if (n == 0) {
    out.push_back({"EMPTY_ASSETS", "instance has no asset classes"});
    return out;
  }

  std::set<std::string> names;
  int cash_count = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& a = instance.assets[static_cast<std::size_t>(k)];
    if (a.index != k) {
      out.push_back({"ASSET_INDEX", "asset '" + a.name + "' has index " +
                                        std::to_string(a.index) + ", expected " +
                                        std::to_string(k)});
    }
    if (!names.insert(a.name).second) {
      out.push_back({"DUPLICATE_NAME", "asset name '" + a.name + "' appears twice"});
    }
    if (a.is_cash) ++cash_count;
  }
  if (cash_count > 1) {
    out.push_back({"CASH_FLAG", "more than one asset class is flagged is_cash"});
  }

  auto check_len = [&](Eigen::Index len, const char* field) {
    if (len != n) {
      out.push_back({"DIMENSION", std::string(field) + " has length " + std::to_string(len) +
                                      ", expected " + std::to_string(n)});
      return false;
    }
    return true;
  };

  const bool x_ok = check_len(instance.actual_allocation.size(), "actual_allocation");
  if (x_ok) validate_allocation(instance.actual_allocation, "actual_allocation", out);

  check_len(p.returns.expected.size(), "returns.expected");
  if (check_len(p.returns.vol.size(), "returns.vol")) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!(p.returns.vol[k] >= 0.0)) {
        out.push_back({"NEGATIVE_VOL", "returns.vol[" + std::to_string(k) + "] < 0"});
      }
    }
  }
  if (check_len(p.haircuts.size(), "haircuts")) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!(p.haircuts[k] >= 0.0 && p.haircuts[k] <= 1.0)) {
        out.push_back({"HAIRCUT_RANGE", "haircuts[" + std::to_string(k) + "] = " +
                                            detail::fmt_num(p.haircuts[k]) +
                                            " outside [0, 1]"});
      }
    }
  }

  if (!(p.cash_floor >= 0.0 && p.cash_floor <= 1.0)) {
    out.push_back({"THRESHOLD_RANGE", "cash_floor outside [0, 1]"});
  }
  if (!(p.liquidity_floor >= 0.0 && p.liquidity_floor <= 1.0)) {
    out.push_back({"THRESHOLD_RANGE", "liquidity_floor outside [0, 1]"});
  }
  if (!(p.solvency_target > 0.0)) {
    out.push_back({"TARGET_NONPOSITIVE", "solvency_target must be > 0"});
  }
  if (!(sm.afr_base > 0.0)) {
    out.push_back({"AFR_BASE_NONPOSITIVE", "solvency.afr_base must be > 0"});
  }
  check_len(sm.afr_sensitivity.size(), "solvency.afr_sensitivity");
  if (check_len(sm.stress_charges.size(), "solvency.stress_charges")) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!(sm.stress_charges[k] >= 0.0)) {
        out.push_back({"NEGATIVE_CHARGE",
                       "solvency.stress_charges[" + std::to_string(k) + "] < 0"});
      }
    }
  }

  const Matrix& c = sm.correlation;
  if (c.rows() != n || c.cols() != n) {
    out.push_back({"DIMENSION", "solvency.correlation is " + std::to_string(c.rows()) + "x" +
                                    std::to_string(c.cols()) + ", expected " +
                                    std::to_string(n) + "x" + std::to_string(n)});
  } else {
    bool finite = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = c(i, j);
        const std::string at = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        if (!std::isfinite(v)) {
          finite = false;
          out.push_back({"CORR_RANGE", "correlation" + at + " is not finite"});
          continue;
        }
        if (v < -1.0 || v > 1.0) {
          out.push_back({"CORR_RANGE", "correlation" + at + " = " + detail::fmt_num(v) +
                                           " outside [-1, 1]"});
        }
        if (i == j && v != 1.0) {
          out.push_back({"CORR_DIAGONAL", "correlation" + at + " must be 1"});
        }
        if (j > i && std::abs(v - c(j, i)) > 1e-12) {
          out.push_back({"CORR_SYMMETRY", "correlation" + at + " differs from its transpose"});
        }
      }
    }
    if (finite) {
      const Matrix sym = 0.5 * (c + c.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-10) {
        out.push_back({"CORR_PSD", "correlation is not positive semidefinite (min eigenvalue " +
                                       detail::fmt_num(eig.eigenvalues().minCoeff()) + ")"});
      }
    }
  }

  for (const auto& id : instance.enabled_constraints) {
    if (!is_known_constraint(id)) {
      out.push_back({"UNKNOWN_CONSTRAINT", "unknown constraint '" + id + "'"});
    }
  }
  if (instance.has_constraint(constraint_id::kCash) && cash_count == 0) {
    out.push_back({"CASH_FLAG", "cash constraint enabled but no asset is flagged is_cash"});
  }
  if (instance.has_constraint(constraint_id::kLiquidity) && p.haircuts.size() == n &&
      (p.haircuts.array() <= 0.0).all()) {
    out.push_back({"NO_LIQUID_ASSETS", "liquidity constraint enabled but every haircut is 0"});
  }
  return out;
}

/// Euclidean projection onto {x >= 0, sum x = 1} by sort-and-threshold.
inline AllocationVector project_to_simplex(const Vector& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw DimensionError("cannot project an empty vector onto the simplex");

  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
  }

  Vector x = (v.array() - theta).max(0.0).min(1.0).matrix();
  return AllocationVector(std::move(x));
}

}  // namespace opcost
