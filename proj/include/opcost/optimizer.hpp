/**
 * @file optimizer.hpp
 * @brief Constrained profit maximization with KKT verification.
 *
 * Maximizes a metric P(x) over the unit simplex subject to a ConstraintSet.
 * The Lagrangian is
 *
 *   L(x, lambda) = P(x) - sum_i lambda_i c_i(x) - sum_j lambda~_j c~_j(x)
 *
 * with the simplex multiplier mu stored as lambda_eq[0]. Lower box bounds
 * x_k >= 0 carry their own nonnegative multipliers, folded into the
 * stationarity residual; the upper bounds are implied by the simplex.
 *
 * Algorithm:
 *  1. Multi-start augmented Lagrangian. Inequalities enter through the
 *     PHR penalty, the simplex through projection in a spectral projected
 *     gradient inner loop.
 *  2. Each limit point seeds an active-set Newton solve of the square KKT
 *     system (free coordinates, equality multipliers, active inequality
 *     multipliers). The active set is corrected until primal and dual
 *     feasibility both hold.
 *  3. Simplex vertices, and every face for small n, seed the same polish.
 *  4. Candidates passing the residual test are classified by the sign of
 *     the Hessian of L projected onto the tangent space of the active
 *     constraints, and the best objective wins.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "opcost/calculus.hpp"
#include "opcost/constraints.hpp"
#include "opcost/domain_model.hpp"
#include "opcost/profit.hpp"

namespace opcost {

struct SolverConfig {
  int n_start = 16;
  double eps_kkt = 1e-6;
  double eps_active = 1e-7;
  double eps_eig = 1e-8;
  int facet_scan_max = 6;
  int inner_iter_cap = 10000;
  int outer_iter_cap = 60;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e8;
  std::uint64_t seed = 20240917;
};

/// Smooth objective to maximize. A null gradient falls back to finite differences.
struct Objective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;

  Vector grad(const Vector& x) const {
    if (gradient) return gradient(x);
    return fd_gradient(ScalarField{value}, x);
  }
};

inline Objective make_objective(const ExternalParameters& params, const ProfitMetricSpec& metric) {
  return {[params, metric](const Vector& x) { return eval_metric(x, params, metric); },
          [params, metric](const Vector& x) { return profit_gradient(x, params, metric); }};
}

struct Multipliers {
  Vector lambda_eq;    ///< one per equality; [0] is mu for the simplex
  Vector lambda_ineq;  ///< one per inequality, >= 0 at a solution
  Vector box_lower;    ///< folded multipliers of x_k >= 0

  double mu() const { return lambda_eq.size() > 0 ? lambda_eq[0] : 0.0; }
};

inline Multipliers zero_multipliers(const ConstraintSet& cs) {
  return {Vector::Zero(static_cast<Eigen::Index>(cs.equalities.size())),
          Vector::Zero(static_cast<Eigen::Index>(cs.inequalities.size())),
          Vector::Zero(cs.dimension)};
}

struct KktResiduals {
  double stationarity = 0.0;
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double dual = 0.0;
  double slackness = 0.0;

  double max() const {
    return std::max({stationarity, primal_eq, primal_ineq, dual, slackness});
  }
};

enum class SecondOrder { VerifiedMax, SaddleOrMin, Inconclusive, BoundaryVertex };

inline const char* to_string(SecondOrder s) {
  switch (s) {
    case SecondOrder::VerifiedMax: return "verified_max";
    case SecondOrder::SaddleOrMin: return "saddle_or_min";
    case SecondOrder::Inconclusive: return "inconclusive";
    case SecondOrder::BoundaryVertex: return "boundary_vertex";
  }
  return "inconclusive";
}

struct SecondOrderReport {
  SecondOrder verdict = SecondOrder::Inconclusive;
  Eigen::Index tangent_dimension = 0;
  Vector projected_eigenvalues;
  double hessian_determinant = 0.0;  ///< det of the full Hessian of L, for reference
};

struct KktSolution {
  Vector x;
  Multipliers multipliers;
  KktResiduals residuals;
  double objective = 0.0;
  std::vector<std::string> active_set;
  SecondOrder second_order = SecondOrder::Inconclusive;
  double hessian_determinant = 0.0;
  int start_index = 0;
};

struct SolveReport {
  std::vector<KktSolution> candidates;
  KktSolution global;
  bool boundary_scan_used = false;
};

struct InfeasibilityReport {
  Vector most_feasible;
  double max_violation = 0.0;
  std::vector<std::pair<std::string, double>> violations;
};

/// No feasible point exists (as far as every start and the boundary scan can tell).
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(InfeasibilityReport report)
      : Error("no feasible allocation: max violation " + detail::fmt_num(report.max_violation)),
        report_(std::move(report)) {}

  const InfeasibilityReport& report() const noexcept { return report_; }

 private:
  InfeasibilityReport report_;
};

/// Feasible points exist but no candidate passed KKT verification.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

// --- Lagrangian and residuals ---------------------------------------------

namespace detail {

inline Vector constraint_grad(const ConstraintFn& c, const Vector& x) {
  if (c.gradient) return c.gradient(x);
  return fd_gradient(ScalarField{c.value}, x);
}

inline void check_multipliers(const Multipliers& m, const ConstraintSet& cs) {
  require_size(m.lambda_eq.size(), static_cast<Eigen::Index>(cs.equalities.size()), "lambda_eq");
  require_size(m.lambda_ineq.size(), static_cast<Eigen::Index>(cs.inequalities.size()),
               "lambda_ineq");
}

/// grad P - sum lambda_i grad c_i - sum lambda~_j grad c~_j, before box folding.
inline Vector lagrangian_gradient(const Vector& x, const Objective& obj, const Multipliers& m,
                                  const ConstraintSet& cs) {
  Vector r = obj.grad(x);
  for (std::size_t i = 0; i < cs.equalities.size(); ++i) {
    r -= m.lambda_eq[static_cast<Eigen::Index>(i)] * constraint_grad(cs.equalities[i], x);
  }
  for (std::size_t j = 0; j < cs.inequalities.size(); ++j) {
    const double lam = m.lambda_ineq[static_cast<Eigen::Index>(j)];
    if (lam != 0.0) r -= lam * constraint_grad(cs.inequalities[j], x);
  }
  return r;
}

}  // namespace detail

inline double eval_lagrangian(const Vector& x, const Objective& obj, const Multipliers& m,
                              const ConstraintSet& cs) {
  detail::check_multipliers(m, cs);
  double value = obj.value(x);
  for (std::size_t i = 0; i < cs.equalities.size(); ++i) {
    value -= m.lambda_eq[static_cast<Eigen::Index>(i)] * cs.equalities[i].value(x);
  }
  for (std::size_t j = 0; j < cs.inequalities.size(); ++j) {
    value -= m.lambda_ineq[static_cast<Eigen::Index>(j)] * cs.inequalities[j].value(x);
  }
  return value;
}

inline double eval_lagrangian(const Vector& x, const ExternalParameters& params,
                              const Multipliers& m, const ConstraintSet& cs,
                              const ProfitMetricSpec& metric) {
  return eval_lagrangian(x, make_objective(params, metric), m, cs);
}

/// Stationarity residual with the lower box bounds folded in: at x_k <= eps
/// the multiplier -r_k absorbs any non-positive r_k. Returns the folded
/// residual and the implied box multipliers.
inline std::pair<Vector, Vector> fold_box(const Vector& r, const Vector& x, double eps_active) {
  Vector folded = r;
  Vector box = Vector::Zero(r.size());
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    if (x[k] <= eps_active) {
      box[k] = std::max(0.0, -r[k]);
      folded[k] = std::max(0.0, r[k]);
    }
  }
  return {folded, box};
}

inline KktResiduals kkt_residuals(const Vector& x, const Multipliers& m, const Objective& obj,
                                  const ConstraintSet& cs, double eps_active = 1e-7) {
  detail::check_multipliers(m, cs);
  KktResiduals res;
  const Vector r = detail::lagrangian_gradient(x, obj, m, cs);
  res.stationarity = fold_box(r, x, eps_active).first.lpNorm<Eigen::Infinity>();

  for (const auto& c : cs.equalities) res.primal_eq = std::max(res.primal_eq, std::abs(c.value(x)));
  res.primal_ineq = std::max(0.0, -x.minCoeff());
  for (std::size_t j = 0; j < cs.inequalities.size(); ++j) {
    const double v = cs.inequalities[j].value(x);
    const double lam = m.lambda_ineq[static_cast<Eigen::Index>(j)];
    res.primal_ineq = std::max(res.primal_ineq, v);
    res.dual = std::max(res.dual, -lam);
    res.slackness = std::max(res.slackness, std::abs(lam * v));
  }
  return res;
}

inline KktResiduals kkt_residuals(const Vector& x, const Multipliers& m,
                                  const ExternalParameters& params, const ConstraintSet& cs,
                                  const ProfitMetricSpec& metric, double eps_active = 1e-7) {
  return kkt_residuals(x, m, make_objective(params, metric), cs, eps_active);
}

/// Residual acceptance used for every reported candidate.
inline bool residuals_accepted(const KktResiduals& r, const SolverConfig& config) {
  const double primal_tol = std::min(config.eps_kkt, kFeasibilityTol);
  return r.stationarity <= config.eps_kkt && r.primal_eq <= primal_tol &&
         r.primal_ineq <= primal_tol && r.dual <= 1e-10 && r.slackness <= primal_tol;
}

// --- second-order check ----------------------------------------------------

/// Negative definiteness of the Hessian of L on the tangent space of the
/// active constraints (equalities, active inequalities, active lower bounds).
inline SecondOrderReport check_second_order(const Vector& x, const Multipliers& m,
                                            const Objective& obj, const ConstraintSet& cs,
                                            const SolverConfig& config = {}) {
  detail::check_multipliers(m, cs);
  const Eigen::Index n = x.size();
  std::vector<Vector> rows;
  for (const auto& c : cs.equalities) rows.push_back(detail::constraint_grad(c, x));
  for (const auto& c : cs.inequalities) {
    if (std::abs(c.value(x)) <= config.eps_active) rows.push_back(detail::constraint_grad(c, x));
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (x[k] <= config.eps_active) rows.push_back(Vector::Unit(n, k));
  }

  const ScalarField lagrangian{[&](const Vector& p) { return eval_lagrangian(p, obj, m, cs); }};
  const Matrix hess = fd_hessian(lagrangian, x);

  SecondOrderReport out;
  out.hessian_determinant = hess.determinant();

  Matrix basis;
  if (rows.empty()) {
    basis = Matrix::Identity(n, n);
  } else {
    Matrix jac(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t i = 0; i < rows.size(); ++i) jac.row(static_cast<Eigen::Index>(i)) = rows[i];
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double cutoff = 1e-10 * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv[i] > cutoff) ++rank;
    }
    basis = svd.matrixV().rightCols(n - rank);
  }
  out.tangent_dimension = basis.cols();
  if (basis.cols() == 0) {
    out.verdict = SecondOrder::BoundaryVertex;
    return out;
  }

  const Matrix projected = basis.transpose() * hess * basis;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (projected + projected.transpose()),
                                            Eigen::EigenvaluesOnly);
  out.projected_eigenvalues = eig.eigenvalues();
  if (out.projected_eigenvalues.maxCoeff() < -config.eps_eig) {
    out.verdict = SecondOrder::VerifiedMax;
  } else if (out.projected_eigenvalues.maxCoeff() > config.eps_eig) {
    out.verdict = SecondOrder::SaddleOrMin;
  } else {
    out.verdict = SecondOrder::Inconclusive;
  }
  return out;
}

// --- solver internals ------------------------------------------------------

namespace detail {

struct Problem {
  Objective objective;
  ConstraintSet constraints;

  Eigen::Index n() const { return constraints.dimension; }
  Eigen::Index q() const { return static_cast<Eigen::Index>(constraints.equalities.size()); }
  Eigen::Index m() const { return static_cast<Eigen::Index>(constraints.inequalities.size()); }
};

/// Augmented Lagrangian merit for minimizing -P. Equalities other than the
/// simplex (index 0) get PHR terms; the simplex is enforced by projection.
class AugmentedMerit {
 public:
  AugmentedMerit(const Problem& p, const Vector& lam_eq, const Vector& lam_ineq, double rho)
      : p_(p), lam_eq_(lam_eq), lam_ineq_(lam_ineq), rho_(rho) {}

  double value(const Vector& x) const {
    double v = -p_.objective.value(x);
    for (Eigen::Index i = 1; i < p_.q(); ++i) {
      const double c = p_.constraints.equalities[static_cast<std::size_t>(i)].value(x);
      v += lam_eq_[i] * c + 0.5 * rho_ * c * c;
    }
    for (Eigen::Index j = 0; j < p_.m(); ++j) {
      const double g = p_.constraints.inequalities[static_cast<std::size_t>(j)].value(x);
      const double shifted = std::max(0.0, lam_ineq_[j] + rho_ * g);
      v += (shifted * shifted - lam_ineq_[j] * lam_ineq_[j]) / (2.0 * rho_);
    }
    return v;
  }

  Vector gradient(const Vector& x) const {
    Vector g = -p_.objective.grad(x);
    for (Eigen::Index i = 1; i < p_.q(); ++i) {
      const auto& c = p_.constraints.equalities[static_cast<std::size_t>(i)];
      g += (lam_eq_[i] + rho_ * c.value(x)) * constraint_grad(c, x);
    }
    for (Eigen::Index j = 0; j < p_.m(); ++j) {
      const auto& c = p_.constraints.inequalities[static_cast<std::size_t>(j)];
      const double shifted = std::max(0.0, lam_ineq_[j] + rho_ * c.value(x));
      if (shifted > 0.0) g += shifted * constraint_grad(c, x);
    }
    return g;
  }

 private:
  const Problem& p_;
  const Vector& lam_eq_;
  const Vector& lam_ineq_;
  double rho_;
};

inline double safe_value(const AugmentedMerit& merit, const Vector& x) {
  try {
    const double v = merit.value(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Spectral projected gradient on the simplex. Returns true on convergence
/// of the projected-gradient norm below `tol`.
inline bool spg_minimize(const AugmentedMerit& merit, Vector& x, int iter_cap, double tol) {
  double f = safe_value(merit, x);
  if (!std::isfinite(f)) return false;
  Vector g = merit.gradient(x);
  double alpha = 1.0;
  for (int it = 0; it < iter_cap; ++it) {
    const Vector unit_step = project_to_simplex(x - g).weights() - x;
    if (unit_step.lpNorm<Eigen::Infinity>() < tol) return true;

    const Vector d = project_to_simplex(x - alpha * g).weights() - x;
    const double slope = g.dot(d);
    if (!(slope < 0.0)) return unit_step.lpNorm<Eigen::Infinity>() < 100.0 * tol;

    double t = 1.0;
    Vector trial = x + d;
    double f_trial = safe_value(merit, trial);
    int backtracks = 0;
    while (!(f_trial <= f + 1e-4 * t * slope) && backtracks < 60) {
      t *= 0.5;
      trial = x + t * d;
      f_trial = safe_value(merit, trial);
      ++backtracks;
    }
    if (!std::isfinite(f_trial) || f_trial > f) return false;

    const Vector g_trial = merit.gradient(trial);
    const Vector s = trial - x;
    const Vector y = g_trial - g;
    const double sy = s.dot(y);
    alpha = sy > 1e-300 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e8) : 1e8;
    if (s.lpNorm<Eigen::Infinity>() == 0.0) return unit_step.lpNorm<Eigen::Infinity>() < 100.0 * tol;
    x = trial;
    f = f_trial;
    g = g_trial;
  }
  return false;
}

struct AlOutcome {
  Vector x;
  Vector lambda_ineq;
  bool evaluable = false;
};

inline AlOutcome augmented_lagrangian(const Problem& p, Vector x, const SolverConfig& config) {
  Vector lam_eq = Vector::Zero(p.q());
  Vector lam_ineq = Vector::Zero(p.m());
  double rho = config.penalty_init;
  double previous = std::numeric_limits<double>::infinity();
  AlOutcome out;

  for (int outer = 0; outer < config.outer_iter_cap; ++outer) {
    const AugmentedMerit merit(p, lam_eq, lam_ineq, rho);
    const bool converged = spg_minimize(merit, x, config.inner_iter_cap, 1e-10);
    if (!std::isfinite(safe_value(merit, x))) return out;

    double violation = 0.0;
    for (Eigen::Index i = 1; i < p.q(); ++i) {
      const double c = p.constraints.equalities[static_cast<std::size_t>(i)].value(x);
      violation = std::max(violation, std::abs(c));
      lam_eq[i] += rho * c;
    }
    for (Eigen::Index j = 0; j < p.m(); ++j) {
      const double g = p.constraints.inequalities[static_cast<std::size_t>(j)].value(x);
      violation = std::max(violation, std::abs(std::min(-g, lam_ineq[j] / rho)));
      lam_ineq[j] = std::max(0.0, lam_ineq[j] + rho * g);
    }
    if (violation <= 1e-10 && converged) break;
    if (violation > 0.25 * previous) rho = std::min(rho * config.penalty_growth, config.penalty_max);
    previous = violation;
  }
  out.x = std::move(x);
  out.lambda_ineq = std::move(lam_ineq);
  out.evaluable = true;
  return out;
}

/// Square KKT system for a fixed free set F and active set A:
///   unknowns  z = [x_F, lambda_eq, lambda_A]
///   equations [ (grad L)_F, c_i(x), c~_A(x) ] = 0
class ActiveSetSystem {
 public:
  ActiveSetSystem(const Problem& p, std::vector<Eigen::Index> free, std::vector<Eigen::Index> active)
      : p_(p), free_(std::move(free)), active_(std::move(active)) {}

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(free_.size() + active_.size()) + p_.q();
  }

  Vector embed(const Vector& z) const {
    Vector x = Vector::Zero(p_.n());
    for (std::size_t f = 0; f < free_.size(); ++f) x[free_[f]] = z[static_cast<Eigen::Index>(f)];
    return x;
  }

  Multipliers multipliers(const Vector& z) const {
    Multipliers m = zero_multipliers(p_.constraints);
    const auto nf = static_cast<Eigen::Index>(free_.size());
    m.lambda_eq = z.segment(nf, p_.q());
    for (std::size_t a = 0; a < active_.size(); ++a) {
      m.lambda_ineq[active_[a]] = z[nf + p_.q() + static_cast<Eigen::Index>(a)];
    }
    return m;
  }

  Vector residual(const Vector& z) const {
    const Vector x = embed(z);
    const Vector r = lagrangian_gradient(x, p_.objective, multipliers(z), p_.constraints);
    Vector out(size());
    Eigen::Index at = 0;
    for (auto k : free_) out[at++] = r[k];
    for (const auto& c : p_.constraints.equalities) out[at++] = c.value(x);
    for (auto j : active_) out[at++] = p_.constraints.inequalities[static_cast<std::size_t>(j)].value(x);
    return out;
  }

  Matrix jacobian(const Vector& z) const {
    const Eigen::Index s = size();
    Matrix jac(s, s);
    Vector probe = z;
    for (Eigen::Index k = 0; k < s; ++k) {
      const double h = 1e-7 * std::max(1.0, std::abs(z[k]));
      probe[k] = z[k] + h;
      const Vector up = residual(probe);
      probe[k] = z[k] - h;
      const Vector down = residual(probe);
      probe[k] = z[k];
      jac.col(k) = (up - down) / (2.0 * h);
    }
    return jac;
  }

  /// Least-squares multiplier estimate for a fixed x.
  Vector initial_guess(const Vector& x) const {
    const auto nf = static_cast<Eigen::Index>(free_.size());
    const Eigen::Index nm = p_.q() + static_cast<Eigen::Index>(active_.size());
    Vector z = Vector::Zero(size());
    for (std::size_t f = 0; f < free_.size(); ++f) z[static_cast<Eigen::Index>(f)] = x[free_[f]];
    if (nm == 0 || nf == 0) return z;

    const Vector g = p_.objective.grad(x);
    Matrix a(nf, nm);
    Vector b(nf);
    for (Eigen::Index f = 0; f < nf; ++f) b[f] = g[free_[static_cast<std::size_t>(f)]];
    Eigen::Index col = 0;
    auto add_column = [&](const ConstraintFn& c) {
      const Vector cg = constraint_grad(c, x);
      for (Eigen::Index f = 0; f < nf; ++f) a(f, col) = cg[free_[static_cast<std::size_t>(f)]];
      ++col;
    };
    for (const auto& c : p_.constraints.equalities) add_column(c);
    for (auto j : active_) add_column(p_.constraints.inequalities[static_cast<std::size_t>(j)]);
    z.segment(nf, nm) = a.completeOrthogonalDecomposition().solve(b);
    return z;
  }

 private:
  const Problem& p_;
  std::vector<Eigen::Index> free_;
  std::vector<Eigen::Index> active_;
};

/// Damped Newton with a finite-difference Jacobian and minimum-norm steps.
inline std::optional<Vector> newton_solve(const ActiveSetSystem& sys, Vector z) {
  try {
    Vector r = sys.residual(z);
    double norm = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 60 && norm > 1e-14; ++it) {
      const Vector step = sys.jacobian(z).completeOrthogonalDecomposition().solve(-r);
      double t = 1.0;
      bool improved = false;
      for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
        const Vector trial = z + t * step;
        Vector r_trial;
        try {
          r_trial = sys.residual(trial);
        } catch (const Error&) {
          continue;
        }
        const double n_trial = r_trial.lpNorm<Eigen::Infinity>();
        if (std::isfinite(n_trial) && n_trial < norm) {
          z = trial;
          r = std::move(r_trial);
          norm = n_trial;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
    if (!(norm <= 1e-10)) return std::nullopt;
    return z;
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct Polished {
  Vector x;
  Multipliers multipliers;
};

/// Active-set correction around the Newton solve. `zero` marks coordinates
/// pinned at the lower bound, `active` the inequalities held at equality.
inline std::optional<Polished> polish(const Problem& p, const Vector& x0, std::vector<bool> zero,
                                      std::vector<bool> active, const SolverConfig& config) {
  const Eigen::Index n = p.n();
  const Eigen::Index m = p.m();
  std::set<std::pair<std::vector<bool>, std::vector<bool>>> visited;
  Vector guess = x0;

  for (int round = 0; round < 4 * static_cast<int>(n + m) + 4; ++round) {
    if (!visited.emplace(zero, active).second) return std::nullopt;

    std::vector<Eigen::Index> free_idx;
    std::vector<Eigen::Index> active_idx;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!zero[static_cast<std::size_t>(k)]) free_idx.push_back(k);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (active[static_cast<std::size_t>(j)]) active_idx.push_back(j);
    }
    if (free_idx.empty()) return std::nullopt;

    Vector start = guess;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (zero[static_cast<std::size_t>(k)]) start[k] = 0.0;
    }
    const ActiveSetSystem sys(p, free_idx, active_idx);
    std::optional<Vector> z;
    try {
      z = newton_solve(sys, sys.initial_guess(start));
    } catch (const Error&) {
      z.reset();
    }
    if (!z) return std::nullopt;

    Vector x = sys.embed(*z);
    Multipliers mult = sys.multipliers(*z);
    guess = x;

    // Primal: a free coordinate went negative.
    Eigen::Index worst = -1;
    double worst_val = -1e-12;
    for (auto k : free_idx) {
      if (x[k] < worst_val) {
        worst_val = x[k];
        worst = k;
      }
    }
    if (worst >= 0) {
      zero[static_cast<std::size_t>(worst)] = true;
      continue;
    }

    // Primal: an inactive inequality is violated.
    worst = -1;
    worst_val = 1e-10;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (active[static_cast<std::size_t>(j)]) continue;
      const double v = p.constraints.inequalities[static_cast<std::size_t>(j)].value(x);
      if (v > worst_val) {
        worst_val = v;
        worst = j;
      }
    }
    if (worst >= 0) {
      active[static_cast<std::size_t>(worst)] = true;
      continue;
    }

    // Dual: an active inequality carries a negative multiplier.
    worst = -1;
    worst_val = -1e-10;
    for (auto j : active_idx) {
      if (mult.lambda_ineq[j] < worst_val) {
        worst_val = mult.lambda_ineq[j];
        worst = j;
      }
    }
    if (worst >= 0) {
      active[static_cast<std::size_t>(worst)] = false;
      continue;
    }

    // Dual: a pinned coordinate would improve the Lagrangian if released.
    const Vector r = lagrangian_gradient(x, p.objective, mult, p.constraints);
    worst = -1;
    worst_val = 0.1 * config.eps_kkt;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (zero[static_cast<std::size_t>(k)] && r[k] > worst_val) {
        worst_val = r[k];
        worst = k;
      }
    }
    if (worst >= 0) {
      zero[static_cast<std::size_t>(worst)] = false;
      continue;
    }

    x = x.cwiseMax(0.0);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (mult.lambda_ineq[j] < 0.0) mult.lambda_ineq[j] = 0.0;
    }
    mult.box_lower = fold_box(r, x, config.eps_active).second;
    return Polished{std::move(x), std::move(mult)};
  }
  return std::nullopt;
}

/// Uniform sample from the simplex (normalized exponentials), bit-stable
/// across standard libraries.
inline Vector dirichlet_start(std::mt19937_64& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v[k] = -std::log1p(-u);
  }
  const double s = v.sum();
  return s > 0.0 ? Vector(v / s) : Vector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

inline bool lexicographically_less(const Vector& a, const Vector& b) {
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (a[k] != b[k]) return a[k] < b[k];
  }
  return false;
}

}  // namespace detail

/// Builds a fully verified KktSolution, or nothing if the residual test fails.
inline std::optional<KktSolution> make_candidate(const detail::Problem& p, Vector x, Multipliers mult,
                                                 int start_index, const SolverConfig& config) {
  KktSolution sol;
  try {
    sol.residuals = kkt_residuals(x, mult, p.objective, p.constraints, config.eps_active);
    if (!residuals_accepted(sol.residuals, config)) return std::nullopt;
    sol.objective = p.objective.value(x);
    const SecondOrderReport so = check_second_order(x, mult, p.objective, p.constraints, config);
    sol.second_order = so.verdict;
    sol.hessian_determinant = so.hessian_determinant;
  } catch (const Error&) {
    return std::nullopt;
  }
  for (const auto& c : p.constraints.inequalities) {
    if (std::abs(c.value(x)) <= config.eps_active) sol.active_set.push_back(c.id);
  }
  sol.x = std::move(x);
  sol.multipliers = std::move(mult);
  sol.start_index = start_index;
  return sol;
}

/// Solves a generic problem. Start indices: seeded starts 0..n_start-1,
/// caller-supplied starts next, boundary-scan seeds after those.
inline SolveReport solve(const Objective& objective, const ConstraintSet& constraints,
                         const SolverConfig& config = {},
                         const std::vector<Vector>& extra_starts = {}) {
  const detail::Problem p{objective, constraints};
  const Eigen::Index n = p.n();
  const Eigen::Index m = p.m();
  if (n <= 0) throw DimensionError("problem has no variables");
  if (constraints.equalities.empty() || constraints.equalities.front().id != constraint_id::kSimplex) {
    throw ConfigurationError("constraint set must start with the simplex equality");
  }

  std::vector<Vector> starts;
  starts.push_back(Vector::Constant(n, 1.0 / static_cast<double>(n)));
  std::mt19937_64 rng(config.seed);
  for (int s = 1; s < config.n_start; ++s) starts.push_back(detail::dirichlet_start(rng, n));
  for (const auto& e : extra_starts) {
    detail::require_size(e.size(), n, "warm start");
    starts.push_back(project_to_simplex(e).weights());
  }
  const int al_count = static_cast<int>(starts.size());

  std::vector<KktSolution> pool;
  Vector most_feasible;
  double least_violation = std::numeric_limits<double>::infinity();
  auto track_feasibility = [&](const Vector& x) {
    try {
      const double v = constraints.max_violation(x);
      if (v < least_violation) {
        least_violation = v;
        most_feasible = x;
      }
    } catch (const Error&) {
    }
  };
  auto admit = [&](const Vector& seed, std::vector<bool> zero, std::vector<bool> active, int index) {
    auto polished = detail::polish(p, seed, std::move(zero), std::move(active), config);
    if (!polished) return;
    track_feasibility(polished->x);
    auto cand = make_candidate(p, std::move(polished->x), std::move(polished->multipliers), index, config);
    if (cand) pool.push_back(std::move(*cand));
  };

  for (int s = 0; s < al_count; ++s) {
    const auto al = detail::augmented_lagrangian(p, starts[static_cast<std::size_t>(s)], config);
    if (!al.evaluable) continue;
    track_feasibility(al.x);
    std::vector<bool> zero(static_cast<std::size_t>(n));
    std::vector<bool> active(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < n; ++k) zero[static_cast<std::size_t>(k)] = al.x[k] <= 1e-12;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double v = constraints.inequalities[static_cast<std::size_t>(j)].value(al.x);
      active[static_cast<std::size_t>(j)] = v > -1e-6 || al.lambda_ineq[j] > 1e-10;
    }
    admit(al.x, std::move(zero), std::move(active), s);
  }

  // Boundary scan: every face of the simplex for small n, vertices otherwise.
  std::vector<std::uint64_t> supports;
  if (n <= config.facet_scan_max && n < 63) {
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) supports.push_back(mask);
  } else {
    for (Eigen::Index k = 0; k < n; ++k) supports.push_back(std::uint64_t{1} << k);
  }
  for (std::size_t f = 0; f < supports.size(); ++f) {
    const std::uint64_t mask = supports[f];
    std::vector<bool> zero(static_cast<std::size_t>(n));
    Vector seed = Vector::Zero(n);
    int count = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const bool in = (mask >> k) & 1U;
      zero[static_cast<std::size_t>(k)] = !in;
      if (in) ++count;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!zero[static_cast<std::size_t>(k)]) seed[k] = 1.0 / count;
    }
    track_feasibility(seed);
    std::vector<bool> active(static_cast<std::size_t>(m));
    try {
      for (Eigen::Index j = 0; j < m; ++j) {
        active[static_cast<std::size_t>(j)] =
            constraints.inequalities[static_cast<std::size_t>(j)].value(seed) > -1e-6;
      }
    } catch (const Error&) {
      continue;
    }
    admit(seed, std::move(zero), std::move(active), al_count + static_cast<int>(f));
  }

  if (pool.empty()) {
    if (least_violation <= kFeasibilityTol) {
      throw NumericFailure("feasible points exist but no candidate passed KKT verification");
    }
    InfeasibilityReport rep;
    rep.most_feasible = most_feasible.size() == n ? most_feasible : starts.front();
    rep.max_violation = least_violation;
    rep.violations = constraints.violations(rep.most_feasible);
    throw InfeasibleError(std::move(rep));
  }

  SolveReport report;
  for (auto& cand : pool) {
    const bool duplicate = std::any_of(report.candidates.begin(), report.candidates.end(),
                                       [&](const KktSolution& c) {
                                         return (c.x - cand.x).lpNorm<Eigen::Infinity>() <= 1e-9;
                                       });
    if (!duplicate) report.candidates.push_back(std::move(cand));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < report.candidates.size(); ++i) {
    const auto& c = report.candidates[i];
    const auto& b = report.candidates[best];
    if (c.objective > b.objective + 1e-10 ||
        (std::abs(c.objective - b.objective) <= 1e-10 && detail::lexicographically_less(c.x, b.x))) {
      best = i;
    }
  }
  report.global = report.candidates[best];
  report.boundary_scan_used = report.global.start_index >= al_count;
  return report;
}

/// Validates, assembles and solves an instance. Objectives are recomputed
/// with eval_metric so they match the metric bit for bit.
inline SolveReport solve(const ProblemInstance& instance, const SolverConfig& config = {},
                         const std::vector<Vector>& extra_starts = {}) {
  const auto violations = validate_instance(instance);
  if (!violations.empty()) {
    std::string msg = "invalid instance:";
    for (const auto& v : violations) msg += " [" + v.code + "] " + v.message + ";";
    throw ConfigurationError(msg);
  }
  return solve(make_objective(instance.params, instance.metric), assemble(instance), config,
               extra_starts);
}

/// Multiplier per constraint id, in objective units per unit of threshold
/// relaxation. Equalities first (simplex is mu), then inequalities, which
/// are zero whenever the constraint is slack.
inline std::vector<std::pair<std::string, double>> shadow_prices(const SolveReport& report,
                                                                 const ConstraintSet& cs) {
  std::vector<std::pair<std::string, double>> out;
  const auto& m = report.global.multipliers;
  for (std::size_t i = 0; i < cs.equalities.size(); ++i) {
    out.emplace_back(cs.equalities[i].id, m.lambda_eq[static_cast<Eigen::Index>(i)]);
  }
  for (std::size_t j = 0; j < cs.inequalities.size(); ++j) {
    out.emplace_back(cs.inequalities[j].id, m.lambda_ineq[static_cast<Eigen::Index>(j)]);
  }
  return out;
}

}  // namespace opcost
