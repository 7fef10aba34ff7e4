/**
 * @file solvency.hpp
 * @brief Own funds (AFR), capital requirement (SCR) and the solvency ratio.
 *
 *   AFR(x) = a0 + a . x
 *   SCR(x) = sqrt( (s o x)^T C (s o x) )
 *
 * SCR is positively homogeneous of degree one and differentiable wherever
 * it is nonzero.
 */

#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "opcost/domain_model.hpp"

namespace opcost {

/// Radicand values in [-kScrRadicandClamp, 0) are rounding noise and read as 0.
inline constexpr double kScrRadicandClamp = 1e-12;
/// Below this SCR the gradient is taken at a nudged point.
inline constexpr double kScrSmoothingFloor = 1e-10;
inline constexpr double kScrSmoothingStep = 1e-8;

namespace detail {

inline void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": size " + std::to_string(got) + " != " +
                         std::to_string(want));
  }
}

inline double scr_radicand(const Vector& x, const SolvencyModel& sm) {
  require_size(sm.stress_charges.size(), x.size(), "stress_charges");
  require_size(sm.correlation.rows(), x.size(), "correlation");
  const Vector exposure = sm.stress_charges.cwiseProduct(x);
  return exposure.dot(sm.correlation * exposure);
}

}  // namespace detail

inline double eval_afr(const Vector& x, const SolvencyModel& sm) {
  detail::require_size(sm.afr_sensitivity.size(), x.size(), "afr_sensitivity");
  return sm.afr_base + sm.afr_sensitivity.dot(x);
}

/// Throws ModelError when the quadratic form is negative beyond rounding
/// (the correlation matrix is not PSD).
inline double eval_scr(const Vector& x, const SolvencyModel& sm) {
  const double q = detail::scr_radicand(x, sm);
  if (q < -kScrRadicandClamp) {
    throw ModelError("negative SCR radicand " + detail::fmt_num(q) +
                     "; correlation matrix is not positive semidefinite");
  }
  return q <= 0.0 ? 0.0 : std::sqrt(q);
}

/// grad SCR = diag(s) C (s o x) / SCR. Where SCR is (nearly) zero the
/// gradient is evaluated at x nudged along the support of the stress charges.
inline Vector scr_gradient(const Vector& x, const SolvencyModel& sm) {
  const double scr = eval_scr(x, sm);
  if (scr >= kScrSmoothingFloor) {
    const Vector exposure = sm.stress_charges.cwiseProduct(x);
    return sm.stress_charges.cwiseProduct(sm.correlation * exposure) / scr;
  }
  const Vector support = (sm.stress_charges.array() > 0.0).cast<double>().matrix();
  if (support.sum() == 0.0) return Vector::Zero(x.size());
  const Vector nudged = x + kScrSmoothingStep * support;
  const double scr_n = eval_scr(nudged, sm);
  if (scr_n <= 0.0) return Vector::Zero(x.size());
  const Vector exposure = sm.stress_charges.cwiseProduct(nudged);
  return sm.stress_charges.cwiseProduct(sm.correlation * exposure) / scr_n;
}

/// AFR / SCR, or +infinity for a riskless book.
inline double eval_sr(const Vector& x, const SolvencyModel& sm) {
  const double scr = eval_scr(x, sm);
  if (scr == 0.0) return std::numeric_limits<double>::infinity();
  return eval_afr(x, sm) / scr;
}

}  // namespace opcost
