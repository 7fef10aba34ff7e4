/**
 * @file profit.hpp
 * @brief Profit P = NBV + InvR - dLiab and the metrics built on it.
 *
 * Investment return is evaluated at first order, InvR = sum_k E[R_k] x_k;
 * the noise terms of the return model are carried but never sampled.
 * Two metric shapes exist: the linear expected profit and the
 * return-on-capital ratio P / SCR.
 */

#pragma once

#include "opcost/domain_model.hpp"
#include "opcost/solvency.hpp"

namespace opcost {

inline double eval_invr(const Vector& x, const ReturnModel& rm) {
  detail::require_size(rm.expected.size(), x.size(), "returns.expected");
  return rm.expected.dot(x);
}

inline double eval_profit(const Vector& x, const ExternalParameters& params) {
  return params.nbv + eval_invr(x, params.returns) - params.liability_drift;
}

namespace detail {

inline double checked_scr_for_metric(const Vector& x, const SolvencyModel& sm) {
  const double scr = eval_scr(x, sm);
  if (!(scr > 0.0)) {
    throw SingularMetricError("return on capital undefined: SCR(x) = 0");
  }
  return scr;
}

}  // namespace detail

inline double eval_metric(const Vector& x, const ExternalParameters& params,
                          const ProfitMetricSpec& metric) {
  const double p = eval_profit(x, params);
  if (metric.kind == MetricKind::ExpectedProfit) return p;
  return p / detail::checked_scr_for_metric(x, params.solvency);
}

inline double eval_metric(const AllocationVector& x, const ExternalParameters& params,
                          const ProfitMetricSpec& metric) {
  return eval_metric(x.weights(), params, metric);
}

inline Vector profit_gradient(const Vector& x, const ExternalParameters& params,
                              const ProfitMetricSpec& metric) {
  detail::require_size(params.returns.expected.size(), x.size(), "returns.expected");
  if (metric.kind == MetricKind::ExpectedProfit) return params.returns.expected;

  const double scr = detail::checked_scr_for_metric(x, params.solvency);
  const double p = eval_profit(x, params);
  return (params.returns.expected * scr - p * scr_gradient(x, params.solvency)) / (scr * scr);
}

}  // namespace opcost
