/**
 * @file calculus.hpp
 * @brief Finite differences, local Taylor expansion and the time chain rule.
 *
 * Gradients use central differences, Hessians the symmetric second
 * difference stencil. Evaluation order is fixed so results are bit-stable.
 *
 * The external parameters change with time only through snapshots on a
 * scenario path; between snapshots they are interpolated linearly. The
 * profit has no explicit time dependence, so
 *
 *   dP/dt = sum_k dP/dtau_k * dtau_k/dt.
 */

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "opcost/domain_model.hpp"
#include "opcost/profit.hpp"

namespace opcost {

inline constexpr double kGradientStep = 1e-5;
inline constexpr double kHessianStep = 1e-4;

struct ScalarField {
  std::function<double(const Vector&)> value;

  double operator()(const Vector& x) const { return value(x); }
};

/// Evaluator failure inside a finite-difference stencil.
class FdEvaluationError : public Error {
 public:
  FdEvaluationError(Eigen::Index coordinate, const std::string& what)
      : Error("evaluation failed at coordinate " + std::to_string(coordinate) + ": " + what),
        coordinate_(coordinate) {}

  Eigen::Index coordinate() const noexcept { return coordinate_; }

 private:
  Eigen::Index coordinate_;
};

namespace detail {

inline double eval_at(const ScalarField& f, const Vector& x, Eigen::Index coordinate) {
  try {
    return f(x);
  } catch (const FdEvaluationError&) {
    throw;
  } catch (const std::exception& e) {
    throw FdEvaluationError(coordinate, e.what());
  }
}

inline void require_step(double h) {
  if (!(h > 0.0)) throw ConfigurationError("finite-difference step must be positive");
}

}  // namespace detail

inline Vector fd_gradient(const ScalarField& f, const Vector& x, double h = kGradientStep) {
  detail::require_step(h);
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const double up = detail::eval_at(f, probe, k);
    probe[k] = x[k] - h;
    const double down = detail::eval_at(f, probe, k);
    probe[k] = x[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

inline Matrix fd_hessian(const ScalarField& f, const Vector& x, double h = kHessianStep) {
  detail::require_step(h);
  const Eigen::Index n = x.size();
  Matrix hess(n, n);
  const double center = detail::eval_at(f, x, -1);
  Vector probe = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    probe[i] = x[i] + h;
    const double up = detail::eval_at(f, probe, i);
    probe[i] = x[i] - h;
    const double down = detail::eval_at(f, probe, i);
    probe[i] = x[i];
    hess(i, i) = (up - 2.0 * center + down) / (h * h);

    for (Eigen::Index j = i + 1; j < n; ++j) {
      auto at = [&](double di, double dj) {
        probe[i] = x[i] + di;
        probe[j] = x[j] + dj;
        const double v = detail::eval_at(f, probe, j);
        probe[i] = x[i];
        probe[j] = x[j];
        return v;
      };
      const double pp = at(h, h);
      const double pm = at(h, -h);
      const double mp = at(-h, h);
      const double mm = at(-h, -h);
      hess(i, j) = (pp - pm - mp + mm) / (4.0 * h * h);
      hess(j, i) = hess(i, j);
    }
  }
  return 0.5 * (hess + hess.transpose());
}

/// f(x0) + g.(x - x0) [+ 1/2 (x - x0)^T H (x - x0)] with finite-difference
/// derivatives at x0. No radius check: the caller decides what "near" means.
inline double taylor_eval(const ScalarField& f, const Vector& x0, const Vector& x, int order,
                          double grad_step = kGradientStep, double hess_step = kHessianStep) {
  if (order != 1 && order != 2) throw ConfigurationError("Taylor order must be 1 or 2");
  detail::require_size(x.size(), x0.size(), "taylor point");
  const Vector d = x - x0;
  double value = detail::eval_at(f, x0, -1) + fd_gradient(f, x0, grad_step).dot(d);
  if (order == 2) value += 0.5 * d.dot(fd_hessian(f, x0, hess_step) * d);
  return value;
}

// --- parameter vector ------------------------------------------------------

/// Flattening order of the external parameters:
///   returns.expected[n], returns.vol[n], liability_drift, nbv, haircuts[n],
///   afr_base, afr_sensitivity[n], stress_charges[n], correlation[n*n]
///   (row-major), cash_floor, liquidity_floor, solvency_target.
inline Eigen::Index parameter_count(Eigen::Index n) { return 5 * n + n * n + 6; }

inline Vector flatten_parameters(const ExternalParameters& p) {
  const Eigen::Index n = p.returns.expected.size();
  detail::require_size(p.returns.vol.size(), n, "returns.vol");
  detail::require_size(p.haircuts.size(), n, "haircuts");
  detail::require_size(p.solvency.afr_sensitivity.size(), n, "afr_sensitivity");
  detail::require_size(p.solvency.stress_charges.size(), n, "stress_charges");
  detail::require_size(p.solvency.correlation.rows(), n, "correlation");
  detail::require_size(p.solvency.correlation.cols(), n, "correlation");

  Vector tau(parameter_count(n));
  Eigen::Index at = 0;
  auto put = [&](const Vector& v) {
    tau.segment(at, v.size()) = v;
    at += v.size();
  };
  put(p.returns.expected);
  put(p.returns.vol);
  tau[at++] = p.liability_drift;
  tau[at++] = p.nbv;
  put(p.haircuts);
  tau[at++] = p.solvency.afr_base;
  put(p.solvency.afr_sensitivity);
  put(p.solvency.stress_charges);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) tau[at++] = p.solvency.correlation(i, j);
  }
  tau[at++] = p.cash_floor;
  tau[at++] = p.liquidity_floor;
  tau[at++] = p.solvency_target;
  return tau;
}

inline ExternalParameters unflatten_parameters(const Vector& tau, Eigen::Index n) {
  detail::require_size(tau.size(), parameter_count(n), "parameter vector");
  ExternalParameters p;
  Eigen::Index at = 0;
  auto take = [&]() {
    Vector v = tau.segment(at, n);
    at += n;
    return v;
  };
  p.returns.expected = take();
  p.returns.vol = take();
  p.liability_drift = tau[at++];
  p.nbv = tau[at++];
  p.haircuts = take();
  p.solvency.afr_base = tau[at++];
  p.solvency.afr_sensitivity = take();
  p.solvency.stress_charges = take();
  p.solvency.correlation.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) p.solvency.correlation(i, j) = tau[at++];
  }
  p.cash_floor = tau[at++];
  p.liquidity_floor = tau[at++];
  p.solvency_target = tau[at++];
  return p;
}

// --- scenario paths --------------------------------------------------------

struct ScenarioPath {
  std::vector<double> timestamps;
  std::vector<ExternalParameters> snapshots;

  std::size_t size() const { return snapshots.size(); }
};

/// Empty when the path is well-formed for derivative estimation.
inline std::vector<Violation> validate_path(const ScenarioPath& path) {
  std::vector<Violation> out;
  if (path.timestamps.size() != path.snapshots.size()) {
    out.push_back({"PATH_LENGTH", "timestamps and snapshots differ in length"});
  }
  if (path.snapshots.size() < 2) {
    out.push_back({"PATH_TOO_SHORT", "a scenario path needs at least two snapshots"});
  }
  for (std::size_t i = 1; i < path.timestamps.size(); ++i) {
    if (!(path.timestamps[i] > path.timestamps[i - 1])) {
      out.push_back({"PATH_ORDER", "timestamps must be strictly increasing (index " +
                                       std::to_string(i) + ")"});
    }
  }
  return out;
}

/// Piecewise-linear tau(t); constant extrapolation outside the path.
inline ExternalParameters interpolate_parameters(const ScenarioPath& path, double t) {
  if (path.snapshots.empty()) throw ConfigurationError("empty scenario path");
  const auto& ts = path.timestamps;
  if (t <= ts.front()) return path.snapshots.front();
  if (t >= ts.back()) return path.snapshots.back();
  std::size_t i = 1;
  while (ts[i] < t) ++i;
  const double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
  const Eigen::Index n = path.snapshots[i].returns.expected.size();
  const Vector tau = (1.0 - w) * flatten_parameters(path.snapshots[i - 1]) +
                     w * flatten_parameters(path.snapshots[i]);
  return unflatten_parameters(tau, n);
}

/// Partial derivatives of the metric with respect to each flattened parameter.
inline Vector metric_parameter_gradient(const ExternalParameters& params, const Vector& x,
                                        const ProfitMetricSpec& metric,
                                        double h = kGradientStep) {
  const Eigen::Index n = x.size();
  const ScalarField field{[&](const Vector& tau) {
    return eval_metric(x, unflatten_parameters(tau, n), metric);
  }};
  return fd_gradient(field, flatten_parameters(params), h);
}

/// Chain-rule estimate of dP/dt at snapshot `t_index`: central chord of the
/// parameter path at interior nodes, one-sided at the ends.
inline double dP_dt(const ScenarioPath& path, const Vector& x, std::size_t t_index,
                    const ProfitMetricSpec& metric) {
  if (path.snapshots.size() < 2 || path.timestamps.size() != path.snapshots.size()) {
    throw ConfigurationError("scenario path too short for a time derivative");
  }
  if (t_index >= path.snapshots.size()) throw ConfigurationError("t_index out of range");
  const std::size_t last = path.snapshots.size() - 1;
  const std::size_t lo = t_index == 0 ? 0 : t_index - 1;
  const std::size_t hi = t_index == last ? last : t_index + 1;
  const double dt = path.timestamps[hi] - path.timestamps[lo];
  if (!(dt > 0.0)) throw ConfigurationError("timestamps must be strictly increasing");

  const Vector dtau_dt =
      (flatten_parameters(path.snapshots[hi]) - flatten_parameters(path.snapshots[lo])) / dt;
  const Vector dp_dtau = metric_parameter_gradient(path.snapshots[t_index], x, metric);
  return dp_dtau.dot(dtau_dt);
}

}  // namespace opcost
