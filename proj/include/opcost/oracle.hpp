/**
 * @file oracle.hpp
 * @brief Exhaustive simplex-grid search, the brute-force ground truth.
 *
 * Enumerates every composition of N = 1/delta into n parts in lexicographic
 * order, keeps the feasible point with the highest metric and counts the
 * feasible points. Feasibility uses the solver's tolerance.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "opcost/constraints.hpp"
#include "opcost/domain_model.hpp"
#include "opcost/profit.hpp"

namespace opcost {

inline constexpr double kMaxGridPoints = 5e7;

struct GridSpec {
  double resolution = 0.01;
  Eigen::Index dimension = 0;

  /// 1/delta, or throws if the grid does not close on the simplex.
  std::int64_t divisions() const {
    if (!(resolution > 0.0) || resolution > 1.0) {
      throw ConfigurationError("grid resolution must lie in (0, 1]");
    }
    const double inv = 1.0 / resolution;
    const double rounded = std::round(inv);
    if (std::abs(inv - rounded) > 1e-9 * rounded) {
      throw ConfigurationError("grid resolution " + detail::fmt_num(resolution) +
                               " does not divide 1");
    }
    return static_cast<std::int64_t>(rounded);
  }

  /// C(N + n - 1, n - 1), in floating point so huge grids do not overflow.
  double point_count() const {
    const double steps = static_cast<double>(divisions());
    double count = 1.0;
    for (Eigen::Index i = 1; i < dimension; ++i) {
      count = count * (steps + static_cast<double>(i)) / static_cast<double>(i);
    }
    return std::round(count);
  }
};

struct GridResult {
  bool found = false;
  Vector x;
  double objective = -std::numeric_limits<double>::infinity();
  std::int64_t feasible_count = 0;
  std::int64_t enumerated = 0;
};

/// Throws ConfigurationError when the grid exceeds kMaxGridPoints.
inline GridResult grid_search(const ProblemInstance& instance, const GridSpec& grid) {
  GridSpec spec = grid;
  spec.dimension = instance.dimension();
  if (spec.dimension <= 0) throw DimensionError("instance has no asset classes");
  const std::int64_t steps = spec.divisions();
  if (spec.point_count() > kMaxGridPoints) {
    throw ConfigurationError("grid of " + detail::fmt_num(spec.point_count()) +
                             " points exceeds the limit of 5e7");
  }
  const ConstraintSet cs = assemble(instance);
  const Eigen::Index n = spec.dimension;
  const double inv = static_cast<double>(steps);

  GridResult out;
  std::vector<std::int64_t> parts(static_cast<std::size_t>(n), 0);
  parts.back() = steps;
  Vector x(n);
  while (true) {
    for (Eigen::Index k = 0; k < n; ++k) x[k] = static_cast<double>(parts[static_cast<std::size_t>(k)]) / inv;
    ++out.enumerated;
    try {
      if (cs.feasible(x)) {
        const double value = eval_metric(x, instance.params, instance.metric);
        ++out.feasible_count;
        if (!out.found || value > out.objective) {
          out.found = true;
          out.objective = value;
          out.x = x;
        }
      }
    } catch (const SingularMetricError&) {
      // Feasible but the ratio metric is undefined here; counted, not ranked.
      ++out.feasible_count;
    }

    // Next composition in lexicographic order of (k_0, ..., k_{n-1}).
    // The rightmost position i < n-1 whose tail still holds a unit moves up.
    if (n == 1) break;
    Eigen::Index i = n - 2;
    std::int64_t tail = parts.back();
    while (i >= 0 && tail == 0) {
      tail += parts[static_cast<std::size_t>(i)];
      --i;
    }
    if (i < 0) break;
    parts[static_cast<std::size_t>(i)] += 1;
    tail -= 1;
    for (Eigen::Index k = i + 1; k < n - 1; ++k) parts[static_cast<std::size_t>(k)] = 0;
    parts.back() = tail;
  }
  return out;
}

}  // namespace opcost
