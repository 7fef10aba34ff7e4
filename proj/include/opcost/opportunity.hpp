/**
 * @file opportunity.hpp
 * @brief Opportunity cost of an allocation against the constrained optimum.
 *
 *   OpC(x) = P(x*) - P(x)
 *
 * Both terms use the same metric and the same external parameters. The
 * actual allocation does not have to be feasible; its violations travel
 * with the report.
 */

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opcost/calculus.hpp"
#include "opcost/constraints.hpp"
#include "opcost/optimizer.hpp"

namespace opcost {

struct OpportunityCostReport {
  std::string metric_label;
  Vector x_star;
  Vector x_actual;
  double p_star = 0.0;
  double p_actual = 0.0;
  double opc = 0.0;
  std::vector<std::pair<std::string, double>> shadow_prices;
  std::vector<std::pair<std::string, double>> actual_violations;
  SolveReport solve;
  std::optional<std::size_t> timestamp_index;

  bool actual_feasible() const { return actual_violations.empty(); }
};

inline OpportunityCostReport opportunity_cost(const ProblemInstance& instance,
                                              const SolverConfig& config = {},
                                              const std::vector<Vector>& extra_starts = {}) {
  const auto x_actual = AllocationVector::checked(instance.actual_allocation);
  SolveReport solved = solve(instance, config, extra_starts);
  const ConstraintSet cs = assemble(instance);

  OpportunityCostReport rep;
  rep.metric_label = instance.metric.label;
  rep.x_star = solved.global.x;
  rep.x_actual = x_actual.weights();
  rep.p_star = eval_metric(rep.x_star, instance.params, instance.metric);
  rep.p_actual = eval_metric(rep.x_actual, instance.params, instance.metric);
  rep.opc = rep.p_star - rep.p_actual;
  rep.shadow_prices = shadow_prices(solved, cs);
  rep.actual_violations = cs.violations(rep.x_actual);
  rep.solve = std::move(solved);
  return rep;
}

enum class SweepStatus { Ok, Infeasible, NumericFailure, Invalid };

inline const char* to_string(SweepStatus s) {
  switch (s) {
    case SweepStatus::Ok: return "ok";
    case SweepStatus::Infeasible: return "infeasible";
    case SweepStatus::NumericFailure: return "numeric_failure";
    case SweepStatus::Invalid: return "invalid";
  }
  return "invalid";
}

struct SweepEntry {
  std::size_t t_index = 0;
  double timestamp = 0.0;
  SweepStatus status = SweepStatus::Ok;
  std::string message;
  std::optional<OpportunityCostReport> report;
  std::optional<InfeasibilityReport> infeasibility;
};

struct SweepOptions {
  /// Seed each snapshot's solve with the previous snapshot's optimum.
  bool warm_start = false;
};

/// One entry per snapshot with the in-force allocation held fixed. A failing
/// snapshot is recorded in its own entry and never aborts the sweep.
inline std::vector<SweepEntry> sweep_scenarios(const ProblemInstance& instance,
                                               const ScenarioPath& path,
                                               const SolverConfig& config = {},
                                               const SweepOptions& options = {}) {
  const auto path_violations = validate_path(path);
  if (!path_violations.empty()) {
    throw ConfigurationError("invalid scenario path: " + path_violations.front().message);
  }

  std::vector<SweepEntry> out;
  std::optional<Vector> previous;
  for (std::size_t i = 0; i < path.snapshots.size(); ++i) {
    SweepEntry entry;
    entry.t_index = i;
    entry.timestamp = path.timestamps[i];
    ProblemInstance snapshot = instance;
    snapshot.params = path.snapshots[i];

    std::vector<Vector> warm;
    if (options.warm_start && previous) warm.push_back(*previous);
    try {
      auto rep = opportunity_cost(snapshot, config, warm);
      rep.timestamp_index = i;
      previous = rep.x_star;
      entry.report = std::move(rep);
    } catch (const InfeasibleError& e) {
      entry.status = SweepStatus::Infeasible;
      entry.message = e.what();
      entry.infeasibility = e.report();
    } catch (const NumericFailure& e) {
      entry.status = SweepStatus::NumericFailure;
      entry.message = e.what();
    } catch (const Error& e) {
      entry.status = SweepStatus::Invalid;
      entry.message = e.what();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace opcost
