// Command-line front end for the opcost library.
//
//   opcost validate    INSTANCE
//   opcost solve       INSTANCE
//   opcost opc         INSTANCE
//   opcost sweep       INSTANCE SCENARIO [--csv PATH]
//   opcost oracle      INSTANCE [--grid RES]
//   opcost grad-report INSTANCE
//
// Exit codes: 0 success, 1 usage or parse error, 2 infeasible, 3 numeric failure.

#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "opcost/opcost.hpp"

namespace opcost::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInfeasible = 2, kNumeric = 3 };

struct Options {
  std::string instance_path;
  std::string scenario_path;
  std::string output_path;
  std::string csv_path;
  std::string format = "table";
  std::vector<std::string> overrides;
  double grid = 0.01;
};

namespace detail {

using io::json;

inline void emit(const Options& opt, const std::string& text, std::ostream& out) {
  if (opt.output_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(opt.output_path, std::ios::binary);
  if (!file) throw ParseError("output", "cannot write '" + opt.output_path + "'");
  file << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

inline std::string vec(const Vector& v) {
  std::string s = "(";
  for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? ", " : "") + num(v[k]);
  return s + ")";
}

inline std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& i : items) s += (s.empty() ? "" : ", ") + i;
  return s.empty() ? "-" : s;
}

inline io::InstanceDocument load(const Options& opt) {
  auto doc = io::parse_instance(io::read_json_file(opt.instance_path));
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("--set", "expected KEY=VALUE, got '" + kv + "'");
    io::apply_override(doc.solver, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return doc;
}

/// Validation failures are usage errors: the file parsed but is not a valid instance.
inline bool check_valid(const ProblemInstance& inst, std::ostream& err) {
  const auto violations = validate_instance(inst);
  for (const auto& v : violations) err << "[" << v.code << "] " << v.message << "\n";
  return violations.empty();
}

inline std::string solution_table(const ProblemInstance& inst, const KktSolution& s) {
  std::ostringstream t;
  t << "  " << std::left << std::setw(14) << "asset" << "weight\n";
  for (const auto& a : inst.assets) {
    t << "  " << std::left << std::setw(14) << a.name << num(s.x[a.index]) << "\n";
  }
  t << "  objective     " << num(s.objective) << "\n";
  t << "  active        " << join(s.active_set) << "\n";
  t << "  second order  " << to_string(s.second_order) << "\n";
  t << "  residuals     stat " << num(s.residuals.stationarity) << "  eq "
    << num(s.residuals.primal_eq) << "  ineq " << num(s.residuals.primal_ineq) << "  dual "
    << num(s.residuals.dual) << "  slack " << num(s.residuals.slackness) << "\n";
  return t.str();
}

inline std::string prices_table(const std::vector<std::pair<std::string, double>>& prices) {
  std::ostringstream t;
  t << "shadow prices\n";
  for (const auto& [id, v] : prices) t << "  " << std::left << std::setw(14) << id << num(v) << "\n";
  return t.str();
}

inline int cmd_validate(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto doc = load(opt);
  const auto violations = validate_instance(doc.instance);
  if (opt.format == "machine") {
    json arr = json::array();
    for (const auto& v : violations) arr.push_back({{"code", v.code}, {"message", v.message}});
    emit(opt, dump(json{{"valid", violations.empty()}, {"violations", arr}}), out);
  } else if (violations.empty()) {
    emit(opt, "OK\n", out);
  } else {
    std::string text;
    for (const auto& v : violations) text += "[" + v.code + "] " + v.message + "\n";
    emit(opt, text, out);
  }
  if (!violations.empty()) err << violations.size() << " violation(s)\n";
  return violations.empty() ? kOk : kUsage;
}

inline int cmd_solve(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto doc = load(opt);
  if (!check_valid(doc.instance, err)) return kUsage;
  const SolveReport rep = solve(doc.instance, doc.solver);
  if (opt.format == "machine") {
    emit(opt, dump(io::to_json(rep)), out);
    return kOk;
  }
  std::ostringstream t;
  t << "global optimum (start " << rep.global.start_index
    << (rep.boundary_scan_used ? ", boundary scan" : "") << ")\n";
  t << solution_table(doc.instance, rep.global);
  t << prices_table(shadow_prices(rep, assemble(doc.instance)));
  t << "candidates    " << rep.candidates.size() << "\n";
  for (const auto& c : rep.candidates) {
    t << "  #" << c.start_index << "  " << vec(c.x) << "  " << num(c.objective) << "  "
      << to_string(c.second_order) << "\n";
  }
  emit(opt, t.str(), out);
  return kOk;
}

inline std::string opc_table(const ProblemInstance& inst, const OpportunityCostReport& r) {
  std::ostringstream t;
  t << "OpC[" << r.metric_label << "] = " << num(r.opc) << "\n";
  t << "  " << std::left << std::setw(14) << "asset" << std::setw(14) << "optimal"
    << "actual\n";
  for (const auto& a : inst.assets) {
    t << "  " << std::left << std::setw(14) << a.name << std::setw(14) << num(r.x_star[a.index])
      << num(r.x_actual[a.index]) << "\n";
  }
  t << "  P(x*)         " << num(r.p_star) << "\n";
  t << "  P(actual)     " << num(r.p_actual) << "\n";
  t << "  binding       " << join(r.solve.global.active_set) << "\n";
  if (!r.actual_feasible()) {
    t << "  actual allocation violates:";
    for (const auto& [id, v] : r.actual_violations) t << " " << id << " (" << num(v) << ")";
    t << "\n";
  }
  t << prices_table(r.shadow_prices);
  return t.str();
}

inline int cmd_opc(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto doc = load(opt);
  if (!check_valid(doc.instance, err)) return kUsage;
  const auto rep = opportunity_cost(doc.instance, doc.solver);
  emit(opt, opt.format == "machine" ? dump(io::to_json(rep)) : opc_table(doc.instance, rep), out);
  return kOk;
}

inline int cmd_sweep(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto doc = load(opt);
  if (!check_valid(doc.instance, err)) return kUsage;
  const auto path = io::parse_scenario(io::read_json_file(opt.scenario_path));
  const auto entries = sweep_scenarios(doc.instance, path, doc.solver);
  const std::string csv = io::sweep_csv(entries, doc.instance.dimension());

  std::string csv_path = opt.csv_path;
  if (csv_path.empty() && !opt.output_path.empty()) {
    csv_path = std::filesystem::path(opt.output_path).replace_extension(".csv").string();
  }
  if (!csv_path.empty()) {
    std::ofstream file(csv_path, std::ios::binary);
    if (!file) throw ParseError("csv", "cannot write '" + csv_path + "'");
    file << csv;
  }

  if (opt.format == "machine") {
    emit(opt, dump(io::to_json(entries)), out);
  } else {
    std::ostringstream t;
    t << std::left << std::setw(6) << "t" << std::setw(10) << "time" << std::setw(14) << "OpC"
      << std::setw(14) << "P(x*)" << std::setw(14) << "P(actual)" << "status\n";
    for (const auto& e : entries) {
      t << std::left << std::setw(6) << e.t_index << std::setw(10) << num(e.timestamp);
      if (e.report) {
        t << std::setw(14) << num(e.report->opc) << std::setw(14) << num(e.report->p_star)
          << std::setw(14) << num(e.report->p_actual);
      } else {
        t << std::setw(42) << "";
      }
      t << to_string(e.status) << "\n";
    }
    emit(opt, t.str(), out);
  }
  for (const auto& e : entries) {
    if (e.status != SweepStatus::Ok) err << "snapshot " << e.t_index << ": " << e.message << "\n";
  }
  return kOk;
}

inline int cmd_oracle(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto doc = load(opt);
  if (!check_valid(doc.instance, err)) return kUsage;
  const GridResult g = grid_search(doc.instance, GridSpec{opt.grid, doc.instance.dimension()});
  if (opt.format == "machine") {
    emit(opt, dump(io::to_json(g, opt.grid)), out);
  } else {
    std::ostringstream t;
    t << "grid " << num(opt.grid) << ": " << g.enumerated << " points, " << g.feasible_count
      << " feasible\n";
    if (g.found) {
      for (const auto& a : doc.instance.assets) {
        t << "  " << std::left << std::setw(14) << a.name << num(g.x[a.index]) << "\n";
      }
      t << "  objective     " << num(g.objective) << "\n";
    }
    emit(opt, t.str(), out);
  }
  if (g.feasible_count == 0) {
    err << "no feasible grid point\n";
    return kInfeasible;
  }
  return kOk;
}

/// First-order diagnostics at the actual allocation: marginal metric per
/// asset, constraint pressure, and the steepest ascent direction within
/// the simplex plane.
inline int cmd_grad_report(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto doc = load(opt);
  if (!check_valid(doc.instance, err)) return kUsage;
  const auto& inst = doc.instance;
  const Vector& x = inst.actual_allocation;
  const Vector g = profit_gradient(x, inst.params, inst.metric);
  const Vector tangent = g.array() - g.mean();
  const double norm = tangent.norm();
  const Vector direction = norm > 0.0 ? Vector(tangent / norm) : tangent;
  const ConstraintSet cs = assemble(inst);

  json constraints = json::array();
  auto add = [&](const ConstraintFn& c) {
    const double v = c.value(x);
    const bool active = c.kind == ConstraintKind::Equality ? true
                                                            : v >= -doc.solver.eps_active;
    constraints.push_back({{"id", c.id},
                           {"kind", c.kind == ConstraintKind::Equality ? "equality" : "inequality"},
                           {"value", v},
                           {"active", active},
                           {"violated", !c.satisfied(x)},
                           {"gradient", io::detail::to_json(c.gradient(x))}});
  };
  for (const auto& c : cs.equalities) add(c);
  for (const auto& c : cs.inequalities) add(c);

  if (opt.format == "machine") {
    json assets = json::array();
    for (const auto& a : inst.assets) assets.push_back(a.name);
    emit(opt,
         dump(json{{"metric_label", inst.metric.label},
                   {"x", io::detail::to_json(x)},
                   {"assets", assets},
                   {"metric", eval_metric(x, inst.params, inst.metric)},
                   {"gradient", io::detail::to_json(g)},
                   {"ascent_direction", io::detail::to_json(direction)},
                   {"constraints", constraints}}),
         out);
    return kOk;
  }
  std::ostringstream t;
  t << "marginal " << inst.metric.label << " at the actual allocation\n";
  t << "  " << std::left << std::setw(14) << "asset" << std::setw(12) << "weight" << std::setw(14)
    << "dP/dx" << "ascent\n";
  for (const auto& a : inst.assets) {
    t << "  " << std::left << std::setw(14) << a.name << std::setw(12) << num(x[a.index])
      << std::setw(14) << num(g[a.index]) << num(direction[a.index]) << "\n";
  }
  t << "constraints\n";
  for (const auto& c : constraints) {
    t << "  " << std::left << std::setw(14) << c["id"].get<std::string>() << std::setw(14)
      << num(c["value"].get<double>())
      << (c["violated"].get<bool>() ? "violated" : c["active"].get<bool>() ? "active" : "slack")
      << "\n";
  }
  emit(opt, t.str(), out);
  return kOk;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Opportunity cost of a strategic asset allocation under solvency constraints",
               "opcost"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("instance", opt.instance_path, "Instance file (JSON)")->required();
    sub->add_option("--format", opt.format, "table or machine")
        ->check(CLI::IsMember({"table", "machine"}));
    sub->add_option("-o,--output", opt.output_path, "Write output to PATH");
    sub->add_option("--set", opt.overrides, "Solver setting override KEY=VALUE (repeatable)");
  };

  auto* validate = app.add_subcommand("validate", "Check an instance for invariant violations");
  auto* solve_cmd = app.add_subcommand("solve", "Solve for the constrained optimum");
  auto* opc = app.add_subcommand("opc", "Opportunity cost of the actual allocation");
  auto* sweep = app.add_subcommand("sweep", "Opportunity cost over a scenario path");
  auto* oracle = app.add_subcommand("oracle", "Brute-force grid search");
  auto* grad = app.add_subcommand("grad-report", "Marginal metric and constraint pressure");
  for (auto* sub : {validate, solve_cmd, opc, sweep, oracle, grad}) add_common(sub);
  sweep->add_option("scenario", opt.scenario_path, "Scenario path file (JSON)")->required();
  sweep->add_option("--csv", opt.csv_path, "CSV export path");
  oracle->add_option("--grid", opt.grid, "Grid resolution (1/RES must be an integer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return detail::cmd_validate(opt, out, err);
    if (*solve_cmd) return detail::cmd_solve(opt, out, err);
    if (*opc) return detail::cmd_opc(opt, out, err);
    if (*sweep) return detail::cmd_sweep(opt, out, err);
    if (*oracle) return detail::cmd_oracle(opt, out, err);
    if (*grad) return detail::cmd_grad_report(opt, out, err);
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n" << io::to_json(e.report()).dump(2) << "\n";
    return kInfeasible;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigurationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
  return kUsage;
}

}  // namespace opcost::cli
