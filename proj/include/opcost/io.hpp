/**
 * @file io.hpp
 * @brief JSON instance and scenario files, report serialization, CSV export.
 *
 * Numbers are written with nlohmann/json's shortest round-trip formatting,
 * so every double re-parses to the identical value.
 */

#pragma once

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "opcost/calculus.hpp"
#include "opcost/domain_model.hpp"
#include "opcost/optimizer.hpp"
#include "opcost/opportunity.hpp"
#include "opcost/oracle.hpp"

namespace opcost::io {

using json = nlohmann::json;

struct InstanceDocument {
  ProblemInstance instance;
  SolverConfig solver;
};

namespace detail {

inline std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline const json& require(const json& obj, const std::string& key, const std::string& parent) {
  if (!obj.is_object()) throw ParseError(parent, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(join(parent, key), "missing required key");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path, "expected a number");
  return v.get<double>();
}

inline double number_or(const json& obj, const std::string& key, const std::string& parent,
                        double fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return number(*it, join(parent, key));
}

inline Vector vector(const json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path, "expected a list of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = number(v[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

inline Matrix matrix(const json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path, "expected a list of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Eigen::Index cols = 0;
  if (rows > 0) {
    if (!v[0].is_array()) throw ParseError(path + "[0]", "expected a row list");
    cols = static_cast<Eigen::Index>(v[0].size());
  }
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    const Vector row = vector(v[static_cast<std::size_t>(i)], row_path);
    if (row.size() != cols) throw ParseError(row_path, "ragged matrix row");
    out.row(i) = row;
  }
  return out;
}

inline json to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline json to_json(const Matrix& m) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) arr.push_back(to_json(Vector(m.row(i).transpose())));
  return arr;
}

inline json number_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double number_from(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  return number(v, path);
}

inline json pairs_to_json(const std::vector<std::pair<std::string, double>>& pairs) {
  json obj = json::object();
  for (const auto& [k, v] : pairs) obj[k] = v;
  return obj;
}

}  // namespace detail

/// Parses the `params` section: everything that the scenario snapshots vary.
inline ExternalParameters parse_parameters(const json& doc, const std::string& parent = "") {
  using namespace detail;
  ExternalParameters p;
  const json& returns = require(doc, "returns", parent);
  const std::string rpath = join(parent, "returns");
  p.returns.expected = vector(require(returns, "expected", rpath), join(rpath, "expected"));
  if (returns.contains("vol")) {
    p.returns.vol = vector(returns.at("vol"), join(rpath, "vol"));
  } else {
    p.returns.vol = Vector::Zero(p.returns.expected.size());
  }
  p.liability_drift = number(require(doc, "liability_drift", parent), join(parent, "liability_drift"));
  p.nbv = number_or(doc, "nbv", parent, 0.0);
  p.haircuts = vector(require(doc, "haircuts", parent), join(parent, "haircuts"));
  p.cash_floor = number(require(doc, "cash_floor", parent), join(parent, "cash_floor"));
  p.liquidity_floor =
      number(require(doc, "liquidity_floor", parent), join(parent, "liquidity_floor"));

  const json& sv = require(doc, "solvency", parent);
  const std::string spath = join(parent, "solvency");
  p.solvency.afr_base = number(require(sv, "afr_base", spath), join(spath, "afr_base"));
  p.solvency.afr_sensitivity =
      vector(require(sv, "afr_sensitivity", spath), join(spath, "afr_sensitivity"));
  p.solvency.stress_charges =
      vector(require(sv, "stress_charges", spath), join(spath, "stress_charges"));
  p.solvency.correlation = matrix(require(sv, "correlation", spath), join(spath, "correlation"));
  p.solvency_target =
      number(require(doc, "solvency_target", parent), join(parent, "solvency_target"));
  return p;
}

inline json parameters_to_json(const ExternalParameters& p) {
  using detail::to_json;
  return json{{"returns", {{"expected", to_json(p.returns.expected)}, {"vol", to_json(p.returns.vol)}}},
              {"liability_drift", p.liability_drift},
              {"nbv", p.nbv},
              {"haircuts", to_json(p.haircuts)},
              {"cash_floor", p.cash_floor},
              {"liquidity_floor", p.liquidity_floor},
              {"solvency",
               {{"afr_base", p.solvency.afr_base},
                {"afr_sensitivity", to_json(p.solvency.afr_sensitivity)},
                {"stress_charges", to_json(p.solvency.stress_charges)},
                {"correlation", to_json(p.solvency.correlation)}}},
              {"solvency_target", p.solvency_target}};
}

/// Applies one `key=value` override. Throws ParseError on unknown keys.
inline void apply_override(SolverConfig& cfg, const std::string& key, const std::string& value) {
  auto as_double = [&]() {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ParseError("solver." + key, "expected a number, got '" + value + "'");
    }
  };
  auto as_int = [&]() {
    const double v = as_double();
    if (v != std::floor(v)) throw ParseError("solver." + key, "expected an integer");
    return v;
  };
  if (key == "n_start") cfg.n_start = static_cast<int>(as_int());
  else if (key == "eps_kkt") cfg.eps_kkt = as_double();
  else if (key == "eps_active") cfg.eps_active = as_double();
  else if (key == "eps_eig") cfg.eps_eig = as_double();
  else if (key == "facet_scan_max") cfg.facet_scan_max = static_cast<int>(as_int());
  else if (key == "inner_iter_cap") cfg.inner_iter_cap = static_cast<int>(as_int());
  else if (key == "outer_iter_cap") cfg.outer_iter_cap = static_cast<int>(as_int());
  else if (key == "penalty_init") cfg.penalty_init = as_double();
  else if (key == "penalty_growth") cfg.penalty_growth = as_double();
  else if (key == "penalty_max") cfg.penalty_max = as_double();
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int());
  else throw ParseError("solver." + key, "unknown solver setting");
  if (cfg.n_start < 1) throw ParseError("solver.n_start", "must be at least 1");
}

inline SolverConfig parse_solver(const json& obj) {
  SolverConfig cfg;
  if (!obj.is_object()) throw ParseError("solver", "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!value.is_number()) throw ParseError("solver." + key, "expected a number");
    std::ostringstream s;
    s.precision(17);
    s << value.get<double>();
    apply_override(cfg, key, s.str());
  }
  return cfg;
}

inline InstanceDocument parse_instance(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ParseError("", "instance document must be an object");
  InstanceDocument out;
  ProblemInstance& inst = out.instance;

  const json& assets = require(doc, "assets", "");
  if (!assets.is_array()) throw ParseError("assets", "expected a list");
  for (std::size_t i = 0; i < assets.size(); ++i) {
    const std::string path = "assets[" + std::to_string(i) + "]";
    const json& a = assets[i];
    const json& name = require(a, "name", path);
    if (!name.is_string()) throw ParseError(path + ".name", "expected a string");
    bool is_cash = false;
    if (a.contains("is_cash")) {
      if (!a.at("is_cash").is_boolean()) throw ParseError(path + ".is_cash", "expected true/false");
      is_cash = a.at("is_cash").get<bool>();
    }
    inst.assets.push_back({static_cast<int>(i), name.get<std::string>(), is_cash});
  }

  inst.params = parse_parameters(doc);

  const json& cons = require(doc, "constraints", "");
  if (!cons.is_array()) throw ParseError("constraints", "expected a list of strings");
  for (std::size_t i = 0; i < cons.size(); ++i) {
    if (!cons[i].is_string()) {
      throw ParseError("constraints[" + std::to_string(i) + "]", "expected a string");
    }
    const auto id = cons[i].get<std::string>();
    if (!is_known_constraint(id)) {
      throw ParseError("constraints[" + std::to_string(i) + "]", "unknown constraint '" + id + "'");
    }
    if (!inst.has_constraint(id)) inst.enabled_constraints.push_back(id);
  }

  const json& metric = require(doc, "metric", "");
  if (!metric.is_string()) throw ParseError("metric", "expected a string");
  const auto kind = metric.get<std::string>();
  if (kind == "expected_profit") {
    inst.metric.kind = MetricKind::ExpectedProfit;
  } else if (kind == "return_on_capital") {
    inst.metric.kind = MetricKind::ReturnOnCapital;
  } else {
    throw ParseError("metric", "expected \"expected_profit\" or \"return_on_capital\"");
  }
  inst.metric.label = kind;
  if (doc.contains("metric_label")) {
    if (!doc.at("metric_label").is_string()) throw ParseError("metric_label", "expected a string");
    inst.metric.label = doc.at("metric_label").get<std::string>();
  }

  inst.actual_allocation = vector(require(doc, "actual_allocation", ""), "actual_allocation");
  if (doc.contains("solver")) out.solver = parse_solver(doc.at("solver"));
  return out;
}

inline json instance_to_json(const ProblemInstance& inst) {
  json doc = parameters_to_json(inst.params);
  json assets = json::array();
  for (const auto& a : inst.assets) assets.push_back({{"name", a.name}, {"is_cash", a.is_cash}});
  doc["assets"] = assets;
  doc["constraints"] = inst.enabled_constraints;
  doc["metric"] = to_string(inst.metric.kind);
  doc["metric_label"] = inst.metric.label;
  doc["actual_allocation"] = detail::to_json(inst.actual_allocation);
  return doc;
}

inline ScenarioPath parse_scenario(const json& doc) {
  using namespace detail;
  ScenarioPath path;
  const json& ts = require(doc, "timestamps", "");
  if (!ts.is_array()) throw ParseError("timestamps", "expected a list of numbers");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    path.timestamps.push_back(number(ts[i], "timestamps[" + std::to_string(i) + "]"));
  }
  const json& snaps = require(doc, "snapshots", "");
  if (!snaps.is_array()) throw ParseError("snapshots", "expected a list of parameter objects");
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    path.snapshots.push_back(parse_parameters(snaps[i], "snapshots[" + std::to_string(i) + "]"));
  }
  return path;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("", "'" + path + "' is not valid JSON: " + e.what());
  }
}

// --- reports ---------------------------------------------------------------

inline json to_json(const KktSolution& s) {
  using detail::number_json;
  using detail::to_json;
  return json{{"x", to_json(s.x)},
              {"objective", s.objective},
              {"multipliers",
               {{"mu", s.multipliers.mu()},
                {"lambda_eq", to_json(s.multipliers.lambda_eq)},
                {"lambda_ineq", to_json(s.multipliers.lambda_ineq)},
                {"box_lower", to_json(s.multipliers.box_lower)}}},
              {"residuals",
               {{"stationarity", s.residuals.stationarity},
                {"primal_eq", s.residuals.primal_eq},
                {"primal_ineq", s.residuals.primal_ineq},
                {"dual", s.residuals.dual},
                {"slackness", s.residuals.slackness}}},
              {"active_set", s.active_set},
              {"second_order", to_string(s.second_order)},
              {"hessian_determinant", number_json(s.hessian_determinant)},
              {"start_index", s.start_index}};
}

inline json to_json(const SolveReport& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) cands.push_back(to_json(c));
  return json{{"global", to_json(r.global)}, {"candidates", cands},
              {"boundary_scan_used", r.boundary_scan_used}};
}

inline json to_json(const InfeasibilityReport& r) {
  return json{{"most_feasible", detail::to_json(r.most_feasible)},
              {"max_violation", r.max_violation},
              {"violations", detail::pairs_to_json(r.violations)}};
}

inline json to_json(const OpportunityCostReport& r) {
  json out{{"metric_label", r.metric_label},
           {"x_star", detail::to_json(r.x_star)},
           {"x_actual", detail::to_json(r.x_actual)},
           {"p_star", r.p_star},
           {"p_actual", r.p_actual},
           {"opc", r.opc},
           {"shadow_prices", detail::pairs_to_json(r.shadow_prices)},
           {"actual_feasible", r.actual_feasible()},
           {"actual_violations", detail::pairs_to_json(r.actual_violations)},
           {"solve", to_json(r.solve)}};
  out["timestamp_index"] = r.timestamp_index ? json(*r.timestamp_index) : json(nullptr);
  return out;
}

inline json to_json(const SweepEntry& e) {
  json out{{"t_index", e.t_index}, {"timestamp", e.timestamp}, {"status", to_string(e.status)},
           {"message", e.message}};
  out["report"] = e.report ? to_json(*e.report) : json(nullptr);
  out["infeasibility"] = e.infeasibility ? to_json(*e.infeasibility) : json(nullptr);
  return out;
}

inline json to_json(const std::vector<SweepEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back(to_json(e));
  return arr;
}

inline json to_json(const GridResult& g, double resolution) {
  json out{{"resolution", resolution},
           {"found", g.found},
           {"feasible_count", g.feasible_count},
           {"points_enumerated", g.enumerated}};
  out["x"] = g.found ? detail::to_json(g.x) : json(nullptr);
  out["objective"] = g.found ? json(g.objective) : json(nullptr);
  return out;
}

inline KktSolution kkt_solution_from_json(const json& j) {
  using namespace detail;
  KktSolution s;
  s.x = vector(require(j, "x", "global"), "x");
  s.objective = number(require(j, "objective", ""), "objective");
  const json& m = require(j, "multipliers", "");
  s.multipliers.lambda_eq = vector(require(m, "lambda_eq", "multipliers"), "lambda_eq");
  s.multipliers.lambda_ineq = vector(require(m, "lambda_ineq", "multipliers"), "lambda_ineq");
  s.multipliers.box_lower = vector(require(m, "box_lower", "multipliers"), "box_lower");
  const json& r = require(j, "residuals", "");
  s.residuals.stationarity = number(require(r, "stationarity", "residuals"), "stationarity");
  s.residuals.primal_eq = number(require(r, "primal_eq", "residuals"), "primal_eq");
  s.residuals.primal_ineq = number(require(r, "primal_ineq", "residuals"), "primal_ineq");
  s.residuals.dual = number(require(r, "dual", "residuals"), "dual");
  s.residuals.slackness = number(require(r, "slackness", "residuals"), "slackness");
  s.active_set = require(j, "active_set", "").get<std::vector<std::string>>();
  const auto so = require(j, "second_order", "").get<std::string>();
  for (auto v : {SecondOrder::VerifiedMax, SecondOrder::SaddleOrMin, SecondOrder::Inconclusive,
                 SecondOrder::BoundaryVertex}) {
    if (so == to_string(v)) s.second_order = v;
  }
  s.hessian_determinant = number_from(require(j, "hessian_determinant", ""), "hessian_determinant");
  s.start_index = require(j, "start_index", "").get<int>();
  return s;
}

inline SolveReport solve_report_from_json(const json& j) {
  SolveReport r;
  r.global = kkt_solution_from_json(detail::require(j, "global", ""));
  for (const auto& c : detail::require(j, "candidates", "")) r.candidates.push_back(kkt_solution_from_json(c));
  r.boundary_scan_used = detail::require(j, "boundary_scan_used", "").get<bool>();
  return r;
}

inline OpportunityCostReport opportunity_report_from_json(const json& j) {
  using namespace detail;
  OpportunityCostReport r;
  r.metric_label = require(j, "metric_label", "").get<std::string>();
  r.x_star = vector(require(j, "x_star", ""), "x_star");
  r.x_actual = vector(require(j, "x_actual", ""), "x_actual");
  r.p_star = number(require(j, "p_star", ""), "p_star");
  r.p_actual = number(require(j, "p_actual", ""), "p_actual");
  r.opc = number(require(j, "opc", ""), "opc");
  for (const auto& [k, v] : require(j, "shadow_prices", "").items()) {
    r.shadow_prices.emplace_back(k, v.get<double>());
  }
  for (const auto& [k, v] : require(j, "actual_violations", "").items()) {
    r.actual_violations.emplace_back(k, v.get<double>());
  }
  r.solve = solve_report_from_json(require(j, "solve", ""));
  const json& t = require(j, "timestamp_index", "");
  if (!t.is_null()) r.timestamp_index = t.get<std::size_t>();
  return r;
}

/// Columns: t_index, opc, p_star, p_actual, x_star_1..n, binding_constraints,
/// status. Failed snapshots leave the numeric columns empty.
inline std::string sweep_csv(const std::vector<SweepEntry>& entries, Eigen::Index n) {
  std::ostringstream out;
  out.precision(17);
  out << "t_index,opc,p_star,p_actual";
  for (Eigen::Index k = 1; k <= n; ++k) out << ",x_star_" << k;
  out << ",binding_constraints,status\n";
  for (const auto& e : entries) {
    out << e.t_index;
    if (e.report) {
      const auto& r = *e.report;
      out << ',' << r.opc << ',' << r.p_star << ',' << r.p_actual;
      for (Eigen::Index k = 0; k < n; ++k) out << ',' << r.x_star[k];
      std::string binding;
      for (const auto& id : r.solve.global.active_set) binding += (binding.empty() ? "" : ";") + id;
      out << ',' << binding;
    } else {
      out << ",,,";
      for (Eigen::Index k = 0; k < n; ++k) out << ',';
      out << ',';
    }
    out << ',' << to_string(e.status) << '\n';
  }
  return out.str();
}

}  // namespace opcost::io
