#include "cmfg/report.hpp"

#include <cmath>

namespace cmfg {

bool relation_holds(double lhs, const std::string& relation, double rhs, double tol) {
  if (!std::isfinite(lhs) || std::isnan(rhs)) return false;
  if (relation == "<=") return lhs <= rhs + tol;
  if (relation == ">=") return lhs >= rhs - tol;
  if (relation == "<") return lhs < rhs + tol;
  if (relation == ">") return lhs > rhs - tol;
  if (relation == "==") return std::abs(lhs - rhs) <= tol;
  return false;
}

const ReportEntry& DiagnosticReport::add(std::string name, double lhs, std::string relation, double rhs, double tol) {
  ReportEntry e;
  e.name = std::move(name);
  e.lhs = lhs;
  e.rhs = rhs;
  e.relation = std::move(relation);
  e.tolerance = tol;
  e.pass = relation_holds(lhs, e.relation, rhs, tol);
  entries.push_back(std::move(e));
  return entries.back();
}

const ReportEntry* DiagnosticReport::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

bool DiagnosticReport::all_pass() const {
  for (const auto& e : entries)
    if (!e.pass) return false;
  return true;
}

void DiagnosticReport::set_refs(const nlohmann::json& refs) {
  for (auto& e : entries) e.refs = refs;
}

static nlohmann::json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

nlohmann::json DiagnosticReport::to_json() const {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& e : entries)
    checks.push_back({{"name", e.name},
                      {"lhs", finite_or_string(e.lhs)},
                      {"rhs", finite_or_string(e.rhs)},
                      {"relation", e.relation},
                      {"tolerance", e.tolerance},
                      {"pass", e.pass},
                      {"refs", e.refs}});
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : exponents)
    fits.push_back({{"series", f.series},
                    {"exponent", finite_or_string(f.exponent)},
                    {"constant", finite_or_string(f.constant)},
                    {"window", {f.window_lo, f.window_hi}}});
  return {{"checks", checks}, {"exponents", fits}};
}

}  // namespace cmfg
