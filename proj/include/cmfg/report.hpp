#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cmfg {

struct ReportEntry {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string relation;  // "<=", ">=", "<", "=="
  double tolerance = 0.0;
  bool pass = false;
  nlohmann::json refs = nlohmann::json::object();
};

struct FittedExponent {
  std::string series;
  double exponent = 0.0;
  double constant = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
};

// Named scalar checks; pass is always relation(lhs, rhs) up to tolerance.
struct DiagnosticReport {
  std::vector<ReportEntry> entries;
  std::vector<FittedExponent> exponents;

  const ReportEntry& add(std::string name, double lhs, std::string relation, double rhs, double tolerance = 0.0);
  const ReportEntry* find(const std::string& name) const;
  bool all_pass() const;
  void set_refs(const nlohmann::json& refs);
  nlohmann::json to_json() const;
};

bool relation_holds(double lhs, const std::string& relation, double rhs, double tolerance);

}  // namespace cmfg
