#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmfg/mfg_solver.hpp"

namespace cmfg {

enum class RunKind { Solve, InfiniteSolve, Kernel, MasterResidual, UniquenessProbe, FpValidate, McValidate };

std::string to_string(RunKind k);
RunKind run_kind_from_string(const std::string& s);

// Parsed and validated scenario. `raw` keeps kind-specific extras
// (kernel y list, probe starts, Monte Carlo settings).
struct ScenarioConfig {
  RunKind kind = RunKind::Solve;
  nlohmann::json model = {{"kind", "linear"}};
  double eps = 0.0;
  double r = 1.0;
  double sigma = 1.0;
  double L = 10.0;
  int nx = 199;
  int nt = 200;
  double T = 1.0;
  std::vector<double> T_list;
  nlohmann::json m0 = {{"type", "uniform"}, {"a", 0.5}, {"b", 1.5}, {"mass", 1.0}};
  std::optional<double> c3;  // terminal data; none means u_T = 0
  double damping = 0.5;
  double tol = 1e-7;
  int max_iter = 500;
  std::uint64_t seed = 0;
  int time_stride = 0;  // 0 picks about 50 output levels
  nlohmann::json extra = nlohmann::json::object();

  static ScenarioConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
  void validate() const;

  Grid grid() const;
  std::filesystem::path base_dir;
};

// Builds m0 from {"type": "dirac"|"mollified_dirac"|"uniform"|"lognormal"|"csv", ...}.
MeasureVector build_measure(const Grid& g, const nlohmann::json& spec, const std::filesystem::path& base_dir = {});
// Reads (x, mass) rows and bins each mass to its nearest interior node.
MeasureVector measure_from_csv(const Grid& g, const std::filesystem::path& path);

MfgProblem build_problem(const ScenarioConfig& cfg);

std::string sha256_file(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  bool validate_only = false;
  bool emit_plotscript = false;
};

// Exit status: 0 ok, 2 config error, 3 nonconvergence, 4 I/O error.
int run(const std::filesystem::path& config, const std::filesystem::path& out_dir, const RunOptions& opts = {});

}  // namespace cmfg
