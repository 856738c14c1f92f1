#include "cmfg/cli_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cmfg/diagnostics.hpp"
#include "cmfg/errors.hpp"
#include "cmfg/fokker_planck.hpp"
#include "cmfg/linearized.hpp"
#include "cmfg/master_field.hpp"

#ifndef CMFG_VERSION
#define CMFG_VERSION "0.1.0"
#endif

namespace cmfg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::pair<RunKind, const char*> kKinds[] = {
    {RunKind::Solve, "solve"},
    {RunKind::InfiniteSolve, "infinite_solve"},
    {RunKind::Kernel, "kernel"},
    {RunKind::MasterResidual, "master_residual"},
    {RunKind::UniquenessProbe, "uniqueness_probe"},
    {RunKind::FpValidate, "fp_validate"},
    {RunKind::McValidate, "mc_validate"},
};

const std::set<std::string> kKeys = {"kind", "model", "eps", "r", "sigma", "L", "nx", "nt", "T", "T_list", "m0",
                                     "terminal", "damping", "tol", "max_iter", "seed", "output", "kernel", "probe",
                                     "fp", "mc"};

std::string num(double v) { return fmt::format("{:.17g}", v); }

class Bundle {
 public:
  explicit Bundle(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", p.string()));
    out << content;
    out.close();
    if (!out) throw IoError(fmt::format("failed writing {}", p.string()));
    hashes_[name] = sha256_file(p);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  json refs(std::initializer_list<const char*> names) const {
    json r = json::object();
    for (const char* n : names)
      if (auto it = hashes_.find(n); it != hashes_.end()) r[n] = it->second;
    return r;
  }
  json all_hashes() const {
    json r = json::object();
    for (const auto& [k, v] : hashes_) r[k] = v;
    return r;
  }
  bool has(const std::string& n) const { return hashes_.count(n) > 0; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> hashes_;
};

int pick_stride(const ScenarioConfig& cfg, int nt) {
  return cfg.time_stride > 0 ? cfg.time_stride : std::max(1, nt / 50);
}

std::vector<int> output_levels(int nt, int stride) {
  std::vector<int> ks;
  for (int k = 0; k <= nt; k += stride) ks.push_back(k);
  if (ks.back() != nt) ks.push_back(nt);
  return ks;
}

void write_solution(Bundle& b, const ScenarioConfig& cfg, const MfgSolution& sol) {
  const Grid& g = sol.problem.grid;
  const auto ks = output_levels(g.nt, pick_stride(cfg, g.nt));
  std::string u = "t,x,u,ux\n", m = "t,x,mass\n", eta = "t,eta\n", q = "t,Q\n", term = "x,uT\n";
  for (int k : ks)
    for (int i = 0; i < g.nodes(); ++i) {
      u += fmt::format("{},{},{},{}\n", num(g.t(k)), num(g.x(i)), num(sol.u.u(k, i)), num(sol.u.ux(k, i)));
      m += fmt::format("{},{},{}\n", num(g.t(k)), num(g.x(i)), num(sol.m[k][i]));
    }
  for (int k = 0; k <= g.nt; ++k) {
    eta += fmt::format("{},{}\n", num(g.t(k)), num(sol.history.eta[k]));
    q += fmt::format("{},{}\n", num(g.t(k)), num(sol.Q_path[k]));
  }
  const auto uT = sol.problem.uT.sample(g);
  for (int i = 0; i < g.nodes(); ++i) term += fmt::format("{},{}\n", num(g.x(i)), num(uT[i]));
  b.write("u.csv", u);
  b.write("m.csv", m);
  b.write("eta.csv", eta);
  b.write("Q_path.csv", q);
  b.write("terminal.csv", term);
}

void write_report(Bundle& b, DiagnosticReport rep, std::initializer_list<const char*> refs) {
  rep.set_refs(b.refs(refs));
  b.write_json("diagnostics.json", rep.to_json());
}

SolverOptions solver_options(const ScenarioConfig& cfg) {
  SolverOptions o;
  o.damping = cfg.damping;
  o.tol = cfg.tol;
  o.max_iter = cfg.max_iter;
  return o;
}

void write_kernel_csv(Bundle& b, const Grid& g, const std::vector<double>& ys,
                      const std::vector<std::vector<double>>& K) {
  std::string s = "x,y,K\n";
  for (std::size_t j = 0; j < ys.size(); ++j)
    for (int i = 0; i < g.nodes(); ++i) s += fmt::format("{},{},{}\n", num(g.x(i)), num(ys[j]), num(K[j][i]));
  b.write("kernel.csv", s);
}

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(fmt::format("{}", v)); }

void run_pipeline(Bundle& b, const ScenarioConfig& cfg, std::uint64_t seed, bool plots) {
  const MfgProblem problem = build_problem(cfg);
  const Grid& g = problem.grid;
  const SolverOptions opts = solver_options(cfg);
  const auto& extra = cfg.extra;

  switch (cfg.kind) {
    case RunKind::Solve: {
      const auto sol = solve_finite(problem, opts);
      write_solution(b, cfg, sol);
      write_report(b, sol.diagnostics, {"u.csv", "m.csv", "eta.csv", "Q_path.csv", "terminal.csv"});
      break;
    }
    case RunKind::InfiniteSolve: {
      const auto res = solve_infinite(g, problem.model, cfg.eps, cfg.r, problem.m0, cfg.T_list, opts);
      write_solution(b, cfg, res.solution);
      DiagnosticReport rep = res.solution.diagnostics;
      const double H0 = hamiltonian_value(problem.model, {0, 0, 0});
      double umax = 0.0;
      for (double v : res.solution.u.u.raw()) umax = std::max(umax, v);
      rep.add("u_upper_bound_infinite", umax, "<=", H0 / cfg.r + res.solution.problem.uT.c1, 1e-12);
      for (std::size_t i = 1; i < res.tail_differences.size(); ++i)
        rep.add(fmt::format("tail_decay_{}", i), res.tail_differences[i], "<=", res.tail_differences[i - 1]);
      b.write_json("tail.json", {{"T_list", res.T_list}, {"tail_differences", res.tail_differences}});
      write_report(b, rep, {"u.csv", "m.csv", "eta.csv", "Q_path.csv", "tail.json"});
      break;
    }
    case RunKind::Kernel: {
      const auto sol = solve_finite(problem, opts);
      const json kc = extra.value("kernel", json::object());
      KernelOptions ko;
      ko.mollified = kc.value("mollified", false);
      std::vector<double> ys;
      if (kc.contains("y")) {
        for (double y : kc.at("y").get<std::vector<double>>()) ys.push_back(g.x(g.nearest_node(y)));
        std::sort(ys.begin(), ys.end());
        ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
      } else if (kc.contains("geometric")) {
        ys = geometric_y_grid(g, kc.at("geometric").value("y_max", 1.0), kc.at("geometric").value("count", 12));
      } else {
        ys = support_y_grid(sol);
      }
      const auto K = kernel_matrix(sol, ys, ko);
      write_solution(b, cfg, sol);
      write_kernel_csv(b, g, ys, K);
      DiagnosticReport rep = sol.diagnostics;
      if (ys.size() >= 3) {
        const double alpha = kc.value("alpha", 0.5);
        const auto kb = dUdm_bound_check(g, ys, K, alpha);
        json jb = {{"y", kb.y}, {"alpha", alpha}};
        for (int l = 0; l < 3; ++l) {
          jb[fmt::format("norm_d{}", l)] = kb.norms[l];
          jb[fmt::format("exponent_d{}", l)] = nan_safe(kb.exponent[l]);
          jb[fmt::format("target_d{}", l)] = kb.target[l];
          if (std::isfinite(kb.exponent[l])) rep.exponents.push_back({fmt::format("kernel_norm_d{}", l), kb.exponent[l], 0.0, kb.y.front(), 1.0});
        }
        b.write_json("kernel_bounds.json", jb);
      }
      b.write_json("kernel_meta.json", {{"mollified", ko.mollified}, {"y_count", ys.size()}});
      write_report(b, rep, {"u.csv", "m.csv", "Q_path.csv", "kernel.csv"});
      break;
    }
    case RunKind::MasterResidual: {
      const auto sol = solve_finite(problem, opts);
      const json kc = extra.value("kernel", json::object());
      KernelOptions ko;
      ko.mollified = kc.value("mollified", false);
      const bool with_kernels = kc.value("write_kernels", false);
      const auto ev = master_residual(sol, ko, with_kernels);
      write_solution(b, cfg, sol);
      if (with_kernels) write_kernel_csv(b, g, ev.y, ev.dUdm);
      std::string s = "x,R\n";
      double sup = 0.0;
      for (int i = 0; i < g.nodes(); ++i) {
        s += fmt::format("{},{}\n", num(g.x(i)), num(ev.residual[i]));
        sup = std::max(sup, std::abs(ev.residual[i]));
      }
      b.write("residual.csv", s);
      b.write_json("master.json", {{"Qstar0", ev.Qstar0}, {"residual_sup", sup}, {"mollified", ev.mollified},
                                   {"y_count", ev.y.size()}, {"inverse_moment_2.5", inverse_moment(problem.m0, 2.5)}});
      DiagnosticReport rep = sol.diagnostics;
      rep.add("U_at_boundary", ev.U[0], "==", 0.0, 0.0);
      rep.add("Qstar0_consistency", ev.Qstar0, "==", sol.Q_path[0], 1e-10);
      rep.add("residual_finite", sup, "<", std::numeric_limits<double>::infinity());
      write_report(b, rep, {"u.csv", "m.csv", "Q_path.csv", "kernel.csv", "residual.csv"});
      break;
    }
    case RunKind::UniquenessProbe: {
      const int n_starts = extra.value("probe", json::object()).value("n_starts", 5);
      const auto res = uniqueness_probe(problem, opts, n_starts, seed);
      std::string s = "start,t,Q\n";
      for (std::size_t j = 0; j < res.paths.size(); ++j)
        for (int k = 0; k <= g.nt; ++k) s += fmt::format("{},{},{}\n", j, num(g.t(k)), num(res.paths[j][k]));
      b.write("Q_paths.csv", s);
      b.write_json("uniqueness.json", {{"max_distance", res.max_distance}, {"converged", res.converged},
                                       {"failures", res.failures}, {"n_starts", n_starts}});
      DiagnosticReport rep;
      rep.add("uniqueness_distance", res.max_distance, "<=", 10.0 * cfg.tol);
      rep.add("all_starts_converged", res.converged, "==", n_starts);
      write_report(b, rep, {"Q_paths.csv", "uniqueness.json"});
      break;
    }
    case RunKind::FpValidate: {
      const json fc = extra.value("fp", json::object());
      const double c = fc.value("drift", 0.0);
      const FpResult fp = fp_solve(g, problem.m0, Field(g, c));
      const auto ks = output_levels(g.nt, pick_stride(cfg, g.nt));
      std::string ms = "t,x,mass,exact_mass\n", es = "t,eta,eta_exact\n";
      double err = 0.0, eta_err = 0.0;
      for (int k : ks) {
        const MeasureVector exact = k == 0 ? problem.m0 : heat_solution(g, problem.m0, g.t(k));
        for (int i = 0; i < g.nodes(); ++i) {
          ms += fmt::format("{},{},{},{}\n", num(g.t(k)), num(g.x(i)), num(fp.m[k][i]), num(c == 0.0 ? exact[i] : NAN));
          if (k == g.nt) err = std::max(err, std::abs(fp.m[k][i] - exact[i]) / g.dx());
        }
      }
      for (int k = 0; k <= g.nt; ++k) {
        const double ex = mass_function_heat(problem.m0, g.t(k), g.sigma);
        es += fmt::format("{},{},{}\n", num(g.t(k)), num(fp.history.eta[k]), num(ex));
        eta_err = std::max(eta_err, std::abs(fp.history.eta[k] - ex));
      }
      b.write("m.csv", ms);
      b.write("eta.csv", es);
      DiagnosticReport rep;
      double rise = 0.0;
      for (int k = 1; k <= g.nt; ++k) rise = std::max(rise, fp.history.eta[k] - fp.history.eta[k - 1]);
      rep.add("eta_nonincreasing", rise, "<=", 0.0, 1e-12);
      if (c == 0.0) {
        rep.add("density_linf_error", err, "<=", fc.value("density_tolerance", 5e-3));
        rep.add("eta_error", eta_err, "<=", fc.value("eta_tolerance", 2e-3));
      }
      if (std::isfinite(fp.history.holder.exponent))
        rep.exponents.push_back({"eta", fp.history.holder.exponent, fp.history.holder.constant,
                                 fp.history.holder.window_lo, fp.history.holder.window_hi});
      write_report(b, rep, {"m.csv", "eta.csv"});
      break;
    }
    case RunKind::McValidate: {
      const json mc = extra.value("mc", json::object());
      const double c = mc.value("drift", 0.0);
      const auto n_paths = mc.value("n_paths", std::size_t{100000});
      // MC steps subdivide the FD step so output times coincide
      const int every = std::max(1, static_cast<int>(std::ceil(g.dt() / mc.value("dt", 1e-3) - 1e-9)));
      const double dt_mc = g.dt() / every;
      const FpResult fp = fp_solve(g, problem.m0, Field(g, c));
      const McResult res = mc_absorbed_sde(g, problem.m0, [c](double, double) { return c; }, g.sigma, n_paths,
                                           dt_mc, g.T, seed, every);
      std::string s = "t,eta_fd,eta_mc,stderr\n";
      double worst = 0.0;
      for (std::size_t o = 0; o < res.t.size(); ++o) {
        const int k = std::min(g.nt, static_cast<int>(std::lround(res.t[o] / g.dt())));
        s += fmt::format("{},{},{},{}\n", num(res.t[o]), num(fp.history.eta[k]), num(res.survival[o]),
                         num(res.survival_stderr[o]));
        worst = std::max(worst, std::abs(fp.history.eta[k] - res.survival[o]) - 3.0 * res.survival_stderr[o]);
      }
      b.write("survival.csv", s);
      const auto& h = res.histogram.back();
      const auto& mf = fp.m.back();
      double l1 = 0.0, noise = 0.0;
      const double total = problem.m0.total();
      for (int i = 1; i <= g.nx; ++i) {
        l1 += std::abs(h[i] - mf[i]);
        noise += std::sqrt(std::max(h[i] * (total - h[i]), 0.0) / static_cast<double>(n_paths));
      }
      std::string hs = "x,mass_fd,mass_mc\n";
      for (int i = 0; i < g.nodes(); ++i) hs += fmt::format("{},{},{}\n", num(g.x(i)), num(mf[i]), num(h[i]));
      b.write("histogram.csv", hs);
      DiagnosticReport rep;
      rep.add("survival_gap_beyond_3_stderr", worst, "<=", g.dx());
      rep.add("histogram_l1", l1, "<=", 5.0 * (noise + g.dx()));
      b.write_json("mc_validate.json", {{"n_paths", n_paths}, {"dt", dt_mc}, {"max_survival_gap_beyond_3_stderr", worst},
                                        {"histogram_l1", l1}, {"sampling_error", noise}});
      write_report(b, rep, {"survival.csv", "histogram.csv"});
      break;
    }
  }

  if (plots) {
    std::string gp = "set datafile separator ','\nset key autotitle columnhead\n";
    if (b.has("Q_path.csv")) gp += "set terminal pngcairo\nset output 'Q_path.png'\nplot 'Q_path.csv' using 1:2 with lines\n";
    if (b.has("eta.csv")) gp += "set output 'eta.png'\nplot 'eta.csv' using 1:2 with lines\n";
    if (b.has("residual.csv")) gp += "set output 'residual.png'\nplot 'residual.csv' using 1:2 with lines\n";
    if (b.has("survival.csv")) gp += "set output 'survival.png'\nplot 'survival.csv' using 1:2 with lines, '' using 1:3 with points\n";
    if (b.has("u.csv")) gp += "set output 'u.png'\nset view map\nsplot 'u.csv' using 2:1:3 with points palette\n";
    b.write("plot.gp", gp);
  }
}

}  // namespace

std::string to_string(RunKind k) {
  for (const auto& [kind, name] : kKinds)
    if (kind == k) return name;
  return "solve";
}

RunKind run_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kKinds)
    if (s == name) return kind;
  throw ConfigError(fmt::format("unknown run kind '{}'", s));
}

ScenarioConfig ScenarioConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!kKeys.count(k)) throw ConfigError(fmt::format("unknown config key '{}'", k));
  ScenarioConfig c;
  c.base_dir = base_dir;
  try {
    c.kind = run_kind_from_string(j.at("kind").get<std::string>());
    c.model = j.at("model");
    c.eps = j.at("eps").get<double>();
    c.r = j.at("r").get<double>();
    c.sigma = j.at("sigma").get<double>();
    c.L = j.at("L").get<double>();
    c.nx = j.at("nx").get<int>();
    c.nt = j.at("nt").get<int>();
    c.T = j.at("T").get<double>();
    if (j.contains("T_list")) c.T_list = j.at("T_list").get<std::vector<double>>();
    c.m0 = j.at("m0");
    if (j.contains("terminal")) {
      const auto& t = j.at("terminal");
      if (t.contains("c3") && !t.at("c3").is_null()) c.c3 = t.at("c3").get<double>();
    }
    c.damping = j.value("damping", c.damping);
    c.tol = j.value("tol", c.tol);
    c.max_iter = j.value("max_iter", c.max_iter);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output")) c.time_stride = j.at("output").value("time_stride", 0);
    for (const char* k : {"kernel", "probe", "fp", "mc"})
      if (j.contains(k)) c.extra[k] = j.at(k);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  c.validate();
  return c;
}

json ScenarioConfig::to_json() const {
  json j = {{"kind", cmfg::to_string(kind)},
            {"model", model},
            {"eps", eps},
            {"r", r},
            {"sigma", sigma},
            {"L", L},
            {"nx", nx},
            {"nt", nt},
            {"T", T},
            {"m0", m0},
            {"terminal", {{"c3", c3 ? json(*c3) : json(nullptr)}}},
            {"damping", damping},
            {"tol", tol},
            {"max_iter", max_iter},
            {"seed", seed},
            {"output", {{"time_stride", time_stride}}}};
  if (!T_list.empty()) j["T_list"] = T_list;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

void ScenarioConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("config: {} must be positive, got {}", name, v));
  };
  positive(r, "r");
  positive(sigma, "sigma");
  positive(L, "L");
  positive(T, "T");
  positive(tol, "tol");
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("config: eps must be nonnegative");
  if (nx < 3) throw ConfigError("config: nx must be at least 3");
  if (nt < 1) throw ConfigError("config: nt must be at least 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("config: damping must lie in (0, 1]");
  if (max_iter < 1) throw ConfigError("config: max_iter must be positive");
  if (time_stride < 0) throw ConfigError("config: output.time_stride must be nonnegative");
  if (c3 && !(*c3 > 0.0)) throw ConfigError("config: terminal.c3 must be positive");
  if (kind == RunKind::InfiniteSolve) {
    if (T_list.empty()) throw ConfigError("config: infinite_solve needs T_list");
    for (std::size_t i = 0; i < T_list.size(); ++i) {
      positive(T_list[i], "T_list entry");
      if (i > 0 && !(T_list[i] > T_list[i - 1])) throw ConfigError("config: T_list must be ascending");
    }
  }
  if (!model.is_object() || !model.contains("kind")) throw ConfigError("config: model needs a kind");
  if (!m0.is_object() || !m0.contains("type")) throw ConfigError("config: m0 needs a type");
}

Grid ScenarioConfig::grid() const { return Grid{L, nx, T, nt, sigma}; }

MeasureVector measure_from_csv(const Grid& g, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("m0: cannot read {}", path.string()));
  MeasureVector m(g);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x, w;
    if (!(ss >> x >> w)) {
      if (row == 1) continue;  // header
      throw ConfigError(fmt::format("m0: bad row {} in {}", row, path.string()));
    }
    if (!(x > 0.0 && x < g.L) || w < 0.0) throw ConfigError(fmt::format("m0: row {} outside (0, L) or negative", row));
    m[g.nearest_node(x)] += w;
  }
  return m;
}

MeasureVector build_measure(const Grid& g, const json& s, const fs::path& base_dir) {
  try {
    const std::string type = s.at("type").get<std::string>();
    const double mass = s.value("mass", 1.0);
    if (type == "dirac") return dirac(g, s.at("y").get<double>(), mass);
    if (type == "mollified_dirac")
      return mollified_dirac(g, s.at("y").get<double>(), s.value("width", 2.0 * g.dx()), mass);
    if (type == "uniform") return uniform(g, s.at("a").get<double>(), s.at("b").get<double>(), mass);
    if (type == "lognormal") return truncated_lognormal(g, s.at("mu").get<double>(), s.at("s").get<double>(), mass);
    if (type == "zero") return MeasureVector(g);
    if (type == "csv") {
      fs::path p = s.at("path").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      return measure_from_csv(g, p);
    }
    throw ConfigError(fmt::format("m0: unknown type '{}'", type));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("m0: {}", e.what()));
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

MfgProblem build_problem(const ScenarioConfig& cfg) {
  try {
    MfgProblem p;
    p.grid = cfg.grid();
    p.grid.validate();
    p.model = PriceModel::from_json(cfg.model);
    p.model.validate();
    p.model.check_prudence(cfg.eps);
    p.r = cfg.r;
    p.m0 = build_measure(p.grid, cfg.m0, cfg.base_dir);
    if (p.m0.total() > 1.0 + 1e-9) throw ConfigError(fmt::format("m0: total mass {} exceeds 1", p.m0.total()));
    p.eps = EpsilonSchedule::smooth(p.grid, cfg.eps);
    p.uT = cfg.c3 ? build_terminal(p.model, cfg.sigma, *cfg.c3) : zero_terminal();
    return p;
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

int run(const fs::path& config, const fs::path& out_dir, const RunOptions& ro) {
  const auto t0 = std::chrono::steady_clock::now();
  auto fail = [](int code, const std::string& type, const std::string& msg) {
    std::cerr << json{{"error", type}, {"message", msg}, {"exit_code", code}}.dump() << std::endl;
    return code;
  };

  json raw;
  {
    std::ifstream in(config);
    if (!in) return fail(2, "config_error", fmt::format("cannot read config {}", config.string()));
    try {
      raw = json::parse(in);
    } catch (const json::parse_error& e) {
      return fail(2, "config_error", e.what());
    }
  }
  ScenarioConfig cfg;
  try {
    cfg = ScenarioConfig::from_json(raw, config.parent_path());
    (void)build_problem(cfg);
  } catch (const ConfigError& e) {
    return fail(2, "config_error", e.what());
  }
  const std::uint64_t seed = ro.seed.value_or(cfg.seed);
  cfg.seed = seed;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) return fail(4, "io_error", fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  Bundle bundle(out_dir);
  int code = 0;
  json status = {{"status", "ok"}};
  try {
    const MfgProblem problem = build_problem(cfg);
    const auto rep = check_assumptions(problem.model, cfg.eps, cfg.r, cfg.sigma);
    bundle.write_json("assumptions.json", rep.to_json());
    if (!ro.validate_only) run_pipeline(bundle, cfg, seed, ro.emit_plotscript);
  } catch (const NonConvergenceError& e) {
    code = fail(3, "nonconvergence", e.what());
    status = {{"status", "nonconvergence"}, {"message", e.what()}, {"residual_history", e.residual_history()}};
  } catch (const IoError& e) {
    code = fail(4, "io_error", e.what());
    status = {{"status", "io_error"}, {"message", e.what()}};
  } catch (const fs::filesystem_error& e) {
    code = fail(4, "io_error", e.what());
    status = {{"status", "io_error"}, {"message", e.what()}};
  } catch (const ConfigError& e) {
    code = fail(2, "config_error", e.what());
    status = {{"status", "config_error"}, {"message", e.what()}};
  } catch (const DomainError& e) {
    code = fail(2, "config_error", e.what());
    status = {{"status", "config_error"}, {"message", e.what()}};
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"config", cfg.to_json()},
                   {"version", CMFG_VERSION},
                   {"seed", seed},
                   {"validate_only", ro.validate_only},
                   {"exit_code", code},
                   {"files", bundle.all_hashes()},
                   {"wall_time_s", wall}};
  manifest.update(status);
  try {
    std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("manifest write failed");
  } catch (const std::exception& e) {
    return fail(4, "io_error", e.what());
  }
  return code;
}

}  // namespace cmfg
