// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "cmfg/cli_io.hpp"
#include "cmfg/diagnostics.hpp"
#include "cmfg/fokker_planck.hpp"
#include "cmfg/hamiltonian.hpp"
#include "cmfg/linearized.hpp"
#include "cmfg/master_field.hpp"
#include "cmfg/mfg_solver.hpp"

using namespace cmfg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

ScenarioConfig baseline_config() {
  const fs::path p = fs::path(CMFG_SOURCE_DIR) / "scenarios" / "linear_baseline.json";
  std::ifstream in(p);
  return ScenarioConfig::from_json(nlohmann::json::parse(in), p.parent_path());
}

MfgProblem baseline_problem(int nx, int nt) {
  auto cfg = baseline_config();
  cfg.nx = nx;
  cfg.nt = nt;
  return build_problem(cfg);
}

SolverOptions baseline_options() {
  const auto cfg = baseline_config();
  SolverOptions o;
  o.damping = cfg.damping;
  o.tol = cfg.tol;
  o.max_iter = cfg.max_iter;
  return o;
}

const MfgSolution& baseline_solution() {
  static const MfgSolution sol = [] {
    const auto cfg = baseline_config();
    return solve_finite(build_problem(cfg), baseline_options());
  }();
  return sol;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// 1
Outcome heat_flow() {
  const int nxs[] = {100, 200, 400};
  const int nts[] = {125, 500, 2000};
  std::vector<double> err, h;
  for (int l = 0; l < 3; ++l) {
    Grid g{6.0, nxs[l], 0.5, nts[l], 1.0};
    const auto m0 = mollified_dirac(g, 1.0, 0.1);
    const auto fp = fp_solve(g, m0, Field(g, 0.0), false);
    const auto exact = heat_solution_density(g, m0, g.T);
    double e = 0.0;
    for (int i = 0; i < g.nodes(); ++i) e = std::max(e, std::abs(fp.m.back().density(i) - exact[i]));
    err.push_back(e);
    h.push_back(g.dx());
  }
  const double o1 = std::log(err[0] / err[1]) / std::log(h[0] / h[1]);
  const double o2 = std::log(err[1] / err[2]) / std::log(h[1] / h[2]);
  const bool pass = err[2] <= 5e-3 && o1 >= 1.8 && o2 >= 1.8;
  return {pass, fmt::format("Linf errors {:.3e} {:.3e} {:.3e} (<= 5e-3 at nx=400), orders {:.3f} {:.3f} (>= 1.8)",
                            err[0], err[1], err[2], o1, o2)};
}

// 2
Outcome survival() {
  Grid g{8.02, 400, 1.0, 2000, 1.0};
  const auto m0 = dirac(g, 1.0);
  const double exact = std::erf(1.0 / std::sqrt(2.0));
  const auto fp = fp_solve(g, m0, Field(g, 0.0), false);
  const double fd = fp.history.eta.back();
  const auto mc = mc_absorbed_sde(g, m0, [](double, double) { return 0.0; }, 1.0, 100000, 1e-3, 1.0, 20240601, 1000);
  const double eta_mc = mc.survival.back(), se = mc.survival_stderr.back();
  const bool pass = std::abs(fd - exact) <= 2e-3 && std::abs(eta_mc - exact) <= 3.0 * se;
  return {pass, fmt::format("exact {:.6f}, FD {:.6f} (|err| {:.2e} <= 2e-3), MC {:.6f} +- {:.2e} (|z| {:.2f} <= 3)",
                            exact, fd, std::abs(fd - exact), eta_mc, se, std::abs(eta_mc - exact) / se)};
}

// 3
Outcome hamiltonian_closed_forms() {
  const auto model = PriceModel::linear();
  auto grid_argmax = [&](double a) {
    long best_k = 0;
    double best = 0.0;
    for (long k = 0; k <= 1000000; ++k) {
      const double q = k * 1e-6;
      const double v = q * ((1.0 - q) - a);
      if (v > best) {
        best = v;
        best_k = k;
      }
    }
    return std::pair{best_k * 1e-6, best};
  };
  const auto [q0, H0] = grid_argmax(0.0);
  const double a = 0.1, h = 0.02;
  const double dq = (grid_argmax(a + h).first - grid_argmax(a - h).first) / (2 * h);
  const double e1 = std::abs(optimal_quantity(model, {0, 0, 0}) - q0);
  const double e2 = std::abs(hamiltonian_value(model, {0, 0, 0}) - H0);
  const double e3 = std::abs(d2H_da2(model, {0, 0, a}) + dq);
  const double e4 = std::abs(q0 - 0.5) + std::abs(H0 - 0.25) + std::abs(-dq - 0.5);
  const bool pass = std::max({e1, e2, e3, e4}) <= 1e-12;
  return {pass, fmt::format("|q*-oracle| {:.1e}, |H-oracle| {:.1e}, |d2H-oracle| {:.1e}, oracle vs 0.5/0.25/0.5 {:.1e}",
                            e1, e2, e3, e4)};
}

// 4
Outcome clearing() {
  Grid g{2.0, 9, 1.0, 1, 1.0};
  const auto m = uniform(g, 0.2, 1.8, 1.0);
  std::vector<double> phi(g.nodes(), 0.0);
  const double Q = market_clearing(PriceModel::linear(), 1.0, phi, m);
  const auto& sol = baseline_solution();
  double worst = 0.0;
  for (int k = 0; k <= sol.problem.grid.nt; ++k) {
    std::vector<double> a(sol.u.ux[k].begin(), sol.u.ux[k].end());
    for (double& v : a) v = std::max(v, 0.0);
    worst = std::max(worst, std::abs(clearing_residual(sol.problem.model, sol.problem.eps[k], sol.Q_path[k], a, sol.m[k])));
  }
  const bool pass = std::abs(Q - 1.0 / 3.0) <= 1e-10 && worst <= 1e-10;
  return {pass, fmt::format("|Q*-1/3| {:.1e} (<= 1e-10), max clearing residual on baseline {:.1e} (<= 1e-10)",
                            std::abs(Q - 1.0 / 3.0), worst)};
}

// 5
Outcome bounds_suite() {
  const auto& sol = baseline_solution();
  std::string failed;
  for (const auto& e : sol.diagnostics.entries)
    if (!e.pass) failed += " " + e.name;
  const auto* ux = sol.diagnostics.find("ux_upper_bound");
  const auto* u = sol.diagnostics.find("u_upper_bound");
  const auto* q = sol.diagnostics.find("Q_upper_bound");
  const bool pass = failed.empty() && ux && u && q && sol.diagnostics.find("tv_nonincreasing");
  return {pass, fmt::format("{} checks, sup u {:.4e} <= {:.4e}, sup u_x {:.4e} <= M {:.4e}, sup Q {:.4f} <= {:.1f}{}",
                            sol.diagnostics.entries.size(), u->lhs, u->rhs, ux->lhs, ux->rhs, q->lhs, q->rhs,
                            failed.empty() ? "" : ", failed:" + failed)};
}

// 6
Outcome uniqueness() {
  const auto cfg = baseline_config();
  const auto res = uniqueness_probe(build_problem(cfg), baseline_options(), 5, cfg.seed);
  const bool pass = res.converged == 5 && res.max_distance <= 10.0 * cfg.tol;
  return {pass, fmt::format("{}/5 converged, max sup distance {:.2e} (<= {:.1e})", res.converged, res.max_distance,
                            10.0 * cfg.tol)};
}

// 7
Outcome linearization_consistency() {
  auto p = baseline_problem(399, 500);
  p.m0 = uniform(p.grid, 0.5, 1.5, 0.9);
  auto ph = p;
  ph.m0 = p.m0 + uniform(p.grid, 2.0, 3.0, 0.1);
  auto opts = baseline_options();
  opts.tol = 1e-11;
  const auto sol = solve_finite(p, opts);
  const auto solh = solve_finite(ph, opts);
  MeasureVector mu0 = ph.m0 - p.m0;
  mu0.set_signed(true);
  const double tv = mu0.total_variation();
  const auto coeffs = build_coeffs(sol, LinearMode::Differences, &solh);
  LinearizedOptions lo;
  lo.tol = 1e-12;
  const auto lin = solve_linearized(sol, coeffs, mu0, lo);
  const Grid& g = p.grid;
  double ew = 0.0, em = 0.0, eq = 0.0;
  for (int k = 0; k <= g.nt; ++k) {
    for (int i = 0; i < g.nodes(); ++i) {
      ew = std::max(ew, std::abs(lin.w(k, i) - (solh.u.u(k, i) - sol.u.u(k, i))));
      em = std::max(em, std::abs(lin.mu[k][i] - (solh.m[k][i] - sol.m[k][i])));
    }
    eq = std::max(eq, std::abs(lin.sQ[k] - (solh.Q_path[k] - sol.Q_path[k])));
  }
  const double worst = std::max({ew, em, eq});
  return {worst <= 5e-3 && std::abs(tv - 0.1) < 1e-12,
          fmt::format("TV {:.3f}, sup errors w {:.2e}, mu {:.2e}, Q {:.2e} (<= 5e-3)", tv, ew, em, eq)};
}

// 8
Outcome differentiability() {
  auto p = baseline_problem(399, 500);
  p.m0 = uniform(p.grid, 0.5, 1.5, 0.9);
  auto opts = baseline_options();
  opts.tol = 1e-11;
  opts.max_iter = 2000;
  const auto base = solve_finite(p, opts);
  const double y = p.grid.x(p.grid.nearest_node(1.0));
  KernelOptions ko;
  ko.solver.tol = 1e-12;
  const auto K = master_derivative_kernel(base, y, ko);
  const std::vector<double> ts = {0.08, 0.04, 0.02, 0.01};
  std::vector<double> rem;
  for (double t : ts) {
    auto pt = p;
    pt.m0 = p.m0 + dirac(p.grid, y, t);
    const auto st = solve_finite(pt, opts);
    double r = 0.0;
    for (int i = 0; i < p.grid.nodes(); ++i)
      r = std::max(r, std::abs(st.u.u(0, i) - base.u.u(0, i) - t * K[i]));
    rem.push_back(r);
  }
  const double slope = log_slope(ts, rem);
  return {slope >= 1.7, fmt::format("remainders {:.2e} {:.2e} {:.2e} {:.2e}, slope {:.3f} (>= 1.7)", rem[0], rem[1],
                                    rem[2], rem[3], slope)};
}

// 9
Outcome master_residual_refinement() {
  auto sup_residual = [](int nx, int nt) {
    const auto sol = solve_finite(baseline_problem(nx, nt), baseline_options());
    const auto ev = master_residual(sol);
    double s = 0.0;
    for (double v : ev.residual) s = std::max(s, std::abs(v));
    return s;
  };
  const double coarse = sup_residual(399, 500);
  const double fine = sup_residual(799, 1000);
  const double factor = coarse / fine;
  return {factor >= 1.5, fmt::format("sup residual {:.3e} -> {:.3e}, factor {:.2f} (>= 1.5)", coarse, fine, factor)};
}

// 10
Outcome energy() {
  const auto cfg = baseline_config();
  struct Pair {
    std::function<MeasureVector(const Grid&)> a, b;
  };
  const std::vector<Pair> pairs = {
      {[](const Grid& g) { return uniform(g, 0.5, 1.5, 1.0); }, [](const Grid& g) { return uniform(g, 0.6, 1.6, 1.0); }},
      {[](const Grid& g) { return uniform(g, 0.5, 1.5, 0.9); }, [](const Grid& g) { return uniform(g, 0.5, 1.5, 1.0); }},
      {[](const Grid& g) { return truncated_lognormal(g, 0.0, 0.5, 1.0); },
       [](const Grid& g) { return uniform(g, 0.2, 2.2, 0.8); }},
  };
  bool pass = true;
  std::string detail;
  for (const auto& pr : pairs) {
    auto p = baseline_problem(399, 500);
    auto ph = p;
    p.m0 = pr.a(p.grid);
    ph.m0 = pr.b(p.grid);
    const auto gap = energy_gap(solve_finite(p, baseline_options()), solve_finite(ph, baseline_options()));
    pass = pass && gap.lhs >= -1e-14 && gap.lhs <= gap.rhs;
    detail += fmt::format("{}[{:.3e} <= {:.3e}]", detail.empty() ? "" : " ", gap.lhs, gap.rhs);
  }
  return {pass, "0 <= lhs <= rhs: " + detail};
}

// 11
Outcome counterexample() {
  const auto tail = [](double z) { return z < std::exp(-1.0) ? 1.0 + 1.0 / std::log(z) : 0.0; };
  std::vector<double> t = {0.0}, v = {mass_function_heat(tail, 0.0, 1.0)};
  for (int j = 0; j <= 120; ++j) {
    const double s = std::pow(10.0, -8.0 + 6.0 * j / 120.0);
    t.push_back(s);
    v.push_back(mass_function_heat(tail, s, 1.0));
  }
  const auto lo = holder_fit(t, v, {1e-6, 1e-4});
  const auto hi = holder_fit(t, v, {1e-4, 1e-2});
  return {lo.exponent < hi.exponent,
          fmt::format("exponent {:.4f} on [1e-6,1e-4] < {:.4f} on [1e-4,1e-2]", lo.exponent, hi.exponent)};
}

// 12
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / fmt::format("cmfg_det_{}", ::getpid());
  fs::remove_all(root);
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  auto strip = [](std::string s) {
    auto j = nlohmann::json::parse(s);
    j.erase("wall_time_s");
    return j.dump();
  };
  std::vector<std::string> scenarios;
  for (const auto& e : fs::directory_iterator(fs::path(CMFG_SOURCE_DIR) / "scenarios"))
    if (e.path().extension() == ".json") scenarios.push_back(e.path().string());
  std::sort(scenarios.begin(), scenarios.end());
  int files = 0;
  std::string bad;
  for (const auto& sc : scenarios) {
    const auto name = fs::path(sc).stem().string();
    const fs::path a = root / (name + "_a"), b = root / (name + "_b");
    const int ra = std::system(fmt::format("\"{}\" run \"{}\" --out \"{}\" 2>/dev/null", CMFG_CLI, sc, a.string()).c_str());
    const int rb = std::system(fmt::format("\"{}\" run \"{}\" --out \"{}\" 2>/dev/null", CMFG_CLI, sc, b.string()).c_str());
    if (ra != 0 || rb != 0) bad += " " + name + "(exit)";
    for (const auto& e : fs::directory_iterator(a)) {
      const auto fname = e.path().filename();
      std::string x = read(e.path()), y = read(b / fname);
      if (fname == "manifest.json") {
        x = strip(x);
        y = strip(y);
      }
      ++files;
      if (x != y) bad += " " + name + "/" + fname.string();
    }
  }
  fs::remove_all(root);
  return {bad.empty() && files > 0,
          fmt::format("{} scenarios, {} files compared{}", scenarios.size(), files, bad.empty() ? "" : ", differ:" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::pair<std::string, std::function<Outcome()>>> items = {
      {"heat_flow_oracle", heat_flow},
      {"survival_oracle", survival},
      {"hamiltonian_closed_forms", hamiltonian_closed_forms},
      {"clearing_fixed_point", clearing},
      {"bounds_suite_linear_baseline", bounds_suite},
      {"uniqueness_probe", uniqueness},
      {"linearization_consistency", linearization_consistency},
      {"master_field_differentiability", differentiability},
      {"master_equation_residual", master_residual_refinement},
      {"energy_estimates", energy},
      {"non_holder_counterexample", counterexample},
      {"determinism", determinism},
  };
  std::optional<int> only;
  if (argc > 1) only = std::atoi(argv[1]);
  int failed = 0;
  for (std::size_t n = 0; n < items.size(); ++n) {
    if (only && *only != static_cast<int>(n + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = items[n].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    fmt::print("{} {:2d} {}: {} [{:.1f}s]\n", o.pass ? "PASS" : "FAIL", n + 1, items[n].first, o.detail, s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
