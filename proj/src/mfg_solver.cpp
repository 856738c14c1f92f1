#include "cmfg/mfg_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cmfg/diagnostics.hpp"
#include "cmfg/errors.hpp"
#include "cmfg/parallel.hpp"

namespace cmfg {

namespace {

AssumptionCheck make_check(double lhs, const std::string& rel, double rhs) {
  return {lhs, rhs, rel, relation_holds(lhs, rel, rhs, 0.0)};
}

nlohmann::json check_json(const AssumptionCheck& c) {
  return {{"lhs", c.lhs}, {"rhs", c.rhs}, {"relation", c.relation}, {"ok", c.ok}};
}

}  // namespace

AssumptionReport check_assumptions(const PriceModel& model, double eps, double r, double sigma) {
  AssumptionReport a;
  const double rho = model.prudence_bound();
  a.linear = model.kind() == PriceKind::Linear;
  a.c = prudence_factor(rho, eps);
  a.Q_bar = q_cap(model, eps);
  a.P_bar = std::max(std::abs((rho - 1.0) / (rho - 2.0)), 1.0);
  const double H0 = hamiltonian_value(model, {0.0, 0.0, 0.0});
  const double P0 = model.price(0.0);
  a.M = 2.0 * std::sqrt(2.0 / (sigma * sigma * r)) * H0;

  // C_H from the curvature of H on [0, eps] x [0, Q_bar] x [0, M]
  double hmin = std::numeric_limits<double>::infinity(), hmax = 0.0;
  constexpr int kS = 20;
  for (int i = 0; i <= kS; ++i)
    for (int j = 0; j <= kS; ++j)
      for (int l = 0; l <= kS; ++l) {
        const HamiltonianPoint pt{eps * i / kS, a.Q_bar * j / kS, a.M * l / kS};
        const auto e = evaluate(model, pt);
        if (e.q <= 0.0) continue;
        hmin = std::min(hmin, e.Haa);
        hmax = std::max(hmax, e.Haa);
      }
  a.C_H = std::max({1.0, hmax, hmin > 0.0 && std::isfinite(hmin) ? 1.0 / hmin : 1.0});

  a.smooth_H = make_check(a.M, "<", model.price(eps * a.Q_bar));
  const double q2 = a.Q_bar * a.Q_bar;
  const double base = a.Q_bar + eps * P0 + 1.0;
  a.kappa = 32.0 * std::pow(1.0 + a.c * a.P_bar * eps, 2) * q2 * std::log(8.0);
  a.kappa0 = 36.0 * std::pow(1.0 + a.c, 2) * q2;
  constexpr double B0 = 10.0, A0 = 10.0;
  a.kappa1 = 32.0 * B0 * B0 * base * base * std::log(2.0 * A0);
  a.kappa_ok = make_check(r, ">=", 2.0 * std::max({a.kappa, a.kappa0, a.kappa1}));
  const double big = std::max({1.0 + a.c * a.P_bar * eps, 1.0 + a.c * a.Q_bar, base});
  a.r_star = make_check(r, ">=", 1000.0 * big * big);
  a.eps_star = make_check(eps, "<=", 1.0 / (4.0 * a.C_H * a.c * (1.0 + a.Q_bar) * (a.C_H * (P0 + 1.0) + a.P_bar)));
  a.linear_eps = make_check(eps, "<", a.linear ? 2.0 : 0.0);
  for (const auto* c : {&a.smooth_H, &a.kappa_ok, &a.r_star, &a.eps_star})
    if (!c->ok) spdlog::debug("assumption check failed: {} {} {}", c->lhs, c->relation, c->rhs);
  return a;
}

nlohmann::json AssumptionReport::to_json() const {
  nlohmann::json j = {{"Q_bar", Q_bar},   {"c", c},         {"P_bar", P_bar},   {"M", M},
                      {"C_H", C_H},       {"kappa", kappa}, {"kappa0", kappa0}, {"kappa1", kappa1},
                      {"smooth_H_ok", check_json(smooth_H)},
                      {"kappa_ok", check_json(kappa_ok)},
                      {"r_star_ok", check_json(r_star)},
                      {"eps_star_ok", check_json(eps_star)}};
  if (linear) j["linear_eps_ok"] = check_json(linear_eps);
  return j;
}

bool AssumptionReport::uniqueness_regime() const {
  const bool small_eps = smooth_H.ok && r_star.ok && eps_star.ok;
  const bool lin = linear && linear_eps.ok && smooth_H.ok;
  return small_eps || lin;
}

Field equilibrium_drift(const MfgProblem& p, const Field& ux, const std::vector<double>& Q) {
  const Grid& g = p.grid;
  Field b(g);
  for (int k = 0; k <= g.nt; ++k)
    for (int i = 0; i < g.nodes(); ++i)
      b(k, i) = optimal_quantity(p.model, {p.eps[k], Q[k], std::max(ux(k, i), 0.0)});
  return b;
}

MfgSolution solve_finite(const MfgProblem& p, const SolverOptions& o) {
  const Grid& g = p.grid;
  g.validate();
  p.eps.validate(g);
  p.model.validate();
  p.model.check_prudence(p.eps.eps0);
  if (!(p.r > 0.0)) throw DomainError(fmt::format("solve_finite: r must be positive, got {}", p.r));
  if (p.m0.nodes() != g.nodes()) throw DomainError("solve_finite: m0 not on this grid");
  if (p.m0.total() > 1.0 + 1e-9) throw DomainError(fmt::format("solve_finite: m0 mass {} exceeds 1", p.m0.total()));
  if (!(o.damping > 0.0 && o.damping <= 1.0)) throw DomainError("solve_finite: damping must lie in (0, 1]");
  if (!(o.tol > 0.0) || o.max_iter < 1) throw DomainError("solve_finite: tol and max_iter must be positive");

  MfgSolution sol;
  sol.problem = p;
  sol.assumptions = check_assumptions(p.model, p.eps.eps0, p.r, g.sigma);

  const int levels = g.levels();
  std::vector<double> Q;
  if (o.initial_Q.empty()) {
    // without producers the clearing quantity is identically zero
    Q.assign(levels, p.m0.total_variation() == 0.0 ? 0.0 : 0.5 * q_cap(p.model, p.eps.eps0));
  } else {
    if (static_cast<int>(o.initial_Q.size()) != levels) throw DomainError("solve_finite: initial_Q length mismatch");
    Q = o.initial_Q;
    for (double v : Q)
      if (!(v >= 0.0)) throw DomainError("solve_finite: initial_Q must be nonnegative");
  }

  double theta = o.damping;
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> Qhat(levels), phi(g.nodes());
  for (int it = 1; it <= o.max_iter; ++it) {
    ValueField u = hjb_solve(g, p.model, p.eps, Q, p.r, p.uT, o.hjb);
    const Field b = equilibrium_drift(p, u.ux, Q);
    FpResult fp = fp_solve(g, p.m0, b, false);
    double res = 0.0;
    for (int k = 0; k < levels; ++k) {
      for (int i = 0; i < g.nodes(); ++i) phi[i] = std::max(u.ux(k, i), 0.0);
      Qhat[k] = market_clearing(p.model, p.eps[k], phi, fp.m[k]);
      res = std::max(res, std::abs(Qhat[k] - Q[k]));
    }
    sol.residual_history.push_back(res);
    spdlog::debug("solve_finite: iteration {} residual {:.3e} theta {}", it, res, theta);
    if (res < o.tol) {
      sol.u = std::move(u);
      sol.m = std::move(fp.m);
      sol.history = std::move(fp.history);
      if (g.nt >= 8) {
        try {
          sol.history.holder = holder_fit(sol.history.t, sol.history.eta, {g.dt(), g.T});
        } catch (const DomainError&) {
        }
      }
      sol.Q_path = Qhat;
      sol.iterations = it;
      sol.clearing_residual.resize(levels);
      for (int k = 0; k < levels; ++k) {
        for (int i = 0; i < g.nodes(); ++i) phi[i] = std::max(sol.u.ux(k, i), 0.0);
        sol.clearing_residual[k] = clearing_residual(p.model, p.eps[k], sol.Q_path[k], phi, sol.m[k]);
      }
      sol.diagnostics = verify_solution_bounds(sol);
      return sol;
    }
    if (o.auto_halve && res > prev && theta > 1.0 / 64.0) theta *= 0.5;
    prev = res;
    for (int k = 0; k < levels; ++k) Q[k] += theta * (Qhat[k] - Q[k]);
  }
  throw NonConvergenceError(
      fmt::format("solve_finite: no convergence in {} iterations (last residual {:.3e})", o.max_iter,
                  sol.residual_history.back()),
      sol.residual_history);
}

InfiniteSolveResult solve_infinite(const Grid& grid, const PriceModel& model, double eps, double r,
                                   const MeasureVector& m0, const std::vector<double>& T_list,
                                   const SolverOptions& opts) {
  if (T_list.empty()) throw DomainError("solve_infinite: empty T_list");
  for (std::size_t i = 1; i < T_list.size(); ++i)
    if (!(T_list[i] > T_list[i - 1])) throw DomainError("solve_infinite: T_list must be ascending");
  const double dt = grid.dt();
  std::vector<MfgProblem> problems(T_list.size());
  for (std::size_t i = 0; i < T_list.size(); ++i) {
    MfgProblem& p = problems[i];
    p.grid = grid;
    p.grid.T = T_list[i];
    p.grid.nt = std::max(1, static_cast<int>(std::lround(T_list[i] / dt)));
    p.model = model;
    p.eps = EpsilonSchedule::smooth(p.grid, eps);
    p.r = r;
    p.m0 = m0;
    p.uT = build_terminal(model, grid.sigma, 1.0 / T_list[i]);
  }
  std::vector<MfgSolution> sols(T_list.size());
  parallel_for(T_list.size(), [&](std::size_t i) { sols[i] = solve_finite(problems[i], opts); });

  InfiniteSolveResult out;
  out.T_list = T_list;
  for (std::size_t i = 0; i + 1 < sols.size(); ++i) {
    const auto& a = sols[i].u.u;
    const auto& b = sols[i + 1].u.u;
    const int kmax = problems[i].grid.nt / 2;
    double d = 0.0;
    for (int k = 0; k <= kmax; ++k)
      for (int j = 0; j < grid.nodes(); ++j) d = std::max(d, std::abs(a(k, j) - b(k, j)));
    out.tail_differences.push_back(d);
  }
  out.solution = std::move(sols.back());
  return out;
}

UniquenessResult uniqueness_probe(const MfgProblem& problem, const SolverOptions& opts, int n_starts,
                                  std::uint64_t seed) {
  if (n_starts < 1) throw DomainError("uniqueness_probe: need at least one start");
  const double cap = q_cap(problem.model, problem.eps.eps0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, cap);
  std::vector<std::vector<double>> starts(n_starts, std::vector<double>(problem.grid.levels()));
  for (auto& s : starts)
    for (double& v : s) v = unif(rng);

  std::vector<std::vector<double>> paths(n_starts);
  std::vector<std::string> errors(n_starts);
  parallel_for(n_starts, [&](std::size_t i) {
    SolverOptions o = opts;
    o.initial_Q = starts[i];
    try {
      paths[i] = solve_finite(problem, o).Q_path;
    } catch (const NonConvergenceError& e) {
      errors[i] = e.what();
    }
  });
  UniquenessResult res;
  for (int i = 0; i < n_starts; ++i) {
    if (!errors[i].empty()) {
      res.failures.push_back(fmt::format("start {}: {}", i, errors[i]));
      continue;
    }
    res.paths.push_back(std::move(paths[i]));
  }
  res.converged = static_cast<int>(res.paths.size());
  for (std::size_t i = 0; i < res.paths.size(); ++i)
    for (std::size_t j = i + 1; j < res.paths.size(); ++j)
      for (std::size_t k = 0; k < res.paths[i].size(); ++k)
        res.max_distance = std::max(res.max_distance, std::abs(res.paths[i][k] - res.paths[j][k]));
  return res;
}

}  // namespace cmfg
