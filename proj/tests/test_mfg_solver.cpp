#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cmfg/diagnostics.hpp"
#include "cmfg/errors.hpp"
#include "cmfg/mfg_solver.hpp"

using namespace cmfg;

namespace {

MfgProblem linear_problem(int nx, int nt, double eps0 = 0.5, double r = 50.0) {
  MfgProblem p;
  p.grid = Grid{6.0, nx, 1.0, nt, 1.0};
  p.model = PriceModel::linear();
  p.eps = EpsilonSchedule::smooth(p.grid, eps0);
  p.r = r;
  p.m0 = uniform(p.grid, 0.5, 1.5, 1.0);
  p.uT = build_terminal(p.model, 1.0, 0.05);
  return p;
}

}  // namespace

TEST_CASE("assumption report") {
  const auto a = check_assumptions(PriceModel::linear(), 0.5, 50.0, 1.0);
  CHECK(a.M == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(a.Q_bar == 0.5);
  CHECK(a.c == 1.0);
  CHECK(a.smooth_H.ok);
  CHECK(a.smooth_H.rhs == doctest::Approx(0.75));
  CHECK(a.linear_eps.ok);
  CHECK(a.uniqueness_regime());
  const auto z = check_assumptions(PriceModel::linear(), 0.0, 50.0, 1.0);
  CHECK(z.eps_star.ok);
  const auto j = a.to_json();
  for (const char* k : {"Q_bar", "c", "M", "C_H", "kappa", "smooth_H_ok", "kappa_ok", "r_star_ok", "eps_star_ok"})
    CHECK(j.contains(k));
  const auto cp = check_assumptions(PriceModel::constant_prudence(1.0, 0.5), 0.05, 50.0, 1.0);
  CHECK_FALSE(cp.linear);
  CHECK(cp.C_H >= 1.0);
}

TEST_CASE("no producers decouple the system") {
  auto p = linear_problem(99, 100);
  p.m0 = MeasureVector(p.grid);
  const auto sol = solve_finite(p);
  for (double q : sol.Q_path) CHECK(q == 0.0);
  const auto v = hjb_solve(p.grid, p.model, p.eps, std::vector<double>(p.grid.levels(), 0.0), p.r, p.uT);
  CHECK(sup_distance(v.u, sol.u.u) == 0.0);
}

TEST_CASE("eps = 0 converges right after the first clearing") {
  auto p = linear_problem(99, 100, 0.0);
  SolverOptions o;
  o.damping = 1.0;
  const auto sol = solve_finite(p, o);
  CHECK(sol.iterations <= 2);
}

TEST_CASE("linear equilibrium: bounds and clearing") {
  const auto p = linear_problem(199, 200);
  const auto sol = solve_finite(p);
  CHECK(sol.diagnostics.all_pass());
  CHECK(sol.assumptions.smooth_H.ok);
  for (std::size_t k = 0; k < sol.Q_path.size(); ++k) {
    CHECK(sol.Q_path[k] >= 0.0);
    CHECK(sol.Q_path[k] <= 0.5);
    CHECK(std::abs(sol.clearing_residual[k]) <= 1e-10);
    if (k > 0) CHECK(sol.Q_path[k] <= sol.Q_path[k - 1] + 1e-9);
    if (k > 0) CHECK(sol.history.eta[k] <= sol.history.eta[k - 1] + 1e-14);
  }
  // damped residuals eventually decrease
  const auto& h = sol.residual_history;
  REQUIRE(h.size() >= 3);
  for (std::size_t i = h.size() / 2 + 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);

  const auto drift = equilibrium_drift(p, sol.u.ux, sol.Q_path);
  for (double b : drift.raw()) CHECK(b >= 0.0);

  // halving (dx, dt) moves the path by O(dx)
  const auto fine = solve_finite(linear_problem(399, 400));
  double d = 0.0;
  for (std::size_t k = 0; k < sol.Q_path.size(); ++k) d = std::max(d, std::abs(sol.Q_path[k] - fine.Q_path[2 * k]));
  CHECK(d < 2e-2);
}

TEST_CASE("nonconvergence carries the residual history") {
  SolverOptions o;
  o.max_iter = 2;
  o.tol = 1e-14;
  try {
    solve_finite(linear_problem(49, 50), o);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.residual_history().size() == 2);
  }
}

TEST_CASE("uniqueness probe") {
  const auto res = uniqueness_probe(linear_problem(99, 100), {}, 3, 7);
  CHECK(res.converged == 3);
  CHECK(res.max_distance <= 1e-6);
  CHECK(res.paths.size() == 3);
  const auto z = uniqueness_probe(linear_problem(99, 100, 0.0), {}, 3, 7);
  CHECK(z.max_distance <= 1e-6);
}

TEST_CASE("infinite horizon tail") {
  const Grid g{6.0, 99, 1.0, 100, 1.0};
  const auto m0 = uniform(g, 0.5, 1.5, 1.0);
  const auto res = solve_infinite(g, PriceModel::linear(), 0.5, 20.0, m0, {1.0, 2.0, 4.0});
  REQUIRE(res.tail_differences.size() == 2);
  CHECK(res.tail_differences[1] <= res.tail_differences[0]);
  const auto& s = res.solution;
  CHECK(s.problem.grid.T == 4.0);
  const double H0 = 0.25;
  const double M = 2.0 * std::sqrt(2.0 / 20.0) * H0;
  for (int k = 0; k <= s.problem.grid.nt; ++k)
    for (int i = 0; i < s.problem.grid.nodes(); ++i) {
      CHECK(s.u.u(k, i) <= H0 / 20.0 + s.problem.uT.c1 + 1e-12);
      CHECK(s.u.ux(k, i) <= std::max(M, max_ux_bound(s.problem.model, 1.0, 20.0, s.problem.uT.c1, s.problem.uT.c3)) + 1e-12);
    }
  CHECK_THROWS_AS(solve_infinite(g, PriceModel::linear(), 0.5, 20.0, m0, {2.0, 1.0}), DomainError);
}

TEST_CASE("solution bound report") {
  const auto sol = solve_finite(linear_problem(99, 100));
  const auto rep = verify_solution_bounds(sol);
  for (const char* n : {"u_nonnegative", "u_upper_bound", "ux_upper_bound", "Q_upper_bound", "eta_nonincreasing",
                        "tv_nonincreasing", "clearing_residual"}) {
    REQUIRE(rep.find(n) != nullptr);
    CHECK(rep.find(n)->pass);
  }
  CHECK(rep.exponents.size() >= 1);
}
