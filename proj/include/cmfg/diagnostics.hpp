#pragma once

#include <span>
#include <utility>
#include <vector>

#include "cmfg/fokker_planck.hpp"
#include "cmfg/measure.hpp"
#include "cmfg/mfg_solver.hpp"
#include "cmfg/report.hpp"

namespace cmfg {

// max_{j <= n} sup_x d(x)^j |f^(j)(x)|, d(x) = min(x, 1), f sampled at
// x_i = i dx.
double weighted_norm_Xn(std::span<const double> f, double dx, int n);

// Dictionary lower bound of sup{ int phi dmu : ||phi||_n <= 1 }. For n = 0
// the sign pattern of mu is in the dictionary and the result is the total
// variation. extra_tests are added to the dictionary (normalised).
double dual_norm_minus_n(const MeasureVector& mu, int n,
                         const std::vector<std::vector<double>>& extra_tests = {});

// Least-squares slope of log max|v(t)-v(s)| against log|t-s| over dyadic
// bins of |t-s| in [window.first, window.second]. A series with no
// variation gives exponent +inf.
HolderEstimate holder_fit(std::span<const double> t, std::span<const double> v,
                          std::pair<double, double> window);

DiagnosticReport verify_solution_bounds(const MfgSolution& sol);

}  // namespace cmfg
