#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "cmfg/measure.hpp"

namespace cmfg {

enum class PriceKind { Linear, Custom };

// Inverse demand P with its first two derivatives.
class PriceModel {
 public:
  using Fn = std::function<double(double)>;

  // P(q) = 1 - q.
  static PriceModel linear();
  // P(q) = p0 - q^(1-rho)/(1-rho), constant relative prudence rho in [0, 1).
  static PriceModel constant_prudence(double p0, double rho);
  // Arbitrary decreasing P given as a callable triple. When prudence_bound
  // is not supplied it is estimated as the max of -qP''/P' over a
  // logarithmic sample of (0, saturation].
  static PriceModel custom(Fn p, Fn dp, Fn d2p, double saturation,
                           std::optional<double> prudence_bound = std::nullopt,
                           nlohmann::json params = nlohmann::json::object());

  // {"kind": "linear"} or {"kind": "constant_prudence", "p0": .., "rho": ..}
  static PriceModel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  PriceKind kind() const { return kind_; }
  double price(double q) const;
  double slope(double q) const;
  double curvature(double q) const;
  double saturation() const { return saturation_; }
  double prudence_bound() const { return prudence_bound_; }

  // Checks P(0) > 0, P' < 0 on a sample and P(saturation) = 0.
  void validate() const;
  // Throws DomainError unless prudence_bound < (2+eps)/(1+eps).
  void check_prudence(double eps) const;

 private:
  PriceKind kind_ = PriceKind::Linear;
  std::shared_ptr<const Fn> p_, dp_, d2p_;
  double saturation_ = 1.0;
  double prudence_bound_ = 0.0;
  nlohmann::json params_;
};

struct HamiltonianPoint {
  double eps = 0.0;
  double Q = 0.0;
  double a = 0.0;
};

// Everything the solvers need at one point, from a single root solve.
struct HamiltonianEval {
  double q = 0.0;     // optimal quantity
  double H = 0.0;
  double Ha = 0.0;    // -q
  double Haa = 0.0;   // -dq/da
  double HQ = 0.0;
  double HaQ = 0.0;
};

double profit(const PriceModel& model, const HamiltonianPoint& p, double q);
double relative_prudence(const PriceModel& model, double Q);
double optimal_quantity(const PriceModel& model, const HamiltonianPoint& p);
HamiltonianEval evaluate(const PriceModel& model, const HamiltonianPoint& p);

double hamiltonian_value(const PriceModel& model, const HamiltonianPoint& p);
double dH_da(const PriceModel& model, const HamiltonianPoint& p);
double d2H_da2(const PriceModel& model, const HamiltonianPoint& p);
double dH_dQ(const PriceModel& model, const HamiltonianPoint& p);
double d2H_dQda(const PriceModel& model, const HamiltonianPoint& p);

// c(rho_bar, eps) = max{(2 - rho_bar)/(2 + eps - (1 + eps) rho_bar), 1}.
double prudence_factor(double rho_bar, double eps);
// Upper bound on the clearing quantity, c(rho_bar, eps) q*(0,0,0).
double q_cap(const PriceModel& model, double eps);

// Unique root of Q - sum_i q*(eps, Q, phi_i) m_i. phi is indexed by mesh node
// like m (boundary entries are ignored since m vanishes there).
double market_clearing(const PriceModel& model, double eps, std::span<const double> phi,
                       const MeasureVector& m);

// Q - sum_i q*(eps, Q, phi_i) m_i.
double clearing_residual(const PriceModel& model, double eps, double Q, std::span<const double> phi,
                         const MeasureVector& m);

}  // namespace cmfg
