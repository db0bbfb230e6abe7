#pragma once

// Dosing economics: chemical costs, phosphorus tax and the penalty
// coefficient that scales them into the per-step reward.

#include <algorithm>
#include <cmath>
#include <string>

#include "wwtp/errors.hpp"
#include "wwtp/plant.hpp"
#include "wwtp/types.hpp"

namespace wwtp {

enum class PenaltyMode { linear, nonlinear };

inline const char* to_string(PenaltyMode m) { return m == PenaltyMode::linear ? "linear" : "nonlinear"; }

inline PenaltyMode penalty_mode_from_string(const std::string& s) {
  if (s == "linear") return PenaltyMode::linear;
  if (s == "nonlinear") return PenaltyMode::nonlinear;
  throw ConfigError("reward.penalty_mode must be 'linear' or 'nonlinear', got '" + s + "'");
}

struct RewardConfig {
  double pr_jsf = 0.20;    // DKK per litre
  double pr_pax = 3.54;    // DKK per litre
  double t_rate = 183.64;  // DKK per kg phosphorus
  double t_dose = 2.0;     // minutes per dosing step
  double x_ideal = 1.5;    // mg/L
  PenaltyMode penalty_mode = PenaltyMode::nonlinear;
  double a = 0.01;
  double z = 4.0;
  double c = 0.0;
  double d = -0.01;
  // Largest exponent z*x + c evaluated before the penalty saturates.
  double exponent_cap = 50.0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("reward.") + name + " must be > 0");
    };
    positive(pr_jsf, "pr_jsf");
    positive(pr_pax, "pr_pax");
    positive(t_rate, "t_rate");
    positive(t_dose, "t_dose");
    positive(x_ideal, "x_ideal");
    positive(exponent_cap, "exponent_cap");
    // P(0) = a e^c + d must vanish.
    const double at_zero = a * std::exp(c) + d;
    const double scale = std::max(std::abs(a * std::exp(c)), std::abs(d));
    if (std::abs(at_zero) > 1e-12 * std::max(scale, 1.0))
      throw ConfigError("reward: nonlinear parameters must satisfy a*exp(c) + d = 0");
  }
};

struct CostBreakdown {
  double c_jsf = 0.0;
  double c_pax = 0.0;
  double tax = 0.0;
  double total = 0.0;
  double m_p = 0.0;
  double p_coef = 0.0;
  double reward = 0.0;
  bool penalty_saturated = false;
};

inline double chemical_cost(double q, double price, double t_dose) {
  if (!(q >= 0.0)) throw DomainError("chemical_cost: negative or non-finite flow");
  return price * q * t_dose / 60.0;
}

inline double phosphorus_mass(double c_p, double q_w, double t_dose) {
  if (!(c_p >= 0.0)) throw DomainError("phosphorus_mass: negative or non-finite concentration");
  if (!(q_w > 0.0)) throw DomainError("phosphorus_mass: wastewater flow must be positive");
  return c_p * q_w * t_dose / 60000.0;
}

inline double tax(double m_p, double t_rate) { return t_rate * m_p; }

// As published: a negative coefficient outside the target band.
inline double penalty_linear(double x, double x_ideal, double tax_value) {
  if (x > 0.0 && x <= x_ideal) return 0.0;
  return -100.0 * tax_value;
}

struct PenaltyValue {
  double value = 0.0;
  bool saturated = false;
};

inline PenaltyValue penalty_nonlinear(double x, const RewardConfig& cfg) {
  double exponent = cfg.z * x + cfg.c;
  bool saturated = false;
  if (exponent > cfg.exponent_cap) {
    exponent = cfg.exponent_cap;
    saturated = true;
  }
  return {cfg.a * std::exp(exponent) + cfg.d, saturated};
}

inline CostBreakdown reward(const PlantState& state, const Action& action, const RewardConfig& cfg) {
  CostBreakdown out;
  out.c_jsf = chemical_cost(action.q_jsf, cfg.pr_jsf, cfg.t_dose);
  out.c_pax = chemical_cost(action.q_pax, cfg.pr_pax, cfg.t_dose);
  out.m_p = phosphorus_mass(state.c_p, state.q_w, cfg.t_dose);
  out.tax = tax(out.m_p, cfg.t_rate);
  out.total = out.c_jsf + out.c_pax + out.tax;
  if (cfg.penalty_mode == PenaltyMode::linear) {
    out.p_coef = penalty_linear(state.c_p, cfg.x_ideal, out.tax);
  } else {
    const auto p = penalty_nonlinear(state.c_p, cfg);
    out.p_coef = p.value;
    out.penalty_saturated = p.saturated;
  }
  out.reward = -out.total * (1.0 + out.p_coef);
  return out;
}

}  // namespace wwtp
