#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>

namespace wwtp {

using Rng = std::mt19937_64;

// Number of exogenous features: influent load proxy, flow disturbance,
// temperature proxy.
inline constexpr std::size_t kExogenousDim = 3;
using Exogenous = std::array<double, kExogenousDim>;

// Dosing flow rates in L/h for the two precipitants.
struct Action {
  double q_jsf = 0.0;
  double q_pax = 0.0;

  static constexpr std::size_t kDim = 2;

  double operator[](std::size_t i) const { return i == 0 ? q_jsf : q_pax; }
  double& operator[](std::size_t i) { return i == 0 ? q_jsf : q_pax; }

  bool finite() const { return std::isfinite(q_jsf) && std::isfinite(q_pax); }

  friend bool operator==(const Action&, const Action&) = default;
};

// Upper pump limits per dosing channel; the lower limit is always zero.
struct ActionBox {
  double q_max_jsf = 300.0;
  double q_max_pax = 200.0;

  double max(std::size_t channel) const { return channel == 0 ? q_max_jsf : q_max_pax; }

  Action clip(const Action& a) const {
    return {std::clamp(a.q_jsf, 0.0, q_max_jsf), std::clamp(a.q_pax, 0.0, q_max_pax)};
  }

  bool contains(const Action& a) const {
    return a.q_jsf >= 0.0 && a.q_jsf <= q_max_jsf && a.q_pax >= 0.0 && a.q_pax <= q_max_pax;
  }

  // Maps a normalized action in [-1, 1]^2 to dose units.
  Action from_unit(double u_jsf, double u_pax) const {
    return clip({(u_jsf + 1.0) * 0.5 * q_max_jsf, (u_pax + 1.0) * 0.5 * q_max_pax});
  }

  std::array<double, 2> to_unit(const Action& a) const {
    return {2.0 * a.q_jsf / q_max_jsf - 1.0, 2.0 * a.q_pax / q_max_pax - 1.0};
  }
};

}  // namespace wwtp
