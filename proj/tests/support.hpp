#pragma once

// Independent oracles and small fixtures shared by the unit and acceptance
// suites. Nothing here calls the code it is used to check.

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "wwtp/delay.hpp"
#include "wwtp/env.hpp"
#include "wwtp/nn.hpp"

namespace wwtp::testing {

// ---------------------------------------------------------------------------
// Reward oracle, written out in one pass with no shared helpers.

struct OracleInput {
  double q_jsf, q_pax, c_p, q_w;
  double pr_jsf, pr_pax, t_rate, t_dose;
  double a, z, c, d;
};

inline double oracle_reward(const OracleInput& in) {
  const double cost_jsf = in.pr_jsf * in.q_jsf * in.t_dose / 60.0;
  const double cost_pax = in.pr_pax * in.q_pax * in.t_dose / 60.0;
  const double mass_kg = in.c_p * in.q_w * in.t_dose / 60000.0;
  const double tax_value = in.t_rate * mass_kg;
  const double penalty = in.a * std::exp(in.z * in.c_p + in.c) + in.d;
  return -(cost_jsf + cost_pax + tax_value) * (1.0 + penalty);
}

inline double relative_error(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// ---------------------------------------------------------------------------
// Chi-square goodness of fit against a discrete uniform law on [lo, hi].

struct ChiSquare {
  double statistic = 0.0;
  double critical = 0.0;
  bool pass() const { return statistic <= critical; }
};

inline ChiSquare chi_square_uniform(const std::vector<std::int64_t>& draws, std::int64_t lo, std::int64_t hi,
                                    double significance = 0.01) {
  std::map<std::int64_t, double> counts;
  for (auto v : draws) counts[v] += 1.0;
  const double k = static_cast<double>(hi - lo + 1);
  const double expected = static_cast<double>(draws.size()) / k;
  ChiSquare out;
  for (std::int64_t v = lo; v <= hi; ++v) {
    const double o = counts.count(v) ? counts[v] : 0.0;
    out.statistic += (o - expected) * (o - expected) / expected;
  }
  boost::math::chi_squared dist(k - 1.0);
  out.critical = boost::math::quantile(boost::math::complement(dist, significance));
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

// Sign pattern of every hidden pre-activation, used to spot perturbations
// that cross a ReLU kink.
inline std::vector<bool> relu_pattern(const nn::Mlp& net, const nn::Matrix& x) {
  nn::Tape tape;
  net.forward(x, tape);
  std::vector<bool> out;
  for (std::size_t l = 0; l + 1 < tape.pre.size(); ++l)
    for (Eigen::Index i = 0; i < tape.pre[l].size(); ++i) out.push_back(tape.pre[l].data()[i] > 0.0);
  return out;
}

// Largest per-coordinate relative error between analytic gradients and
// central differences of loss(net) over every stride-th parameter. When
// pattern is given, coordinates whose +-h perturbation changes it are
// skipped, since the difference quotient straddles a kink there.
inline double max_fd_error(nn::Mlp& net, const nn::Gradients& analytic, const std::function<double()>& loss,
                           double h = 1e-5, Eigen::Index stride = 1,
                           const std::function<std::vector<bool>()>& pattern = nullptr) {
  const auto base = pattern ? pattern() : std::vector<bool>{};
  double worst = 0.0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto check = [&](double* p, const double* g, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; i += stride) {
        const double saved = p[i];
        p[i] = saved + h;
        const double up = loss();
        const bool kink_up = pattern && pattern() != base;
        p[i] = saved - h;
        const double down = loss();
        const bool kink_down = pattern && pattern() != base;
        p[i] = saved;
        if (kink_up || kink_down) continue;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(fd - g[i]) / std::max({1e-6, std::abs(fd), std::abs(g[i])});
        // Coordinates with tiny gradients carry pure rounding noise.
        if (std::abs(fd - g[i]) > 1e-8) worst = std::max(worst, err);
      }
    };
    check(net.layers()[l].weight.data(), analytic[l].weight.data(), net.layers()[l].weight.size());
    check(net.layers()[l].bias.data(), analytic[l].bias.data(), net.layers()[l].bias.size());
  }
  return worst;
}

// Density of a = tanh(u), u ~ N(mu, sigma^2), evaluated directly.
inline double squashed_density(double a, double mu, double sigma) {
  const double u = std::atanh(a);
  const double z = (u - mu) / sigma;
  const double normal = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
  return normal / (1.0 - a * a);
}

// Simpson's rule on [lo, hi] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// ---------------------------------------------------------------------------
// Fixtures

inline EnvConfig small_env(SchedulerMode mode = SchedulerMode::E1, std::int64_t length = 50) {
  EnvConfig cfg;
  cfg.scheduler.mode = mode;
  cfg.scheduler.fixed_length = length;
  cfg.scheduler.length_min = 20;
  cfg.scheduler.length_max = 80;
  cfg.horizon = 2000;
  return cfg;
}

inline DelayConfig constant_delay(int kappa, int omega, std::uint64_t seed = 3) {
  DelayConfig d;
  d.mode = DelayMode::constant;
  d.kappa_min = d.kappa_max = kappa;
  d.omega_min = d.omega_max = omega;
  d.seed = seed;
  return d;
}

inline DelayConfig random_delay(int kmax = 5, int omax = 5, std::uint64_t seed = 3) {
  DelayConfig d;
  d.mode = DelayMode::random;
  d.kappa_max = kmax;
  d.omega_max = omax;
  d.seed = seed;
  return d;
}

inline std::vector<Action> random_actions(std::size_t n, std::uint64_t seed, const ActionBox& box = {}) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Action> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double j = u(rng) * box.q_max_jsf;
    out.push_back({j, u(rng) * box.q_max_pax});
  }
  return out;
}

}  // namespace wwtp::testing
