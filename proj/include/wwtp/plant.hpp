#pragma once

// Plant dynamics behind a pluggable interface, exogenous disturbance
// generation and cyclical calendar features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "wwtp/errors.hpp"
#include "wwtp/types.hpp"

namespace wwtp {

struct PlantState {
  double c_p = 0.0;  // effluent phosphate, mg/L
  double q_w = 0.0;  // wastewater flow, m3/h
  Exogenous x_e{};
  // Surrogate internal state. For SurrogatePlant: [bio-tank phosphate,
  // JSF dose pipeline (oldest first)..., surge steps left, surge level,
  // surge key].
  std::vector<double> latent;
  std::int64_t t = 0;

  bool valid() const {
    if (!(std::isfinite(c_p) && c_p >= 0.0)) return false;
    if (!(std::isfinite(q_w) && q_w > 0.0)) return false;
    for (double v : x_e)
      if (!std::isfinite(v)) return false;
    for (double v : latent)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const PlantState&, const PlantState&) = default;
};

// ---------------------------------------------------------------------------
// Calendar features

struct TimeFeatures {
  double sin_h = 0.0, cos_h = 1.0;
  double sin_d = 0.0, cos_d = 1.0;
  double sin_m = 0.0, cos_m = 1.0;

  static constexpr std::size_t kDim = 6;
};

// Hour of day is continuous (fractional hours); day of week and month of
// year are integer calendar indices. The timeline starts at midnight on the
// first day of a 365-day year.
inline TimeFeatures encode_time(std::int64_t t, int steps_per_hour) {
  if (t < 0) throw UsageError("encode_time: negative step index");
  if (steps_per_hour <= 0) throw UsageError("encode_time: steps_per_hour must be positive");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const std::int64_t steps_per_day = 24LL * steps_per_hour;
  const double hour = static_cast<double>(t % steps_per_day) / steps_per_hour;
  const std::int64_t day_index = t / steps_per_day;
  const double day = static_cast<double>(day_index % 7);
  const double month = static_cast<double>(((day_index % 365) * 12) / 365);
  TimeFeatures f;
  f.sin_h = std::sin(two_pi * hour / 24.0);
  f.cos_h = std::cos(two_pi * hour / 24.0);
  f.sin_d = std::sin(two_pi * day / 7.0);
  f.cos_d = std::cos(two_pi * day / 7.0);
  f.sin_m = std::sin(two_pi * month / 12.0);
  f.cos_m = std::cos(two_pi * month / 12.0);
  return f;
}

// ---------------------------------------------------------------------------
// Exogenous disturbances

// Each component k is
//   baseline[k] + diurnal_amp[k] sin(2 pi t / day + diurnal_phase[k])
//               + weekly_amp[k]  sin(2 pi t / week + weekly_phase[k]) + n_k(t)
// where n_k is a stationary AR(1) process with standard deviation
// noise_amplitude * baseline_load.
struct ExogenousConfig {
  int steps_per_hour = 30;
  double baseline_load = 1.0;
  Exogenous baseline{1.0, 0.0, 0.0};
  Exogenous diurnal_amp{0.3, 0.15, 0.05};
  Exogenous diurnal_phase{-1.2, -0.8, 0.0};
  Exogenous weekly_amp{0.0, 0.1, 0.4};
  Exogenous weekly_phase{0.0, 0.5, 0.0};
  double noise_amplitude = 0.1;
  double noise_autocorrelation = 0.98;

  void validate() const {
    if (steps_per_hour <= 0) throw ConfigError("exogenous.steps_per_hour must be positive");
    if (!(noise_amplitude >= 0.0)) throw ConfigError("exogenous.noise_amplitude must be >= 0");
    if (!(noise_autocorrelation >= 0.0 && noise_autocorrelation < 1.0))
      throw ConfigError("exogenous.noise_autocorrelation must lie in [0, 1)");
  }
};

// Sequential generator; the k-th call to next() yields the vector for t = k.
class ExogenousGenerator {
 public:
  ExogenousGenerator(const ExogenousConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
    cfg_.validate();
  }

  Exogenous next() {
    const double sigma = cfg_.noise_amplitude * cfg_.baseline_load;
    const double phi = cfg_.noise_autocorrelation;
    if (t_ == 0) {
      for (auto& n : noise_) n = sigma * normal_(rng_);
    } else {
      const double innovation = sigma * std::sqrt(1.0 - phi * phi);
      for (auto& n : noise_) n = phi * n + innovation * normal_(rng_);
    }
    Exogenous x = deterministic_part(cfg_, t_);
    for (std::size_t k = 0; k < kExogenousDim; ++k) x[k] += noise_[k];
    ++t_;
    return x;
  }

  static Exogenous deterministic_part(const ExogenousConfig& cfg, std::int64_t t) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double day = 24.0 * cfg.steps_per_hour;
    const double week = 7.0 * day;
    const double td = static_cast<double>(t);
    Exogenous x{};
    for (std::size_t k = 0; k < kExogenousDim; ++k) {
      x[k] = cfg.baseline[k] +
             cfg.diurnal_amp[k] * std::sin(two_pi * td / day + cfg.diurnal_phase[k]) +
             cfg.weekly_amp[k] * std::sin(two_pi * td / week + cfg.weekly_phase[k]);
    }
    return x;
  }

 private:
  ExogenousConfig cfg_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Exogenous noise_{};
  std::int64_t t_ = 0;
};

// Random access by (t, seed). Replays the noise recursion from t = 0, so
// prefer ExogenousSeries for bulk access.
inline Exogenous generate_exogenous(std::int64_t t, std::uint64_t seed,
                                    const ExogenousConfig& cfg = {}) {
  if (t < 0) throw UsageError("generate_exogenous: negative step index");
  ExogenousGenerator gen(cfg, seed);
  Exogenous x{};
  for (std::int64_t i = 0; i <= t; ++i) x = gen.next();
  return x;
}

// Precomputed timeline standing in for a plant's historical record.
class ExogenousSeries {
 public:
  ExogenousSeries() = default;
  ExogenousSeries(const ExogenousConfig& cfg, std::uint64_t seed, std::int64_t length) {
    if (length <= 0) throw ConfigError("exogenous series length must be positive");
    ExogenousGenerator gen(cfg, seed);
    values_.reserve(static_cast<std::size_t>(length));
    for (std::int64_t i = 0; i < length; ++i) values_.push_back(gen.next());
  }

  const Exogenous& at(std::int64_t t) const {
    if (t < 0 || t >= size()) throw UsageError("exogenous series index out of range");
    return values_[static_cast<std::size_t>(t)];
  }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }

 private:
  std::vector<Exogenous> values_;
};

// ---------------------------------------------------------------------------
// Plant models

// Deterministic plant dynamics. Implementations must be stateless apart from
// their parameters so a single instance can be shared read-only.
class PlantModel {
 public:
  virtual ~PlantModel() = default;
  virtual PlantState reset(std::uint64_t seed, std::int64_t t, const Exogenous& x_e) const = 0;
  virtual PlantState step(const PlantState& state, const Action& action,
                          const Exogenous& x_e_next) const = 0;
  virtual std::unique_ptr<PlantModel> clone() const = 0;
};

struct SurrogateConfig {
  double influent_p = 2.5;      // undosed influent phosphate at unit load, mg/L
  double q_w_ref = 600.0;       // nominal wastewater flow, m3/h
  double q_w_min = 60.0;
  double bio_rate = 0.05;       // bio tank exchange fraction per step at nominal flow
  double clarifier_rate = 0.1;  // effluent exchange fraction per step at nominal flow
  double jsf_max_removal = 0.15;
  double jsf_half_dose = 100.0;  // L/h at half the maximum removal
  double pax_max_removal = 0.4;
  double pax_half_dose = 40.0;
  double temperature_coef = 0.1;
  int jsf_lag = 3;  // extra steps before JSF reaches the bio tank
  double nominal_jsf = 150.0;
  double nominal_pax = 20.0;
  double initial_jitter = 0.1;  // relative spread of the initial state
  // Unmeasured influent surges (side-stream returns): each step a surge
  // starts with this probability while none is active, raises the influent
  // concentration by a relative level drawn from magnitude * [1 - spread,
  // 1 + spread] and lasts a uniform number of steps.
  double surge_start_prob = 0.0;
  double surge_magnitude = 1.0;
  double surge_spread = 0.5;
  int surge_min_steps = 30;
  int surge_max_steps = 120;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("plant.") + name + " must be > 0");
    };
    positive(influent_p, "influent_p");
    positive(q_w_ref, "q_w_ref");
    positive(q_w_min, "q_w_min");
    positive(jsf_half_dose, "jsf_half_dose");
    positive(pax_half_dose, "pax_half_dose");
    auto fraction = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 0.5)) throw ConfigError(std::string("plant.") + name + " must lie in [0, 0.5]");
    };
    fraction(bio_rate, "bio_rate");
    fraction(clarifier_rate, "clarifier_rate");
    fraction(jsf_max_removal, "jsf_max_removal");
    fraction(pax_max_removal, "pax_max_removal");
    if (jsf_lag < 0) throw ConfigError("plant.jsf_lag must be >= 0");
    if (nominal_jsf < 0.0 || nominal_pax < 0.0) throw ConfigError("plant nominal doses must be >= 0");
    if (!(initial_jitter >= 0.0 && initial_jitter < 1.0))
      throw ConfigError("plant.initial_jitter must lie in [0, 1)");
    if (!(surge_start_prob >= 0.0 && surge_start_prob <= 1.0))
      throw ConfigError("plant.surge_start_prob must lie in [0, 1]");
    if (!(surge_magnitude >= 0.0) || !std::isfinite(surge_magnitude))
      throw ConfigError("plant.surge_magnitude must be >= 0");
    if (!(surge_spread >= 0.0 && surge_spread <= 1.0)) throw ConfigError("plant.surge_spread must lie in [0, 1]");
    if (surge_min_steps < 1 || surge_min_steps > surge_max_steps)
      throw ConfigError("plant: need 1 <= surge_min_steps <= surge_max_steps");
  }

  std::size_t latent_size() const { return 1 + static_cast<std::size_t>(jsf_lag) + 3; }
};

// Uniform in [0, 1) from a key and two counters.
inline double hashed_uniform(std::uint64_t key, std::int64_t t, std::uint64_t stream) {
  std::uint64_t z = key ^ (static_cast<std::uint64_t>(t) * 0x9E3779B97F4A7C15ULL) ^ (stream * 0xD1B54A32D192ED03ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

// Two-compartment first-order mass balance. Influent phosphorus enters the
// bio tank; JSF precipitates there after jsf_lag steps. The effluent
// compartment mixes with the bio tank and PAX precipitates within the step.
// Removal per chemical saturates as e_max * q / (q + K).
class SurrogatePlant final : public PlantModel {
 public:
  explicit SurrogatePlant(SurrogateConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const SurrogateConfig& config() const { return cfg_; }

  double influent_concentration(const Exogenous& x) const { return cfg_.influent_p * std::max(x[0], 0.0); }
  double flow(const Exogenous& x) const { return std::max(cfg_.q_w_min, cfg_.q_w_ref * (1.0 + x[1])); }

  double jsf_removal(double q, const Exogenous& x) const {
    return removal(cfg_.jsf_max_removal, cfg_.jsf_half_dose, q, x, bio_exchange(x));
  }
  double pax_removal(double q, const Exogenous& x) const {
    return removal(cfg_.pax_max_removal, cfg_.pax_half_dose, q, x, clarifier_exchange(x));
  }
  double bio_exchange(const Exogenous& x) const {
    return std::min(0.5, cfg_.bio_rate * flow(x) / cfg_.q_w_ref);
  }
  double clarifier_exchange(const Exogenous& x) const {
    return std::min(0.5, cfg_.clarifier_rate * flow(x) / cfg_.q_w_ref);
  }

  // Fixed point of the mass balance under constant exogenous input and doses.
  std::pair<double, double> steady_state(const Exogenous& x, const Action& a) const {
    const double kb = bio_exchange(x), kc = clarifier_exchange(x);
    const double b = kb * influent_concentration(x) / (kb + jsf_removal(a.q_jsf, x));
    const double c = kc * b / (kc + pax_removal(a.q_pax, x));
    return {b, c};
  }

  PlantState reset(std::uint64_t seed, std::int64_t t, const Exogenous& x_e) const override {
    Rng rng(seed);
    std::uniform_real_distribution<double> jitter(1.0 - cfg_.initial_jitter, 1.0 + cfg_.initial_jitter);
    const Action nominal{cfg_.nominal_jsf, cfg_.nominal_pax};
    auto [b, c] = steady_state(x_e, nominal);
    PlantState s;
    s.x_e = x_e;
    s.q_w = flow(x_e);
    s.latent.assign(cfg_.latent_size(), cfg_.nominal_jsf);
    s.latent[0] = b * jitter(rng);
    s.latent[surge_index()] = 0.0;
    s.latent[surge_index() + 1] = 0.0;
    // Kept below 2^53 so the key survives storage as a double.
    s.latent[surge_index() + 2] = static_cast<double>(rng() >> 11);
    s.c_p = c * jitter(rng);
    s.t = t;
    return s;
  }

  PlantState step(const PlantState& state, const Action& action, const Exogenous& x_next) const override {
    if (!action.finite()) throw DomainError("surrogate_step: non-finite action");
    if (!state.valid()) throw DomainError("surrogate_step: invalid plant state");
    for (double v : x_next)
      if (!std::isfinite(v)) throw DomainError("surrogate_step: non-finite exogenous input");
    if (state.latent.size() != cfg_.latent_size())
      throw DomainError("surrogate_step: latent state has the wrong length");
    if (action.q_jsf < 0.0 || action.q_pax < 0.0) throw DomainError("surrogate_step: negative dose");

    PlantState next;
    next.x_e = x_next;
    next.t = state.t + 1;
    next.q_w = flow(x_next);
    next.latent = state.latent;

    double jsf_effective = action.q_jsf;
    if (cfg_.jsf_lag > 0) {
      const auto first = next.latent.begin() + 1;
      const auto last = first + cfg_.jsf_lag;
      jsf_effective = *first;
      std::rotate(first, first + 1, last);
      *(last - 1) = action.q_jsf;
    }
    advance_surge(next.latent, next.t);

    const double c_in = influent_concentration(x_next) * (1.0 + next.latent[surge_index() + 1]);
    const double kb = bio_exchange(x_next);
    const double kc = clarifier_exchange(x_next);
    const double bio = state.latent[0];
    const double bio_next = std::max(0.0, bio + kb * (c_in - bio) - jsf_removal(jsf_effective, x_next) * bio);
    const double c_next =
        std::max(0.0, state.c_p + kc * (bio_next - state.c_p) - pax_removal(action.q_pax, x_next) * state.c_p);
    next.latent[0] = bio_next;
    next.c_p = c_next;
    return next;
  }

  // Relative influent surge active at the state's step (0 when none).
  double surge_level(const PlantState& s) const { return s.latent.at(surge_index() + 1); }

  std::unique_ptr<PlantModel> clone() const override { return std::make_unique<SurrogatePlant>(*this); }

 private:
  // The exchange term plus removal never exceeds one so each compartment
  // update stays a convex combination (monotone, non-negative).
  double removal(double e_max, double half, double q, const Exogenous& x, double exchange) const {
    const double temperature = std::max(0.0, 1.0 + cfg_.temperature_coef * x[2]);
    const double e = temperature * e_max * q / (q + half);
    return std::min(e, 1.0 - exchange);
  }

  std::size_t surge_index() const { return 1 + static_cast<std::size_t>(cfg_.jsf_lag); }

  void advance_surge(std::vector<double>& latent, std::int64_t t) const {
    double& left = latent[surge_index()];
    double& level = latent[surge_index() + 1];
    const auto key = static_cast<std::uint64_t>(latent[surge_index() + 2]);
    if (left > 0.0) {
      left -= 1.0;
      return;
    }
    level = 0.0;
    if (hashed_uniform(key, t, 0) >= cfg_.surge_start_prob) return;
    // A surge started at t stays active for `steps` steps including t.
    const int span = cfg_.surge_max_steps - cfg_.surge_min_steps + 1;
    const int steps = cfg_.surge_min_steps + std::min(span - 1, static_cast<int>(hashed_uniform(key, t, 1) * span));
    left = static_cast<double>(steps - 1);
    level = cfg_.surge_magnitude * (1.0 + cfg_.surge_spread * (2.0 * hashed_uniform(key, t, 2) - 1.0));
  }

  SurrogateConfig cfg_;
};

inline PlantState surrogate_step(const PlantState& state, const Action& action, const Exogenous& x_e_next,
                                 const SurrogateConfig& cfg = {}) {
  return SurrogatePlant(cfg).step(state, action, x_e_next);
}

}  // namespace wwtp
