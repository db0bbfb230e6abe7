#pragma once

// Gym-style plant environment: observation assembly, action clipping,
// reward emission and the four episode schedules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wwtp/errors.hpp"
#include "wwtp/plant.hpp"
#include "wwtp/reward.hpp"
#include "wwtp/types.hpp"

namespace wwtp {

// ---------------------------------------------------------------------------
// Episode scheduling

enum class SchedulerMode { E1, E2, E3, E4 };

inline const char* to_string(SchedulerMode m) {
  switch (m) {
    case SchedulerMode::E1: return "E1";
    case SchedulerMode::E2: return "E2";
    case SchedulerMode::E3: return "E3";
    case SchedulerMode::E4: return "E4";
  }
  return "?";
}

inline SchedulerMode scheduler_mode_from_string(const std::string& s) {
  if (s == "E1") return SchedulerMode::E1;
  if (s == "E2") return SchedulerMode::E2;
  if (s == "E3") return SchedulerMode::E3;
  if (s == "E4") return SchedulerMode::E4;
  throw ConfigError("scheduler mode must be one of E1, E2, E3, E4; got '" + s + "'");
}

struct SchedulerConfig {
  SchedulerMode mode = SchedulerMode::E1;
  std::int64_t fixed_length = 288;
  std::int64_t length_min = 72;
  std::int64_t length_max = 576;
};

struct Episode {
  std::int64_t start = 0;
  std::int64_t length = 0;
};

// E1/E2 walk the timeline consecutively (wrapping to zero once the next
// episode would run past the horizon); E3/E4 start uniformly at random.
// E1/E3 use fixed_length; E2/E4 draw lengths uniformly from the range.
class EpisodeScheduler {
 public:
  EpisodeScheduler(SchedulerConfig cfg, std::int64_t horizon, std::uint64_t seed)
      : cfg_(cfg), horizon_(horizon), rng_(seed) {
    if (cfg_.length_min > cfg_.length_max)
      throw ConfigError("scheduler: length_range min " + std::to_string(cfg_.length_min) + " exceeds max " +
                        std::to_string(cfg_.length_max));
    if (cfg_.fixed_length <= 0 || cfg_.length_min <= 0)
      throw ConfigError("scheduler: episode lengths must be positive");
    if (horizon_ < max_length())
      throw ConfigError("scheduler: horizon " + std::to_string(horizon_) + " shorter than the longest episode");
  }

  Episode next() {
    Episode ep;
    ep.length = random_length() ? std::uniform_int_distribution<std::int64_t>(cfg_.length_min, cfg_.length_max)(rng_)
                                : cfg_.fixed_length;
    if (consecutive()) {
      if (cursor_ + ep.length > horizon_) cursor_ = 0;
      ep.start = cursor_;
      cursor_ += ep.length;
    } else {
      ep.start = std::uniform_int_distribution<std::int64_t>(0, horizon_ - ep.length)(rng_);
    }
    return ep;
  }

  void reseed(std::uint64_t seed) {
    rng_.seed(seed);
    cursor_ = 0;
  }

  bool consecutive() const { return cfg_.mode == SchedulerMode::E1 || cfg_.mode == SchedulerMode::E2; }
  bool random_length() const { return cfg_.mode == SchedulerMode::E2 || cfg_.mode == SchedulerMode::E4; }
  std::int64_t max_length() const { return random_length() ? cfg_.length_max : cfg_.fixed_length; }
  std::int64_t cursor() const { return cursor_; }
  std::int64_t horizon() const { return horizon_; }
  const SchedulerConfig& config() const { return cfg_; }

 private:
  SchedulerConfig cfg_;
  std::int64_t horizon_;
  Rng rng_;
  std::int64_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Observations

// Min-max bounds for the leading features of a raw observation. Features
// past bounds.size() (the sin/cos calendar block) pass through unchanged.
struct NormalizationBounds {
  std::vector<double> min{0.2, -0.6, -0.6, 0.0};
  std::vector<double> max{1.8, 0.6, 0.6, 4.0};

  std::size_t size() const { return min.size(); }

  void validate() const {
    if (min.size() != max.size()) throw ConfigError("normalization: min and max differ in length");
    for (std::size_t i = 0; i < min.size(); ++i) {
      if (!std::isfinite(min[i]) || !std::isfinite(max[i]) || !(min[i] < max[i]))
        throw ConfigError("normalization: bounds for feature " + std::to_string(i) + " must be finite with min < max");
    }
  }

  double denormalize(std::size_t i, double v) const { return min[i] + v * (max[i] - min[i]); }
};

inline std::vector<double> normalize(std::span<const double> raw, const NormalizationBounds& bounds) {
  if (bounds.size() > raw.size()) throw UsageError("normalize: more bounds than features");
  std::vector<double> out(raw.begin(), raw.end());
  for (std::size_t i = 0; i < bounds.size(); ++i)
    out[i] = std::clamp((raw[i] - bounds.min[i]) / (bounds.max[i] - bounds.min[i]), 0.0, 1.0);
  return out;
}

// Layout of the base observation vector.
struct ObservationLayout {
  static constexpr std::size_t kExogenous = 0;
  static constexpr std::size_t kPhosphate = kExogenousDim;
  static constexpr std::size_t kTime = kExogenousDim + 1;
  static constexpr std::size_t kDim = kExogenousDim + 1 + TimeFeatures::kDim;
};

inline std::vector<double> raw_observation(const PlantState& s, int steps_per_hour) {
  const TimeFeatures tf = encode_time(s.t, steps_per_hour);
  return {s.x_e[0], s.x_e[1], s.x_e[2], s.c_p, tf.sin_h, tf.cos_h, tf.sin_d, tf.cos_d, tf.sin_m, tf.cos_m};
}

// ---------------------------------------------------------------------------
// Environment

struct EnvConfig {
  SurrogateConfig plant;
  ExogenousConfig exogenous;
  RewardConfig reward;
  ActionBox action_box;
  NormalizationBounds bounds;
  SchedulerConfig scheduler;
  std::int64_t horizon = 30 * 24 * 30;  // timeline length in steps
  // Exogenous timeline seed; when unset the env seed is used.
  std::optional<std::uint64_t> exogenous_seed;

  void validate() const {
    plant.validate();
    exogenous.validate();
    reward.validate();
    bounds.validate();
    if (bounds.size() != ObservationLayout::kPhosphate + 1)
      throw ConfigError("normalization: expected bounds for the exogenous features and c_p");
    if (!(action_box.q_max_jsf > 0.0 && action_box.q_max_pax > 0.0))
      throw ConfigError("action box limits must be > 0");
    if (horizon <= 0) throw ConfigError("env.horizon must be positive");
    // steps_per_hour must agree with the dosing period.
    if (std::abs(exogenous.steps_per_hour * reward.t_dose - 60.0) > 1e-9)
      throw ConfigError("exogenous.steps_per_hour * reward.t_dose must equal 60 minutes");
  }
};

struct StepInfo {
  CostBreakdown cost;
  double c_p = 0.0;  // ground truth after the step
  double q_w = 0.0;
  Exogenous x_e{};
  Action applied;     // action the plant received (after clipping and delay)
  bool clipped = false;
  std::int64_t clip_events = 0;  // cumulative within the episode
  std::int64_t t = 0;            // timeline index after the step
  std::int64_t episode_step = 0;
  std::vector<int> kappa;  // realised action delay(s); empty without a delay wrapper
  int omega = 0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
  // Set by vectorised pools when an episode ended and observation already
  // holds the next episode's first observation.
  std::vector<double> final_observation;
};

class PlantEnv {
 public:
  PlantEnv(EnvConfig cfg, std::uint64_t seed, std::unique_ptr<PlantModel> model = nullptr)
      : cfg_(std::move(cfg)),
        model_(model ? std::move(model) : std::make_unique<SurrogatePlant>(cfg_.plant)),
        scheduler_((cfg_.validate(), cfg_.scheduler), cfg_.horizon, seed),
        series_(cfg_.exogenous, cfg_.exogenous_seed.value_or(seed), cfg_.horizon + 1),
        rng_(seed ^ 0x9E3779B97F4A7C15ULL) {}

  PlantEnv(const PlantEnv& other)
      : cfg_(other.cfg_),
        model_(other.model_->clone()),
        scheduler_(other.scheduler_),
        series_(other.series_),
        rng_(other.rng_),
        state_(other.state_),
        episode_(other.episode_),
        steps_taken_(other.steps_taken_),
        clip_events_(other.clip_events_),
        active_(other.active_) {}
  PlantEnv(PlantEnv&&) noexcept = default;
  PlantEnv& operator=(PlantEnv&&) noexcept = default;

  std::vector<double> reset() {
    episode_ = scheduler_.next();
    state_ = model_->reset(rng_(), episode_.start, series_.at(episode_.start));
    steps_taken_ = 0;
    clip_events_ = 0;
    active_ = true;
    return observe(state_);
  }

  std::vector<double> reset(std::uint64_t seed) {
    scheduler_.reseed(seed);
    rng_.seed(seed ^ 0x9E3779B97F4A7C15ULL);
    return reset();
  }

  StepResult step(const Action& action) {
    if (!active_) throw UsageError(steps_taken_ > 0 ? "step called after episode end" : "step called before reset");
    if (!action.finite()) throw DomainError("step: non-finite action");
    const Action applied = cfg_.action_box.clip(action);
    const bool clipped = !(applied == action);
    if (clipped) ++clip_events_;

    state_ = model_->step(state_, applied, series_.at(state_.t + 1));
    ++steps_taken_;

    StepResult r;
    r.info.cost = wwtp::reward(state_, applied, cfg_.reward);
    r.reward = r.info.cost.reward;
    r.done = steps_taken_ >= episode_.length;
    r.observation = observe(state_);
    r.info.c_p = state_.c_p;
    r.info.q_w = state_.q_w;
    r.info.x_e = state_.x_e;
    r.info.applied = applied;
    r.info.clipped = clipped;
    r.info.clip_events = clip_events_;
    r.info.t = state_.t;
    r.info.episode_step = steps_taken_;
    if (r.done) active_ = false;
    return r;
  }

  std::vector<double> observe(const PlantState& s) const {
    return normalize(raw_observation(s, cfg_.exogenous.steps_per_hour), cfg_.bounds);
  }

  static constexpr std::size_t observation_dim() { return ObservationLayout::kDim; }
  const EnvConfig& config() const { return cfg_; }
  const ActionBox& action_box() const { return cfg_.action_box; }
  const PlantState& state() const { return state_; }
  const Episode& episode() const { return episode_; }
  const ExogenousSeries& exogenous() const { return series_; }
  const PlantModel& model() const { return *model_; }
  bool active() const { return active_; }
  std::int64_t steps_taken() const { return steps_taken_; }

 private:
  EnvConfig cfg_;
  std::unique_ptr<PlantModel> model_;
  EpisodeScheduler scheduler_;
  ExogenousSeries series_;
  Rng rng_;
  PlantState state_;
  Episode episode_;
  std::int64_t steps_taken_ = 0;
  std::int64_t clip_events_ = 0;
  bool active_ = false;
};

}  // namespace wwtp
