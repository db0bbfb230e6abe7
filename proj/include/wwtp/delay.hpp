#pragma once

// Constant and random action/observation delays with an action buffer
// appended to the observation.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wwtp/env.hpp"
#include "wwtp/errors.hpp"
#include "wwtp/types.hpp"

namespace wwtp {

enum class DelayMode { none, constant, random };

inline const char* to_string(DelayMode m) {
  switch (m) {
    case DelayMode::none: return "none";
    case DelayMode::constant: return "constant";
    case DelayMode::random: return "random";
  }
  return "?";
}

// Short scenario tags used on the command line and in checkpoints.
inline const char* scenario_tag(DelayMode m) {
  switch (m) {
    case DelayMode::none: return "nd";
    case DelayMode::constant: return "cd";
    case DelayMode::random: return "rd";
  }
  return "?";
}

inline DelayMode delay_mode_from_string(const std::string& s) {
  if (s == "none" || s == "nd") return DelayMode::none;
  if (s == "constant" || s == "cd") return DelayMode::constant;
  if (s == "random" || s == "rd") return DelayMode::random;
  throw ConfigError("delay mode must be one of nd|cd|rd (none|constant|random); got '" + s + "'");
}

struct DelayConfig {
  DelayMode mode = DelayMode::none;
  int kappa_min = 0;
  int kappa_max = 0;
  int omega_min = 0;
  int omega_max = 0;
  bool per_channel = false;
  // Clamp kappa_t <= kappa_{t-1} + 1 so no action overtakes an older one.
  bool enforce_ordering = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (kappa_min < 0 || kappa_min > kappa_max) throw ConfigError("delay: need 0 <= kappa_min <= kappa_max");
    if (omega_min < 0 || omega_min > omega_max) throw ConfigError("delay: need 0 <= omega_min <= omega_max");
    if (mode == DelayMode::none && (kappa_max != 0 || omega_max != 0))
      throw ConfigError("delay: mode none requires all delay bounds to be 0");
  }

  std::size_t buffer_capacity() const { return static_cast<std::size_t>(kappa_max + omega_max); }
  std::size_t kappa_channels() const { return per_channel ? Action::kDim : 1; }
  // Zero bounds in any mode leave the observation untouched.
  bool augments() const { return mode != DelayMode::none && (kappa_max > 0 || omega_max > 0); }

  // Same ranges with a different mode; none zeroes the bounds.
  DelayConfig with_mode(DelayMode m) const {
    DelayConfig out = *this;
    out.mode = m;
    if (m == DelayMode::none) out.kappa_min = out.kappa_max = out.omega_min = out.omega_max = 0;
    return out;
  }
};

struct DelayDraw {
  std::vector<int> kappa;  // one entry, or one per dose channel
  int omega = 0;
};

inline DelayDraw sample_delays(const DelayConfig& cfg, Rng& rng) {
  DelayDraw d;
  d.kappa.assign(cfg.kappa_channels(), 0);
  switch (cfg.mode) {
    case DelayMode::none:
      break;
    case DelayMode::constant:
      std::fill(d.kappa.begin(), d.kappa.end(), cfg.kappa_max);
      d.omega = cfg.omega_max;
      break;
    case DelayMode::random: {
      std::uniform_int_distribution<int> kappa_dist(cfg.kappa_min, cfg.kappa_max);
      std::uniform_int_distribution<int> omega_dist(cfg.omega_min, cfg.omega_max);
      for (auto& k : d.kappa) k = kappa_dist(rng);
      d.omega = omega_dist(rng);
      break;
    }
  }
  return d;
}

// Ring of the most recent actions, oldest first. Slots not yet written hold
// the neutral (zero-dose) action.
class ActionBuffer {
 public:
  explicit ActionBuffer(std::size_t capacity = 0) : slots_(capacity, Action{}) {}

  void push(const Action& a) {
    if (slots_.empty()) return;
    slots_.pop_front();
    slots_.push_back(a);
    ++pushes_;
  }

  void clear() {
    std::fill(slots_.begin(), slots_.end(), Action{});
    pushes_ = 0;
  }

  std::size_t capacity() const { return slots_.size(); }
  std::size_t neutral_slots() const { return pushes_ >= capacity() ? 0 : capacity() - pushes_; }
  const Action& operator[](std::size_t i) const { return slots_[i]; }
  auto begin() const { return slots_.begin(); }
  auto end() const { return slots_.end(); }

 private:
  std::deque<Action> slots_;
  std::size_t pushes_ = 0;
};

// Layout: [base..., kappa/kappa_max (per channel when enabled),
// omega/omega_max, buffer (oldest -> newest, each dose / q_max)].
inline std::vector<double> augment(std::span<const double> base, const DelayDraw& delays, const ActionBuffer& buffer,
                                   const DelayConfig& cfg, const ActionBox& box) {
  std::vector<double> out(base.begin(), base.end());
  if (!cfg.augments()) return out;
  out.reserve(base.size() + cfg.kappa_channels() + 1 + buffer.capacity() * Action::kDim);
  for (int k : delays.kappa) out.push_back(cfg.kappa_max > 0 ? static_cast<double>(k) / cfg.kappa_max : 0.0);
  out.push_back(cfg.omega_max > 0 ? static_cast<double>(delays.omega) / cfg.omega_max : 0.0);
  for (const Action& a : buffer) {
    out.push_back(a.q_jsf / box.q_max_jsf);
    out.push_back(a.q_pax / box.q_max_pax);
  }
  return out;
}

inline std::size_t augmented_dim(std::size_t base_dim, const DelayConfig& cfg) {
  if (!cfg.augments()) return base_dim;
  return base_dim + cfg.kappa_channels() + 1 + cfg.buffer_capacity() * Action::kDim;
}

// Inverse of augment.
struct DelayedObservationView {
  std::vector<double> base;
  std::vector<int> kappa;
  int omega = 0;
  std::vector<double> buffer;
};

inline DelayedObservationView deaugment(std::span<const double> obs, std::size_t base_dim, const DelayConfig& cfg) {
  if (obs.size() != augmented_dim(base_dim, cfg)) throw UsageError("deaugment: observation has the wrong length");
  DelayedObservationView v;
  v.base.assign(obs.begin(), obs.begin() + static_cast<std::ptrdiff_t>(base_dim));
  if (!cfg.augments()) return v;
  std::size_t i = base_dim;
  for (std::size_t c = 0; c < cfg.kappa_channels(); ++c)
    v.kappa.push_back(static_cast<int>(std::lround(obs[i++] * cfg.kappa_max)));
  v.omega = static_cast<int>(std::lround(obs[i++] * cfg.omega_max));
  v.buffer.assign(obs.begin() + static_cast<std::ptrdiff_t>(i), obs.end());
  return v;
}

// Deque addressed by absolute index, discarding entries older than a window.
template <class T>
class IndexedHistory {
 public:
  void clear() {
    items_.clear();
    first_ = 0;
  }
  void push(T v) { items_.push_back(std::move(v)); }
  std::int64_t end_index() const { return first_ + static_cast<std::int64_t>(items_.size()); }
  const T& at(std::int64_t index) const {
    if (index < first_ || index >= end_index()) throw UsageError("history index outside the retained window");
    return items_[static_cast<std::size_t>(index - first_)];
  }
  void keep_last(std::size_t n) {
    while (items_.size() > n) {
      items_.pop_front();
      ++first_;
    }
  }

 private:
  std::deque<T> items_;
  std::int64_t first_ = 0;
};

// Wraps an environment with per-step action and observation delays.
//
// At step t the agent's action is pushed to the buffer and the inner env
// receives the action issued kappa_t steps earlier (zero dose before the
// episode start). The returned base observation is the inner observation
// from omega_t steps earlier (the initial one before the start) and the
// reward is the inner reward that produced that observation (zero for the
// initial observation).
template <class Env>
class DelayedEnv {
 public:
  DelayedEnv(Env inner, DelayConfig cfg)
      : inner_(std::move(inner)), cfg_((cfg.validate(), cfg)), rng_(cfg.seed), buffer_(cfg.buffer_capacity()) {}

  std::vector<double> reset() {
    begin_episode(inner_.reset());
    return current_observation();
  }

  std::vector<double> reset(std::uint64_t seed) {
    rng_.seed(seed ^ cfg_.seed);
    begin_episode(inner_.reset(seed));
    return current_observation();
  }

  StepResult step(const Action& agent_action) {
    if (!agent_action.finite()) throw DomainError("delayed step: non-finite action");
    DelayDraw draw = sample_delays(cfg_, rng_);
    if (cfg_.enforce_ordering && t_ > 0) {
      for (std::size_t c = 0; c < draw.kappa.size(); ++c) draw.kappa[c] = std::min(draw.kappa[c], last_kappa_[c] + 1);
    }
    last_kappa_ = draw.kappa;

    const Action clipped = inner_.action_box().clip(agent_action);
    buffer_.push(clipped);
    issued_.push(clipped);

    Action applied;
    for (std::size_t ch = 0; ch < Action::kDim; ++ch) {
      const std::int64_t source = t_ - draw.kappa[cfg_.per_channel ? ch : 0];
      applied[ch] = source < 0 ? 0.0 : issued_.at(source)[ch];
    }

    StepResult inner = inner_.step(applied);
    // Observation i follows i inner steps; reward i produced observation i + 1.
    observations_.push(std::move(inner.observation));
    rewards_.push(inner.reward);
    ++t_;

    const std::int64_t shown = std::max<std::int64_t>(0, t_ - draw.omega);
    StepResult out;
    out.done = inner.done;
    out.info = std::move(inner.info);
    out.info.kappa = draw.kappa;
    out.info.omega = draw.omega;
    out.reward = shown > 0 ? rewards_.at(shown - 1) : 0.0;
    base_ = observations_.at(shown);
    delays_ = std::move(draw);
    out.observation = current_observation();

    const auto window = static_cast<std::size_t>(std::max(cfg_.kappa_max, cfg_.omega_max) + 1);
    issued_.keep_last(window);
    observations_.keep_last(window);
    rewards_.keep_last(window);
    return out;
  }

  std::size_t observation_dim() const { return augmented_dim(inner_.observation_dim(), cfg_); }
  std::size_t base_dim() const { return inner_.observation_dim(); }
  const DelayConfig& delay_config() const { return cfg_; }
  const DelayDraw& current_delays() const { return delays_; }
  const ActionBuffer& buffer() const { return buffer_; }
  const ActionBox& action_box() const { return inner_.action_box(); }
  const Env& inner() const { return inner_; }
  Env& inner() { return inner_; }

 private:
  void begin_episode(std::vector<double> initial) {
    buffer_.clear();
    issued_.clear();
    observations_.clear();
    rewards_.clear();
    t_ = 0;
    observations_.push(initial);
    base_ = std::move(initial);
    delays_ = sample_delays(cfg_, rng_);
    last_kappa_ = delays_.kappa;
  }

  std::vector<double> current_observation() const { return augment(base_, delays_, buffer_, cfg_, action_box()); }

  Env inner_;
  DelayConfig cfg_;
  Rng rng_;
  ActionBuffer buffer_;
  IndexedHistory<Action> issued_;
  IndexedHistory<std::vector<double>> observations_;
  IndexedHistory<double> rewards_;
  std::int64_t t_ = 0;
  DelayDraw delays_;
  std::vector<int> last_kappa_;
  std::vector<double> base_;
};

}  // namespace wwtp
