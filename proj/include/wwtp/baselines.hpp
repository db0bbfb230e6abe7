#pragma once

// Reference controllers: a PID loop on measured phosphate driving both dose
// channels, its step-response tuning, and exact replay of logged actions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wwtp/csv.hpp"
#include "wwtp/delay.hpp"
#include "wwtp/env.hpp"
#include "wwtp/errors.hpp"
#include "wwtp/types.hpp"

namespace wwtp {

struct PidConfig {
  std::array<double, 2> kp{0.0, 0.0};  // dose units per mg/L of error, per channel
  std::array<double, 2> ki{0.0, 0.0};  // per step
  std::array<double, 2> kd{0.0, 0.0};
  double setpoint = 1.0;  // mg/L
  std::array<double, 2> baseline{0.0, 0.0};
  std::array<double, 2> out_min{0.0, 0.0};
  std::array<double, 2> out_max{300.0, 200.0};
  double integral_limit = 100.0;  // bound on the accumulated error, mg/L * steps

  void validate(const ActionBox& box) const {
    if (!(setpoint > 0.0)) throw ConfigError("pid.setpoint must be > 0");
    if (!(integral_limit > 0.0)) throw ConfigError("pid.integral_limit must be > 0");
    for (std::size_t ch = 0; ch < 2; ++ch) {
      if (!(out_min[ch] >= 0.0 && out_min[ch] <= out_max[ch] && out_max[ch] <= box.max(ch)))
        throw ConfigError("pid output bounds must satisfy 0 <= out_min <= out_max <= q_max per channel");
      for (double g : {kp[ch], ki[ch], kd[ch], baseline[ch]})
        if (!std::isfinite(g)) throw ConfigError("pid gains and baseline must be finite");
    }
  }
};

struct PidState {
  double integral = 0.0;
  double previous_error = 0.0;
  bool started = false;
};

// error = measured - setpoint: phosphate above the setpoint raises both doses.
inline Action pid_step(const PidConfig& cfg, PidState& state, double measured_c_p) {
  if (!(measured_c_p >= 0.0)) throw DomainError("pid_step: measured phosphate must be a non-negative number");
  const double error = measured_c_p - cfg.setpoint;
  state.integral = std::clamp(state.integral + error, -cfg.integral_limit, cfg.integral_limit);
  const double derivative = state.started ? error - state.previous_error : 0.0;
  state.previous_error = error;
  state.started = true;
  Action out;
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const double u = cfg.baseline[ch] + cfg.kp[ch] * error + cfg.ki[ch] * state.integral + cfg.kd[ch] * derivative;
    out[ch] = std::clamp(u, cfg.out_min[ch], cfg.out_max[ch]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step-response tuning

struct FopdtModel {
  double gain = 0.0;        // mg/L per unit of the step direction
  double time_constant = 0.0;  // steps
  double dead_time = 0.0;      // steps
};

struct StepTestConfig {
  Action operating_point{150.0, 20.0};
  Action step{30.0, 20.0};  // dose change applied at once on both channels
  int settle_steps = 1'500;
  int record_steps = 600;
};

struct StepResponse {
  std::vector<double> c_p;  // recorded after the step, c_p[0] is the pre-step value
  double initial = 0.0;
  double final = 0.0;
};

// Holds the operating point on a disturbance-free, constant-load copy of the plant
// until settled, then applies the step and records phosphate.
inline StepResponse run_step_test(const EnvConfig& env_cfg, const StepTestConfig& test) {
  EnvConfig cfg = env_cfg;
  cfg.exogenous.noise_amplitude = 0.0;
  cfg.exogenous.diurnal_amp = {0.0, 0.0, 0.0};
  cfg.exogenous.weekly_amp = {0.0, 0.0, 0.0};
  cfg.plant.initial_jitter = 0.0;
  cfg.plant.surge_start_prob = 0.0;
  cfg.scheduler.mode = SchedulerMode::E1;
  cfg.scheduler.fixed_length = test.settle_steps + test.record_steps;
  cfg.horizon = std::max<std::int64_t>(cfg.horizon, cfg.scheduler.fixed_length + 1);
  PlantEnv env(cfg, 0);
  env.reset();
  for (int i = 0; i < test.settle_steps; ++i) env.step(test.operating_point);
  StepResponse r;
  r.initial = env.state().c_p;
  r.c_p.push_back(r.initial);
  const Action stepped{test.operating_point.q_jsf + test.step.q_jsf, test.operating_point.q_pax + test.step.q_pax};
  for (int i = 0; i < test.record_steps; ++i) r.c_p.push_back(env.step(stepped).info.c_p);
  r.final = r.c_p.back();
  return r;
}

// Two-point fit at 28.3% and 63.2% of the total change.
inline FopdtModel fit_fopdt(const StepResponse& r) {
  const double delta = r.final - r.initial;
  if (!(std::abs(delta) > 1e-9)) throw UsageError("fit_fopdt: the step produced no response");
  auto crossing = [&](double fraction) {
    const double level = r.initial + fraction * delta;
    for (std::size_t k = 1; k < r.c_p.size(); ++k) {
      const double a = r.c_p[k - 1] - level, b = r.c_p[k] - level;
      if ((delta < 0 && b <= 0.0) || (delta > 0 && b >= 0.0)) {
        // Linear interpolation between samples k-1 and k.
        return static_cast<double>(k - 1) + (a == b ? 1.0 : a / (a - b));
      }
    }
    throw UsageError("fit_fopdt: response never reached the fit level");
  };
  const double t28 = crossing(0.283);
  const double t63 = crossing(0.632);
  FopdtModel m;
  m.gain = delta;
  m.time_constant = std::max(1.5 * (t63 - t28), 1e-6);
  m.dead_time = std::max(t63 - m.time_constant, 0.0);
  return m;
}

// SIMC PI rules with the closed-loop time constant equal to the dead time.
// The expected action and observation delays add to the plant dead time.
inline PidConfig tune_pid(const EnvConfig& env_cfg, const DelayConfig& delay, double setpoint,
                          const StepTestConfig& test = {}) {
  const auto response = run_step_test(env_cfg, test);
  FopdtModel m = fit_fopdt(response);
  double mean_kappa = 0.0, mean_omega = 0.0;
  if (delay.mode == DelayMode::constant) {
    mean_kappa = delay.kappa_max;
    mean_omega = delay.omega_max;
  } else if (delay.mode == DelayMode::random) {
    mean_kappa = 0.5 * (delay.kappa_min + delay.kappa_max);
    mean_omega = 0.5 * (delay.omega_min + delay.omega_max);
  }
  m.dead_time += mean_kappa + mean_omega;
  const double theta = std::max(m.dead_time, 1.0);
  const double tau_c = theta;
  const double kc = m.time_constant / (std::abs(m.gain) * (tau_c + theta));  // step fractions per mg/L
  const double tau_i = std::min(m.time_constant, 4.0 * (tau_c + theta));

  PidConfig pid;
  pid.setpoint = setpoint;
  pid.baseline = {test.operating_point.q_jsf, test.operating_point.q_pax};
  pid.out_min = {0.0, 0.0};
  pid.out_max = {env_cfg.action_box.q_max_jsf, env_cfg.action_box.q_max_pax};
  const std::array<double, 2> direction{test.step.q_jsf, test.step.q_pax};
  double limit = 0.0;
  for (std::size_t ch = 0; ch < 2; ++ch) {
    pid.kp[ch] = kc * direction[ch];
    pid.ki[ch] = pid.kp[ch] / tau_i;
    pid.kd[ch] = 0.0;
    if (pid.ki[ch] > 0.0) limit = std::max(limit, env_cfg.action_box.max(ch) / pid.ki[ch]);
  }
  // Enough integral authority to sweep each channel across its full range.
  pid.integral_limit = limit > 0.0 ? limit : 1.0;
  pid.validate(env_cfg.action_box);
  return pid;
}

// ---------------------------------------------------------------------------
// Action logs

class ActionLog {
 public:
  void push(std::int64_t step, const Action& a) {
    if (!steps_.empty() && step <= steps_.back())
      throw UsageError("action log: step " + std::to_string(step) + " does not follow " +
                       std::to_string(steps_.back()));
    if (!a.finite()) throw DomainError("action log: non-finite action");
    steps_.push_back(step);
    actions_.push_back(a);
  }

  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  const std::vector<std::int64_t>& steps() const { return steps_; }
  const std::vector<Action>& actions() const { return actions_; }
  std::int64_t first_step() const { return steps_.front(); }
  std::int64_t last_step() const { return steps_.back(); }

  friend bool operator==(const ActionLog&, const ActionLog&) = default;

 private:
  std::vector<std::int64_t> steps_;
  std::vector<Action> actions_;
};

inline Action replay_action(const ActionLog& log, std::int64_t t) {
  if (log.empty() || t < log.first_step() || t > log.last_step())
    throw UsageError("replay: step " + std::to_string(t) + " is outside the logged range");
  const auto& s = log.steps();
  const auto it = std::lower_bound(s.begin(), s.end(), t);
  if (it == s.end() || *it != t) throw UsageError("replay: no action logged at step " + std::to_string(t));
  return log.actions()[static_cast<std::size_t>(it - s.begin())];
}

inline void write_action_log(const ActionLog& log, const std::string& path) {
  CsvWriter w(path, {"step", "q_jsf", "q_pax"});
  for (std::size_t i = 0; i < log.size(); ++i)
    w.row({std::to_string(log.steps()[i]), format_double(log.actions()[i].q_jsf),
           format_double(log.actions()[i].q_pax)});
}

inline ActionLog read_action_log(const std::string& path) {
  const auto table = read_csv(path);
  const std::size_t cs = table.column("step"), cj = table.column("q_jsf"), cp = table.column("q_pax");
  ActionLog log;
  for (const auto& row : table.rows)
    log.push(std::stoll(row[cs]), {parse_double(row[cj]), parse_double(row[cp])});
  return log;
}

}  // namespace wwtp
