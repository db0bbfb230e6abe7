#pragma once

// Run configuration as a JSON document. Every block maps one-to-one onto a
// config struct; unknown keys are collected and rejected together.

#include <algorithm>
#include <array>
#include <cstdint>
#include <exception>
#include <fstream>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "wwtp/baselines.hpp"
#include "wwtp/delay.hpp"
#include "wwtp/env.hpp"
#include "wwtp/errors.hpp"
#include "wwtp/eval.hpp"
#include "wwtp/sac.hpp"
#include "wwtp/train.hpp"
#include "wwtp/vec_pool.hpp"

namespace wwtp {

using Json = nlohmann::json;

inline constexpr const char* kArtifactVersion = "1.0.0";

struct PidSection {
  // When true the gains come from the step-response procedure and only the
  // setpoint below is used; otherwise `manual` is taken as is.
  bool auto_tune = true;
  double setpoint = 1.0;
  StepTestConfig step_test;
  PidConfig manual;
};

struct RunConfig {
  std::string run_id = "run";
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = "runs";
  EnvConfig env;
  // Ranges used by the cd and rd scenarios; the scenario itself is chosen
  // per command.
  DelayConfig delay = default_delay();
  PoolConfig pool;
  SacConfig sac;
  TrainOptions train;
  PidSection pid;
  EvalConfig eval;

  static DelayConfig default_delay() {
    DelayConfig d;
    d.mode = DelayMode::random;
    d.kappa_max = 5;
    d.omega_max = 5;
    return d;
  }

  void validate() const {
    if (run_id.empty()) throw ConfigError("run_id must not be empty");
    if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
    env.validate();
    delay.validate();
    pool.validate();
    sac.validate();
    eval.validate(env.horizon);
    if (train.total_steps == 0) throw ConfigError("train.total_steps must be positive");
    if (train.log_interval == 0) throw ConfigError("train.log_interval must be positive");
    if (!pid.auto_tune) pid.manual.validate(env.action_box);
  }
};

// ---------------------------------------------------------------------------
// Field visitors: one list of fields per struct, shared by reading and writing.

class JsonReader {
 public:
  JsonReader(const Json& j, std::string path, std::vector<std::string>& unknown)
      : j_(j), path_(std::move(path)), unknown_(unknown) {
    if (!j_.is_object()) throw ConfigError("'" + display() + "' must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) pending_.push_back(it.key());
  }

  ~JsonReader() {
    if (std::uncaught_exceptions()) return;
    for (const auto& k : pending_) unknown_.push_back(qualified(k));
  }

  template <class T>
  void operator()(const char* key, T& out) {
    if (!take(key)) return;
    try {
      read(j_.at(key), out);
    } catch (const ConfigError& e) {
      throw ConfigError("'" + qualified(key) + "': " + e.what());
    }
  }

  template <class F>
  void section(const char* key, F&& visit) {
    if (!take(key)) return;
    JsonReader child(j_.at(key), qualified(key), unknown_);
    visit(child);
  }

 private:
  bool take(const char* key) {
    auto it = std::find(pending_.begin(), pending_.end(), key);
    if (it == pending_.end()) return false;
    pending_.erase(it);
    return true;
  }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  static void read(const Json& j, double& v) {
    if (!j.is_number()) throw ConfigError("expected a number");
    v = j.get<double>();
  }
  static void read(const Json& j, bool& v) {
    if (!j.is_boolean()) throw ConfigError("expected true or false");
    v = j.get<bool>();
  }
  static void read(const Json& j, std::string& v) {
    if (!j.is_string()) throw ConfigError("expected a string");
    v = j.get<std::string>();
  }
  template <class I>
    requires std::is_integral_v<I>
  static void read(const Json& j, I& v) {
    if (!j.is_number_integer()) throw ConfigError("expected an integer");
    if constexpr (std::is_unsigned_v<I>) {
      if (j.is_number_unsigned() || j.get<std::int64_t>() >= 0) {
        v = j.get<I>();
        return;
      }
      throw ConfigError("expected a non-negative integer");
    } else {
      v = j.get<I>();
    }
  }
  template <class T, std::size_t N>
  static void read(const Json& j, std::array<T, N>& v) {
    if (!j.is_array() || j.size() != N) throw ConfigError("expected an array of " + std::to_string(N) + " values");
    for (std::size_t i = 0; i < N; ++i) read(j[i], v[i]);
  }
  template <class T>
  static void read(const Json& j, std::vector<T>& v) {
    if (!j.is_array()) throw ConfigError("expected an array");
    v.resize(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      T item{};
      read(j[i], item);
      v[i] = item;
    }
  }
  template <class T>
  static void read(const Json& j, std::optional<T>& v) {
    if (j.is_null()) {
      v.reset();
      return;
    }
    T item{};
    read(j, item);
    v = item;
  }
  static void read(const Json& j, Action& a) {
    std::array<double, 2> v{};
    read(j, v);
    a = {v[0], v[1]};
  }
  static void read(const Json& j, PenaltyMode& m) { m = penalty_mode_from_string(string_of(j)); }
  static void read(const Json& j, SchedulerMode& m) { m = scheduler_mode_from_string(string_of(j)); }
  static void read(const Json& j, DelayMode& m) { m = delay_mode_from_string(string_of(j)); }
  static void read(const Json& j, PoolExecution& m) {
    const auto s = string_of(j);
    if (s == "sequential") m = PoolExecution::sequential;
    else if (s == "threaded") m = PoolExecution::threaded;
    else throw ConfigError("expected 'sequential' or 'threaded'");
  }
  static std::string string_of(const Json& j) {
    if (!j.is_string()) throw ConfigError("expected a string");
    return j.get<std::string>();
  }

  const Json& j_;
  std::string path_;
  std::vector<std::string>& unknown_;
  std::vector<std::string> pending_;
};

class JsonWriter {
 public:
  explicit JsonWriter(Json& j) : j_(j) { j_ = Json::object(); }

  template <class T>
  void operator()(const char* key, const T& v) {
    j_[key] = write(v);
  }

  template <class F>
  void section(const char* key, F&& visit) {
    Json child;
    JsonWriter w(child);
    visit(w);
    j_[key] = std::move(child);
  }

 private:
  template <class T>
  static Json write(const T& v) {
    return Json(v);
  }
  template <class T>
  static Json write(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
  }
  static Json write(const Action& a) { return Json::array({a.q_jsf, a.q_pax}); }
  static Json write(const PenaltyMode& m) { return to_string(m); }
  static Json write(const SchedulerMode& m) { return to_string(m); }
  static Json write(const DelayMode& m) { return scenario_tag(m); }
  static Json write(const PoolExecution& m) { return m == PoolExecution::sequential ? "sequential" : "threaded"; }

  Json& j_;
};

// Per-struct field lists. Each takes the struct by forwarding reference so
// the same list serves the reader (mutable) and the writer (const).

template <class V, class C>
void visit_fields(V& v, C& c, SurrogateConfig*) {
  v("influent_p", c.influent_p);
  v("q_w_ref", c.q_w_ref);
  v("q_w_min", c.q_w_min);
  v("bio_rate", c.bio_rate);
  v("clarifier_rate", c.clarifier_rate);
  v("jsf_max_removal", c.jsf_max_removal);
  v("jsf_half_dose", c.jsf_half_dose);
  v("pax_max_removal", c.pax_max_removal);
  v("pax_half_dose", c.pax_half_dose);
  v("temperature_coef", c.temperature_coef);
  v("jsf_lag", c.jsf_lag);
  v("nominal_jsf", c.nominal_jsf);
  v("nominal_pax", c.nominal_pax);
  v("initial_jitter", c.initial_jitter);
  v("surge_start_prob", c.surge_start_prob);
  v("surge_magnitude", c.surge_magnitude);
  v("surge_spread", c.surge_spread);
  v("surge_min_steps", c.surge_min_steps);
  v("surge_max_steps", c.surge_max_steps);
}

template <class V, class C>
void visit_fields(V& v, C& c, ExogenousConfig*) {
  v("steps_per_hour", c.steps_per_hour);
  v("baseline_load", c.baseline_load);
  v("baseline", c.baseline);
  v("diurnal_amp", c.diurnal_amp);
  v("diurnal_phase", c.diurnal_phase);
  v("weekly_amp", c.weekly_amp);
  v("weekly_phase", c.weekly_phase);
  v("noise_amplitude", c.noise_amplitude);
  v("noise_autocorrelation", c.noise_autocorrelation);
}

template <class V, class C>
void visit_fields(V& v, C& c, RewardConfig*) {
  v("pr_jsf", c.pr_jsf);
  v("pr_pax", c.pr_pax);
  v("t_rate", c.t_rate);
  v("t_dose", c.t_dose);
  v("x_ideal", c.x_ideal);
  v("penalty_mode", c.penalty_mode);
  v("a", c.a);
  v("z", c.z);
  v("c", c.c);
  v("d", c.d);
  v("exponent_cap", c.exponent_cap);
}

template <class V, class C>
void visit_fields(V& v, C& c, ActionBox*) {
  v("q_max_jsf", c.q_max_jsf);
  v("q_max_pax", c.q_max_pax);
}

template <class V, class C>
void visit_fields(V& v, C& c, NormalizationBounds*) {
  v("min", c.min);
  v("max", c.max);
}

template <class V, class C>
void visit_fields(V& v, C& c, SchedulerConfig*) {
  v("fixed_length", c.fixed_length);
  v("length_min", c.length_min);
  v("length_max", c.length_max);
}

template <class V, class C>
void visit_fields(V& v, C& c, EnvConfig*) {
  v.section("plant", [&](auto& s) { visit_fields(s, c.plant, static_cast<SurrogateConfig*>(nullptr)); });
  v.section("exogenous", [&](auto& s) { visit_fields(s, c.exogenous, static_cast<ExogenousConfig*>(nullptr)); });
  v.section("action_box", [&](auto& s) { visit_fields(s, c.action_box, static_cast<ActionBox*>(nullptr)); });
  v.section("bounds", [&](auto& s) { visit_fields(s, c.bounds, static_cast<NormalizationBounds*>(nullptr)); });
  v.section("scheduler", [&](auto& s) { visit_fields(s, c.scheduler, static_cast<SchedulerConfig*>(nullptr)); });
  v("horizon", c.horizon);
  v("exogenous_seed", c.exogenous_seed);
}

template <class V, class C>
void visit_fields(V& v, C& c, DelayConfig*) {
  v("kappa_min", c.kappa_min);
  v("kappa_max", c.kappa_max);
  v("omega_min", c.omega_min);
  v("omega_max", c.omega_max);
  v("per_channel", c.per_channel);
  v("enforce_ordering", c.enforce_ordering);
  v("seed", c.seed);
}

template <class V, class C>
void visit_fields(V& v, C& c, PoolConfig*) {
  v("n_envs", c.n_envs);
  v("setups", c.setups);
  v("seeds", c.seeds);
  v("base_seed", c.base_seed);
  v("execution", c.execution);
  v("workers", c.workers);
}

template <class V, class C>
void visit_fields(V& v, C& c, SacConfig*) {
  v("gamma", c.gamma);
  v("alpha", c.alpha);
  v("auto_alpha", c.auto_alpha);
  v("target_entropy", c.target_entropy);
  v("tau_polyak", c.tau_polyak);
  v("batch_n", c.batch_n);
  v("buffer_capacity", c.buffer_capacity);
  v("warmup_steps", c.warmup_steps);
  v("updates_per_step", c.updates_per_step);
  v("hidden", c.hidden);
  v("actor_lr", c.actor_lr);
  v("critic_lr", c.critic_lr);
  v("alpha_lr", c.alpha_lr);
  v("reward_scale", c.reward_scale);
  v("reward_clip", c.reward_clip);
  v("max_grad_norm", c.max_grad_norm);
  v("bootstrap_on_timeout", c.bootstrap_on_timeout);
  v("warmup_random_actions", c.warmup_random_actions);
  v("log_std_min", c.log_std_min);
  v("log_std_max", c.log_std_max);
}

template <class V, class C>
void visit_fields(V& v, C& c, TrainOptions*) {
  v("total_steps", c.total_steps);
  v("log_interval", c.log_interval);
  v("checkpoint_interval", c.checkpoint_interval);
}

template <class V, class C>
void visit_fields(V& v, C& c, PidConfig*) {
  v("kp", c.kp);
  v("ki", c.ki);
  v("kd", c.kd);
  v("setpoint", c.setpoint);
  v("baseline", c.baseline);
  v("out_min", c.out_min);
  v("out_max", c.out_max);
  v("integral_limit", c.integral_limit);
}

template <class V, class C>
void visit_fields(V& v, C& c, PidSection*) {
  v("auto_tune", c.auto_tune);
  v("setpoint", c.setpoint);
  v.section("step_test", [&](auto& s) {
    s("operating_point", c.step_test.operating_point);
    s("step", c.step_test.step);
    s("settle_steps", c.step_test.settle_steps);
    s("record_steps", c.step_test.record_steps);
  });
  v.section("manual", [&](auto& s) { visit_fields(s, c.manual, static_cast<PidConfig*>(nullptr)); });
}

template <class V, class C>
void visit_fields(V& v, C& c, RunConfig*) {
  v("run_id", c.run_id);
  v("seeds", c.seeds);
  v("out_dir", c.out_dir);
  v.section("env", [&](auto& s) { visit_fields(s, c.env, static_cast<EnvConfig*>(nullptr)); });
  v.section("reward", [&](auto& s) { visit_fields(s, c.env.reward, static_cast<RewardConfig*>(nullptr)); });
  v.section("delay", [&](auto& s) { visit_fields(s, c.delay, static_cast<DelayConfig*>(nullptr)); });
  v.section("pool", [&](auto& s) { visit_fields(s, c.pool, static_cast<PoolConfig*>(nullptr)); });
  v.section("sac", [&](auto& s) { visit_fields(s, c.sac, static_cast<SacConfig*>(nullptr)); });
  v.section("train", [&](auto& s) { visit_fields(s, c.train, static_cast<TrainOptions*>(nullptr)); });
  v.section("pid", [&](auto& s) { visit_fields(s, c.pid, static_cast<PidSection*>(nullptr)); });
  v.section("eval", [&](auto& s) { s("episode_length", c.eval.episode_length); });
}

inline RunConfig run_config_from_json(const Json& j) {
  RunConfig cfg;
  std::vector<std::string> unknown;
  {
    JsonReader r(j, "", unknown);
    visit_fields(r, cfg, static_cast<RunConfig*>(nullptr));
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + list);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

inline Json to_json(const RunConfig& cfg) {
  Json j;
  JsonWriter w(j);
  visit_fields(w, cfg, static_cast<RunConfig*>(nullptr));
  return j;
}

// Config snapshot plus the versions needed to reproduce an output directory.
inline Json make_manifest(const RunConfig& cfg, const std::string& command, const Json& extra = Json::object()) {
  Json m;
  m["command"] = command;
  m["artifact_version"] = kArtifactVersion;
  m["checkpoint_format"] = kCheckpointVersion;
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  m["json_version"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                      "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#if defined(__clang__)
  m["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  m["compiler"] = std::string("gcc ") + __VERSION__;
#endif
  m["config"] = to_json(cfg);
  m["details"] = extra;
  return m;
}

inline void write_manifest(const Json& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << manifest.dump(2) << '\n';
}

}  // namespace wwtp
