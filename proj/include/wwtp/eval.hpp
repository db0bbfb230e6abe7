#pragma once

// Deterministic evaluation of controllers on shared seeds, per-step traces
// and the summary metrics table.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wwtp/baselines.hpp"
#include "wwtp/csv.hpp"
#include "wwtp/delay.hpp"
#include "wwtp/env.hpp"
#include "wwtp/errors.hpp"
#include "wwtp/sac.hpp"
#include "wwtp/vec_pool.hpp"

namespace wwtp {

struct EvalConfig {
  int episode_length = 720;
  // Evaluation windows start at a seed-dependent uniform position on the
  // timeline, as in setup E3.
  void validate(std::int64_t horizon) const {
    if (episode_length <= 0) throw ConfigError("eval.episode_length must be positive");
    if (episode_length > horizon) throw ConfigError("eval.episode_length exceeds env.horizon");
  }
};

struct EvalContext {
  std::size_t obs_dim = 0;
  std::size_t base_dim = 0;
  DelayConfig delay;
  NormalizationBounds bounds;
  ActionBox box;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(const EvalContext&) {}
  virtual Action act(std::span<const double> observation) = 0;
};

// Deterministic actor (tanh of the mean). With base_view, an agent trained
// without delays may run on a delayed env by reading only the base part of
// the observation.
class SacController final : public Controller {
 public:
  SacController(SacAgent agent, std::string label, bool base_view = false)
      : agent_(std::move(agent)), label_(std::move(label)), base_view_(base_view) {}

  static std::unique_ptr<SacController> from_file(const std::string& path, std::string label, bool base_view = false) {
    return std::make_unique<SacController>(agent_from_checkpoint(TensorArchive::load(path)), std::move(label),
                                           base_view);
  }

  std::string name() const override { return label_; }

  void begin_episode(const EvalContext& ctx) override {
    slice_ = 0;
    if (ctx.obs_dim == agent_.obs_dim()) return;
    if (base_view_ && ctx.base_dim == agent_.obs_dim()) {
      slice_ = ctx.base_dim;
      return;
    }
    throw UsageError("checkpoint trained with delay mode '" + agent_.delay_tag() + "' (observation dim " +
                     std::to_string(agent_.obs_dim()) + ") cannot run on delay mode '" +
                     scenario_tag(ctx.delay.mode) + "' (observation dim " + std::to_string(ctx.obs_dim) + ")");
  }

  Action act(std::span<const double> obs) override {
    return agent_.select_action(slice_ ? obs.first(slice_) : obs, true);
  }

  const SacAgent& agent() const { return agent_; }

 private:
  SacAgent agent_;
  std::string label_;
  bool base_view_;
  std::size_t slice_ = 0;
};

// Feeds the phosphate reading from the (possibly delayed) observation.
class PidController final : public Controller {
 public:
  explicit PidController(PidConfig cfg, std::string label = "pid") : cfg_(cfg), label_(std::move(label)) {}

  std::string name() const override { return label_; }
  void begin_episode(const EvalContext& ctx) override {
    state_ = {};
    bounds_ = ctx.bounds;
  }
  Action act(std::span<const double> obs) override {
    const double measured = bounds_.denormalize(ObservationLayout::kPhosphate, obs[ObservationLayout::kPhosphate]);
    return pid_step(cfg_, state_, std::max(measured, 0.0));
  }
  const PidConfig& config() const { return cfg_; }

 private:
  PidConfig cfg_;
  std::string label_;
  PidState state_;
  NormalizationBounds bounds_;
};

// Replays a log indexed by episode step.
class ReplayController final : public Controller {
 public:
  explicit ReplayController(ActionLog log, std::string label = "replay")
      : log_(std::move(log)), label_(std::move(label)) {}

  std::string name() const override { return label_; }
  void begin_episode(const EvalContext&) override { step_ = 0; }
  Action act(std::span<const double>) override { return replay_action(log_, step_++); }

 private:
  ActionLog log_;
  std::string label_;
  std::int64_t step_ = 0;
};

class RandomController final : public Controller {
 public:
  explicit RandomController(std::uint64_t seed, std::string label = "random") : rng_(seed), label_(std::move(label)) {}

  std::string name() const override { return label_; }
  void begin_episode(const EvalContext& ctx) override { box_ = ctx.box; }
  Action act(std::span<const double>) override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double j = u(rng_) * box_.q_max_jsf;
    return {j, u(rng_) * box_.q_max_pax};
  }

 private:
  Rng rng_;
  std::string label_;
  ActionBox box_;
};

// ---------------------------------------------------------------------------
// Metrics

struct EvalMetrics {
  double total_reward = 0.0;
  double avg_reward = 0.0;
  double avg_target = 0.0;
  double tot_c_jsf = 0.0;
  double tot_c_pax = 0.0;
  double tot_tax = 0.0;
  double tot_costs = 0.0;
  double target_dev_pct = 0.0;
  std::int64_t steps = 0;
};

inline constexpr std::array<const char*, 8> kMetricNames{"total_reward", "avg_reward", "avg_target", "tot_c_jsf",
                                                         "tot_c_pax",    "tot_tax",    "tot_costs",  "target_dev_pct"};

inline std::array<double, 8> metric_values(const EvalMetrics& m) {
  return {m.total_reward, m.avg_reward, m.avg_target, m.tot_c_jsf, m.tot_c_pax, m.tot_tax, m.tot_costs, m.target_dev_pct};
}

struct TraceRow {
  std::int64_t step = 0;
  double c_p = 0.0;
  Action commanded;
  Action applied;
  double reward = 0.0;  // true reward of this step, undelayed
  std::vector<int> kappa;
  int omega = 0;
  CostBreakdown cost;
  double q_w = 0.0;
  Exogenous x_e{};
};

// Streaming accumulation in step order.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(double x_ideal) : x_ideal_(x_ideal) {}

  void add(double reward, double c_p, const CostBreakdown& cost) {
    reward_ += reward;
    c_p_ += c_p;
    c_jsf_ += cost.c_jsf;
    c_pax_ += cost.c_pax;
    tax_ += cost.tax;
    if (c_p > x_ideal_) ++above_;
    ++n_;
  }

  EvalMetrics finish() const {
    EvalMetrics m;
    m.steps = n_;
    if (n_ == 0) return m;
    const double n = static_cast<double>(n_);
    m.total_reward = reward_;
    m.avg_reward = reward_ / n;
    m.avg_target = c_p_ / n;
    m.tot_c_jsf = c_jsf_;
    m.tot_c_pax = c_pax_;
    m.tot_tax = tax_;
    m.tot_costs = m.tot_c_jsf + m.tot_c_pax + m.tot_tax;
    m.target_dev_pct = 100.0 * static_cast<double>(above_) / n;
    return m;
  }

 private:
  double x_ideal_;
  double reward_ = 0.0, c_p_ = 0.0, c_jsf_ = 0.0, c_pax_ = 0.0, tax_ = 0.0;
  std::int64_t above_ = 0;
  std::int64_t n_ = 0;
};

// FNV-1a over the bit patterns of the exogenous inputs seen by the plant.
class StreamHash {
 public:
  void add(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h_ ^= (bits >> (8 * i)) & 0xFFu;
      h_ *= 0x100000001B3ULL;
    }
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

struct EpisodeResult {
  std::uint64_t seed = 0;
  EvalMetrics metrics;
  std::uint64_t exogenous_hash = 0;
  std::vector<TraceRow> trace;
  ActionLog commanded;
};

inline DelayedPlantEnv make_eval_env(const EnvConfig& env_cfg, const DelayConfig& delay, const EvalConfig& eval,
                                     std::uint64_t seed) {
  eval.validate(env_cfg.horizon);
  EnvConfig cfg = env_cfg;
  cfg.scheduler.mode = SchedulerMode::E3;
  cfg.scheduler.fixed_length = eval.episode_length;
  cfg.scheduler.length_max = std::min(cfg.scheduler.length_max, cfg.horizon);
  cfg.scheduler.length_min = std::min(cfg.scheduler.length_min, cfg.scheduler.length_max);
  DelayConfig d = delay;
  d.seed = delay.seed * 1000003ULL + seed;
  return DelayedPlantEnv(PlantEnv(cfg, seed), d);
}

inline EpisodeResult evaluate_episode(Controller& controller, const EnvConfig& env_cfg, const DelayConfig& delay,
                                      const EvalConfig& eval, std::uint64_t seed, bool keep_trace = true) {
  DelayedPlantEnv env = make_eval_env(env_cfg, delay, eval, seed);
  EvalContext ctx{env.observation_dim(), env.base_dim(), env.delay_config(), env_cfg.bounds, env_cfg.action_box};
  controller.begin_episode(ctx);
  std::vector<double> obs = env.reset();
  EpisodeResult out;
  out.seed = seed;
  MetricsAccumulator acc(env_cfg.reward.x_ideal);
  StreamHash hash;
  for (std::int64_t k = 0;; ++k) {
    const Action a = controller.act(obs);
    out.commanded.push(k, a);
    StepResult r = env.step(a);
    const auto& info = r.info;
    acc.add(info.cost.reward, info.c_p, info.cost);
    for (double v : info.x_e) hash.add(v);
    if (keep_trace) {
      out.trace.push_back({k, info.c_p, a, info.applied, info.cost.reward, info.kappa, info.omega, info.cost, info.q_w,
                           info.x_e});
    }
    obs = std::move(r.observation);
    if (r.done) break;
  }
  out.metrics = acc.finish();
  out.exogenous_hash = hash.value();
  return out;
}

struct Aggregate {
  std::array<double, 8> mean{};
  std::array<double, 8> std{};
  std::size_t n = 0;
};

inline Aggregate aggregate(const std::vector<EvalMetrics>& episodes) {
  Aggregate a;
  a.n = episodes.size();
  if (episodes.empty()) return a;
  const double n = static_cast<double>(episodes.size());
  for (const auto& m : episodes) {
    const auto v = metric_values(m);
    for (std::size_t k = 0; k < v.size(); ++k) a.mean[k] += v[k] / n;
  }
  if (episodes.size() > 1) {
    for (const auto& m : episodes) {
      const auto v = metric_values(m);
      for (std::size_t k = 0; k < v.size(); ++k) a.std[k] += (v[k] - a.mean[k]) * (v[k] - a.mean[k]) / (n - 1.0);
    }
    for (auto& s : a.std) s = std::sqrt(s);
  }
  return a;
}

struct ControllerReport {
  std::string name;
  std::vector<EpisodeResult> episodes;
  Aggregate summary;

  std::vector<EvalMetrics> metrics() const {
    std::vector<EvalMetrics> m;
    for (const auto& e : episodes) m.push_back(e.metrics);
    return m;
  }
};

inline ControllerReport evaluate(Controller& controller, const EnvConfig& env_cfg, const DelayConfig& delay,
                                 const EvalConfig& eval, const std::vector<std::uint64_t>& seeds,
                                 bool keep_trace = true) {
  ControllerReport r;
  r.name = controller.name();
  for (auto s : seeds) r.episodes.push_back(evaluate_episode(controller, env_cfg, delay, eval, s, keep_trace));
  r.summary = aggregate(r.metrics());
  return r;
}

// Every controller runs the same seeds; the exogenous stream of each seed
// is checked to be bit-identical across controllers.
inline std::vector<ControllerReport> compare(const std::vector<Controller*>& controllers, const EnvConfig& env_cfg,
                                             const DelayConfig& delay, const EvalConfig& eval,
                                             const std::vector<std::uint64_t>& seeds, bool keep_trace = true) {
  if (controllers.size() < 2) throw UsageError("compare needs at least two controllers");
  std::vector<ControllerReport> reports;
  for (auto* c : controllers) reports.push_back(evaluate(*c, env_cfg, delay, eval, seeds, keep_trace));
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (std::size_t c = 1; c < reports.size(); ++c) {
      if (reports[c].episodes[s].exogenous_hash != reports[0].episodes[s].exogenous_hash)
        throw UsageError("compare: exogenous stream differs between '" + reports[0].name + "' and '" +
                         reports[c].name + "' for seed " + std::to_string(seeds[s]));
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Files

inline const std::vector<std::string>& trace_header() {
  static const std::vector<std::string> h{"step",      "c_p",       "q_jsf",     "q_pax",       "applied_jsf",
                                          "applied_pax", "reward",  "kappa_jsf", "kappa_pax",   "omega",
                                          "c_jsf",     "c_pax",     "tax",       "total_cost",  "p_coef",
                                          "q_w",       "x_load",    "x_flow",    "x_temp"};
  return h;
}

inline void write_trace(const std::vector<TraceRow>& trace, const std::string& path) {
  CsvWriter w(path, trace_header());
  for (const auto& r : trace) {
    const int kj = r.kappa.empty() ? 0 : r.kappa[0];
    const int kp = r.kappa.empty() ? 0 : r.kappa.back();
    w.row({std::to_string(r.step), format_double(r.c_p), format_double(r.commanded.q_jsf),
           format_double(r.commanded.q_pax), format_double(r.applied.q_jsf), format_double(r.applied.q_pax),
           format_double(r.reward), std::to_string(kj), std::to_string(kp), std::to_string(r.omega),
           format_double(r.cost.c_jsf), format_double(r.cost.c_pax), format_double(r.cost.tax),
           format_double(r.cost.total), format_double(r.cost.p_coef), format_double(r.q_w), format_double(r.x_e[0]),
           format_double(r.x_e[1]), format_double(r.x_e[2])});
  }
}

// Recomputes the metrics of one episode from its trace file.
inline EvalMetrics metrics_from_trace(const std::string& path, double x_ideal) {
  const auto t = read_csv(path);
  const auto reward = t.numbers("reward"), c_p = t.numbers("c_p"), cj = t.numbers("c_jsf"), cx = t.numbers("c_pax"),
             tax = t.numbers("tax");
  MetricsAccumulator acc(x_ideal);
  for (std::size_t i = 0; i < reward.size(); ++i) {
    CostBreakdown c;
    c.c_jsf = cj[i];
    c.c_pax = cx[i];
    c.tax = tax[i];
    acc.add(reward[i], c_p[i], c);
  }
  return acc.finish();
}

inline std::vector<std::string> metrics_header() {
  std::vector<std::string> h{"controller", "seed"};
  for (const char* m : kMetricNames) h.emplace_back(m);
  h.emplace_back("steps");
  h.emplace_back("exogenous_hash");
  for (const char* m : kMetricNames) h.push_back(std::string(m) + "_std");
  return h;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// One row per controller and seed, then one aggregate row per controller
// (seed column "mean", with standard deviations filled in).
inline void write_metrics(const std::vector<ControllerReport>& reports, const std::string& path) {
  CsvWriter w(path, metrics_header());
  for (const auto& r : reports) {
    for (const auto& e : r.episodes) {
      std::vector<std::string> row{r.name, std::to_string(e.seed)};
      for (double v : metric_values(e.metrics)) row.push_back(format_double(v));
      row.push_back(std::to_string(e.metrics.steps));
      row.push_back(hex(e.exogenous_hash));
      for (std::size_t k = 0; k < kMetricNames.size(); ++k) row.emplace_back();
      w.row(row);
    }
  }
  for (const auto& r : reports) {
    if (r.episodes.empty()) continue;
    std::vector<std::string> row{r.name, "mean"};
    for (double v : r.summary.mean) row.push_back(format_double(v));
    std::int64_t steps = 0;
    for (const auto& e : r.episodes) steps += e.metrics.steps;
    row.push_back(std::to_string(steps));
    row.emplace_back();
    for (double v : r.summary.std) row.push_back(format_double(v));
    w.row(row);
  }
}

inline std::string trace_file_name(const std::string& controller, std::uint64_t seed) {
  return "trace_" + controller + "_seed" + std::to_string(seed) + ".csv";
}

inline void write_reports(const std::vector<ControllerReport>& reports, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_metrics(reports, (std::filesystem::path(out_dir) / "metrics.csv").string());
  for (const auto& r : reports)
    for (const auto& e : r.episodes)
      if (!e.trace.empty())
        write_trace(e.trace, (std::filesystem::path(out_dir) / trace_file_name(r.name, e.seed)).string());
}

}  // namespace wwtp
