#pragma once

// Glue between a RunConfig and the train/evaluate/compare operations, shared
// by the command line tool and the tests.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wwtp/config.hpp"

namespace wwtp {

// "1,2,7" or "1..5" or a mix such as "1..3,9".
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  auto number = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("seed list: '" + s + "' is not a non-negative integer");
    return std::stoull(s);
  };
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    const std::size_t dots = item.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(number(item));
    } else {
      const auto lo = number(item.substr(0, dots)), hi = number(item.substr(dots + 2));
      if (lo > hi) throw ConfigError("seed list: empty range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    pos = comma + 1;
  }
  return seeds;
}

struct ScenarioSetup {
  DelayMode mode = DelayMode::none;
  DelayConfig delay;
  PoolConfig pool;
  SacConfig sac;
};

// Per-seed derivation of every random stream used in training.
inline ScenarioSetup scenario_for(const RunConfig& cfg, DelayMode mode, std::uint64_t seed) {
  ScenarioSetup s;
  s.mode = mode;
  s.delay = cfg.delay.with_mode(mode);
  s.delay.seed = detail::mix_seed(cfg.delay.seed, seed);
  s.pool = cfg.pool;
  if (s.pool.seeds.empty()) {
    s.pool.base_seed = cfg.pool.base_seed + seed * 1000;
  } else {
    for (auto& v : s.pool.seeds) v += seed * 1'000'003ULL;
  }
  s.sac = cfg.sac;
  s.sac.seed = detail::mix_seed(cfg.sac.seed, seed);
  return s;
}

inline std::string training_dir(const RunConfig& cfg, const std::string& out, DelayMode mode, std::uint64_t seed) {
  return (std::filesystem::path(out) / (cfg.run_id + "-" + scenario_tag(mode) + "-seed" + std::to_string(seed)))
      .string();
}

inline TrainSummary run_training(const RunConfig& cfg, DelayMode mode, std::uint64_t seed, const std::string& dir,
                                 bool resume = false,
                                 const std::function<void(const TrainLogRow&)>& on_log = nullptr) {
  const ScenarioSetup s = scenario_for(cfg, mode, seed);
  VecPool<DelayedPlantEnv> pool(make_pool_envs(cfg.env, s.delay, s.pool), s.pool.execution, s.pool.workers);
  SacAgent agent(pool.observation_dim(), s.sac, cfg.env.action_box, scenario_tag(mode));
  TrainOptions opt = cfg.train;
  opt.out_dir = dir;
  opt.resume = resume;
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    Json details;
    details["delay_mode"] = scenario_tag(mode);
    details["seed"] = seed;
    details["observation_dim"] = pool.observation_dim();
    details["resume"] = resume;
    write_manifest(make_manifest(cfg, "train", details), (std::filesystem::path(dir) / "manifest.json").string());
  }
  return train(pool, s.pool, agent, opt, on_log);
}

inline PidConfig pid_for(const RunConfig& cfg, DelayMode mode) {
  if (!cfg.pid.auto_tune) return cfg.pid.manual;
  return tune_pid(cfg.env, cfg.delay.with_mode(mode), cfg.pid.setpoint, cfg.pid.step_test);
}

struct ControllerSpec {
  std::string label;
  std::string kind;  // sac | pid | replay | random
  std::string path;
};

// "[label=]kind[:path]", e.g. "pid", "sac:runs/a/checkpoints/final.ckpt",
// "baseline=replay:log.csv".
inline ControllerSpec parse_controller_spec(const std::string& text) {
  ControllerSpec spec;
  std::string rest = text;
  if (const auto eq = rest.find('='); eq != std::string::npos) {
    spec.label = rest.substr(0, eq);
    rest = rest.substr(eq + 1);
  }
  if (const auto colon = rest.find(':'); colon != std::string::npos) {
    spec.kind = rest.substr(0, colon);
    spec.path = rest.substr(colon + 1);
  } else {
    spec.kind = rest;
  }
  if (spec.kind != "sac" && spec.kind != "pid" && spec.kind != "replay" && spec.kind != "random")
    throw ConfigError("controller '" + text + "': kind must be sac, pid, replay or random");
  if ((spec.kind == "sac" || spec.kind == "replay") && spec.path.empty())
    throw ConfigError("controller '" + text + "': " + spec.kind + " needs a path, as in " + spec.kind + ":<file>");
  if (spec.label.empty()) spec.label = spec.kind;
  if (spec.label.find_first_of(",/ ") != std::string::npos)
    throw ConfigError("controller label '" + spec.label + "' must not contain commas, slashes or spaces");
  return spec;
}

inline std::unique_ptr<Controller> make_controller(const ControllerSpec& spec, const RunConfig& cfg, DelayMode mode,
                                                   bool base_view) {
  if (spec.kind == "sac") {
    auto c = SacController::from_file(spec.path, spec.label, base_view);
    if (spec.label == "sac")
      return std::make_unique<SacController>(c->agent(), "sac-" + c->agent().delay_tag(), base_view);
    return c;
  }
  if (spec.kind == "pid") return std::make_unique<PidController>(pid_for(cfg, mode), spec.label);
  if (spec.kind == "replay") return std::make_unique<ReplayController>(read_action_log(spec.path), spec.label);
  return std::make_unique<RandomController>(detail::mix_seed(cfg.sac.seed, 0xA11CE), spec.label);
}

// Evaluates controllers on the configured seeds and writes metrics, traces,
// the commanded-action logs and a manifest under out_dir.
inline std::vector<ControllerReport> run_evaluation(const RunConfig& cfg, DelayMode mode,
                                                    const std::vector<ControllerSpec>& specs, bool base_view,
                                                    const std::vector<std::uint64_t>& seeds,
                                                    const std::string& out_dir, const std::string& command) {
  std::vector<std::unique_ptr<Controller>> owned;
  std::vector<Controller*> ptrs;
  for (const auto& s : specs) {
    owned.push_back(make_controller(s, cfg, mode, base_view));
    ptrs.push_back(owned.back().get());
  }
  for (std::size_t i = 0; i < ptrs.size(); ++i)
    for (std::size_t k = i + 1; k < ptrs.size(); ++k)
      if (ptrs[i]->name() == ptrs[k]->name())
        throw ConfigError("two controllers share the label '" + ptrs[i]->name() + "'");
  const DelayConfig delay = cfg.delay.with_mode(mode);
  std::vector<ControllerReport> reports;
  if (ptrs.size() == 1) {
    reports.push_back(evaluate(*ptrs[0], cfg.env, delay, cfg.eval, seeds));
  } else {
    reports = compare(ptrs, cfg.env, delay, cfg.eval, seeds);
  }
  if (!out_dir.empty()) {
    write_reports(reports, out_dir);
    for (const auto& r : reports)
      for (const auto& e : r.episodes)
        write_action_log(e.commanded, (std::filesystem::path(out_dir) /
                                       ("actions_" + r.name + "_seed" + std::to_string(e.seed) + ".csv"))
                                          .string());
    Json details;
    details["delay_mode"] = scenario_tag(mode);
    details["seeds"] = seeds;
    details["base_view"] = base_view;
    Json controllers = Json::array();
    for (std::size_t i = 0; i < specs.size(); ++i) {
      Json c{{"label", ptrs[i]->name()}, {"kind", specs[i].kind}, {"path", specs[i].path}};
      if (auto* pid = dynamic_cast<PidController*>(ptrs[i])) {
        const auto& p = pid->config();
        c["pid"] = {{"kp", p.kp}, {"ki", p.ki}, {"kd", p.kd}, {"setpoint", p.setpoint},
                    {"baseline", p.baseline}, {"integral_limit", p.integral_limit}};
      }
      controllers.push_back(c);
    }
    details["controllers"] = controllers;
    write_manifest(make_manifest(cfg, command, details), (std::filesystem::path(out_dir) / "manifest.json").string());
  }
  return reports;
}

}  // namespace wwtp
