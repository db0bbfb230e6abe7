// Command line front end: train | evaluate | compare | plot.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wwtp/plot.hpp"
#include "wwtp/runner.hpp"

namespace {

using namespace wwtp;

struct Common {
  std::string config;
  std::string delay = "rd";
  std::string seeds;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_delay = true) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  if (with_delay) cmd->add_option("--delay", c.delay, "Delay scenario")->check(CLI::IsMember({"nd", "cd", "rd"}));
  cmd->add_option("--seed", c.seeds, "Seed list such as 1,2,3 or 1..5");
}

RunConfig load(const Common& c) { return c.config.empty() ? run_config_from_json(Json::object()) : load_run_config(c.config); }

std::vector<std::uint64_t> seeds_of(const Common& c, const RunConfig& cfg) {
  return c.seeds.empty() ? cfg.seeds : parse_seed_list(c.seeds);
}

std::string out_of(const Common& c, const RunConfig& cfg) { return c.out.empty() ? cfg.out_dir : c.out; }

void print_reports(const std::vector<ControllerReport>& reports) {
  std::printf("%-16s %12s %10s %10s %10s %12s\n", "controller", "avg_reward", "avg_target", "tot_costs", "dev_pct",
              "total_reward");
  for (const auto& r : reports) {
    const auto& m = r.summary.mean;
    std::printf("%-16s %12.4f %10.4f %10.2f %10.2f %12.2f\n", r.name.c_str(), m[1], m[2], m[6], m[7], m[0]);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phosphorus dosing control with delay-aware soft actor-critic"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, cmp_opts;
  bool resume = false;
  auto* train_cmd = app.add_subcommand("train", "Train SAC agents, one per seed");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--out", train_opts.out, "Output directory");
  train_cmd->add_flag("--resume", resume, "Continue from each run's latest checkpoint");

  std::string eval_controller;
  bool eval_base_view = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate one controller on the seed list");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--out", eval_opts.out, "Output directory");
  eval_cmd->add_option("--controller", eval_controller, "[label=]sac:<ckpt> | pid | replay:<csv> | random")
      ->required();
  eval_cmd->add_flag("--base-view", eval_base_view,
                     "Run a checkpoint trained without delays on a delayed env using only the base observation");

  std::vector<std::string> cmp_controllers;
  bool cmp_base_view = false;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare controllers on identical seeds");
  add_common(cmp_cmd, cmp_opts);
  cmp_cmd->add_option("--out", cmp_opts.out, "Output directory");
  cmp_cmd->add_option("--controller", cmp_controllers, "Controller spec, repeat for each controller")
      ->required()
      ->expected(1, -1);
  cmp_cmd->add_flag("--base-view", cmp_base_view, "Allow no-delay checkpoints on delayed envs (base observation)");

  std::string plot_dir;
  Common plot_opts;
  auto* plot_cmd = app.add_subcommand("plot", "Render SVG charts for every training log and trace in a directory");
  plot_cmd->add_option("--config", plot_opts.config, "Run configuration (for the phosphate limit)")
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_dir, "Directory holding CSV outputs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const RunConfig cfg = load(train_opts);
      const DelayMode mode = delay_mode_from_string(train_opts.delay);
      for (auto seed : seeds_of(train_opts, cfg)) {
        const std::string dir = training_dir(cfg, out_of(train_opts, cfg), mode, seed);
        std::cout << "training " << scenario_tag(mode) << " seed " << seed << " -> " << dir << std::endl;
        const auto summary = run_training(cfg, mode, seed, dir, resume, [](const TrainLogRow& r) {
          std::printf("  step %9llu  reward/step %9.4f  critic %.4g  actor %.4g  alpha %.3g\n",
                      static_cast<unsigned long long>(r.step), r.mean_reward, r.critic1_loss, r.actor_loss, r.alpha);
          std::fflush(stdout);
        });
        std::cout << "  done: " << summary.env_steps << " steps, " << summary.updates << " updates, checkpoint "
                  << summary.last_checkpoint << std::endl;
      }
    } else if (*eval_cmd || *cmp_cmd) {
      const bool is_eval = static_cast<bool>(*eval_cmd);
      const Common& opts = is_eval ? eval_opts : cmp_opts;
      const RunConfig cfg = load(opts);
      const DelayMode mode = delay_mode_from_string(opts.delay);
      std::vector<ControllerSpec> specs;
      if (is_eval) {
        specs.push_back(parse_controller_spec(eval_controller));
      } else {
        for (const auto& c : cmp_controllers) specs.push_back(parse_controller_spec(c));
        if (specs.size() < 2) throw UsageError("compare needs at least two --controller options");
      }
      const auto reports = run_evaluation(cfg, mode, specs, is_eval ? eval_base_view : cmp_base_view,
                                          seeds_of(opts, cfg), out_of(opts, cfg), is_eval ? "evaluate" : "compare");
      print_reports(reports);
    } else if (*plot_cmd) {
      const RunConfig cfg = load(plot_opts);
      for (const auto& f : plot_directory(plot_dir, cfg.env.reward.x_ideal)) std::cout << f << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
