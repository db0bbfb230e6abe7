#pragma once

// Interaction loop: act in every pool environment, store the transitions,
// then take gradient steps once the buffer is warm.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wwtp/checkpoint.hpp"
#include "wwtp/csv.hpp"
#include "wwtp/errors.hpp"
#include "wwtp/sac.hpp"
#include "wwtp/vec_pool.hpp"

namespace wwtp {

struct TrainOptions {
  std::uint64_t total_steps = 200'000;  // environment transitions over the whole pool
  std::uint64_t log_interval = 4'608;
  std::uint64_t checkpoint_interval = 50'000;  // 0: final checkpoint only
  std::string out_dir;                          // empty: keep everything in memory
  bool resume = false;
};

struct TrainLogRow {
  std::uint64_t step = 0;
  std::array<double, 4> setup_reward{};  // mean per-step reward of episodes ended in the interval, per E1..E4
  double mean_reward = 0.0;
  std::uint64_t episodes = 0;
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double mean_kappa = 0.0;
  double mean_omega = 0.0;
  std::uint64_t updates = 0;
};

inline const std::vector<std::string>& train_log_header() {
  static const std::vector<std::string> h{"step",         "reward_E1",    "reward_E2",  "reward_E3",
                                          "reward_E4",    "reward_mean",  "episodes",   "critic1_loss",
                                          "critic2_loss", "actor_loss",   "alpha",      "mean_kappa",
                                          "mean_omega",   "updates"};
  return h;
}

inline std::vector<std::string> to_cells(const TrainLogRow& r) {
  std::vector<std::string> c{std::to_string(r.step)};
  for (double v : r.setup_reward) c.push_back(csv_number(v));
  c.push_back(csv_number(r.mean_reward));
  c.push_back(std::to_string(r.episodes));
  for (double v : {r.critic1_loss, r.critic2_loss, r.actor_loss, r.alpha, r.mean_kappa, r.mean_omega})
    c.push_back(csv_number(v));
  c.push_back(std::to_string(r.updates));
  return c;
}

struct TrainSummary {
  std::vector<TrainLogRow> log;
  std::uint64_t env_steps = 0;
  std::uint64_t updates = 0;
  std::string last_checkpoint;
};

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct IntervalStats {
  std::array<double, 4> reward_sum{};
  std::array<std::uint64_t, 4> episodes{};
  double c1 = 0.0, c2 = 0.0, actor = 0.0;
  std::uint64_t updates = 0;
  double kappa = 0.0, omega = 0.0;
  std::uint64_t delay_samples = 0;

  TrainLogRow close(std::uint64_t step, double alpha, std::uint64_t total_updates) const {
    TrainLogRow r;
    r.step = step;
    double all = 0.0;
    std::uint64_t n = 0;
    for (std::size_t s = 0; s < 4; ++s) {
      r.setup_reward[s] = episodes[s] ? reward_sum[s] / static_cast<double>(episodes[s]) : kNaN;
      all += reward_sum[s];
      n += episodes[s];
    }
    r.mean_reward = n ? all / static_cast<double>(n) : kNaN;
    r.episodes = n;
    const double u = static_cast<double>(updates);
    r.critic1_loss = updates ? c1 / u : kNaN;
    r.critic2_loss = updates ? c2 / u : kNaN;
    r.actor_loss = updates ? actor / u : kNaN;
    r.alpha = alpha;
    r.mean_kappa = delay_samples ? kappa / static_cast<double>(delay_samples) : 0.0;
    r.mean_omega = delay_samples ? omega / static_cast<double>(delay_samples) : 0.0;
    r.updates = total_updates;
    return r;
  }
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

inline std::string checkpoint_path(const std::string& out_dir, const std::string& name) {
  return (std::filesystem::path(out_dir) / "checkpoints" / (name + ".ckpt")).string();
}

inline void save_training_checkpoint(const SacAgent& agent, const ReplayBuffer& buffer, std::uint64_t env_steps,
                                     const std::string& path) {
  TensorArchive a;
  agent.save(a);
  a.set_meta("train.env_steps", std::to_string(env_steps));
  a.set_meta("buffer.size", std::to_string(buffer.size()));
  a.set_meta("buffer.total_added", std::to_string(buffer.total_added()));
  a.set_meta("buffer.capacity", std::to_string(buffer.capacity()));
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  const std::string tmp = path + ".tmp";
  a.save(tmp);
  std::filesystem::rename(tmp, path);
}

// Runs the interaction/update loop until total_steps transitions have been
// collected. Resuming restores the agent from the latest checkpoint; the
// replay buffer is refilled by the restored policy before updates continue.
inline TrainSummary train(VecPool<DelayedPlantEnv>& pool, const PoolConfig& pool_cfg, SacAgent& agent,
                          const TrainOptions& opt,
                          const std::function<void(const TrainLogRow&)>& on_log = nullptr) {
  const SacConfig& cfg = agent.config();
  if (pool.observation_dim() != agent.obs_dim())
    throw UsageError("train: pool observation dim " + std::to_string(pool.observation_dim()) +
                     " does not match the agent input dim " + std::to_string(agent.obs_dim()));
  const std::size_t n = pool.size();
  const bool persist = !opt.out_dir.empty();
  const std::string log_path = persist ? (std::filesystem::path(opt.out_dir) / "train_log.csv").string() : "";

  TrainSummary summary;
  ReplayBuffer buffer(cfg.buffer_capacity, agent.obs_dim());
  std::uint64_t env_steps = 0;
  bool resumed = false;

  if (persist) std::filesystem::create_directories(opt.out_dir);
  if (opt.resume) {
    if (!persist) throw UsageError("train: resume needs an output directory");
    const std::string latest = checkpoint_path(opt.out_dir, "latest");
    if (!std::filesystem::exists(latest)) throw UsageError("train: nothing to resume, '" + latest + "' is missing");
    const auto archive = TensorArchive::load(latest);
    agent.load(archive);
    env_steps = std::stoull(archive.meta("train.env_steps"));
    resumed = true;
    // Drop log rows written after the checkpoint.
    if (std::filesystem::exists(log_path)) {
      const auto table = read_csv(log_path);
      CsvWriter rewrite(log_path, train_log_header());
      for (const auto& row : table.rows)
        if (std::stoull(row[0]) <= env_steps) rewrite.row(row);
    }
  }

  std::unique_ptr<CsvWriter> log;
  if (persist) log = std::make_unique<CsvWriter>(log_path, train_log_header(), resumed);

  std::vector<std::vector<double>> obs;
  if (resumed) {
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = detail::mix_seed(pool_cfg.seed(i), env_steps);
    obs = pool.reset_all(seeds);
  } else {
    obs = pool.reset_all();
  }

  std::vector<double> ep_reward(n, 0.0);
  std::vector<std::uint64_t> ep_len(n, 0);
  detail::IntervalStats interval;
  std::uint64_t next_log = (env_steps / std::max<std::uint64_t>(opt.log_interval, 1) + 1) * opt.log_interval;
  std::uint64_t next_ckpt =
      opt.checkpoint_interval ? (env_steps / opt.checkpoint_interval + 1) * opt.checkpoint_interval : 0;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t ready_size = std::max<std::size_t>(cfg.warmup_steps, cfg.batch_n);
  const Eigen::Index od = static_cast<Eigen::Index>(agent.obs_dim());

  while (env_steps < opt.total_steps) {
    Matrix unit_actions(static_cast<Eigen::Index>(Action::kDim), static_cast<Eigen::Index>(n));
    if (!resumed && cfg.warmup_random_actions && env_steps < cfg.warmup_steps) {
      for (Eigen::Index i = 0; i < unit_actions.size(); ++i) unit_actions.data()[i] = unit(agent.rng());
    } else {
      Matrix batch_obs(od, static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i)
        batch_obs.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vector>(obs[i].data(), od);
      unit_actions = agent.act_batch(batch_obs, false);
    }
    std::vector<Action> actions(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      actions[i] = agent.action_box().from_unit(unit_actions(0, c), unit_actions(1, c));
    }

    auto results = pool.step_all(actions);
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = results[i];
      Transition t;
      t.s = std::move(obs[i]);
      t.a = {unit_actions(0, static_cast<Eigen::Index>(i)), unit_actions(1, static_cast<Eigen::Index>(i))};
      t.r = r.reward;
      t.s_next = r.done ? r.final_observation : r.observation;
      t.done = r.done && !cfg.bootstrap_on_timeout;
      buffer.add(t);
      obs[i] = std::move(r.observation);

      for (int k : r.info.kappa) interval.kappa += static_cast<double>(k) / static_cast<double>(r.info.kappa.size());
      interval.omega += r.info.omega;
      ++interval.delay_samples;

      ep_reward[i] += r.reward;
      ++ep_len[i];
      if (r.done) {
        const auto s = static_cast<std::size_t>(pool_cfg.setup_of(i));
        interval.reward_sum[s] += ep_reward[i] / static_cast<double>(ep_len[i]);
        ++interval.episodes[s];
        ep_reward[i] = 0.0;
        ep_len[i] = 0;
      }
    }
    env_steps += n;

    if (buffer.size() >= ready_size) {
      for (std::size_t u = 0; u < cfg.updates_per_step; ++u) {
        const auto st = agent.update(buffer.sample(cfg.batch_n, agent.rng()));
        interval.c1 += st.critic1_loss;
        interval.c2 += st.critic2_loss;
        interval.actor += st.actor_loss;
        ++interval.updates;
      }
    }

    const bool last = env_steps >= opt.total_steps;
    if (env_steps >= next_log || last) {
      const auto row = interval.close(env_steps, agent.alpha(), agent.updates());
      summary.log.push_back(row);
      if (log) {
        log->row(to_cells(row));
        log->flush();
      }
      if (on_log) on_log(row);
      interval = {};
      while (next_log <= env_steps) next_log += opt.log_interval;
    }
    if (persist && ((next_ckpt && env_steps >= next_ckpt) || last)) {
      const std::string latest = checkpoint_path(opt.out_dir, "latest");
      save_training_checkpoint(agent, buffer, env_steps, latest);
      if (next_ckpt && env_steps >= next_ckpt) {
        std::filesystem::copy_file(latest, checkpoint_path(opt.out_dir, "step_" + std::to_string(env_steps)),
                                   std::filesystem::copy_options::overwrite_existing);
        while (next_ckpt && next_ckpt <= env_steps) next_ckpt += opt.checkpoint_interval;
      }
      summary.last_checkpoint = latest;
    }
  }
  if (persist) {
    std::filesystem::copy_file(checkpoint_path(opt.out_dir, "latest"), checkpoint_path(opt.out_dir, "final"),
                               std::filesystem::copy_options::overwrite_existing);
    summary.last_checkpoint = checkpoint_path(opt.out_dir, "final");
  }
  summary.env_steps = env_steps;
  summary.updates = agent.updates();
  return summary;
}

}  // namespace wwtp
