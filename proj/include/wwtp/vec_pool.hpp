#pragma once

// Batched reset/step over independent environments, executed either in the
// caller's thread or on persistent worker threads.

#include <array>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "wwtp/delay.hpp"
#include "wwtp/env.hpp"
#include "wwtp/errors.hpp"

namespace wwtp {

enum class PoolExecution { sequential, threaded };

struct PoolConfig {
  std::size_t n_envs = 16;
  // Number of environments per scheduler setup E1..E4, in that order.
  std::array<std::size_t, 4> setups{4, 4, 4, 4};
  std::vector<std::uint64_t> seeds;  // empty: base_seed + index
  std::uint64_t base_seed = 1000;
  PoolExecution execution = PoolExecution::threaded;
  std::size_t workers = 0;  // 0: one per hardware thread, capped at n_envs

  void validate() const {
    std::size_t sum = 0;
    for (auto n : setups) sum += n;
    if (sum != n_envs)
      throw ConfigError("pool: setup counts sum to " + std::to_string(sum) + " but n_envs is " + std::to_string(n_envs));
    if (n_envs == 0) throw ConfigError("pool: n_envs must be positive");
    if (!seeds.empty()) {
      if (seeds.size() != n_envs) throw ConfigError("pool: need exactly one seed per environment");
      if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("pool: environment seeds must be distinct");
    }
  }

  std::uint64_t seed(std::size_t i) const { return seeds.empty() ? base_seed + i : seeds[i]; }

  SchedulerMode setup_of(std::size_t i) const {
    std::size_t acc = 0;
    for (std::size_t s = 0; s < setups.size(); ++s) {
      acc += setups[s];
      if (i < acc) return static_cast<SchedulerMode>(s);
    }
    throw UsageError("pool: environment index out of range");
  }
};

template <class Env>
class VecPool {
 public:
  VecPool(std::vector<Env> envs, PoolExecution execution = PoolExecution::threaded, std::size_t workers = 0)
      : envs_(std::move(envs)), execution_(execution) {
    if (envs_.empty()) throw ConfigError("pool: no environments");
    for (std::size_t i = 1; i < envs_.size(); ++i) {
      if (envs_[i].observation_dim() != envs_[0].observation_dim())
        throw ConfigError("pool: environment " + std::to_string(i) + " has a different observation dimension");
    }
    results_.resize(envs_.size());
    errors_.resize(envs_.size());
    if (execution_ == PoolExecution::threaded) {
      std::size_t n = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
      n = std::min(n, envs_.size());
      for (std::size_t w = 0; w < n; ++w) threads_.emplace_back([this, w, n] { worker_loop(w, n); });
    }
  }

  VecPool(const VecPool&) = delete;
  VecPool& operator=(const VecPool&) = delete;

  ~VecPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    start_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const { return envs_.size(); }
  std::size_t observation_dim() const { return envs_.front().observation_dim(); }
  const Env& env(std::size_t i) const { return envs_.at(i); }

  std::vector<std::vector<double>> reset_all() {
    if (pending_) throw UsageError("pool: reset_all while a step is pending");
    std::vector<std::vector<double>> obs(envs_.size());
    run([&](std::size_t i) { obs[i] = envs_[i].reset(); });
    return obs;
  }

  std::vector<std::vector<double>> reset_all(const std::vector<std::uint64_t>& seeds) {
    if (pending_) throw UsageError("pool: reset_all while a step is pending");
    if (seeds.size() != envs_.size()) throw UsageError("pool: need one reset seed per environment");
    std::vector<std::vector<double>> obs(envs_.size());
    run([&](std::size_t i) { obs[i] = envs_[i].reset(seeds[i]); });
    return obs;
  }

  // Dispatches one step per environment. Pair with step_wait().
  void step_async(const std::vector<Action>& actions) {
    if (actions.size() != envs_.size())
      throw UsageError("pool: got " + std::to_string(actions.size()) + " actions for " + std::to_string(envs_.size()) +
                       " environments");
    if (pending_) throw UsageError("pool: step_async called twice without step_wait");
    actions_ = actions;
    results_.assign(envs_.size(), StepResult{});
    pending_ = true;
    auto task = [this](std::size_t i) {
      StepResult r = envs_[i].step(actions_[i]);
      if (r.done) {
        r.final_observation = std::move(r.observation);
        r.observation = envs_[i].reset();
      }
      results_[i] = std::move(r);
    };
    if (execution_ == PoolExecution::sequential) {
      run_sequential(task);
    } else {
      dispatch(task);
    }
  }

  std::vector<StepResult> step_wait() {
    if (!pending_) throw UsageError("pool: step_wait without a pending step");
    if (execution_ == PoolExecution::threaded) wait_workers();
    pending_ = false;
    rethrow_first_error();
    return std::move(results_);
  }

  std::vector<StepResult> step_all(const std::vector<Action>& actions) {
    step_async(actions);
    return step_wait();
  }

 private:
  void run(const std::function<void(std::size_t)>& task) {
    if (execution_ == PoolExecution::sequential) {
      run_sequential(task);
    } else {
      dispatch(task);
      wait_workers();
    }
    rethrow_first_error();
  }

  void run_sequential(const std::function<void(std::size_t)>& task) {
    for (std::size_t i = 0; i < envs_.size(); ++i) {
      try {
        task(i);
      } catch (...) {
        errors_[i] = std::current_exception();
      }
    }
  }

  void dispatch(std::function<void(std::size_t)> task) {
    {
      std::lock_guard lock(mutex_);
      task_ = std::move(task);
      finished_ = 0;
      ++generation_;
    }
    start_cv_.notify_all();
  }

  void wait_workers() {
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [&] { return finished_ == threads_.size(); });
  }

  void worker_loop(std::size_t w, std::size_t n) {
    std::uint64_t seen = 0;
    for (;;) {
      std::function<void(std::size_t)> task;
      {
        std::unique_lock lock(mutex_);
        start_cv_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        task = task_;
      }
      for (std::size_t i = w; i < envs_.size(); i += n) {
        try {
          task(i);
        } catch (...) {
          errors_[i] = std::current_exception();
        }
      }
      {
        std::lock_guard lock(mutex_);
        ++finished_;
      }
      done_cv_.notify_one();
    }
  }

  void rethrow_first_error() {
    for (std::size_t i = 0; i < errors_.size(); ++i) {
      if (!errors_[i]) continue;
      auto e = errors_[i];
      std::fill(errors_.begin(), errors_.end(), nullptr);
      try {
        std::rethrow_exception(e);
      } catch (const std::exception& ex) {
        throw UsageError("pool: environment " + std::to_string(i) + " failed: " + ex.what());
      }
    }
  }

  std::vector<Env> envs_;
  PoolExecution execution_;
  std::vector<Action> actions_;
  std::vector<StepResult> results_;
  std::vector<std::exception_ptr> errors_;
  bool pending_ = false;

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  std::function<void(std::size_t)> task_;
  std::uint64_t generation_ = 0;
  std::size_t finished_ = 0;
  bool stop_ = false;
};

using DelayedPlantEnv = DelayedEnv<PlantEnv>;

// Builds the delayed plant environments for a pool: env i uses the scheduler
// setup given by cfg.setup_of(i), its own seed, and the shared delay config
// unless a per-setup override is given.
inline std::vector<DelayedPlantEnv> make_pool_envs(const EnvConfig& env_cfg, const DelayConfig& delay,
                                                   const PoolConfig& pool,
                                                   const std::array<std::optional<DelayConfig>, 4>& overrides = {}) {
  pool.validate();
  std::vector<DelayedPlantEnv> envs;
  envs.reserve(pool.n_envs);
  for (std::size_t i = 0; i < pool.n_envs; ++i) {
    try {
      EnvConfig cfg = env_cfg;
      const SchedulerMode setup = pool.setup_of(i);
      cfg.scheduler.mode = setup;
      DelayConfig d = overrides[static_cast<std::size_t>(setup)].value_or(delay);
      d.seed = delay.seed * 1000003ULL + pool.seed(i);
      envs.emplace_back(PlantEnv(cfg, pool.seed(i)), d);
    } catch (const std::exception& e) {
      throw ConfigError("pool: constructing environment " + std::to_string(i) + " failed: " + e.what());
    }
  }
  return envs;
}

}  // namespace wwtp
