#pragma once

// Soft Actor-Critic: one squashed-Gaussian actor, twin critics with
// Polyak-averaged targets and a uniform replay buffer.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "wwtp/checkpoint.hpp"
#include "wwtp/errors.hpp"
#include "wwtp/nn.hpp"
#include "wwtp/types.hpp"

namespace wwtp {

using nn::Matrix;
using nn::Vector;

struct SacConfig {
  double gamma = 0.99;
  double alpha = 0.2;
  bool auto_alpha = false;
  double target_entropy = -static_cast<double>(Action::kDim);
  double tau_polyak = 0.005;
  std::size_t batch_n = 256;
  std::size_t buffer_capacity = 1'000'000;
  std::size_t warmup_steps = 10'000;
  std::size_t updates_per_step = 1;
  std::uint64_t seed = 0;
  std::vector<int> hidden{256, 256};
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  // Multiplies rewards inside the Bellman target only.
  double reward_scale = 1.0;
  // Floor -reward_clip on rewards seen by the critic targets, 0 disables.
  // Stored transitions and all reported metrics keep the raw reward.
  double reward_clip = 0.0;
  // Global gradient norm bound for actor and critic steps, 0 disables.
  double max_grad_norm = 0.0;
  // Treat time-limit episode ends as non-terminal and bootstrap from the
  // final observation.
  bool bootstrap_on_timeout = false;
  // Uniform random actions while the buffer is filling.
  bool warmup_random_actions = true;
  double log_std_min = -20.0;
  double log_std_max = 2.0;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("sac.gamma must lie in (0, 1)");
    if (!(alpha > 0.0)) throw ConfigError("sac.alpha must be > 0");
    if (!(tau_polyak > 0.0 && tau_polyak <= 1.0)) throw ConfigError("sac.tau_polyak must lie in (0, 1]");
    if (batch_n == 0) throw ConfigError("sac.batch_n must be positive");
    if (batch_n > buffer_capacity) throw ConfigError("sac.batch_n must not exceed sac.buffer_capacity");
    if (updates_per_step == 0) throw ConfigError("sac.updates_per_step must be positive");
    if (hidden.empty()) throw ConfigError("sac.hidden needs at least one layer");
    for (int h : hidden)
      if (h <= 0) throw ConfigError("sac.hidden sizes must be positive");
    if (!(actor_lr > 0.0 && critic_lr > 0.0 && alpha_lr > 0.0)) throw ConfigError("sac learning rates must be > 0");
    if (!(reward_scale > 0.0)) throw ConfigError("sac.reward_scale must be > 0");
    if (!(reward_clip >= 0.0)) throw ConfigError("sac.reward_clip must be >= 0");
    if (!(max_grad_norm >= 0.0)) throw ConfigError("sac.max_grad_norm must be >= 0");
    if (!(log_std_min < log_std_max)) throw ConfigError("sac.log_std_min must be below sac.log_std_max");
  }

  nn::PolicyConfig policy() const { return {log_std_min, log_std_max}; }
};

// ---------------------------------------------------------------------------
// Replay buffer

struct Transition {
  std::vector<double> s;
  std::array<double, Action::kDim> a{};  // normalised to [-1, 1]
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

struct Batch {
  Matrix obs;       // obs_dim x N
  Matrix actions;   // action_dim x N
  Vector rewards;   // N
  Matrix next_obs;  // obs_dim x N
  Vector dones;     // N, 1.0 for terminal

  Eigen::Index size() const { return obs.cols(); }
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t obs_dim)
      : capacity_(capacity),
        obs_dim_(obs_dim),
        obs_(static_cast<Eigen::Index>(obs_dim), static_cast<Eigen::Index>(capacity)),
        next_obs_(static_cast<Eigen::Index>(obs_dim), static_cast<Eigen::Index>(capacity)),
        actions_(static_cast<Eigen::Index>(Action::kDim), static_cast<Eigen::Index>(capacity)),
        rewards_(static_cast<Eigen::Index>(capacity)),
        dones_(static_cast<Eigen::Index>(capacity)) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
  }

  void add(const Transition& t) {
    if (t.s.size() != obs_dim_ || t.s_next.size() != obs_dim_)
      throw UsageError("replay buffer: transition has observation dim " + std::to_string(t.s.size()) + "/" +
                       std::to_string(t.s_next.size()) + ", buffer expects " + std::to_string(obs_dim_));
    const auto c = static_cast<Eigen::Index>(cursor_);
    obs_.col(c) = Eigen::Map<const Vector>(t.s.data(), static_cast<Eigen::Index>(obs_dim_));
    next_obs_.col(c) = Eigen::Map<const Vector>(t.s_next.data(), static_cast<Eigen::Index>(obs_dim_));
    for (std::size_t i = 0; i < Action::kDim; ++i) actions_(static_cast<Eigen::Index>(i), c) = t.a[i];
    rewards_[c] = t.r;
    dones_[c] = t.done ? 1.0 : 0.0;
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
    ++total_added_;
  }

  Batch gather(std::span<const std::size_t> indices) const {
    const auto n = static_cast<Eigen::Index>(indices.size());
    Batch b{Matrix(obs_.rows(), n), Matrix(actions_.rows(), n), Vector(n), Matrix(obs_.rows(), n), Vector(n)};
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(j)]);
      if (indices[static_cast<std::size_t>(j)] >= size_) throw UsageError("replay buffer: index beyond stored data");
      b.obs.col(j) = obs_.col(i);
      b.next_obs.col(j) = next_obs_.col(i);
      b.actions.col(j) = actions_.col(i);
      b.rewards[j] = rewards_[i];
      b.dones[j] = dones_[i];
    }
    return b;
  }

  // Uniform with replacement over stored transitions.
  Batch sample(std::size_t n, Rng& rng) const {
    if (size_ == 0) throw UsageError("replay buffer: sampling from an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return gather(idx);
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return cursor_; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::uint64_t total_added() const { return total_added_; }

 private:
  std::size_t capacity_;
  std::size_t obs_dim_;
  Matrix obs_, next_obs_, actions_;
  Vector rewards_, dones_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::uint64_t total_added_ = 0;
};

// ---------------------------------------------------------------------------
// Update rules

inline Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

// y = scale * r + gamma * (1 - done) * [min_j Qhat_j(s', a') - alpha log pi(a'|s')],
// with a' drawn from the current actor.
inline Vector compute_target(const Batch& batch, const nn::Mlp& target1, const nn::Mlp& target2,
                             const nn::Mlp& actor, double gamma, double alpha, double reward_scale,
                             const nn::PolicyConfig& policy, Rng& rng) {
  const auto next = nn::sample_policy(actor, batch.next_obs, rng, false, policy);
  const Matrix input = stack_rows(batch.next_obs, next.action);
  const Matrix q1 = target1.forward(input);
  const Matrix q2 = target2.forward(input);
  Vector y(batch.size());
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const double soft_value = std::min(q1(0, i), q2(0, i)) - alpha * next.log_prob[i];
    y[i] = reward_scale * batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * soft_value;
  }
  return y;
}

inline std::string batch_diagnostics(const Batch& batch, const Vector& y) {
  std::ostringstream os;
  os << "batch of " << batch.size() << ": reward range [" << batch.rewards.minCoeff() << ", "
     << batch.rewards.maxCoeff() << "], target range [" << y.minCoeff() << ", " << y.maxCoeff()
     << "], obs finite=" << batch.obs.allFinite() << ", actions finite=" << batch.actions.allFinite();
  return os.str();
}

// One Adam step on mean((Q(s, a) - y)^2). Returns the pre-step loss.
inline double critic_update(const Batch& batch, nn::Mlp& critic, nn::Adam& optimizer, const Vector& y,
                            double max_grad_norm = 0.0) {
  nn::Tape tape;
  const Matrix q = critic.forward(stack_rows(batch.obs, batch.actions), tape);
  const double n = static_cast<double>(batch.size());
  const Vector residual = q.row(0).transpose() - y;
  const double loss = residual.squaredNorm() / n;
  if (!std::isfinite(loss)) throw NumericalError("critic loss is not finite; " + batch_diagnostics(batch, y));
  const Matrix grad = (2.0 / n) * residual.transpose();
  auto grads = critic.backward(tape, grad);
  nn::clip_global_norm(grads, max_grad_norm);
  optimizer.step(critic, grads);
  return loss;
}

struct ActorUpdateResult {
  double loss = 0.0;
  double mean_log_prob = 0.0;
};

struct ActorGradients {
  double loss = 0.0;
  double mean_log_prob = 0.0;
  nn::Gradients grads;
};

// Loss mean(alpha log pi(a~|s) - min_j Q_j(s, a~)) and its actor gradients,
// with a~ reparameterised through the given noise; critics are held fixed.
inline ActorGradients actor_gradients(const Batch& batch, const nn::Mlp& actor, const nn::Mlp& critic1,
                                      const nn::Mlp& critic2, double alpha, const nn::PolicyConfig& policy,
                                      const Matrix& noise) {
  const auto sample = nn::evaluate_policy(actor, batch.obs, noise, policy);
  const Matrix input = stack_rows(batch.obs, sample.action);
  nn::Tape t1, t2;
  const Matrix q1 = critic1.forward(input, t1);
  const Matrix q2 = critic2.forward(input, t2);
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix g1 = Matrix::Zero(1, n), g2 = Matrix::Zero(1, n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool first = q1(0, i) <= q2(0, i);
    loss += alpha * sample.log_prob[i] - (first ? q1(0, i) : q2(0, i));
    (first ? g1 : g2)(0, i) = -inv_n;
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw NumericalError("actor loss is not finite");
  Matrix gi1, gi2;
  critic1.backward(t1, g1, &gi1);
  critic2.backward(t2, g2, &gi2);
  const auto obs_rows = batch.obs.rows();
  const Matrix grad_action = gi1.bottomRows(gi1.rows() - obs_rows) + gi2.bottomRows(gi2.rows() - obs_rows);
  const Vector grad_log_prob = Vector::Constant(n, alpha * inv_n);
  return {loss, sample.log_prob.mean(), nn::policy_backward(actor, sample, grad_action, grad_log_prob, policy)};
}

// One Adam step on the actor loss above.
inline ActorUpdateResult actor_update(const Batch& batch, nn::Mlp& actor, const nn::Mlp& critic1,
                                      const nn::Mlp& critic2, double alpha, nn::Adam& optimizer,
                                      const nn::PolicyConfig& policy, const Matrix& noise,
                                      double max_grad_norm = 0.0) {
  auto g = actor_gradients(batch, actor, critic1, critic2, alpha, policy, noise);
  nn::clip_global_norm(g.grads, max_grad_norm);
  optimizer.step(actor, g.grads);
  return {g.loss, g.mean_log_prob};
}

inline ActorUpdateResult actor_update(const Batch& batch, nn::Mlp& actor, const nn::Mlp& critic1,
                                      const nn::Mlp& critic2, double alpha, nn::Adam& optimizer,
                                      const nn::PolicyConfig& policy, Rng& rng, double max_grad_norm = 0.0) {
  Matrix noise(actor.output_dim() / 2, batch.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
  return actor_update(batch, actor, critic1, critic2, alpha, optimizer, policy, noise, max_grad_norm);
}

// target <- tau * online + (1 - tau) * target, element-wise.
inline void polyak_update(nn::Mlp& target, const nn::Mlp& online, double tau) {
  nn::check_same_shape(target, online, "polyak_update");
  for (std::size_t l = 0; l < target.layers().size(); ++l) {
    auto& t = target.layers()[l];
    const auto& o = online.layers()[l];
    t.weight = tau * o.weight + (1.0 - tau) * t.weight;
    t.bias = tau * o.bias + (1.0 - tau) * t.bias;
  }
}

// ---------------------------------------------------------------------------
// Agent

struct UpdateStats {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double mean_log_prob = 0.0;
};

class SacAgent {
 public:
  SacAgent(std::size_t obs_dim, SacConfig cfg, ActionBox box, std::string delay_tag = "nd")
      : cfg_((cfg.validate(), std::move(cfg))), box_(box), obs_dim_(obs_dim), delay_tag_(std::move(delay_tag)),
        rng_(cfg_.seed) {
    const int od = static_cast<int>(obs_dim);
    const int ad = static_cast<int>(Action::kDim);
    std::vector<int> actor_sizes{od};
    std::vector<int> critic_sizes{od + ad};
    for (int h : cfg_.hidden) {
      actor_sizes.push_back(h);
      critic_sizes.push_back(h);
    }
    actor_sizes.push_back(2 * ad);
    critic_sizes.push_back(1);
    actor_ = nn::Mlp::initialized(actor_sizes, nn::Activation::relu, rng_);
    critic1_ = nn::Mlp::initialized(critic_sizes, nn::Activation::relu, rng_);
    critic2_ = nn::Mlp::initialized(critic_sizes, nn::Activation::relu, rng_);
    target1_ = critic1_;
    target2_ = critic2_;
    actor_opt_ = nn::Adam(actor_, {cfg_.actor_lr});
    critic1_opt_ = nn::Adam(critic1_, {cfg_.critic_lr});
    critic2_opt_ = nn::Adam(critic2_, {cfg_.critic_lr});
    alpha_opt_ = nn::Adam(1, {cfg_.alpha_lr});
    log_alpha_ = std::log(cfg_.alpha);
  }

  // Normalised action in [-1, 1]^2.
  std::array<double, Action::kDim> act_normalized(std::span<const double> obs, bool deterministic) {
    check_obs_dim(obs.size());
    const Matrix x = Eigen::Map<const Matrix>(obs.data(), static_cast<Eigen::Index>(obs.size()), 1);
    const auto s = nn::sample_policy(actor_, x, rng_, deterministic, cfg_.policy());
    return {s.action(0, 0), s.action(1, 0)};
  }

  Action select_action(std::span<const double> obs, bool deterministic) {
    const auto u = act_normalized(obs, deterministic);
    return box_.from_unit(u[0], u[1]);
  }

  // Batched variant over columns of obs; returns normalised actions.
  Matrix act_batch(const Matrix& obs, bool deterministic) {
    check_obs_dim(static_cast<std::size_t>(obs.rows()));
    return nn::sample_policy(actor_, obs, rng_, deterministic, cfg_.policy()).action;
  }

  UpdateStats update(const Batch& batch) {
    UpdateStats st;
    const double a = alpha();
    Batch clipped;
    if (cfg_.reward_clip > 0.0) {
      clipped = batch;
      clipped.rewards = clipped.rewards.cwiseMax(-cfg_.reward_clip);
    }
    const Vector y =
        compute_target(cfg_.reward_clip > 0.0 ? clipped : batch, target1_, target2_, actor_, cfg_.gamma, a, cfg_.reward_scale, cfg_.policy(), rng_);
    st.critic1_loss = critic_update(batch, critic1_, critic1_opt_, y, cfg_.max_grad_norm);
    st.critic2_loss = critic_update(batch, critic2_, critic2_opt_, y, cfg_.max_grad_norm);
    const auto ar =
        actor_update(batch, actor_, critic1_, critic2_, a, actor_opt_, cfg_.policy(), rng_, cfg_.max_grad_norm);
    st.actor_loss = ar.loss;
    st.mean_log_prob = ar.mean_log_prob;
    if (cfg_.auto_alpha) {
      // d/d(log alpha) of -log_alpha * (log pi + target_entropy)
      const double grad = -(ar.mean_log_prob + cfg_.target_entropy);
      std::array<double, 1> p{log_alpha_};
      std::array<double, 1> g{grad};
      alpha_opt_.step(p, g);
      log_alpha_ = p[0];
    }
    polyak_update(target1_, critic1_, cfg_.tau_polyak);
    polyak_update(target2_, critic2_, cfg_.tau_polyak);
    st.alpha = alpha();
    ++updates_;
    if (!actor_.finite() || !critic1_.finite() || !critic2_.finite())
      throw NumericalError("network parameters became non-finite after update " + std::to_string(updates_));
    return st;
  }

  double alpha() const { return cfg_.auto_alpha ? std::exp(log_alpha_) : cfg_.alpha; }
  const SacConfig& config() const { return cfg_; }
  const ActionBox& action_box() const { return box_; }
  std::size_t obs_dim() const { return obs_dim_; }
  const std::string& delay_tag() const { return delay_tag_; }
  std::uint64_t updates() const { return updates_; }
  Rng& rng() { return rng_; }

  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic1() { return critic1_; }
  nn::Mlp& critic2() { return critic2_; }
  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic1() const { return critic1_; }
  const nn::Mlp& critic2() const { return critic2_; }
  const nn::Mlp& target1() const { return target1_; }
  const nn::Mlp& target2() const { return target2_; }

  void save(TensorArchive& a) const {
    a.set_meta("agent.obs_dim", std::to_string(obs_dim_));
    a.set_meta("agent.delay_mode", delay_tag_);
    a.set_meta("agent.hidden", join_sizes(cfg_.hidden));
    a.set_meta("agent.updates", std::to_string(updates_));
    a.set_meta("agent.log_alpha", format_double(log_alpha_));
    a.set_meta("agent.q_max_jsf", format_double(box_.q_max_jsf));
    a.set_meta("agent.q_max_pax", format_double(box_.q_max_pax));
    std::ostringstream rng_state;
    rng_state << rng_;
    a.set_meta("agent.rng", rng_state.str());
    write_network(a, "actor", actor_);
    write_network(a, "critic1", critic1_);
    write_network(a, "critic2", critic2_);
    write_network(a, "target1", target1_);
    write_network(a, "target2", target2_);
    write_optimizer(a, "adam.actor", actor_opt_);
    write_optimizer(a, "adam.critic1", critic1_opt_);
    write_optimizer(a, "adam.critic2", critic2_opt_);
    write_optimizer(a, "adam.alpha", alpha_opt_);
  }

  // Restores everything written by save(). The archive must match this
  // agent's observation dimension and architecture.
  void load(const TensorArchive& a, bool actor_only = false) {
    const auto stored_dim = std::stoul(a.meta("agent.obs_dim"));
    if (stored_dim != obs_dim_)
      throw UsageError("checkpoint trained with delay mode '" + a.meta("agent.delay_mode") + "' (observation dim " +
                       std::to_string(stored_dim) + ") but the environment uses delay mode '" + delay_tag_ +
                       "' (observation dim " + std::to_string(obs_dim_) + ")");
    read_network(a, "actor", actor_);
    if (actor_only) return;
    read_network(a, "critic1", critic1_);
    read_network(a, "critic2", critic2_);
    read_network(a, "target1", target1_);
    read_network(a, "target2", target2_);
    read_optimizer(a, "adam.actor", actor_opt_);
    read_optimizer(a, "adam.critic1", critic1_opt_);
    read_optimizer(a, "adam.critic2", critic2_opt_);
    read_optimizer(a, "adam.alpha", alpha_opt_);
    updates_ = std::stoull(a.meta("agent.updates"));
    log_alpha_ = parse_double(a.meta("agent.log_alpha"));
    std::istringstream rng_state(a.meta("agent.rng"));
    rng_state >> rng_;
  }

 private:
  void check_obs_dim(std::size_t dim) const {
    if (dim != obs_dim_)
      throw UsageError("observation has dim " + std::to_string(dim) + " but the actor expects " +
                       std::to_string(obs_dim_) + " (delay mode '" + delay_tag_ + "')");
  }

  SacConfig cfg_;
  ActionBox box_;
  std::size_t obs_dim_;
  std::string delay_tag_;
  Rng rng_;
  nn::Mlp actor_, critic1_, critic2_, target1_, target2_;
  nn::Adam actor_opt_, critic1_opt_, critic2_opt_, alpha_opt_;
  double log_alpha_ = 0.0;
  std::uint64_t updates_ = 0;
};

inline std::vector<int> parse_sizes(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(std::stoi(item));
  return out;
}

// Rebuilds an agent with the architecture, action box and delay tag stored
// in the archive.
inline SacAgent agent_from_checkpoint(const TensorArchive& a, bool actor_only = true) {
  SacConfig cfg;
  cfg.hidden = parse_sizes(a.meta("agent.hidden"));
  ActionBox box;
  box.q_max_jsf = parse_double(a.meta("agent.q_max_jsf"));
  box.q_max_pax = parse_double(a.meta("agent.q_max_pax"));
  SacAgent agent(std::stoul(a.meta("agent.obs_dim")), cfg, box, a.meta("agent.delay_mode"));
  agent.load(a, actor_only);
  return agent;
}

}  // namespace wwtp
