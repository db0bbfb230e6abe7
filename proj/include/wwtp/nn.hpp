#pragma once

// Small dense networks with hand-written reverse-mode gradients, an Adam
// optimizer and the tanh-squashed Gaussian policy head.
//
// Batches are stored column-wise: an input matrix is (features x batch).

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "wwtp/errors.hpp"
#include "wwtp/types.hpp"

namespace wwtp::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh, identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

using Gradients = std::vector<DenseLayer>;

// Intermediate values recorded by a forward pass for backward().
struct Tape {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // affine output of each layer
  bool recorded = false;
};

class Mlp {
 public:
  Mlp() = default;

  // Zero-initialised network with the given layer widths (input first).
  explicit Mlp(std::vector<int> sizes, Activation hidden = Activation::relu) : sizes_(std::move(sizes)), hidden_(hidden) {
    if (sizes_.size() < 2) throw UsageError("Mlp: need at least an input and an output size");
    for (int s : sizes_)
      if (s <= 0) throw UsageError("Mlp: layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
      layers_.push_back({Matrix::Zero(sizes_[l + 1], sizes_[l]), Vector::Zero(sizes_[l + 1])});
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static Mlp initialized(std::vector<int> sizes, Activation hidden, Rng& rng) {
    Mlp net(std::move(sizes), hidden);
    for (auto& layer : net.layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = u(rng);
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = u(rng);
    }
    return net;
  }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  bool finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  Matrix forward(const Matrix& x) const {
    check_input(x);
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * h;
      z.colwise() += layers_[l].bias;
      h = l + 1 < layers_.size() ? activate(z) : std::move(z);
    }
    return h;
  }

  Matrix forward(const Matrix& x, Tape& tape) const {
    check_input(x);
    tape.inputs.clear();
    tape.pre.clear();
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      tape.inputs.push_back(h);
      Matrix z = layers_[l].weight * h;
      z.colwise() += layers_[l].bias;
      h = l + 1 < layers_.size() ? activate(z) : z;
      tape.pre.push_back(std::move(z));
    }
    tape.recorded = true;
    return h;
  }

  // Gradients of a scalar loss with respect to every parameter, given
  // dLoss/dOutput. Optionally also returns dLoss/dInput.
  Gradients backward(const Tape& tape, const Matrix& grad_output, Matrix* grad_input = nullptr) const {
    if (!tape.recorded || tape.pre.size() != layers_.size()) throw UsageError("Mlp::backward: no recorded tape");
    if (grad_output.rows() != output_dim() || grad_output.cols() != tape.pre.back().cols())
      throw UsageError("Mlp::backward: output gradient has the wrong shape");
    Gradients grads(layers_.size());
    Matrix g = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (l + 1 < layers_.size()) g = g.cwiseProduct(activation_derivative(tape.pre[l]));
      grads[l].weight.noalias() = g * tape.inputs[l].transpose();
      grads[l].bias = g.rowwise().sum();
      if (l > 0 || grad_input) {
        Matrix next = layers_[l].weight.transpose() * g;
        g = std::move(next);
      }
    }
    if (grad_input) *grad_input = std::move(g);
    return grads;
  }

 private:
  void check_input(const Matrix& x) const {
    if (layers_.empty()) throw UsageError("Mlp: network has no layers");
    if (x.rows() != input_dim())
      throw UsageError("Mlp: input has " + std::to_string(x.rows()) + " features, network expects " +
                       std::to_string(input_dim()));
  }

  Matrix activate(const Matrix& z) const {
    switch (hidden_) {
      case Activation::relu: return z.cwiseMax(0.0);
      case Activation::tanh: return z.array().tanh().matrix();
      case Activation::identity: return z;
    }
    return z;
  }

  Matrix activation_derivative(const Matrix& z) const {
    switch (hidden_) {
      case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
      case Activation::tanh: return (1.0 - z.array().tanh().square()).matrix();
      case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
    }
    return Matrix::Ones(z.rows(), z.cols());
  }

  std::vector<int> sizes_;
  Activation hidden_ = Activation::relu;
  std::vector<DenseLayer> layers_;
};

inline Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  for (const auto& l : net.layers()) g.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return g;
}

inline bool gradients_finite(const Gradients& g) {
  for (const auto& l : g)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

// Rescales all gradients together so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
inline double clip_global_norm(Gradients& g, double max_norm) {
  double sq = 0.0;
  for (const auto& l : g) sq += l.weight.squaredNorm() + l.bias.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& l : g) {
      l.weight *= k;
      l.bias *= k;
    }
  }
  return norm;
}

inline void check_same_shape(const Mlp& a, const Mlp& b, const char* what) {
  if (a.sizes() != b.sizes()) throw UsageError(std::string(what) + ": network shapes differ");
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t parameter_count, AdamConfig cfg = {})
      : cfg_(cfg), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}
  explicit Adam(const Mlp& net, AdamConfig cfg = {}) : Adam(net.parameter_count(), cfg) {}

  // Returns false (and leaves everything untouched) for non-finite gradients.
  bool step(Mlp& net, const Gradients& grads) {
    if (grads.size() != net.layers().size()) throw UsageError("Adam: gradient/parameter layer count mismatch");
    for (std::size_t l = 0; l < grads.size(); ++l) {
      if (grads[l].weight.rows() != net.layers()[l].weight.rows() ||
          grads[l].weight.cols() != net.layers()[l].weight.cols() ||
          grads[l].bias.size() != net.layers()[l].bias.size())
        throw UsageError("Adam: gradient shape mismatch");
    }
    if (net.parameter_count() != m_.size()) throw UsageError("Adam: optimizer sized for a different network");
    if (!gradients_finite(grads)) {
      ++skipped_;
      return false;
    }
    begin_step();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < grads.size(); ++l) {
      auto& layer = net.layers()[l];
      apply(std::span<double>(layer.weight.data(), static_cast<std::size_t>(layer.weight.size())),
            std::span<const double>(grads[l].weight.data(), static_cast<std::size_t>(grads[l].weight.size())), offset);
      offset += static_cast<std::size_t>(layer.weight.size());
      apply(std::span<double>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())),
            std::span<const double>(grads[l].bias.data(), static_cast<std::size_t>(grads[l].bias.size())), offset);
      offset += static_cast<std::size_t>(layer.bias.size());
    }
    return true;
  }

  // Flat parameter vector variant (e.g. the entropy temperature).
  bool step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != m_.size()) throw UsageError("Adam: size mismatch");
    for (double g : grads)
      if (!std::isfinite(g)) {
        ++skipped_;
        return false;
      }
    begin_step();
    apply(params, grads, 0);
    return true;
  }

  std::int64_t steps() const { return steps_; }
  std::int64_t skipped() const { return skipped_; }
  const AdamConfig& config() const { return cfg_; }
  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  void begin_step() {
    ++steps_;
    correction1_ = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    correction2_ = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  }

  void apply(std::span<double> p, std::span<const double> g, std::size_t offset) {
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double& m = m_[offset + i];
      double& v = v_[offset + i];
      m = b1 * m + (1.0 - b1) * g[i];
      v = b2 * v + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m / correction1_;
      const double v_hat = v / correction2_;
      p[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }

  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::int64_t steps_ = 0;
  std::int64_t skipped_ = 0;
  double correction1_ = 1.0, correction2_ = 1.0;
};

// ---------------------------------------------------------------------------
// Squashed Gaussian policy
//
// The actor network emits [mean; log_std] (2 * action_dim rows). A sample is
// u = mean + exp(log_std) * eps, action = tanh(u), with
//   log p(action) = sum_i [ -eps_i^2 / 2 - log_std_i - log(2 pi) / 2 ]
//                 - sum_i log(1 - tanh(u_i)^2).

struct PolicyConfig {
  double log_std_min = -20.0;
  double log_std_max = 2.0;
};

struct PolicySample {
  Matrix mean;
  Matrix raw_log_std;  // before clamping
  Matrix log_std;
  Matrix noise;
  Matrix pre_squash;
  Matrix action;  // in [-1, 1]
  Vector log_prob;
  Tape tape;
};

// log(1 - tanh(u)^2) evaluated without cancellation.
inline double log_one_minus_tanh_sq(double u) {
  const double x = -2.0 * u;
  const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - softplus);
}

inline PolicySample evaluate_policy(const Mlp& actor, const Matrix& obs, const Matrix& noise,
                                    const PolicyConfig& cfg = {}) {
  const int out = actor.output_dim();
  if (out % 2 != 0) throw UsageError("policy network must output [mean; log_std]");
  const int dim = out / 2;
  if (noise.rows() != dim || noise.cols() != obs.cols()) throw UsageError("policy noise has the wrong shape");
  PolicySample s;
  const Matrix head = actor.forward(obs, s.tape);
  s.mean = head.topRows(dim);
  s.raw_log_std = head.bottomRows(dim);
  s.log_std = s.raw_log_std.cwiseMax(cfg.log_std_min).cwiseMin(cfg.log_std_max);
  s.noise = noise;
  s.pre_squash = s.mean + (s.log_std.array().exp() * noise.array()).matrix();
  s.action = s.pre_squash.array().tanh().matrix();
  s.log_prob.resize(obs.cols());
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (Eigen::Index n = 0; n < obs.cols(); ++n) {
    double lp = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double e = noise(i, n);
      lp += -0.5 * e * e - s.log_std(i, n) - half_log_two_pi - log_one_minus_tanh_sq(s.pre_squash(i, n));
    }
    s.log_prob[n] = lp;
  }
  return s;
}

// Reparameterised draw (standard normal noise), or tanh(mean) when
// deterministic.
inline PolicySample sample_policy(const Mlp& actor, const Matrix& obs, Rng& rng, bool deterministic,
                                  const PolicyConfig& cfg = {}) {
  const int dim = actor.output_dim() / 2;
  Matrix noise = Matrix::Zero(dim, obs.cols());
  if (!deterministic) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
  }
  return evaluate_policy(actor, obs, noise, cfg);
}

// Parameter gradients given dLoss/dAction and dLoss/dLogProb, holding the
// noise fixed.
inline Gradients policy_backward(const Mlp& actor, const PolicySample& s, const Matrix& grad_action,
                                 const Vector& grad_log_prob, const PolicyConfig& cfg = {}) {
  const Eigen::Index dim = s.mean.rows();
  const Eigen::Index n = s.mean.cols();
  if (grad_action.rows() != dim || grad_action.cols() != n || grad_log_prob.size() != n)
    throw UsageError("policy_backward: gradient shapes do not match the sample");
  Matrix grad_head(2 * dim, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double a = s.action(i, c);
      const double sigma = std::exp(s.log_std(i, c));
      // d/du of [grad_a * tanh(u) + grad_lp * (-log(1 - tanh^2 u))]
      const double du = grad_action(i, c) * (1.0 - a * a) + grad_log_prob[c] * 2.0 * a;
      grad_head(i, c) = du;
      const double raw = s.raw_log_std(i, c);
      const bool clamped = raw < cfg.log_std_min || raw > cfg.log_std_max;
      grad_head(dim + i, c) = clamped ? 0.0 : du * sigma * s.noise(i, c) - grad_log_prob[c];
    }
  }
  return actor.backward(s.tape, grad_head);
}

}  // namespace wwtp::nn
