#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rlbd/envs/pixel_grid.hpp"
#include "rlbd/nn/network.hpp"
#include "rlbd/rl/gradient.hpp"

namespace rlbd::rl {

using envs::Transition;

struct ReturnsAndAdvantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

// Discounted returns per transition. The buffer holds `n_envs` interleaved
// streams (index k belongs to env k % n_envs). A stream is bootstrapped with
// V(next_obs) where it is cut off mid-episode or at a horizon timeout.
ReturnsAndAdvantages compute_returns_and_advantages(std::span<const Transition> transitions,
                                                    const nn::Mlp& value_net, double gamma, std::size_t n_envs = 1);

struct Batch {
  std::vector<Transition> transitions;
  std::vector<double> returns;
  std::vector<double> advantages;
};

struct A2cCoefficients {
  double entropy_coef = 0.02;
  double value_coef = 0.5;
};

struct LossStats {
  double policy_loss = 0.0;  // -mean(log pi(a|s) * adv)
  double value_loss = 0.0;   // mean((G - V)^2)
  double entropy = 0.0;      // mean policy entropy
  double total_loss = 0.0;
  double grad_norm = 0.0;    // global norm before clipping
};

struct A2cGradients {
  MlpGradient policy;
  MlpGradient value;
  LossStats stats;
};

// total = policy_loss - entropy_coef * entropy + value_coef * value_loss.
double a2c_loss(const nn::PolicyNetwork& policy, const nn::Mlp& value_net, const Batch& batch,
                const A2cCoefficients& coefs);

// Analytic gradient of a2c_loss by reverse-mode differentiation.
A2cGradients a2c_gradients(const nn::PolicyNetwork& policy, const nn::Mlp& value_net, const Batch& batch,
                           const A2cCoefficients& coefs);

enum class OptimizerKind { Sgd, RmsProp };

// Per-network optimizer state. RMSProp follows the usual A2C settings (alpha 0.99, eps 1e-5).
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::RmsProp, double alpha = 0.99, double eps = 1e-5)
      : kind_(kind), alpha_(alpha), eps_(eps) {}

  void step(nn::Mlp& net, const MlpGradient& grad, double lr);
  OptimizerKind kind() const noexcept { return kind_; }

 private:
  OptimizerKind kind_;
  double alpha_;
  double eps_;
  MlpGradient square_avg_;
  bool initialized_ = false;
};

struct A2cUpdateConfig {
  double lr = 7e-4;
  double entropy_coef = 0.02;
  double value_coef = 0.5;
  double clip_norm = 3.0;
};

struct A2cOptimizers {
  Optimizer policy;
  Optimizer value;

  explicit A2cOptimizers(OptimizerKind kind = OptimizerKind::RmsProp) : policy(kind), value(kind) {}
};

// One gradient step on both networks with the joint gradient norm clipped at
// clip_norm. Throws DivergenceError on a non-finite loss or gradient.
LossStats a2c_update(nn::PolicyNetwork& policy, nn::Mlp& value_net, const Batch& batch,
                     const A2cUpdateConfig& config, A2cOptimizers& optimizers);

}  // namespace rlbd::rl
