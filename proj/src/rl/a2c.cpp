#include "rlbd/rl/a2c.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rlbd/error.hpp"

namespace rlbd::rl {

ReturnsAndAdvantages compute_returns_and_advantages(std::span<const Transition> transitions,
                                                    const nn::Mlp& value_net, double gamma, std::size_t n_envs) {
  if (n_envs == 0) throw Error("n_envs must be positive");
  if (transitions.size() % n_envs != 0) throw Error("transition count is not a multiple of n_envs");
  const std::size_t n = transitions.size();
  ReturnsAndAdvantages out;
  out.returns.assign(n, 0.0);
  out.advantages.assign(n, 0.0);

  const std::size_t steps = n / n_envs;
  for (std::size_t env = 0; env < n_envs; ++env) {
    double next_return = 0.0;
    for (std::size_t step = steps; step-- > 0;) {
      const std::size_t k = step * n_envs + env;
      const Transition& t = transitions[k];
      double tail = next_return;
      if (t.done && !t.timeout) {
        tail = 0.0;
      } else if (t.timeout || step + 1 == steps) {
        tail = nn::forward_output(value_net, t.next_obs)[0];
      }
      out.returns[k] = t.reward + gamma * tail;
      next_return = out.returns[k];
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    out.advantages[k] = out.returns[k] - nn::forward_output(value_net, transitions[k].obs)[0];
  }
  return out;
}

namespace {

struct SampleTerms {
  std::vector<double> log_probs;
  std::vector<double> probs;
  double entropy = 0.0;
};

SampleTerms categorical_terms(std::span<const double> logits) {
  SampleTerms terms;
  const double max = *std::ranges::max_element(logits);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  const double log_norm = max + std::log(sum);
  terms.log_probs.resize(logits.size());
  terms.probs.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    terms.log_probs[k] = logits[k] - log_norm;
    terms.probs[k] = std::exp(terms.log_probs[k]);
    if (terms.probs[k] > 0.0) terms.entropy -= terms.probs[k] * terms.log_probs[k];
  }
  return terms;
}

void require_categorical(const nn::PolicyNetwork& policy) {
  if (!policy.is_categorical()) throw Error("a2c supports categorical policies only");
}

void check_batch(const Batch& batch) {
  const std::size_t n = batch.transitions.size();
  if (n == 0) throw Error("a2c batch is empty");
  if (batch.returns.size() != n) throw DimensionError("batch returns", n, batch.returns.size());
  if (batch.advantages.size() != n) throw DimensionError("batch advantages", n, batch.advantages.size());
}

}  // namespace

double a2c_loss(const nn::PolicyNetwork& policy, const nn::Mlp& value_net, const Batch& batch,
                const A2cCoefficients& coefs) {
  require_categorical(policy);
  check_batch(batch);
  const double inv_n = 1.0 / static_cast<double>(batch.transitions.size());
  double policy_loss = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  for (std::size_t i = 0; i < batch.transitions.size(); ++i) {
    const auto& t = batch.transitions[i];
    const auto terms = categorical_terms(nn::forward_output(policy.body(), t.obs));
    policy_loss -= terms.log_probs.at(t.action) * batch.advantages[i];
    entropy += terms.entropy;
    const double err = batch.returns[i] - nn::forward_output(value_net, t.obs)[0];
    value_loss += err * err;
  }
  return inv_n * (policy_loss - coefs.entropy_coef * entropy + coefs.value_coef * value_loss);
}

A2cGradients a2c_gradients(const nn::PolicyNetwork& policy, const nn::Mlp& value_net, const Batch& batch,
                           const A2cCoefficients& coefs) {
  require_categorical(policy);
  check_batch(batch);
  const std::size_t n = batch.transitions.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  A2cGradients out{MlpGradient::zeros_like(policy.body()), MlpGradient::zeros_like(value_net), {}};
  double policy_loss = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  std::vector<double> logit_grad(policy.output_dim());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = batch.transitions[i];
    if (t.action >= logit_grad.size()) throw Error("transition action outside the policy's action range");
    const double adv = batch.advantages[i];

    const auto trace = nn::forward(policy.body(), t.obs);
    const auto terms = categorical_terms(trace.output());
    policy_loss -= terms.log_probs[t.action] * adv;
    entropy += terms.entropy;
    // d/dz [-adv * log p_a] = adv * (p - e_a);  d/dz [-beta * H] = beta * p * (log p + H)
    for (std::size_t k = 0; k < logit_grad.size(); ++k) {
      const double p = terms.probs[k];
      double g = adv * (p - (k == t.action ? 1.0 : 0.0));
      if (p > 0.0) g += coefs.entropy_coef * p * (terms.log_probs[k] + terms.entropy);
      logit_grad[k] = inv_n * g;
    }
    backprop(policy.body(), trace, t.obs, logit_grad, out.policy);

    const auto vtrace = nn::forward(value_net, t.obs);
    const double err = vtrace.output()[0] - batch.returns[i];
    value_loss += err * err;
    const double vgrad = inv_n * coefs.value_coef * 2.0 * err;
    backprop(value_net, vtrace, t.obs, std::span<const double>(&vgrad, 1), out.value);
  }
  out.stats.policy_loss = inv_n * policy_loss;
  out.stats.entropy = inv_n * entropy;
  out.stats.value_loss = inv_n * value_loss;
  out.stats.total_loss =
      out.stats.policy_loss - coefs.entropy_coef * out.stats.entropy + coefs.value_coef * out.stats.value_loss;
  out.stats.grad_norm = std::sqrt(out.policy.squared_norm() + out.value.squared_norm());
  return out;
}

void Optimizer::step(nn::Mlp& net, const MlpGradient& grad, double lr) {
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      auto& layer = net.mutable_layer(l);
      auto w = layer.weights.values();
      const auto gw = grad.weights[l].values();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * gw[k];
      for (std::size_t k = 0; k < layer.biases.size(); ++k) layer.biases[k] -= lr * grad.biases[l][k];
    }
    return;
  }
  if (!initialized_) {
    square_avg_ = MlpGradient::zeros_like(net);
    initialized_ = true;
  }
  auto update = [&](double& param, double& avg, double g) {
    avg = alpha_ * avg + (1.0 - alpha_) * g * g;
    param -= lr * g / (std::sqrt(avg) + eps_);
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto& layer = net.mutable_layer(l);
    auto w = layer.weights.values();
    auto avg_w = square_avg_.weights[l].values();
    const auto gw = grad.weights[l].values();
    for (std::size_t k = 0; k < w.size(); ++k) update(w[k], avg_w[k], gw[k]);
    for (std::size_t k = 0; k < layer.biases.size(); ++k) {
      update(layer.biases[k], square_avg_.biases[l][k], grad.biases[l][k]);
    }
  }
}

LossStats a2c_update(nn::PolicyNetwork& policy, nn::Mlp& value_net, const Batch& batch,
                     const A2cUpdateConfig& config, A2cOptimizers& optimizers) {
  auto grads = a2c_gradients(policy, value_net, batch, {config.entropy_coef, config.value_coef});
  const auto& s = grads.stats;
  if (!std::isfinite(s.total_loss) || !std::isfinite(s.grad_norm)) {
    std::ostringstream msg;
    msg << "non-finite a2c loss: policy_loss=" << s.policy_loss << " value_loss=" << s.value_loss
        << " entropy=" << s.entropy << " grad_norm=" << s.grad_norm << " batch=" << batch.transitions.size();
    throw DivergenceError(msg.str());
  }
  if (s.grad_norm > config.clip_norm) {
    const double factor = config.clip_norm / s.grad_norm;
    grads.policy.scale(factor);
    grads.value.scale(factor);
  }
  optimizers.policy.step(policy.mutable_body(), grads.policy, config.lr);
  optimizers.value.step(value_net, grads.value, config.lr);
  return s;
}

}  // namespace rlbd::rl
