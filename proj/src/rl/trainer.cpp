#include "rlbd/rl/trainer.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "rlbd/error.hpp"

namespace rlbd::rl {

void TrainConfig::validate() const {
  if (n_envs == 0) throw ConfigError("train.n_envs must be positive");
  if (rollout_len == 0) throw ConfigError("train.rollout_len must be positive");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("train.gamma must lie in [0, 1)");
  if (entropy_coef < 0.0) throw ConfigError("train.entropy_coef must be non-negative");
  if (value_coef < 0.0) throw ConfigError("train.value_coef must be non-negative");
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
  if (hidden.empty() || std::ranges::find(hidden, 0U) != hidden.end()) {
    throw ConfigError("train.hidden must list positive layer widths");
  }
  if (log_interval == 0) throw ConfigError("train.log_interval must be positive");
  env.validate();
}

EnvPool::EnvPool(const envs::PixelGridConfig& config, std::size_t n_envs, std::uint64_t seed) {
  const std::uint64_t base = derive_seed(seed, streams::kEnvs);
  for (std::size_t i = 0; i < n_envs; ++i) {
    envs_.emplace_back(config);
    rngs_.emplace_back(derive_seed(base, i));
    observations_.push_back(envs_.back().reset(rngs_.back()));
    running_returns_.push_back(0.0);
  }
}

Transition EnvPool::step(std::size_t i, std::size_t action) {
  Transition t = envs_.at(i).step(action);
  running_returns_[i] += t.reward;
  reward_ledger_ += t.reward;
  if (t.done) {
    completed_.push_back(running_returns_[i]);
    running_returns_[i] = 0.0;
    observations_[i] = envs_[i].reset(rngs_[i]);
  } else {
    observations_[i] = t.next_obs;
  }
  return t;
}

void collect_rollout(const nn::PolicyNetwork& policy, EnvPool& pool, RolloutBuffer& buffer,
                     std::size_t rollout_len, Rng& rng) {
  for (std::size_t step = 0; step < rollout_len; ++step) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto dist = std::get<nn::Categorical>(nn::action_distribution(policy, pool.observation(i)));
      buffer.add(pool.step(i, nn::sample_categorical(dist, rng)));
    }
  }
}

double TrainResult::final_mean_return() const {
  if (episode_returns.empty()) return 0.0;
  const std::size_t k = std::min<std::size_t>(100, episode_returns.size());
  return std::accumulate(episode_returns.end() - static_cast<std::ptrdiff_t>(k), episode_returns.end(), 0.0) /
         static_cast<double>(k);
}

nn::PolicyNetwork initial_policy(const TrainConfig& config) {
  const std::size_t obs_dim = static_cast<std::size_t>(config.env.grid * config.env.grid);
  std::vector<nn::LayerSpec> specs;
  std::size_t in = obs_dim;
  for (std::size_t width : config.hidden) {
    specs.push_back({in, width, nn::Activation::ReLU});
    in = width;
  }
  specs.push_back({in, envs::kPixelGridActions, nn::Activation::Identity});
  Rng rng(derive_seed(config.seed, streams::kInit));
  return nn::PolicyNetwork(nn::Mlp::random_init(specs, rng, 0.01), nn::CategoricalHead{envs::kPixelGridActions});
}

namespace {

nn::Mlp initial_value_net(const TrainConfig& config) {
  const std::size_t obs_dim = static_cast<std::size_t>(config.env.grid * config.env.grid);
  std::vector<nn::LayerSpec> specs;
  std::size_t in = obs_dim;
  for (std::size_t width : config.hidden) {
    specs.push_back({in, width, nn::Activation::ReLU});
    in = width;
  }
  specs.push_back({in, 1, nn::Activation::Identity});
  Rng rng(derive_seed(derive_seed(config.seed, streams::kInit), 1));
  return nn::Mlp::random_init(specs, rng, 1.0);
}

double trailing_mean(const std::vector<double>& values, std::size_t window) {
  if (values.empty()) return 0.0;
  const std::size_t k = std::min(window, values.size());
  return std::accumulate(values.end() - static_cast<std::ptrdiff_t>(k), values.end(), 0.0) / static_cast<double>(k);
}

}  // namespace

TrainResult train(const TrainConfig& config, const BufferFactory& buffer_factory) {
  config.validate();
  TrainResult result;
  nn::PolicyNetwork policy = initial_policy(config);
  nn::Mlp value_net = initial_value_net(config);

  EnvPool pool(config.env, config.n_envs, config.seed);
  Rng action_rng(derive_seed(config.seed, streams::kActions));
  auto buffer = buffer_factory();
  A2cOptimizers optimizers(config.optimizer);
  const A2cUpdateConfig update{config.lr, config.entropy_coef, config.value_coef, config.clip_norm};

  const std::uint64_t per_update = config.n_envs * config.rollout_len;
  std::uint64_t steps = 0;
  std::size_t updates = 0;
  LossStats last{};
  while (steps + per_update <= config.total_steps) {
    const nn::PolicyNetwork policy_before = policy;
    const nn::Mlp value_before = value_net;
    try {
      collect_rollout(policy, pool, *buffer, config.rollout_len, action_rng);
      Batch batch;
      batch.transitions = buffer->drain();
      auto ra = compute_returns_and_advantages(batch.transitions, value_net, config.gamma, config.n_envs);
      batch.returns = std::move(ra.returns);
      batch.advantages = std::move(ra.advantages);
      last = a2c_update(policy, value_net, batch, update, optimizers);
      policy.validate();
    } catch (const Error& e) {
      policy = policy_before;
      value_net = value_before;
      result.diverged = true;
      result.divergence_message = e.what();
      break;
    }
    steps += per_update;
    ++updates;
    if (updates % config.log_interval == 0 || steps + per_update > config.total_steps) {
      result.curve.push_back(
          {steps, trailing_mean(pool.completed_returns(), 100), last.policy_loss, last.value_loss, last.entropy});
    }
  }

  result.episode_returns = pool.completed_returns();
  result.checkpoint.policy = std::move(policy);
  result.checkpoint.metadata = {config.seed, kPixelGridEnvId, steps, false, result.diverged};
  result.value_net = std::move(value_net);
  return result;
}

std::string curve_to_csv(const std::vector<CurveRow>& curve) {
  std::ostringstream out;
  out << "step,mean_return_100,policy_loss,value_loss,entropy\n";
  out << std::setprecision(17);
  for (const auto& row : curve) {
    out << row.step << ',' << row.mean_return_100 << ',' << row.policy_loss << ',' << row.value_loss << ','
        << row.entropy << '\n';
  }
  return out.str();
}

}  // namespace rlbd::rl
