#include "rlbd/envs/linear_gaussian_chain.hpp"

#include <algorithm>
#include <cmath>

#include "rlbd/error.hpp"

namespace rlbd::envs {

void LinearGaussianChain::validate() const {
  if (dim == 0) throw ConfigError("chain dimension must be positive");
  if (!(noise_std > 0.0)) throw ConfigError("chain noise_std must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("chain gamma must lie in [0, 1)");
  if (!(r_max > 0.0)) throw ConfigError("chain r_max must be positive");
  if (goal.size() != dim) throw DimensionError("chain goal length", dim, goal.size());
  if (start && start->size() != dim) throw DimensionError("chain start length", dim, start->size());
  if (horizon == 0) throw ConfigError("chain horizon must be positive");
}

double chain_reward(const LinearGaussianChain& env, std::span<const double> state) {
  if (state.size() != env.dim) throw DimensionError("chain state length", env.dim, state.size());
  double sq = 0.0;
  for (std::size_t k = 0; k < env.dim; ++k) {
    const double diff = state[k] - env.goal[k];
    sq += diff * diff;
  }
  return env.r_max * std::exp(-sq);
}

ChainStep chain_step(const LinearGaussianChain& env, std::span<const double> state, std::span<const double> action,
                     Rng& rng) {
  if (action.size() != env.dim) throw DimensionError("chain action length", env.dim, action.size());
  ChainStep out;
  out.reward = chain_reward(env, state);
  out.next_state.resize(env.dim);
  for (std::size_t k = 0; k < env.dim; ++k) {
    const double raw = state[k] + env.action_gain * action[k] + env.noise_std * standard_normal(rng);
    out.next_state[k] = std::clamp(raw, 0.0, 1.0);
  }
  return out;
}

std::vector<double> chain_initial_state(const LinearGaussianChain& env, Rng& rng) {
  if (env.start) return *env.start;
  std::vector<double> s(env.dim);
  for (double& v : s) v = uniform01(rng);
  return s;
}

std::size_t truncation_horizon(double gamma, double tail) {
  if (gamma <= 0.0) return 1;
  const double t = std::ceil(std::log(tail) / std::log(gamma));
  return static_cast<std::size_t>(std::max(1.0, t));
}

}  // namespace rlbd::envs
