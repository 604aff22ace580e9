#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rlbd/random.hpp"

namespace rlbd::envs {

// Continuous-action chain on [0,1]^d:
//   s' = clip(s + c * a + eps, 0, 1),  eps ~ N(0, sigma_e^2 I)
//   r  = r_max * exp(-||s - g||^2)
struct LinearGaussianChain {
  std::size_t dim = 2;
  double action_gain = 0.2;
  double noise_std = 0.1;
  std::vector<double> goal{0.5, 0.5};
  double r_max = 1.0;
  std::size_t horizon = 132;
  double gamma = 0.9;
  // Fixed initial state; when empty the start is uniform on [0,1]^d.
  std::optional<std::vector<double>> start;

  void validate() const;
};

struct ChainStep {
  std::vector<double> next_state;
  double reward = 0.0;
};

double chain_reward(const LinearGaussianChain& env, std::span<const double> state);

ChainStep chain_step(const LinearGaussianChain& env, std::span<const double> state, std::span<const double> action,
                     Rng& rng);

std::vector<double> chain_initial_state(const LinearGaussianChain& env, Rng& rng);

// Smallest T with gamma^T <= tail (T >= 1).
std::size_t truncation_horizon(double gamma, double tail);

}  // namespace rlbd::envs
