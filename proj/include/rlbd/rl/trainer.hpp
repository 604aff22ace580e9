#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "rlbd/envs/pixel_grid.hpp"
#include "rlbd/nn/checkpoint.hpp"
#include "rlbd/nn/network.hpp"
#include "rlbd/random.hpp"
#include "rlbd/rl/a2c.hpp"
#include "rlbd/rl/rollout_buffer.hpp"

namespace rlbd::rl {

struct TrainConfig {
  std::uint64_t total_steps = 200000;
  std::size_t n_envs = 8;
  std::size_t rollout_len = 5;
  double lr = 7e-4;
  double gamma = 0.99;
  double entropy_coef = 0.02;
  double value_coef = 0.5;
  double clip_norm = 3.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{64, 64};
  OptimizerKind optimizer = OptimizerKind::RmsProp;
  // Curve rows are emitted every `log_interval` updates (and after the last one).
  std::size_t log_interval = 50;
  envs::PixelGridConfig env;

  void validate() const;
};

// Fixed set of PixelGrid instances with their own seed streams and
// auto-reset. Tracks finished-episode returns and an env-side reward ledger.
class EnvPool {
 public:
  EnvPool(const envs::PixelGridConfig& config, std::size_t n_envs, std::uint64_t seed);

  std::size_t size() const noexcept { return envs_.size(); }
  std::size_t obs_dim() const { return envs_.front().obs_dim(); }
  const std::vector<double>& observation(std::size_t i) const { return observations_.at(i); }

  // Steps env i, auto-resetting on episode end.
  Transition step(std::size_t i, std::size_t action);

  const std::vector<double>& completed_returns() const noexcept { return completed_; }
  double reward_ledger() const noexcept { return reward_ledger_; }

 private:
  std::vector<envs::PixelGrid> envs_;
  std::vector<Rng> rngs_;
  std::vector<std::vector<double>> observations_;
  std::vector<double> running_returns_;
  std::vector<double> completed_;
  double reward_ledger_ = 0.0;
};

// Passes exactly pool.size() * rollout_len transitions through buffer.add,
// ordered step-major then env index.
void collect_rollout(const nn::PolicyNetwork& policy, EnvPool& pool, RolloutBuffer& buffer,
                     std::size_t rollout_len, Rng& rng);

struct CurveRow {
  std::uint64_t step = 0;
  double mean_return_100 = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  nn::Mlp value_net;
  std::vector<CurveRow> curve;
  std::vector<double> episode_returns;
  bool diverged = false;
  std::string divergence_message;

  // Mean over the last (up to) 100 finished training episodes.
  double final_mean_return() const;
};

nn::PolicyNetwork initial_policy(const TrainConfig& config);

// Runs collect/update until total_steps. On divergence the last finite
// parameters are returned with metadata.diverged set.
TrainResult train(const TrainConfig& config, const BufferFactory& buffer_factory);

std::string curve_to_csv(const std::vector<CurveRow>& curve);

inline constexpr const char* kPixelGridEnvId = "PixelGrid";

}  // namespace rlbd::rl
