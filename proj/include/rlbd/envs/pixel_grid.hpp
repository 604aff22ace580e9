#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rlbd/random.hpp"

namespace rlbd::envs {

inline constexpr double kAgentValue = 0.6;
inline constexpr double kGoalValue = 0.3;
inline constexpr double kBackgroundValue = 0.0;

enum class Move : std::size_t { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };
inline constexpr std::size_t kPixelGridActions = 5;

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

struct PixelGridConfig {
  int grid = 8;
  int horizon = 64;
  // Negative coordinates select the bottom-right cell.
  Cell goal{-1, -1};
  double goal_reward = 1.0;
  double step_reward = -0.01;

  Cell resolved_goal() const;
  void validate() const;
};

struct PixelGridState {
  Cell agent;
  Cell goal;
  int step_count = 0;
  int grid = 8;
  bool done = false;
};

struct Transition {
  std::vector<double> obs;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
  // Episode ended by the horizon rather than by reaching the goal.
  bool timeout = false;

  bool operator==(const Transition&) const = default;
};

struct ReturnRange {
  double min = 0.0;
  double max = 0.0;
};

// Row-major grid x grid grayscale frame: agent 0.6, goal 0.3, background 0.
std::vector<double> render(const PixelGridState& state);

class PixelGrid {
 public:
  explicit PixelGrid(PixelGridConfig config = {});

  // Agent placed uniformly on a non-goal cell; deterministic per seed.
  std::vector<double> reset(std::uint64_t seed);
  std::vector<double> reset(Rng& rng);

  // Throws Error when the episode is already done.
  Transition step(std::size_t action);

  const PixelGridState& state() const noexcept { return state_; }
  const PixelGridConfig& config() const noexcept { return config_; }
  std::vector<double> observe() const { return render(state_); }
  std::size_t obs_dim() const noexcept { return static_cast<std::size_t>(config_.grid * config_.grid); }

  // Episode return range: [horizon * step_reward, goal_reward].
  ReturnRange return_range() const;

 private:
  PixelGridConfig config_;
  PixelGridState state_;
};

}  // namespace rlbd::envs
