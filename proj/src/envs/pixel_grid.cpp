#include "rlbd/envs/pixel_grid.hpp"

#include <algorithm>
#include <string>

#include "rlbd/error.hpp"

namespace rlbd::envs {

Cell PixelGridConfig::resolved_goal() const {
  return {goal.row < 0 ? grid - 1 : goal.row, goal.col < 0 ? grid - 1 : goal.col};
}

void PixelGridConfig::validate() const {
  if (grid < 2) throw ConfigError("pixel grid size must be at least 2");
  if (horizon < 1) throw ConfigError("pixel grid horizon must be positive");
  const Cell g = resolved_goal();
  if (g.row >= grid || g.col >= grid) throw ConfigError("goal cell outside the grid");
}

std::vector<double> render(const PixelGridState& state) {
  const auto n = static_cast<std::size_t>(state.grid);
  std::vector<double> obs(n * n, kBackgroundValue);
  obs[static_cast<std::size_t>(state.goal.row) * n + static_cast<std::size_t>(state.goal.col)] = kGoalValue;
  obs[static_cast<std::size_t>(state.agent.row) * n + static_cast<std::size_t>(state.agent.col)] = kAgentValue;
  return obs;
}

PixelGrid::PixelGrid(PixelGridConfig config) : config_(config) {
  config_.validate();
  state_.grid = config_.grid;
  state_.goal = config_.resolved_goal();
  state_.done = true;
}

std::vector<double> PixelGrid::reset(std::uint64_t seed) {
  Rng rng(seed);
  return reset(rng);
}

std::vector<double> PixelGrid::reset(Rng& rng) {
  const int cells = config_.grid * config_.grid;
  const int goal_index = state_.goal.row * config_.grid + state_.goal.col;
  int index = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cells - 1)));
  if (index >= goal_index) ++index;
  state_.agent = {index / config_.grid, index % config_.grid};
  state_.step_count = 0;
  state_.done = false;
  return observe();
}

Transition PixelGrid::step(std::size_t action) {
  if (state_.done) throw Error("pixel grid step called after episode end");
  if (action >= kPixelGridActions) throw Error("pixel grid action out of range: " + std::to_string(action));

  Transition t;
  t.obs = observe();
  t.action = action;

  Cell& a = state_.agent;
  switch (static_cast<Move>(action)) {
    case Move::Up:
      a.row = std::max(0, a.row - 1);
      break;
    case Move::Down:
      a.row = std::min(config_.grid - 1, a.row + 1);
      break;
    case Move::Left:
      a.col = std::max(0, a.col - 1);
      break;
    case Move::Right:
      a.col = std::min(config_.grid - 1, a.col + 1);
      break;
    case Move::Stay:
      break;
  }
  ++state_.step_count;

  if (a == state_.goal) {
    t.reward = config_.goal_reward;
    t.done = true;
  } else {
    t.reward = config_.step_reward;
    if (state_.step_count >= config_.horizon) {
      t.done = true;
      t.timeout = true;
    }
  }
  state_.done = t.done;
  t.next_obs = observe();
  return t;
}

ReturnRange PixelGrid::return_range() const {
  return {config_.horizon * config_.step_reward, config_.goal_reward};
}

}  // namespace rlbd::envs
