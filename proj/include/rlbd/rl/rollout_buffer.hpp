#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "rlbd/envs/pixel_grid.hpp"

namespace rlbd::rl {

using envs::Transition;

// Transition store between collection and the gradient update. drain() must
// return exactly the transitions added since the previous drain, in order.
class RolloutBuffer {
 public:
  virtual ~RolloutBuffer() = default;

  virtual void add(Transition t) = 0;
  virtual std::vector<Transition> drain() = 0;
  virtual std::size_t size() const = 0;
};

class BenignRolloutBuffer final : public RolloutBuffer {
 public:
  void add(Transition t) override { items_.push_back(std::move(t)); }
  std::vector<Transition> drain() override { return std::exchange(items_, {}); }
  std::size_t size() const override { return items_.size(); }

 private:
  std::vector<Transition> items_;
};

using BufferFactory = std::function<std::unique_ptr<RolloutBuffer>()>;

inline BufferFactory benign_buffer_factory() {
  return [] { return std::make_unique<BenignRolloutBuffer>(); };
}

}  // namespace rlbd::rl
