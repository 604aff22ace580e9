#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace rlbd::backdoor {

// Observation trigger: binary mask m, pattern values Δ and per-feature bounds.
// Pattern entries outside the mask are stored as 0.
class TriggerSpec {
 public:
  TriggerSpec() = default;
  // Validates m in {0,1}, equal lengths and lower <= pattern <= upper on the support.
  TriggerSpec(std::vector<std::uint8_t> mask, std::vector<double> pattern, std::vector<double> lower,
              std::vector<double> upper);

  std::size_t dim() const noexcept { return mask_.size(); }
  std::span<const std::uint8_t> mask() const noexcept { return mask_; }
  std::span<const double> pattern() const noexcept { return pattern_; }
  std::span<const double> lower_bounds() const noexcept { return lower_; }
  std::span<const double> upper_bounds() const noexcept { return upper_; }

  // Copy with a new pattern on the same mask and bounds (validated).
  TriggerSpec with_pattern(std::vector<double> pattern) const;

  bool operator==(const TriggerSpec&) const = default;

 private:
  std::vector<std::uint8_t> mask_;
  std::vector<double> pattern_;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

// Indices n with m_n = 1, ascending.
std::vector<std::size_t> trigger_support(const TriggerSpec& spec);

// (1 - m) * s + m * pattern.
std::vector<double> apply_trigger(std::span<const double> state, const TriggerSpec& spec);

// Top-left side x side patch of a grid x grid row-major observation, bounds [0, 1].
TriggerSpec corner_patch_trigger(int side, int grid, double value = 1.0);

nlohmann::json to_json(const TriggerSpec& spec);
TriggerSpec trigger_from_json(const nlohmann::json& doc);

}  // namespace rlbd::backdoor
