#include "rlbd/backdoor/trigger.hpp"

#include <string>

#include "rlbd/error.hpp"

namespace rlbd::backdoor {

TriggerSpec::TriggerSpec(std::vector<std::uint8_t> mask, std::vector<double> pattern, std::vector<double> lower,
                         std::vector<double> upper)
    : mask_(std::move(mask)), pattern_(std::move(pattern)), lower_(std::move(lower)), upper_(std::move(upper)) {
  const std::size_t d = mask_.size();
  if (pattern_.size() != d) throw DimensionError("trigger pattern length", d, pattern_.size());
  if (lower_.size() != d) throw DimensionError("trigger lower bound length", d, lower_.size());
  if (upper_.size() != d) throw DimensionError("trigger upper bound length", d, upper_.size());
  for (std::size_t n = 0; n < d; ++n) {
    if (mask_[n] > 1) throw Error("trigger mask entries must be 0 or 1");
    if (lower_[n] > upper_[n]) throw Error("trigger lower bound exceeds upper bound at " + std::to_string(n));
    if (mask_[n] == 0) {
      pattern_[n] = 0.0;
    } else if (!(lower_[n] <= pattern_[n] && pattern_[n] <= upper_[n])) {
      throw Error("trigger pattern outside bounds at index " + std::to_string(n));
    }
  }
}

TriggerSpec TriggerSpec::with_pattern(std::vector<double> pattern) const {
  return TriggerSpec(mask_, std::move(pattern), lower_, upper_);
}

std::vector<std::size_t> trigger_support(const TriggerSpec& spec) {
  std::vector<std::size_t> support;
  const auto mask = spec.mask();
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (mask[n] == 1) support.push_back(n);
  }
  return support;
}

std::vector<double> apply_trigger(std::span<const double> state, const TriggerSpec& spec) {
  if (state.size() != spec.dim()) throw DimensionError("apply_trigger state length", spec.dim(), state.size());
  std::vector<double> out(state.begin(), state.end());
  const auto mask = spec.mask();
  const auto pattern = spec.pattern();
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (mask[n] == 1) out[n] = pattern[n];
  }
  return out;
}

TriggerSpec corner_patch_trigger(int side, int grid, double value) {
  if (grid < 1) throw Error("trigger grid must be positive");
  if (side < 1 || side > grid) {
    throw Error("trigger side " + std::to_string(side) + " must lie in [1, " + std::to_string(grid) + "]");
  }
  const auto d = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
  std::vector<std::uint8_t> mask(d, 0);
  std::vector<double> pattern(d, 0.0);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const auto n = static_cast<std::size_t>(r * grid + c);
      mask[n] = 1;
      pattern[n] = value;
    }
  }
  return TriggerSpec(std::move(mask), std::move(pattern), std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
}

nlohmann::json to_json(const TriggerSpec& spec) {
  return {{"mask", std::vector<int>(spec.mask().begin(), spec.mask().end())},
          {"pattern", std::vector<double>(spec.pattern().begin(), spec.pattern().end())},
          {"lower_bounds", std::vector<double>(spec.lower_bounds().begin(), spec.lower_bounds().end())},
          {"upper_bounds", std::vector<double>(spec.upper_bounds().begin(), spec.upper_bounds().end())}};
}

TriggerSpec trigger_from_json(const nlohmann::json& doc) {
  auto mask_ints = doc.at("mask").get<std::vector<int>>();
  std::vector<std::uint8_t> mask;
  mask.reserve(mask_ints.size());
  for (int m : mask_ints) {
    if (m != 0 && m != 1) throw Error("trigger mask entries must be 0 or 1");
    mask.push_back(static_cast<std::uint8_t>(m));
  }
  const std::size_t d = mask.size();
  auto pattern = doc.at("pattern").get<std::vector<double>>();
  auto lower = doc.contains("lower_bounds") ? doc["lower_bounds"].get<std::vector<double>>() : std::vector<double>(d, 0.0);
  auto upper = doc.contains("upper_bounds") ? doc["upper_bounds"].get<std::vector<double>>() : std::vector<double>(d, 1.0);
  return TriggerSpec(std::move(mask), std::move(pattern), std::move(lower), std::move(upper));
}

}  // namespace rlbd::backdoor
