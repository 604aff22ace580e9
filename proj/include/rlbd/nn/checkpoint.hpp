#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rlbd/nn/network.hpp"

namespace rlbd::nn {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMetadata {
  std::uint64_t seed = 0;
  std::string env_id;
  std::uint64_t train_steps = 0;
  bool injected = false;
  // Only written when true: training aborted on a non-finite loss.
  bool diverged = false;

  bool operator==(const CheckpointMetadata&) const = default;
};

struct Checkpoint {
  PolicyNetwork policy;
  CheckpointMetadata metadata;

  bool operator==(const Checkpoint&) const = default;
};

nlohmann::json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

// Serialized text is deterministic; doubles are written in shortest round-trip form.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rlbd::nn
