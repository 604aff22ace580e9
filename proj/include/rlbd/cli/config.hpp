#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rlbd/attacks/infrectrorl.hpp"
#include "rlbd/attacks/trojanentrl.hpp"
#include "rlbd/envs/linear_gaussian_chain.hpp"
#include "rlbd/envs/pixel_grid.hpp"
#include "rlbd/eval/metrics.hpp"
#include "rlbd/rl/trainer.hpp"
#include "rlbd/theory/bounds.hpp"

namespace rlbd::cli {

enum class ValueKind { Int, UInt, Real, Bool, String, Choice, UIntList, RealList };

struct KeySpec {
  std::string name;
  ValueKind kind;
  std::string default_value;
  std::vector<std::string> choices;
};

// Every accepted key with its type and default, in serialization order.
const std::vector<KeySpec>& config_schema();

// Flat key -> value store. Values are kept in canonical text form, so two
// configs are equal iff they serialize identically.
class RunConfig {
 public:
  RunConfig();

  // Throws ConfigError for unknown keys or values that do not parse.
  void set(std::string_view key, std::string_view value);
  bool is_default(std::string_view key) const;

  const std::string& text(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;
  double get_real(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::uint64_t> get_uints(std::string_view key) const;
  std::vector<double> get_reals(std::string_view key) const;

  bool operator==(const RunConfig&) const = default;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// "key = value" lines ('#' starts a comment line), or a JSON object whose
// keys are flat dotted names or nested objects. Duplicate keys are rejected.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& config);

envs::PixelGridConfig pixel_grid_config(const RunConfig& c);
envs::LinearGaussianChain chain_config(const RunConfig& c);
rl::TrainConfig train_config(const RunConfig& c);
// attack.trigger.*: explicit mask/pattern when a mask is given, else a corner patch.
backdoor::TriggerSpec attack_trigger(const RunConfig& c);
attacks::PoisonConfig poison_config(const RunConfig& c);
attacks::InjectionConfig injection_config(const RunConfig& c);
eval::EvalConfig eval_config(const RunConfig& c);
theory::TheoremConfig theorem_config(const RunConfig& c);

}  // namespace rlbd::cli
