#include "rlbd/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rlbd/error.hpp"

namespace rlbd::cli {

namespace {

using K = ValueKind;

std::vector<KeySpec> build_schema() {
  return {
      {"seed", K::UInt, "0", {}},
      {"output_dir", K::String, "out", {}},
      {"env.kind", K::Choice, "pixelgrid", {"pixelgrid", "chain"}},
      {"env.grid", K::UInt, "8", {}},
      {"env.horizon", K::UInt, "64", {}},
      {"env.goal_row", K::Int, "-1", {}},
      {"env.goal_col", K::Int, "-1", {}},
      {"env.chain.d", K::UInt, "2", {}},
      {"env.chain.c", K::Real, "0.2", {}},
      {"env.chain.sigma_e", K::Real, "0.1", {}},
      {"env.chain.r_max", K::Real, "1", {}},
      {"env.chain.gamma", K::Real, "0.9", {}},
      {"train.total_steps", K::UInt, "200000", {}},
      {"train.n_envs", K::UInt, "8", {}},
      {"train.rollout_len", K::UInt, "5", {}},
      {"train.lr", K::Real, "0.0007", {}},
      {"train.gamma", K::Real, "0.99", {}},
      {"train.entropy_coef", K::Real, "0.02", {}},
      {"train.value_coef", K::Real, "0.5", {}},
      {"train.clip_norm", K::Real, "3", {}},
      {"train.hidden", K::UIntList, "64,64", {}},
      {"train.optimizer", K::Choice, "rmsprop", {"rmsprop", "sgd"}},
      {"train.log_interval", K::UInt, "50", {}},
      {"attack.kind", K::Choice, "none", {"none", "trojanentrl", "infrectro"}},
      {"attack.trigger.side", K::UInt, "2", {}},
      {"attack.trigger.value", K::Real, "1", {}},
      {"attack.trigger.mask", K::UIntList, "", {}},
      {"attack.trigger.pattern", K::RealList, "", {}},
      {"attack.trojanentrl.poison_rate", K::Real, "0.00025", {}},
      {"attack.trojanentrl.reward_hi", K::Real, "1", {}},
      {"attack.trojanentrl.reward_lo", K::Real, "-1", {}},
      {"attack.trojanentrl.target_action", K::UInt, "0", {}},
      {"attack.trojanentrl.audit", K::Bool, "false", {}},
      {"attack.infrectro.lambda", K::Real, "0.1", {}},
      {"attack.infrectro.gamma_amp", K::Real, "10", {}},
      {"attack.infrectro.clean_w", K::Real, "100", {}},
      {"attack.infrectro.suppress_w", K::Real, "100", {}},
      {"attack.infrectro.target_action", K::UInt, "0", {}},
      {"attack.infrectro.trigger.side", K::UInt, "2", {}},
      {"attack.infrectro.require_positive", K::Bool, "true", {}},
      {"attack.infrectro.samples", K::UInt, "1000", {}},
      {"eval.episodes", K::UInt, "150", {}},
      {"eval.schedule", K::String, "always", {}},
      {"eval.benign_checkpoint", K::String, "", {}},
      {"eval.trigger_report", K::String, "", {}},
      {"eval.target_action", K::UInt, "0", {}},
      {"eval.greedy", K::Bool, "false", {}},
      {"theory.instances", K::UInt, "20", {}},
      {"theory.rollouts", K::UInt, "10000", {}},
      {"theory.hidden", K::UInt, "16", {}},
      {"theory.weight_scale", K::Real, "0.3", {}},
      {"theory.sigma_f", K::Real, "1", {}},
      {"theory.tv_states", K::UInt, "2000", {}},
      {"theory.delta_inflation", K::Real, "2", {}},
      {"theory.check_lemma", K::Bool, "true", {}},
      {"ablate.axis", K::Choice, "lambda", {"gamma_amp", "lambda", "trigger_side", "target_action"}},
      {"ablate.values", K::RealList, "0.01,0.1,1", {}},
  };
}

const KeySpec& spec_for(std::string_view key) {
  const auto& schema = config_schema();
  const auto it = std::find_if(schema.begin(), schema.end(), [&](const KeySpec& s) { return s.name == key; });
  if (it == schema.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return *it;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string canonical(const KeySpec& spec, std::string_view raw) {
  const std::string value = trim(raw);
  const auto bad = [&]() -> ConfigError {
    return ConfigError("invalid value '" + value + "' for " + spec.name);
  };
  switch (spec.kind) {
    case K::Int: {
      std::int64_t v = 0;
      if (!parse_number(value, v)) throw bad();
      return std::to_string(v);
    }
    case K::UInt: {
      std::uint64_t v = 0;
      if (!parse_number(value, v)) throw bad();
      return std::to_string(v);
    }
    case K::Real: {
      double v = 0.0;
      if (!parse_number(value, v) || !std::isfinite(v)) throw bad();
      return format_real(v);
    }
    case K::Bool:
      if (value == "true" || value == "1") return "true";
      if (value == "false" || value == "0") return "false";
      throw bad();
    case K::String:
      if (value.find('\n') != std::string::npos) throw bad();
      return value;
    case K::Choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) throw bad();
      return value;
    case K::UIntList: {
      std::string out;
      for (const auto& item : split_list(value)) {
        std::uint64_t v = 0;
        if (!parse_number(item, v)) throw bad();
        out += (out.empty() ? "" : ",") + std::to_string(v);
      }
      return out;
    }
    case K::RealList: {
      std::string out;
      for (const auto& item : split_list(value)) {
        double v = 0.0;
        if (!parse_number(item, v) || !std::isfinite(v)) throw bad();
        out += (out.empty() ? "" : ",") + format_real(v);
      }
      return out;
    }
  }
  throw bad();
}

std::string json_scalar_text(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return v.dump();
  if (v.is_number_float()) return format_real(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (item.is_array() || item.is_object()) throw ConfigError("nested arrays are not allowed for " + key);
      out += (out.empty() ? "" : ",") + json_scalar_text(item, key);
    }
    return out;
  }
  throw ConfigError("unsupported JSON value for " + key);
}

void flatten_json(const nlohmann::json& obj, const std::string& prefix,
                  std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& [k, v] : obj.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten_json(v, key, out);
    } else {
      out.emplace_back(key, json_scalar_text(v, key));
    }
  }
}

}  // namespace

const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = build_schema();
  return schema;
}

RunConfig::RunConfig() {
  for (const auto& s : config_schema()) values_.emplace(s.name, canonical(s, s.default_value));
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto& spec = spec_for(key);
  values_[spec.name] = canonical(spec, value);
}

bool RunConfig::is_default(std::string_view key) const {
  const auto& spec = spec_for(key);
  return text(key) == canonical(spec, spec.default_value);
}

const std::string& RunConfig::text(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t RunConfig::get_int(std::string_view key) const {
  std::int64_t v = 0;
  parse_number(text(key), v);
  return v;
}

std::uint64_t RunConfig::get_uint(std::string_view key) const {
  std::uint64_t v = 0;
  parse_number(text(key), v);
  return v;
}

double RunConfig::get_real(std::string_view key) const {
  double v = 0.0;
  parse_number(text(key), v);
  return v;
}

bool RunConfig::get_bool(std::string_view key) const { return text(key) == "true"; }

std::vector<std::uint64_t> RunConfig::get_uints(std::string_view key) const {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text(key))) {
    std::uint64_t v = 0;
    parse_number(item, v);
    out.push_back(v);
  }
  return out;
}

std::vector<double> RunConfig::get_reals(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : split_list(text(key))) {
    double v = 0.0;
    parse_number(item, v);
    out.push_back(v);
  }
  return out;
}

RunConfig parse_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  const std::string trimmed = trim(text);
  if (!trimmed.empty() && trimmed.front() == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(trimmed);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    flatten_json(doc, "", entries);
  } else {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      }
      entries.emplace_back(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    }
  }
  RunConfig config;
  std::vector<std::string> seen;
  for (const auto& [key, value] : entries) {
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) throw ConfigError("duplicate config key '" + key + "'");
    seen.push_back(key);
    config.set(key, value);
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& s : config_schema()) out += s.name + " = " + config.text(s.name) + "\n";
  return out;
}

envs::PixelGridConfig pixel_grid_config(const RunConfig& c) {
  if (c.text("env.kind") != "pixelgrid") throw ConfigError("this command needs env.kind = pixelgrid");
  envs::PixelGridConfig env;
  env.grid = static_cast<int>(c.get_uint("env.grid"));
  env.horizon = static_cast<int>(c.get_uint("env.horizon"));
  env.goal = {static_cast<int>(c.get_int("env.goal_row")), static_cast<int>(c.get_int("env.goal_col"))};
  try {
    env.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return env;
}

envs::LinearGaussianChain chain_config(const RunConfig& c) {
  envs::LinearGaussianChain env;
  env.dim = c.get_uint("env.chain.d");
  env.action_gain = c.get_real("env.chain.c");
  env.noise_std = c.get_real("env.chain.sigma_e");
  env.r_max = c.get_real("env.chain.r_max");
  env.gamma = c.get_real("env.chain.gamma");
  if (!(env.gamma >= 0.0 && env.gamma < 1.0)) throw ConfigError("env.chain.gamma must lie in [0,1)");
  if (env.dim == 0) throw ConfigError("env.chain.d must be positive");
  env.goal.assign(env.dim, 0.5);
  env.horizon = envs::truncation_horizon(env.gamma, 1e-6);
  try {
    env.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return env;
}

rl::TrainConfig train_config(const RunConfig& c) {
  rl::TrainConfig t;
  t.total_steps = c.get_uint("train.total_steps");
  t.n_envs = c.get_uint("train.n_envs");
  t.rollout_len = c.get_uint("train.rollout_len");
  t.lr = c.get_real("train.lr");
  t.gamma = c.get_real("train.gamma");
  t.entropy_coef = c.get_real("train.entropy_coef");
  t.value_coef = c.get_real("train.value_coef");
  t.clip_norm = c.get_real("train.clip_norm");
  t.seed = c.get_uint("seed");
  t.hidden.clear();
  for (const auto h : c.get_uints("train.hidden")) t.hidden.push_back(h);
  t.optimizer = c.text("train.optimizer") == "sgd" ? rl::OptimizerKind::Sgd : rl::OptimizerKind::RmsProp;
  t.log_interval = c.get_uint("train.log_interval");
  t.env = pixel_grid_config(c);
  t.validate();
  return t;
}

backdoor::TriggerSpec attack_trigger(const RunConfig& c) {
  const auto env = pixel_grid_config(c);
  const auto d = static_cast<std::size_t>(env.grid * env.grid);
  const auto mask_values = c.get_uints("attack.trigger.mask");
  try {
    if (mask_values.empty()) {
      if (!c.get_reals("attack.trigger.pattern").empty()) {
        throw ConfigError("attack.trigger.pattern needs attack.trigger.mask");
      }
      return backdoor::corner_patch_trigger(static_cast<int>(c.get_uint("attack.trigger.side")), env.grid,
                                            c.get_real("attack.trigger.value"));
    }
    if (mask_values.size() != d) throw ConfigError("attack.trigger.mask must have one entry per observation feature");
    std::vector<std::uint8_t> mask;
    for (const auto m : mask_values) {
      if (m > 1) throw ConfigError("attack.trigger.mask entries must be 0 or 1");
      mask.push_back(static_cast<std::uint8_t>(m));
    }
    auto pattern = c.get_reals("attack.trigger.pattern");
    if (pattern.empty()) {
      pattern.assign(d, 0.0);
      for (std::size_t n = 0; n < d; ++n) pattern[n] = mask[n] ? c.get_real("attack.trigger.value") : 0.0;
    }
    if (pattern.size() != d) throw ConfigError("attack.trigger.pattern must have one entry per observation feature");
    for (std::size_t n = 0; n < d; ++n) {
      if (!mask[n]) pattern[n] = 0.0;
    }
    return backdoor::TriggerSpec(std::move(mask), std::move(pattern), std::vector<double>(d, 0.0),
                                 std::vector<double>(d, 1.0));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("attack.trigger: ") + e.what());
  }
}

attacks::PoisonConfig poison_config(const RunConfig& c) {
  attacks::PoisonConfig p{attack_trigger(c)};
  p.target_action = c.get_uint("attack.trojanentrl.target_action");
  p.action_count = envs::kPixelGridActions;
  p.poison_rate = c.get_real("attack.trojanentrl.poison_rate");
  p.reward_hi = c.get_real("attack.trojanentrl.reward_hi");
  p.reward_lo = c.get_real("attack.trojanentrl.reward_lo");
  p.seed = c.get_uint("seed");
  p.validate();
  return p;
}

attacks::InjectionConfig injection_config(const RunConfig& c) {
  const auto env = pixel_grid_config(c);
  const auto side = static_cast<int>(c.get_uint("attack.infrectro.trigger.side"));
  if (side < 1 || side > env.grid) throw ConfigError("attack.infrectro.trigger.side must lie in [1, env.grid]");
  attacks::InjectionConfig ic{backdoor::corner_patch_trigger(side, env.grid)};
  ic.lambda = c.get_real("attack.infrectro.lambda");
  ic.gamma_amp = c.get_real("attack.infrectro.gamma_amp");
  ic.clean_weight_magnitude = c.get_real("attack.infrectro.clean_w");
  ic.suppression_weight = c.get_real("attack.infrectro.suppress_w");
  ic.target_action = c.get_uint("attack.infrectro.target_action");
  ic.require_positive_support_weight = c.get_bool("attack.infrectro.require_positive");
  if (ic.target_action >= envs::kPixelGridActions) throw ConfigError("attack.infrectro.target_action out of range");
  if (c.get_uint("attack.infrectro.samples") == 0) throw ConfigError("attack.infrectro.samples must be positive");
  ic.validate();
  return ic;
}

eval::EvalConfig eval_config(const RunConfig& c) {
  eval::EvalConfig e;
  e.episodes = c.get_uint("eval.episodes");
  e.schedule = eval::TriggerSchedule::parse(c.text("eval.schedule"));
  e.target_action = c.get_uint("eval.target_action");
  e.greedy = c.get_bool("eval.greedy");
  e.seed = c.get_uint("seed");
  e.env = pixel_grid_config(c);
  e.validate();
  return e;
}

theory::TheoremConfig theorem_config(const RunConfig& c) {
  theory::TheoremConfig t;
  t.instances = c.get_uint("theory.instances");
  t.rollouts = c.get_uint("theory.rollouts");
  t.hidden = c.get_uint("theory.hidden");
  t.weight_scale = c.get_real("theory.weight_scale");
  t.sigma_f = c.get_real("theory.sigma_f");
  t.tv_states = c.get_uint("theory.tv_states");
  t.delta_inflation = c.get_real("theory.delta_inflation");
  t.check_lemma = c.get_bool("theory.check_lemma");
  t.seed = c.get_uint("seed");
  t.env = chain_config(c);
  t.validate();
  return t;
}

}  // namespace rlbd::cli
