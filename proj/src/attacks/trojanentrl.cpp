#include "rlbd/attacks/trojanentrl.hpp"

#include <cmath>
#include <sstream>

#include "rlbd/error.hpp"

namespace rlbd::attacks {

void PoisonConfig::validate() const {
  if (!(poison_rate >= 0.0 && poison_rate <= 1.0)) throw ConfigError("poison_rate must lie in [0, 1]");
  if (!(reward_hi > reward_lo)) throw ConfigError("reward_hi must exceed reward_lo");
  if (action_count < 2) throw ConfigError("poisoning needs at least two actions");
  if (target_action >= action_count) {
    throw ConfigError("target_action " + std::to_string(target_action) + " outside action range");
  }
  if (backdoor::trigger_support(trigger).empty()) throw ConfigError("trigger mask is empty");
}

bool detect_trigger(std::span<const double> obs, const backdoor::TriggerSpec& trigger) {
  if (obs.size() != trigger.dim()) return false;
  const auto mask = trigger.mask();
  const auto pattern = trigger.pattern();
  for (std::size_t n = 0; n < obs.size(); ++n) {
    if (mask[n] == 1 && std::abs(obs[n] - pattern[n]) > 1e-9) return false;
  }
  return true;
}

Transition poison_transition(const Transition& t, const PoisonConfig& cfg, PoisonBranch branch,
                             std::size_t non_target_action) {
  if (cfg.target_action >= cfg.action_count) throw Error("target_action outside action range");
  Transition out = t;
  out.obs = backdoor::apply_trigger(t.obs, cfg.trigger);
  if (branch == PoisonBranch::Target) {
    out.action = cfg.target_action;
    out.reward = cfg.reward_hi;
  } else {
    if (non_target_action >= cfg.action_count || non_target_action == cfg.target_action) {
      throw Error("non-target branch needs an in-range action different from the target");
    }
    out.action = non_target_action;
    out.reward = cfg.reward_lo;
  }
  return out;
}

Transition poison_transition(const Transition& t, const PoisonConfig& cfg, Rng& rng) {
  if (t.action == cfg.target_action || uniform01(rng) < 0.5) {
    return poison_transition(t, cfg, PoisonBranch::Target);
  }
  std::size_t other = uniform_index(rng, cfg.action_count - 1);
  if (other >= cfg.target_action) ++other;
  return poison_transition(t, cfg, PoisonBranch::NonTarget, other);
}

MaliciousRolloutBuffer::MaliciousRolloutBuffer(PoisonConfig config, std::shared_ptr<PoisonLedger> ledger)
    : config_(std::move(config)),
      rng_(derive_seed(config_.seed, streams::kPoison)),
      ledger_(ledger ? std::move(ledger) : std::make_shared<PoisonLedger>()) {
  config_.validate();
}

void MaliciousRolloutBuffer::add(Transition t) {
  const std::uint64_t step = ledger_->seen++;
  bool poisoned = false;
  // Rate 0 never draws, so storage stays identical to the benign buffer.
  if (config_.poison_rate > 0.0 && uniform01(rng_) < config_.poison_rate) {
    t = poison_transition(t, config_, rng_);
    poisoned = true;
    ++ledger_->poisoned;
  }
  if (ledger_->audit_enabled) ledger_->audit.push_back({step, poisoned});
  items_.push_back(std::move(t));
}

std::vector<Transition> MaliciousRolloutBuffer::drain() { return std::exchange(items_, {}); }

rl::BufferFactory malicious_buffer_factory(PoisonConfig config, std::shared_ptr<PoisonLedger> ledger) {
  config.validate();
  return [config = std::move(config), ledger = std::move(ledger)] {
    return std::make_unique<MaliciousRolloutBuffer>(config, ledger);
  };
}

std::string audit_to_csv(const std::vector<AuditRow>& rows) {
  std::ostringstream out;
  out << "step,poisoned\n";
  for (const auto& row : rows) out << row.step << ',' << (row.poisoned ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace rlbd::attacks
