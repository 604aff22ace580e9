#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rlbd/backdoor/trigger.hpp"
#include "rlbd/random.hpp"
#include "rlbd/rl/rollout_buffer.hpp"

namespace rlbd::attacks {

using envs::Transition;

struct PoisonConfig {
  backdoor::TriggerSpec trigger;
  std::size_t target_action = 0;
  std::size_t action_count = 5;
  double poison_rate = 0.00025;
  double reward_hi = 1.0;
  double reward_lo = -1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// True iff obs matches the trigger pattern on its support within 1e-9.
bool detect_trigger(std::span<const double> obs, const backdoor::TriggerSpec& trigger);

// Weak-targeted relabelling of a triggered transition.
enum class PoisonBranch { Target, NonTarget };

// obs <- apply_trigger(obs). Target branch stores (target_action, reward_hi);
// NonTarget stores (non_target_action, reward_lo). done/next_obs untouched.
Transition poison_transition(const Transition& t, const PoisonConfig& cfg, PoisonBranch branch,
                             std::size_t non_target_action = 0);

// Draws the branch: target when the agent already took the target action,
// otherwise a fair coin between target and a uniform non-target action.
Transition poison_transition(const Transition& t, const PoisonConfig& cfg, Rng& rng);

struct AuditRow {
  std::uint64_t step = 0;
  bool poisoned = false;
};

// Counters (and the optional per-add audit trail) shared between a buffer and its creator.
struct PoisonLedger {
  bool audit_enabled = false;
  std::uint64_t seen = 0;
  std::uint64_t poisoned = 0;
  std::vector<AuditRow> audit;
};

// Drop-in RolloutBuffer that replaces a poison_rate fraction of stored
// transitions by poison_transition. Count and order are never altered.
class MaliciousRolloutBuffer final : public rl::RolloutBuffer {
 public:
  explicit MaliciousRolloutBuffer(PoisonConfig config, std::shared_ptr<PoisonLedger> ledger = nullptr);

  void add(Transition t) override;
  std::vector<Transition> drain() override;
  std::size_t size() const override { return items_.size(); }

  const PoisonLedger& ledger() const noexcept { return *ledger_; }

 private:
  PoisonConfig config_;
  Rng rng_;
  std::shared_ptr<PoisonLedger> ledger_;
  std::vector<Transition> items_;
};

rl::BufferFactory malicious_buffer_factory(PoisonConfig config, std::shared_ptr<PoisonLedger> ledger = nullptr);

std::string audit_to_csv(const std::vector<AuditRow>& rows);

}  // namespace rlbd::attacks
