#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlbd/backdoor/trigger.hpp"
#include "rlbd/envs/pixel_grid.hpp"
#include "rlbd/nn/network.hpp"
#include "rlbd/random.hpp"

namespace rlbd::eval {

class TriggerSchedule {
 public:
  enum class Mode { Never, Always, FromStep, Probability };

  static TriggerSchedule never() { return TriggerSchedule(Mode::Never, 0, 0.0); }
  static TriggerSchedule always() { return TriggerSchedule(Mode::Always, 0, 0.0); }
  static TriggerSchedule from_step(std::uint64_t k) { return TriggerSchedule(Mode::FromStep, k, 0.0); }
  static TriggerSchedule probability(double p);

  // "never", "always", "from_step:K" or "probability:P".
  static TriggerSchedule parse(const std::string& text);
  std::string to_string() const;

  Mode mode() const noexcept { return mode_; }
  std::uint64_t start_step() const noexcept { return start_step_; }
  double rate() const noexcept { return rate_; }

  // Draws from rng only in Probability mode.
  bool fires(std::uint64_t step, Rng& rng) const;

  bool operator==(const TriggerSchedule&) const = default;

 private:
  TriggerSchedule(Mode mode, std::uint64_t k, double p) : mode_(mode), start_step_(k), rate_(p) {}

  Mode mode_;
  std::uint64_t start_step_;
  double rate_;
};

struct StepRecord {
  bool triggered = false;
  std::size_t action = 0;
  double reward = 0.0;
  // Filled only when EpisodeOptions::record_observations is set.
  std::vector<double> observed;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  double total_return = 0.0;

  std::size_t triggered_steps() const;
  std::size_t target_hits(std::size_t target_action) const;
};

struct EpisodeOptions {
  bool greedy = false;
  bool record_observations = false;
};

// Episode i draws its start state, actions and trigger coin from
// independent streams derived from (seed, i). The policy sees the triggered
// observation; the environment keeps the true state.
std::vector<Trajectory> run_episodes(const nn::PolicyNetwork& policy, const envs::PixelGridConfig& env,
                                     const TriggerSchedule& schedule, const backdoor::TriggerSpec* trigger,
                                     std::size_t n, std::uint64_t seed, EpisodeOptions options = {});

std::vector<double> returns_of(const std::vector<Trajectory>& trajectories);

double compute_cda(std::span<const double> backdoored_clean, std::span<const double> benign_clean,
                   envs::ReturnRange range);
double compute_aer(std::span<const double> benign, std::span<const double> triggered, envs::ReturnRange range);
// Per triggered step. Throws when no step was triggered.
double compute_asr(const std::vector<Trajectory>& trajectories, std::size_t target_action);

struct ReturnStats {
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

ReturnStats summarize(std::span<const double> returns);

struct EpisodeRow {
  std::size_t episode = 0;
  double episode_return = 0.0;
  std::size_t triggered_steps = 0;
  std::size_t target_hits = 0;
};

struct SuiteReport {
  std::string schedule;
  ReturnStats stats;
  std::vector<EpisodeRow> rows;
};

struct EvalConfig {
  std::size_t episodes = 150;
  TriggerSchedule schedule = TriggerSchedule::always();
  std::size_t target_action = 0;
  bool greedy = false;
  std::uint64_t seed = 0;
  envs::PixelGridConfig env;

  void validate() const;
};

struct EvalReport {
  std::size_t episodes = 0;
  std::size_t target_action = 0;
  SuiteReport clean;
  std::optional<SuiteReport> triggered;
  std::optional<SuiteReport> benign_clean;
  double cda_pct = 100.0;
  std::optional<double> aer_pct;
  std::optional<double> asr_pct;
};

// Clean suite always; triggered suite unless the schedule is never. With no
// benign reference the policy is compared against itself.
EvalReport evaluate(const nn::PolicyNetwork& policy, const nn::PolicyNetwork* benign,
                    const backdoor::TriggerSpec& trigger, const EvalConfig& config);

nlohmann::json to_json(const EvalReport& report);
std::string episodes_to_csv(const std::vector<EpisodeRow>& rows);
// One row in the layout: CDA, AER, ASR (percent, two decimals).
std::string summary_row(const EvalReport& report);

}  // namespace rlbd::eval
