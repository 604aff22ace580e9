#include "rlbd/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "rlbd/error.hpp"

namespace rlbd::eval {

TriggerSchedule TriggerSchedule::probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("trigger probability must lie in [0,1]");
  return TriggerSchedule(Mode::Probability, 0, p);
}

TriggerSchedule TriggerSchedule::parse(const std::string& text) {
  if (text == "never") return never();
  if (text == "always") return always();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string head = text.substr(0, colon);
    const std::string arg = text.substr(colon + 1);
    try {
      std::size_t used = 0;
      if (head == "from_step") {
        if (!arg.empty() && arg.front() == '-') throw ConfigError("negative step");
        const auto k = std::stoull(arg, &used);
        if (used == arg.size()) return from_step(k);
      } else if (head == "probability") {
        const double p = std::stod(arg, &used);
        if (used == arg.size()) return probability(p);
      }
    } catch (const std::logic_error&) {
    }
  }
  throw ConfigError("invalid trigger schedule '" + text + "'");
}

std::string TriggerSchedule::to_string() const {
  switch (mode_) {
    case Mode::Never: return "never";
    case Mode::Always: return "always";
    case Mode::FromStep: return "from_step:" + std::to_string(start_step_);
    case Mode::Probability: {
      std::ostringstream out;
      out << std::setprecision(17) << "probability:" << rate_;
      return out.str();
    }
  }
  return "never";
}

bool TriggerSchedule::fires(std::uint64_t step, Rng& rng) const {
  switch (mode_) {
    case Mode::Never: return false;
    case Mode::Always: return true;
    case Mode::FromStep: return step >= start_step_;
    case Mode::Probability: return uniform01(rng) < rate_;
  }
  return false;
}

std::size_t Trajectory::triggered_steps() const {
  return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const StepRecord& s) { return s.triggered; }));
}

std::size_t Trajectory::target_hits(std::size_t target_action) const {
  return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [&](const StepRecord& s) {
    return s.triggered && s.action == target_action;
  }));
}

std::vector<Trajectory> run_episodes(const nn::PolicyNetwork& policy, const envs::PixelGridConfig& env_config,
                                     const TriggerSchedule& schedule, const backdoor::TriggerSpec* trigger,
                                     std::size_t n, std::uint64_t seed, EpisodeOptions options) {
  if (n == 0) throw ConfigError("episode count must be at least 1");
  if (schedule.mode() != TriggerSchedule::Mode::Never && trigger == nullptr) {
    throw ConfigError("a trigger is required for a firing schedule");
  }
  envs::PixelGrid env(env_config);
  if (policy.input_dim() != env.obs_dim()) {
    throw DimensionError("policy input does not match the environment", env.obs_dim(), policy.input_dim());
  }
  const std::uint64_t env_base = derive_seed(seed, streams::kEnvs);
  const std::uint64_t action_base = derive_seed(seed, streams::kActions);
  const std::uint64_t schedule_base = derive_seed(seed, streams::kSchedule);

  std::vector<Trajectory> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng action_rng(derive_seed(action_base, i));
    Rng schedule_rng(derive_seed(schedule_base, i));
    std::vector<double> obs = env.reset(derive_seed(env_base, i));
    Trajectory& traj = out[i];
    for (std::uint64_t t = 0; !env.state().done; ++t) {
      StepRecord rec;
      rec.triggered = schedule.fires(t, schedule_rng);
      std::vector<double> seen = rec.triggered ? backdoor::apply_trigger(obs, *trigger) : obs;
      const auto dist = std::get<nn::Categorical>(nn::action_distribution(policy, seen));
      rec.action = options.greedy ? nn::argmax(dist.probs) : nn::sample_categorical(dist, action_rng);
      const envs::Transition tr = env.step(rec.action);
      rec.reward = tr.reward;
      traj.total_return += tr.reward;
      if (options.record_observations) rec.observed = std::move(seen);
      traj.steps.push_back(std::move(rec));
      obs = tr.next_obs;
    }
  }
  return out;
}

std::vector<double> returns_of(const std::vector<Trajectory>& trajectories) {
  std::vector<double> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(t.total_return);
  return out;
}

namespace {

double mean_of(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw ConfigError(std::string(what) + " returns are empty");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double normalizer(double benign_mean, envs::ReturnRange range) {
  if (!(range.max > range.min)) throw ConfigError("return range must satisfy max > min");
  const double denom = benign_mean - range.min;
  if (!(denom > 0.0)) throw Error("benign mean return equals the range minimum; metric undefined");
  return denom;
}

}  // namespace

double compute_cda(std::span<const double> backdoored_clean, std::span<const double> benign_clean,
                   envs::ReturnRange range) {
  const double bd = mean_of(backdoored_clean, "backdoored");
  const double denom = normalizer(mean_of(benign_clean, "benign"), range);
  return 100.0 * std::clamp((bd - range.min) / denom, 0.0, 1.0);
}

double compute_aer(std::span<const double> benign, std::span<const double> triggered, envs::ReturnRange range) {
  const double clean = mean_of(benign, "benign");
  const double trig = mean_of(triggered, "triggered");
  const double denom = normalizer(clean, range);
  return 100.0 * std::clamp((clean - trig) / denom, 0.0, 1.0);
}

double compute_asr(const std::vector<Trajectory>& trajectories, std::size_t target_action) {
  std::size_t triggered = 0;
  std::size_t hits = 0;
  for (const auto& t : trajectories) {
    triggered += t.triggered_steps();
    hits += t.target_hits(target_action);
  }
  if (triggered == 0) throw Error("no triggered steps; ASR undefined");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(triggered);
}

ReturnStats summarize(std::span<const double> returns) {
  if (returns.empty()) throw ConfigError("cannot summarize zero returns");
  std::vector<double> sorted(returns.begin(), returns.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  ReturnStats s;
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

void EvalConfig::validate() const {
  if (episodes == 0) throw ConfigError("eval.episodes must be at least 1");
  if (target_action >= envs::kPixelGridActions) throw ConfigError("eval.target_action out of range");
  env.validate();
}

namespace {

SuiteReport make_suite(const TriggerSchedule& schedule, const std::vector<Trajectory>& trajectories,
                       std::size_t target_action) {
  SuiteReport suite;
  suite.schedule = schedule.to_string();
  const auto returns = returns_of(trajectories);
  suite.stats = summarize(returns);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    suite.rows.push_back({i, trajectories[i].total_return, trajectories[i].triggered_steps(),
                          trajectories[i].target_hits(target_action)});
  }
  return suite;
}

}  // namespace

EvalReport evaluate(const nn::PolicyNetwork& policy, const nn::PolicyNetwork* benign,
                    const backdoor::TriggerSpec& trigger, const EvalConfig& config) {
  config.validate();
  const EpisodeOptions options{config.greedy, false};
  const envs::ReturnRange range = envs::PixelGrid(config.env).return_range();
  const auto never = TriggerSchedule::never();

  EvalReport report;
  report.episodes = config.episodes;
  report.target_action = config.target_action;

  const auto clean = run_episodes(policy, config.env, never, nullptr, config.episodes, config.seed, options);
  report.clean = make_suite(never, clean, config.target_action);
  std::vector<double> reference = returns_of(clean);
  if (benign != nullptr) {
    const auto ref = run_episodes(*benign, config.env, never, nullptr, config.episodes, config.seed, options);
    report.benign_clean = make_suite(never, ref, config.target_action);
    reference = returns_of(ref);
  }
  // Against itself CDA is 100% even when the normaliser is degenerate.
  report.cda_pct = benign != nullptr ? compute_cda(returns_of(clean), reference, range) : 100.0;

  if (config.schedule.mode() != TriggerSchedule::Mode::Never) {
    const auto trig =
        run_episodes(policy, config.env, config.schedule, &trigger, config.episodes, config.seed, options);
    report.triggered = make_suite(config.schedule, trig, config.target_action);
    report.aer_pct = compute_aer(reference, returns_of(trig), range);
    // A probabilistic schedule can leave every step clean.
    std::size_t fired = 0;
    for (const auto& t : trig) fired += t.triggered_steps();
    if (fired > 0) report.asr_pct = compute_asr(trig, config.target_action);
  }
  return report;
}

namespace {

nlohmann::json suite_json(const SuiteReport& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"episode", r.episode},
                    {"return", r.episode_return},
                    {"triggered_steps", r.triggered_steps},
                    {"target_hits", r.target_hits}});
  }
  return {{"schedule", s.schedule},
          {"mean", s.stats.mean},
          {"median", s.stats.median},
          {"min", s.stats.min},
          {"max", s.stats.max},
          {"rows", rows}};
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["episodes"] = report.episodes;
  j["target_action"] = report.target_action;
  j["clean"] = suite_json(report.clean);
  j["triggered"] = report.triggered ? suite_json(*report.triggered) : nlohmann::json(nullptr);
  j["benign_clean"] = report.benign_clean ? suite_json(*report.benign_clean) : nlohmann::json(nullptr);
  j["cda_pct"] = report.cda_pct;
  j["aer_pct"] = report.aer_pct ? nlohmann::json(*report.aer_pct) : nlohmann::json(nullptr);
  j["asr_pct"] = report.asr_pct ? nlohmann::json(*report.asr_pct) : nlohmann::json(nullptr);
  return j;
}

std::string episodes_to_csv(const std::vector<EpisodeRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(17) << "episode,return,triggered_steps,target_hits\n";
  for (const auto& r : rows) {
    out << r.episode << ',' << r.episode_return << ',' << r.triggered_steps << ',' << r.target_hits << '\n';
  }
  return out.str();
}

std::string summary_row(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << "CDA " << report.cda_pct << "%  AER ";
  if (report.aer_pct) out << *report.aer_pct << '%'; else out << "n/a";
  out << "  ASR ";
  if (report.asr_pct) out << *report.asr_pct << '%'; else out << "n/a";
  return out.str();
}

}  // namespace rlbd::eval
