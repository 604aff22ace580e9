#include "rlbd/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlbd/cli/io.hpp"
#include "rlbd/error.hpp"
#include "rlbd/nn/checkpoint.hpp"

namespace rlbd::cli {

namespace {

std::string dump(const nlohmann::json& j) { return j.dump(1) + "\n"; }

nn::Checkpoint load_pixel_checkpoint(const std::string& path, const envs::PixelGridConfig& env) {
  const auto ckpt = nn::parse_checkpoint(read_text_file(path));
  if (!ckpt.policy.is_categorical()) throw ArtifactError("checkpoint " + path + " does not have a categorical head");
  const auto d = static_cast<std::size_t>(env.grid * env.grid);
  if (ckpt.policy.input_dim() != d) throw DimensionError("checkpoint input size", d, ckpt.policy.input_dim());
  if (ckpt.policy.output_dim() != envs::kPixelGridActions) {
    throw DimensionError("checkpoint action count", envs::kPixelGridActions, ckpt.policy.output_dim());
  }
  return ckpt;
}

std::vector<std::vector<double>> clean_samples(const envs::PixelGridConfig& env_config, std::size_t n,
                                               std::uint64_t seed) {
  envs::PixelGrid env(env_config);
  Rng rng(derive_seed(seed, streams::kSamples));
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(env.reset(rng));
  return out;
}

std::string real_text(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

int run_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto tc = train_config(config);
  const bool poisoned = config.text("attack.kind") == "trojanentrl";
  std::shared_ptr<attacks::PoisonLedger> ledger;
  rl::BufferFactory factory = rl::benign_buffer_factory();
  if (poisoned) {
    ledger = std::make_shared<attacks::PoisonLedger>();
    ledger->audit_enabled = config.get_bool("attack.trojanentrl.audit");
    factory = attacks::malicious_buffer_factory(poison_config(config), ledger);
  }
  OutputBundle bundle(config.text("output_dir"), "train");

  const auto result = rl::train(tc, factory);
  bundle.add("config.txt", serialize_config(config));
  bundle.add("checkpoint.json", nn::serialize_checkpoint(result.checkpoint));
  bundle.add("curve.csv", rl::curve_to_csv(result.curve));
  nlohmann::json summary{{"episodes", result.episode_returns.size()},
                         {"final_mean_return_100", result.final_mean_return()},
                         {"diverged", result.diverged},
                         {"buffer", poisoned ? "trojanentrl" : "benign"}};
  if (ledger) {
    summary["poison"] = {{"seen", ledger->seen}, {"poisoned", ledger->poisoned}};
    if (ledger->audit_enabled) bundle.add("poison_audit.csv", attacks::audit_to_csv(ledger->audit));
  }
  bundle.add("train_summary.json", dump(summary));
  bundle.commit();

  out << "final mean return (last 100 episodes): " << result.final_mean_return() << "\n";
  if (ledger) out << "poisoned transitions: " << ledger->poisoned << " of " << ledger->seen << "\n";
  if (result.diverged) {
    err << "error: training diverged: " << result.divergence_message << "\n";
    return kExitVerification;
  }
  return kExitOk;
}

int run_inject(const std::string& checkpoint, const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto env = pixel_grid_config(config);
  const auto ic = injection_config(config);
  const auto ckpt = load_pixel_checkpoint(checkpoint, env);
  if (ckpt.metadata.injected) err << "warning: checkpoint is already injected; adding a fresh backdoor path\n";

  const auto samples = clean_samples(env, config.get_uint("attack.infrectro.samples"), config.get_uint("seed"));
  Rng rng(derive_seed(config.get_uint("seed"), streams::kSurgery));
  auto result = attacks::inject(ckpt.policy, ic, rng, samples);

  nn::Checkpoint injected{result.network, ckpt.metadata};
  injected.metadata.injected = true;
  OutputBundle bundle(config.text("output_dir"), "inject");
  bundle.add("config.txt", serialize_config(config));
  bundle.add("checkpoint.json", nn::serialize_checkpoint(injected));
  bundle.add("injection_report.json", dump(attacks::to_json(result.report)));
  bundle.commit();

  const auto& r = result.report;
  out << "weights modified: " << r.weights_modified << ", clean agreement: " << r.clean_agreement
      << ", triggered target prob: " << r.triggered_target_prob << ", equivalence violations: "
      << r.equivalence_violations << "\n";
  if (r.equivalence_violations > 0) {
    err << "error: backdoored and pruned networks disagree on " << r.equivalence_violations << " clean states\n";
    return kExitVerification;
  }
  return kExitOk;
}

int run_eval(const std::string& checkpoint, const RunConfig& config, std::ostream& out, std::ostream&) {
  const auto ec = eval_config(config);
  backdoor::TriggerSpec trigger;
  const std::string report_path = config.text("eval.trigger_report");
  if (report_path.empty()) {
    trigger = attack_trigger(config);
  } else {
    try {
      const auto doc = nlohmann::json::parse(read_text_file(report_path));
      trigger = backdoor::trigger_from_json(doc.at("optimized_trigger"));
    } catch (const nlohmann::json::exception& e) {
      throw ArtifactError("malformed injection report " + report_path + ": " + e.what());
    }
  }
  const auto ckpt = load_pixel_checkpoint(checkpoint, ec.env);
  std::optional<nn::Checkpoint> benign;
  if (!config.text("eval.benign_checkpoint").empty()) {
    benign = load_pixel_checkpoint(config.text("eval.benign_checkpoint"), ec.env);
  }
  if (trigger.dim() != ckpt.policy.input_dim()) throw DimensionError("trigger size", ckpt.policy.input_dim(), trigger.dim());

  const auto report = eval::evaluate(ckpt.policy, benign ? &benign->policy : nullptr, trigger, ec);
  auto doc = eval::to_json(report);
  doc["summary"] = eval::summary_row(report);
  OutputBundle bundle(config.text("output_dir"), "eval");
  bundle.add("config.txt", serialize_config(config));
  bundle.add("eval_report.json", dump(doc));
  bundle.add("episodes_clean.csv", eval::episodes_to_csv(report.clean.rows));
  if (report.triggered) bundle.add("episodes_triggered.csv", eval::episodes_to_csv(report.triggered->rows));
  if (report.benign_clean) bundle.add("episodes_benign.csv", eval::episodes_to_csv(report.benign_clean->rows));
  bundle.commit();

  out << "episodes: " << report.episodes << ", clean mean return: " << report.clean.stats.mean;
  if (report.triggered) out << ", triggered mean return: " << report.triggered->stats.mean;
  out << "\n" << eval::summary_row(report) << "\n";
  return kExitOk;
}

int run_bound_check(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto tc = theorem_config(config);
  const auto report = theory::verify_theorem(tc);
  OutputBundle bundle(config.text("output_dir"), "bound-check");
  bundle.add("config.txt", serialize_config(config));
  bundle.add("bound_report.json", dump(theory::to_json(report)));
  bundle.commit();

  const std::size_t n = report.rows.size();
  out << "bound holds: " << report.holds << "/" << n << ", with inflated delta: " << report.holds_inflated << "/"
      << n;
  if (tc.check_lemma) out << ", backdoored = pruned returns: " << report.lemma_holds << "/" << n;
  out << ", non-vacuous bounds: " << report.nonvacuous << "/" << n << "\n";
  if (!report.all_hold()) {
    err << "error: bound check failed on at least one instance\n";
    return kExitVerification;
  }
  return kExitOk;
}

int run_ablate(const std::string& checkpoint, const RunConfig& config, std::ostream& out, std::ostream&) {
  const auto env = pixel_grid_config(config);
  const auto base = injection_config(config);
  auto ec = eval_config(config);
  if (ec.schedule.mode() == eval::TriggerSchedule::Mode::Never) {
    throw ConfigError("ablate needs a firing eval.schedule");
  }
  const std::string axis = config.text("ablate.axis");
  const auto values = config.get_reals("ablate.values");
  if (values.empty()) throw ConfigError("ablate.values is empty");

  std::vector<attacks::InjectionConfig> points;
  for (const double v : values) {
    auto ic = base;
    const bool integral = v == std::floor(v) && v >= 0.0;
    if (axis == "lambda") {
      ic.lambda = v;
    } else if (axis == "gamma_amp") {
      ic.gamma_amp = v;
    } else if (axis == "trigger_side") {
      if (!integral || v < 1.0 || v > env.grid) throw ConfigError("trigger_side values must be integers in [1, env.grid]");
      ic.trigger = backdoor::corner_patch_trigger(static_cast<int>(v), env.grid);
    } else {
      if (!integral || v >= static_cast<double>(envs::kPixelGridActions)) {
        throw ConfigError("target_action values must be valid action indices");
      }
      ic.target_action = static_cast<std::size_t>(v);
    }
    ic.validate();
    points.push_back(std::move(ic));
  }

  const auto ckpt = load_pixel_checkpoint(checkpoint, env);
  const auto samples = clean_samples(env, config.get_uint("attack.infrectro.samples"), config.get_uint("seed"));
  std::ostringstream csv;
  csv << "value,mean_return,asr,cda,aer,clean_return,triggered_target_prob\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    Rng rng(derive_seed(config.get_uint("seed"), streams::kSurgery));
    const auto injected = attacks::inject(ckpt.policy, points[i], rng, samples);
    ec.target_action = points[i].target_action;
    const auto report = eval::evaluate(injected.network, &ckpt.policy, injected.report.optimized_trigger, ec);
    const double asr = report.asr_pct.value_or(std::nan(""));
    csv << real_text(values[i]) << ',' << real_text(report.triggered->stats.mean) << ',' << real_text(asr) << ','
        << real_text(report.cda_pct) << ',' << real_text(report.aer_pct.value_or(std::nan(""))) << ','
        << real_text(report.clean.stats.mean) << ',' << real_text(injected.report.triggered_target_prob) << '\n';
    out << axis << " = " << values[i] << ": triggered mean return " << report.triggered->stats.mean << ", "
        << eval::summary_row(report) << "\n";
  }
  OutputBundle bundle(config.text("output_dir"), "ablate");
  bundle.add("config.txt", serialize_config(config));
  bundle.add("ablation.csv", csv.str());
  bundle.commit();
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitConfig;
  if (dynamic_cast<const ArtifactError*>(&e) != nullptr || dynamic_cast<const DimensionError*>(&e) != nullptr) {
    return kExitArtifact;
  }
  if (dynamic_cast<const VerificationError*>(&e) != nullptr || dynamic_cast<const DivergenceError*>(&e) != nullptr) {
    return kExitVerification;
  }
  return 1;
}

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Backdoor attack lab for deep RL policies"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string checkpoint;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "config file (key = value lines or JSON)");
    sub->add_option("-s,--set", overrides, "override a config key, e.g. --set train.lr=0.001");
  };
  auto* train = app.add_subcommand("train", "train a policy with the benign or poisoned rollout buffer");
  auto* inject = app.add_subcommand("inject", "inject a backdoor into a trained checkpoint by weight surgery");
  auto* evaluate = app.add_subcommand("eval", "run clean and triggered episodes and report CDA/AER/ASR");
  auto* bound = app.add_subcommand("bound-check", "numerically verify the return-gap bound on random chain instances");
  auto* ablate = app.add_subcommand("ablate", "sweep one injection parameter and evaluate each point");
  for (auto* sub : {train, inject, evaluate, bound, ablate}) add_common(sub);
  for (auto* sub : {inject, evaluate, ablate}) sub->add_option("--checkpoint", checkpoint, "input checkpoint")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig() : load_config(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      config.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (train->parsed()) return run_train(config, out, err);
    if (inject->parsed()) return run_inject(checkpoint, config, out, err);
    if (evaluate->parsed()) return run_eval(checkpoint, config, out, err);
    if (bound->parsed()) return run_bound_check(config, out, err);
    return run_ablate(checkpoint, config, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace rlbd::cli
