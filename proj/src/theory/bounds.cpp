#include "rlbd/theory/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "rlbd/attacks/infrectrorl.hpp"
#include "rlbd/error.hpp"

namespace rlbd::theory {

namespace {

void require_one_hidden_layer(const nn::Mlp& net) {
  if (net.layer_count() != 2) throw ConfigError("expected exactly one hidden layer");
}

double sigma_of(const nn::PolicyNetwork& net) {
  const auto* head = std::get_if<nn::GaussianHead>(&net.head());
  if (head == nullptr) throw ConfigError("expected a Gaussian policy head");
  return head->sigma_f;
}

std::vector<double> mean_action(const nn::PolicyNetwork& net, std::span<const double> s) {
  return nn::forward_output(net.body(), s);
}

}  // namespace

double path_coefficient(const nn::Mlp& net, std::size_t j) {
  require_one_hidden_layer(net);
  const auto& w1 = net.layer(0);
  const auto& w2 = net.layer(1);
  if (j >= w1.spec.in_dim) throw ConfigError("input index out of range");
  double sum = 0.0;
  for (std::size_t k = 0; k < w2.spec.out_dim; ++k) {
    for (std::size_t i = 0; i < w1.spec.out_dim; ++i) sum += std::abs(w2.weights(k, i) * w1.weights(i, j));
  }
  return nn::lipschitz_constant(w1.spec.activation) * sum;
}

KlCheck kl_prune_check(const nn::PolicyNetwork& net, std::size_t j, std::span<const double> x) {
  require_one_hidden_layer(net.body());
  const double sigma = sigma_of(net);
  const auto f = mean_action(net, x);
  const auto fp = mean_action(nn::prune_input_path(net, j), x);
  double sq = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) sq += (f[k] - fp[k]) * (f[k] - fp[k]);
  KlCheck out;
  out.kl = sq / (2.0 * sigma * sigma);
  const double scale = path_coefficient(net.body(), j) * std::abs(x[j]);
  out.bound = scale * scale / (2.0 * sigma * sigma);
  out.holds = out.kl <= out.bound + 1e-12;
  return out;
}

double gaussian_tv(double mu1, double mu2, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  return std::erf(std::abs(mu1 - mu2) / (2.0 * std::numbers::sqrt2 * sigma));
}

double product_tv_bound(std::span<const double> per_dim_tv) {
  double keep = 1.0;
  for (const double tv : per_dim_tv) keep *= 1.0 - tv;
  return 1.0 - keep;
}

double isotropic_gaussian_tv_bound(std::span<const double> mu1, std::span<const double> mu2, double sigma) {
  if (mu1.size() != mu2.size()) throw DimensionError("mean vectors", mu1.size(), mu2.size());
  std::vector<double> tv(mu1.size());
  for (std::size_t k = 0; k < tv.size(); ++k) tv[k] = gaussian_tv(mu1[k], mu2[k], sigma);
  return product_tv_bound(tv);
}

double estimate_tv_delta(const envs::LinearGaussianChain& env, const nn::PolicyNetwork& pi1,
                         const nn::PolicyNetwork& pi2, std::size_t n_states, std::uint64_t seed) {
  env.validate();
  const double sigma_f = sigma_of(pi1);
  if (sigma_of(pi2) != sigma_f) throw ConfigError("policies must share sigma_f");
  const double c = env.action_gain;
  const double spread = std::sqrt(c * c * sigma_f * sigma_f + env.noise_std * env.noise_std);
  double delta = 0.0;
  std::size_t seen = 0;
  std::vector<double> m1(env.dim);
  std::vector<double> m2(env.dim);
  for (std::uint64_t k = 0; seen < n_states; ++k) {
    Rng rng(derive_seed(seed, k));
    auto s = envs::chain_initial_state(env, rng);
    for (std::size_t t = 0; t < env.horizon && seen < n_states; ++t, ++seen) {
      const auto f1 = mean_action(pi1, s);
      const auto f2 = mean_action(pi2, s);
      for (std::size_t d = 0; d < env.dim; ++d) {
        m1[d] = s[d] + c * f1[d];
        m2[d] = s[d] + c * f2[d];
      }
      delta = std::max(delta, isotropic_gaussian_tv_bound(m1, m2, spread));
      const auto a = nn::sample_gaussian({f1, sigma_f}, rng);
      s = envs::chain_step(env, s, a, rng).next_state;
    }
  }
  return delta;
}

ReturnEstimate mc_return(const envs::LinearGaussianChain& env, const nn::PolicyNetwork& policy,
                         std::size_t n_rollouts, std::size_t horizon, double gamma, std::uint64_t seed) {
  env.validate();
  if (n_rollouts == 0) throw ConfigError("need at least one rollout");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount must lie in [0,1)");
  const double sigma_f = sigma_of(policy);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n_rollouts; ++i) {
    Rng rng(derive_seed(seed, i));
    auto s = envs::chain_initial_state(env, rng);
    double ret = 0.0;
    double disc = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const auto a = nn::sample_gaussian({mean_action(policy, s), sigma_f}, rng);
      auto step = envs::chain_step(env, s, a, rng);
      ret += disc * step.reward;
      disc *= gamma;
      s = std::move(step.next_state);
    }
    const double delta = ret - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (ret - mean);
  }
  ReturnEstimate out;
  out.mean = mean;
  out.n_rollouts = n_rollouts;
  if (n_rollouts > 1) {
    const double sd = std::sqrt(m2 / static_cast<double>(n_rollouts - 1));
    out.half_width_95 = 1.96 * sd / std::sqrt(static_cast<double>(n_rollouts));
  }
  return out;
}

void BoundComponents::validate() const {
  for (const double v : {b_j, l_phi, sigma_f, tv_delta, r_max, gamma}) {
    if (!std::isfinite(v)) throw ConfigError("bound components must be finite");
  }
  if (b_j < 0.0 || tv_delta < 0.0) throw ConfigError("B_j and delta must be nonnegative");
  if (!(l_phi > 0.0) || !(sigma_f > 0.0) || !(r_max > 0.0)) {
    throw ConfigError("L_phi, sigma_f and r_max must be positive");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount must lie in [0,1)");
}

double theorem_bound(const BoundComponents& c) {
  c.validate();
  const double one_minus = 1.0 - c.gamma;
  return 2.0 * c.r_max * (c.gamma * c.tv_delta / (one_minus * one_minus) + c.b_j / (c.sigma_f * one_minus));
}

void TheoremConfig::validate() const {
  env.validate();
  if (instances == 0) throw ConfigError("theory.instances must be at least 1");
  if (rollouts < 2) throw ConfigError("theory.rollouts must be at least 2");
  if (hidden == 0) throw ConfigError("theory.hidden must be positive");
  if (!(weight_scale > 0.0) || !std::isfinite(weight_scale)) throw ConfigError("theory.weight_scale must be positive");
  if (!(sigma_f > 0.0) || !std::isfinite(sigma_f)) throw ConfigError("theory.sigma_f must be positive");
  if (tv_states == 0) throw ConfigError("theory.tv_states must be positive");
  if (!(delta_inflation >= 1.0)) throw ConfigError("theory.delta_inflation must be at least 1");
}

bool BoundReport::all_hold() const {
  const bool lemma_ok = std::all_of(rows.begin(), rows.end(), [](const InstanceRow& r) {
    return !r.lemma_checked || r.lemma_holds;
  });
  return holds == rows.size() && holds_inflated == rows.size() && lemma_ok;
}

nn::PolicyNetwork random_chain_policy(std::size_t dim, std::size_t hidden, double scale, double sigma_f, Rng& rng) {
  const std::vector<nn::LayerSpec> specs{{dim, hidden, nn::Activation::ReLU}, {hidden, dim, nn::Activation::Identity}};
  nn::Mlp body = nn::Mlp::zeros(specs);
  for (std::size_t l = 0; l < body.layer_count(); ++l) {
    auto& layer = body.mutable_layer(l);
    for (double& w : layer.weights.values()) w = scale * (2.0 * uniform01(rng) - 1.0);
    for (double& b : layer.biases) b = scale * (2.0 * uniform01(rng) - 1.0);
  }
  return nn::PolicyNetwork(std::move(body), nn::GaussianHead{sigma_f});
}

namespace {

// Trigger on input j with bounds above the clean state range, so clean
// states never reach the switch.
std::optional<attacks::InjectionResult> chain_injection(const nn::PolicyNetwork& policy, std::size_t j,
                                                        std::uint64_t seed) {
  const std::size_t d = policy.input_dim();
  std::vector<std::uint8_t> mask(d, 0);
  mask[j] = 1;
  std::vector<double> lower(d, 0.0);
  std::vector<double> upper(d, 1.0);
  lower[j] = 1.5;
  upper[j] = 2.0;
  std::vector<double> pattern(d, 0.0);
  pattern[j] = lower[j];
  attacks::InjectionConfig cfg{backdoor::TriggerSpec(std::move(mask), std::move(pattern), lower, upper)};
  Rng rng(derive_seed(seed, streams::kSurgery));
  try {
    return attacks::inject(policy, cfg, rng, {});
  } catch (const ArtifactError&) {
    return std::nullopt;
  }
}

}  // namespace

InstanceRow check_instance(const envs::LinearGaussianChain& env, const nn::PolicyNetwork& policy, std::size_t j,
                           const TheoremConfig& config, std::uint64_t seed) {
  config.validate();
  const auto pruned = nn::prune_input_path(policy, j);
  InstanceRow row;
  row.j = j;
  row.b_j = path_coefficient(policy.body(), j);
  row.tv_delta = estimate_tv_delta(env, policy, pruned, config.tv_states, derive_seed(seed, streams::kSamples));

  BoundComponents comp;
  comp.b_j = row.b_j;
  comp.l_phi = nn::lipschitz_constant(policy.body().layer(0).spec.activation);
  comp.sigma_f = sigma_of(policy);
  comp.tv_delta = row.tv_delta;
  comp.r_max = env.r_max;
  comp.gamma = env.gamma;
  row.bound = theorem_bound(comp);
  comp.tv_delta = row.tv_delta * config.delta_inflation;
  row.bound_inflated = theorem_bound(comp);
  row.vacuous = row.bound >= env.r_max / (1.0 - env.gamma);

  // Common random numbers for both policies.
  const std::uint64_t mc_seed = derive_seed(seed, streams::kActions);
  const auto clean = mc_return(env, policy, config.rollouts, env.horizon, env.gamma, mc_seed);
  const auto cut = mc_return(env, pruned, config.rollouts, env.horizon, env.gamma, mc_seed);
  row.j_clean = clean.mean;
  row.j_pruned = cut.mean;
  row.gap = std::abs(clean.mean - cut.mean);
  row.ci = clean.half_width_95 + cut.half_width_95;
  row.holds = row.gap <= row.bound + row.ci;
  row.holds_inflated = row.gap <= row.bound_inflated + row.ci;

  if (config.check_lemma) {
    if (auto injected = chain_injection(policy, j, seed)) {
      const auto path_pruned = attacks::pruned_network(policy, injected->report.path);
      const auto jb = mc_return(env, injected->network, config.rollouts, env.horizon, env.gamma, mc_seed);
      const auto jp = mc_return(env, path_pruned, config.rollouts, env.horizon, env.gamma, mc_seed);
      row.lemma_checked = true;
      row.j_backdoored = jb.mean;
      row.j_path_pruned = jp.mean;
      row.lemma_gap = std::abs(jb.mean - jp.mean);
      row.lemma_ci = jb.half_width_95 + jp.half_width_95;
      row.lemma_holds = row.lemma_gap <= row.lemma_ci;
    }
  }
  return row;
}

BoundReport verify_theorem(const TheoremConfig& config) {
  config.validate();
  BoundReport report;
  const std::uint64_t init_base = derive_seed(config.seed, streams::kInit);
  for (std::size_t i = 0; i < config.instances; ++i) {
    Rng rng(derive_seed(init_base, i));
    const auto policy = random_chain_policy(config.env.dim, config.hidden, config.weight_scale, config.sigma_f, rng);
    const std::size_t j = uniform_index(rng, config.env.dim);
    InstanceRow row = check_instance(config.env, policy, j, config, derive_seed(config.seed, i));
    row.index = i;
    report.holds += row.holds ? 1 : 0;
    report.holds_inflated += row.holds_inflated ? 1 : 0;
    report.lemma_holds += row.lemma_checked && row.lemma_holds ? 1 : 0;
    report.nonvacuous += row.vacuous ? 0 : 1;
    report.rows.push_back(row);
  }
  return report;
}

nlohmann::json to_json(const BoundReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row{{"index", r.index},
                       {"j", r.j},
                       {"B_j", r.b_j},
                       {"tv_delta", r.tv_delta},
                       {"bound", r.bound},
                       {"bound_inflated", r.bound_inflated},
                       {"J_clean", r.j_clean},
                       {"J_pruned", r.j_pruned},
                       {"gap", r.gap},
                       {"ci", r.ci},
                       {"holds", r.holds},
                       {"holds_inflated", r.holds_inflated},
                       {"vacuous", r.vacuous}};
    if (r.lemma_checked) {
      row["lemma"] = {{"J_backdoored", r.j_backdoored},
                      {"J_path_pruned", r.j_path_pruned},
                      {"gap", r.lemma_gap},
                      {"ci", r.lemma_ci},
                      {"holds", r.lemma_holds}};
    } else {
      row["lemma"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  return {{"rows", rows},
          {"summary",
           {{"instances", report.rows.size()},
            {"holds", report.holds},
            {"holds_inflated", report.holds_inflated},
            {"lemma_holds", report.lemma_holds},
            {"nonvacuous", report.nonvacuous},
            {"all_hold", report.all_hold()}}}};
}

}  // namespace rlbd::theory
