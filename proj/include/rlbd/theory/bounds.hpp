#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "rlbd/envs/linear_gaussian_chain.hpp"
#include "rlbd/nn/network.hpp"
#include "rlbd/random.hpp"

namespace rlbd::theory {

// B_j = L_phi * sum_k sum_i |W2[k][i] * W1[i][j]| for a one-hidden-layer net.
// With a single output this is the usual path coefficient; with several
// outputs it bounds the l1 (hence l2) change of the mean.
double path_coefficient(const nn::Mlp& net, std::size_t j);

struct KlCheck {
  double kl = 0.0;
  double bound = 0.0;
  bool holds = false;
};

// KL between the Gaussian policy and its input-j-pruned copy at x, against
// (B_j |x_j|)^2 / (2 sigma_f^2).
KlCheck kl_prune_check(const nn::PolicyNetwork& net, std::size_t j, std::span<const double> x);

// TV(N(mu1, s^2), N(mu2, s^2)) = 2 Phi(|mu1 - mu2| / (2 s)) - 1.
double gaussian_tv(double mu1, double mu2, double sigma);
// 1 - prod_k (1 - tv_k): TV bound for product measures.
double product_tv_bound(std::span<const double> per_dim_tv);
double isotropic_gaussian_tv_bound(std::span<const double> mu1, std::span<const double> mu2, double sigma);

// Sample max over n_states states visited by pi1 of the TV between the
// pre-clip next-state Gaussians induced by pi1 and pi2.
double estimate_tv_delta(const envs::LinearGaussianChain& env, const nn::PolicyNetwork& pi1,
                         const nn::PolicyNetwork& pi2, std::size_t n_states, std::uint64_t seed);

struct ReturnEstimate {
  double mean = 0.0;
  double half_width_95 = 0.0;
  std::size_t n_rollouts = 0;
};

// Discounted return over `horizon` steps; rollout i uses streams derived from (seed, i).
ReturnEstimate mc_return(const envs::LinearGaussianChain& env, const nn::PolicyNetwork& policy,
                         std::size_t n_rollouts, std::size_t horizon, double gamma, std::uint64_t seed);

struct BoundComponents {
  double b_j = 0.0;
  double l_phi = 1.0;
  double sigma_f = 1.0;
  double tv_delta = 0.0;
  double r_max = 1.0;
  double gamma = 0.9;

  void validate() const;
};

// 2 r_max (gamma delta / (1 - gamma)^2 + B_j / (sigma_f (1 - gamma))).
// B_j already carries L_phi.
double theorem_bound(const BoundComponents& c);

struct TheoremConfig {
  std::size_t instances = 20;
  std::size_t rollouts = 10000;
  std::size_t hidden = 16;
  double weight_scale = 0.3;
  double sigma_f = 1.0;
  std::size_t tv_states = 2000;
  double delta_inflation = 2.0;
  bool check_lemma = true;
  std::uint64_t seed = 0;
  envs::LinearGaussianChain env;

  void validate() const;
};

struct InstanceRow {
  std::size_t index = 0;
  std::size_t j = 0;
  double b_j = 0.0;
  double tv_delta = 0.0;
  double bound = 0.0;
  double bound_inflated = 0.0;
  double j_clean = 0.0;
  double j_pruned = 0.0;
  double gap = 0.0;
  double ci = 0.0;
  bool holds = false;
  bool holds_inflated = false;
  bool vacuous = false;
  // Backdoored-on-clean vs path-pruned returns.
  bool lemma_checked = false;
  double j_backdoored = 0.0;
  double j_path_pruned = 0.0;
  double lemma_gap = 0.0;
  double lemma_ci = 0.0;
  bool lemma_holds = false;
};

struct BoundReport {
  std::vector<InstanceRow> rows;
  std::size_t holds = 0;
  std::size_t holds_inflated = 0;
  std::size_t lemma_holds = 0;
  std::size_t nonvacuous = 0;

  bool all_hold() const;
};

// Random one-hidden-layer ReLU Gaussian policy with entries in [-scale, scale].
nn::PolicyNetwork random_chain_policy(std::size_t dim, std::size_t hidden, double scale, double sigma_f, Rng& rng);

// Bound check for one (policy, pruned input) pair.
InstanceRow check_instance(const envs::LinearGaussianChain& env, const nn::PolicyNetwork& policy, std::size_t j,
                           const TheoremConfig& config, std::uint64_t seed);

BoundReport verify_theorem(const TheoremConfig& config);

nlohmann::json to_json(const BoundReport& report);

}  // namespace rlbd::theory
