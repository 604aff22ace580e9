#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "rlbd/backdoor/trigger.hpp"
#include "rlbd/nn/network.hpp"
#include "rlbd/random.hpp"

namespace rlbd::attacks {

struct BackdoorPath {
  // neurons[l] is the path neuron in hidden layer l (0-based; neurons[0] is the switch).
  std::vector<std::size_t> neurons;
  double lambda = 0.1;
  double gamma_amp = 10.0;
  double suppression_weight = 100.0;
  double clean_weight_magnitude = 100.0;
  std::size_t target_action = 0;

  void validate_against(const nn::Mlp& net) const;
  bool operator==(const BackdoorPath&) const = default;
};

// Switch neuron uniform over `first_layer_candidates` (all of layer 0 when
// empty); later neurons uniform among those fed by the previous path neuron,
// or uniform over the layer when none is. Requires >= 2 layers and ReLU hidden layers.
std::vector<std::size_t> select_backdoor_path(const nn::Mlp& net, Rng& rng,
                                              std::span<const std::size_t> first_layer_candidates = {});

// Box maximiser of sum_{n in support} w_n * delta_n for w = row q1 of layer 0:
// lower bound where w_n <= 0, upper bound where w_n > 0.
std::vector<double> optimize_trigger(const nn::Mlp& net, std::size_t q1, const backdoor::TriggerSpec& trigger);

// Rewrites row q1 of layer 0 so only the trigger support feeds it, with
// magnitude clean_weight_magnitude and the pre-surgery sign, and sets the bias
// so the triggered pre-activation is lambda. Returns the realised
// pre-activation, which differs from lambda by at most one rounding of the bias.
double rewire_switch(nn::Mlp& net, std::size_t q1, const backdoor::TriggerSpec& trigger, double lambda,
                     double clean_weight_magnitude);

// Each later path neuron listens only to its predecessor, with weight gamma_amp and zero bias.
void amplify_path(nn::Mlp& net, const BackdoorPath& path);

// Adds +suppression_weight to the target output's weight from the last path
// neuron and -suppression_weight to every other output's.
void rig_output_layer(nn::Mlp& net, const BackdoorPath& path);

// Clean network with the path neurons silenced: incoming weights, biases and
// outgoing weights zeroed.
nn::PolicyNetwork pruned_network(const nn::PolicyNetwork& clean, const BackdoorPath& path);

struct InjectionConfig {
  // Only the mask and bounds are used; the pattern is optimised.
  backdoor::TriggerSpec trigger;
  double lambda = 0.1;
  double gamma_amp = 10.0;
  double clean_weight_magnitude = 100.0;
  double suppression_weight = 100.0;
  std::size_t target_action = 0;
  // Restrict the switch to neurons with a positive weight on the trigger
  // support, so the optimised pattern departs from the lower bounds.
  bool require_positive_support_weight = true;

  void validate() const;
};

struct InjectionReport {
  backdoor::TriggerSpec optimized_trigger;
  BackdoorPath path;
  std::size_t samples = 0;
  // Clean states where argmax(backdoored) == argmax(pruned).
  double clean_agreement = 0.0;
  // Mean probability (categorical) of the target action on triggered states.
  double triggered_target_prob = 0.0;
  double triggered_argmax_rate = 0.0;
  std::size_t switch_inactive = 0;
  std::size_t equivalence_violations = 0;
  std::size_t weights_modified = 0;
};

// Checks backdoored vs pruned logits bit-for-bit on every sample whose switch
// is inactive, and target behaviour on triggered copies of every sample.
InjectionReport verify_injection(const nn::PolicyNetwork& backdoored, const nn::PolicyNetwork& clean,
                                 const BackdoorPath& path, const backdoor::TriggerSpec& trigger,
                                 std::span<const std::vector<double>> samples);

// Parameters that differ bitwise between two networks of equal architecture.
std::size_t count_modified_parameters(const nn::Mlp& a, const nn::Mlp& b);

struct InjectionResult {
  nn::PolicyNetwork network;
  InjectionReport report;
};

// select -> optimise -> rewire -> amplify -> rig on a copy of `clean`.
InjectionResult inject(const nn::PolicyNetwork& clean, const InjectionConfig& config, Rng& rng,
                       std::span<const std::vector<double>> samples);

nlohmann::json to_json(const BackdoorPath& path);
nlohmann::json to_json(const InjectionReport& report);

}  // namespace rlbd::attacks
