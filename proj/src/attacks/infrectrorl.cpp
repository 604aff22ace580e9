#include "rlbd/attacks/infrectrorl.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "rlbd/error.hpp"

namespace rlbd::attacks {

namespace {

void require_surgery_shape(const nn::Mlp& net) {
  if (net.layer_count() < 2) throw ArtifactError("backdoor path needs at least one hidden layer");
  for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
    if (net.layer(l).spec.activation != nn::Activation::ReLU) {
      throw ArtifactError("backdoor path needs ReLU hidden layers (layer " + std::to_string(l) + ")");
    }
  }
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool same_bits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_bits(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

void BackdoorPath::validate_against(const nn::Mlp& net) const {
  require_surgery_shape(net);
  if (neurons.size() != net.layer_count() - 1) {
    throw ConfigError("backdoor path must name one neuron per hidden layer");
  }
  for (std::size_t l = 0; l < neurons.size(); ++l) {
    if (neurons[l] >= net.layer(l).spec.out_dim) throw ConfigError("backdoor path neuron out of range");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
  if (!(gamma_amp > 1.0) || !std::isfinite(gamma_amp)) throw ConfigError("gamma_amp must exceed 1");
  if (!(suppression_weight > 0.0) || !std::isfinite(suppression_weight)) {
    throw ConfigError("suppression weight must be positive");
  }
  if (!(clean_weight_magnitude > 0.0) || !std::isfinite(clean_weight_magnitude)) {
    throw ConfigError("clean weight magnitude must be positive");
  }
  if (target_action >= net.output_dim()) throw ConfigError("target action out of range");
}

std::vector<std::size_t> select_backdoor_path(const nn::Mlp& net, Rng& rng,
                                              std::span<const std::size_t> first_layer_candidates) {
  require_surgery_shape(net);
  std::vector<std::size_t> path;
  const std::size_t width0 = net.layer(0).spec.out_dim;
  if (first_layer_candidates.empty()) {
    path.push_back(uniform_index(rng, width0));
  } else {
    for (const auto c : first_layer_candidates) {
      if (c >= width0) throw ConfigError("switch candidate out of range");
    }
    path.push_back(first_layer_candidates[uniform_index(rng, first_layer_candidates.size())]);
  }
  for (std::size_t l = 1; l + 1 < net.layer_count(); ++l) {
    const auto& layer = net.layer(l);
    std::vector<std::size_t> fed;
    for (std::size_t i = 0; i < layer.spec.out_dim; ++i) {
      if (layer.weights(i, path.back()) != 0.0) fed.push_back(i);
    }
    path.push_back(fed.empty() ? uniform_index(rng, layer.spec.out_dim) : fed[uniform_index(rng, fed.size())]);
  }
  return path;
}

std::vector<double> optimize_trigger(const nn::Mlp& net, std::size_t q1, const backdoor::TriggerSpec& trigger) {
  const auto& layer = net.layer(0);
  if (trigger.dim() != layer.spec.in_dim) throw DimensionError("trigger", layer.spec.in_dim, trigger.dim());
  if (q1 >= layer.spec.out_dim) throw ConfigError("switch neuron out of range");
  const auto support = backdoor::trigger_support(trigger);
  if (support.empty()) throw ConfigError("trigger mask is empty");
  std::vector<double> pattern(trigger.dim(), 0.0);
  for (const auto n : support) {
    pattern[n] = layer.weights(q1, n) > 0.0 ? trigger.upper_bounds()[n] : trigger.lower_bounds()[n];
  }
  return pattern;
}

double rewire_switch(nn::Mlp& net, std::size_t q1, const backdoor::TriggerSpec& trigger, double lambda,
                     double clean_weight_magnitude) {
  require_surgery_shape(net);
  auto& layer = net.mutable_layer(0);
  if (trigger.dim() != layer.spec.in_dim) throw DimensionError("trigger", layer.spec.in_dim, trigger.dim());
  if (q1 >= layer.spec.out_dim) throw ConfigError("switch neuron out of range");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(clean_weight_magnitude > 0.0)) throw ConfigError("clean weight magnitude must be positive");

  auto row = layer.weights.row(q1);
  const auto mask = trigger.mask();
  for (std::size_t n = 0; n < row.size(); ++n) {
    if (mask[n] == 0) {
      row[n] = 0.0;
    } else {
      row[n] = row[n] > 0.0 ? clean_weight_magnitude : -clean_weight_magnitude;
    }
  }
  // Same accumulation order as forward; off-support terms vanish whatever the input.
  const auto pattern = trigger.pattern();
  double dot = 0.0;
  for (std::size_t n = 0; n < row.size(); ++n) dot += row[n] * pattern[n];
  layer.biases[q1] = lambda - dot;
  return dot + layer.biases[q1];
}

void amplify_path(nn::Mlp& net, const BackdoorPath& path) {
  path.validate_against(net);
  for (std::size_t l = 1; l < path.neurons.size(); ++l) {
    auto& layer = net.mutable_layer(l);
    auto row = layer.weights.row(path.neurons[l]);
    std::fill(row.begin(), row.end(), 0.0);
    row[path.neurons[l - 1]] = path.gamma_amp;
    layer.biases[path.neurons[l]] = 0.0;
  }
}

void rig_output_layer(nn::Mlp& net, const BackdoorPath& path) {
  path.validate_against(net);
  auto& out = net.mutable_layer(net.layer_count() - 1);
  const std::size_t col = path.neurons.back();
  for (std::size_t a = 0; a < out.spec.out_dim; ++a) {
    out.weights(a, col) += a == path.target_action ? path.suppression_weight : -path.suppression_weight;
  }
}

nn::PolicyNetwork pruned_network(const nn::PolicyNetwork& clean, const BackdoorPath& path) {
  path.validate_against(clean.body());
  nn::PolicyNetwork pruned = clean;
  auto& body = pruned.mutable_body();
  for (std::size_t l = 0; l < path.neurons.size(); ++l) {
    const std::size_t q = path.neurons[l];
    auto& layer = body.mutable_layer(l);
    auto row = layer.weights.row(q);
    std::fill(row.begin(), row.end(), 0.0);
    layer.biases[q] = 0.0;
    auto& next = body.mutable_layer(l + 1);
    for (std::size_t i = 0; i < next.spec.out_dim; ++i) next.weights(i, q) = 0.0;
  }
  return pruned;
}

void InjectionConfig::validate() const {
  if (trigger.dim() == 0) throw ConfigError("injection trigger is empty");
  if (backdoor::trigger_support(trigger).empty()) throw ConfigError("injection trigger mask is empty");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("attack.infrectro.lambda must be positive");
  if (!(gamma_amp > 1.0) || !std::isfinite(gamma_amp)) throw ConfigError("attack.infrectro.gamma_amp must exceed 1");
  if (!(clean_weight_magnitude > 0.0) || !std::isfinite(clean_weight_magnitude)) {
    throw ConfigError("attack.infrectro.clean_w must be positive");
  }
  if (!(suppression_weight > 0.0) || !std::isfinite(suppression_weight)) {
    throw ConfigError("attack.infrectro.suppress_w must be positive");
  }
}

InjectionReport verify_injection(const nn::PolicyNetwork& backdoored, const nn::PolicyNetwork& clean,
                                 const BackdoorPath& path, const backdoor::TriggerSpec& trigger,
                                 std::span<const std::vector<double>> samples) {
  if (backdoored.body().specs() != clean.body().specs() || !(backdoored.head() == clean.head())) {
    throw ArtifactError("backdoored and clean networks differ in architecture");
  }
  const nn::PolicyNetwork pruned = pruned_network(clean, path);
  const std::size_t q1 = path.neurons.front();

  InjectionReport report;
  report.path = path;
  report.optimized_trigger = trigger;
  report.samples = samples.size();
  std::size_t agree = 0;
  std::size_t target_argmax = 0;
  double target_prob = 0.0;
  for (const auto& s : samples) {
    const auto tb = nn::forward(backdoored, s);
    const auto tp = nn::forward(pruned, s);
    if (tb.post_activations.front()[q1] == 0.0) {
      ++report.switch_inactive;
      if (!same_bits(tb.output(), tp.output())) ++report.equivalence_violations;
    }
    if (nn::argmax(tb.output()) == nn::argmax(tp.output())) ++agree;

    const auto triggered = backdoor::apply_trigger(s, trigger);
    const auto out = nn::forward(backdoored, triggered).output();
    const bool hit = nn::argmax(out) == path.target_action;
    if (hit) ++target_argmax;
    if (backdoored.is_categorical()) {
      target_prob += nn::softmax(out).probs[path.target_action];
    } else if (hit) {
      target_prob += 1.0;
    }
  }
  if (!samples.empty()) {
    const double n = static_cast<double>(samples.size());
    report.clean_agreement = static_cast<double>(agree) / n;
    report.triggered_argmax_rate = static_cast<double>(target_argmax) / n;
    report.triggered_target_prob = target_prob / n;
  }
  return report;
}

std::size_t count_modified_parameters(const nn::Mlp& a, const nn::Mlp& b) {
  if (a.specs() != b.specs()) throw ArtifactError("cannot diff networks of different architecture");
  std::size_t count = 0;
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    const auto wa = a.layer(l).weights.values();
    const auto wb = b.layer(l).weights.values();
    for (std::size_t i = 0; i < wa.size(); ++i) count += same_bits(wa[i], wb[i]) ? 0 : 1;
    const auto& ba = a.layer(l).biases;
    const auto& bb = b.layer(l).biases;
    for (std::size_t i = 0; i < ba.size(); ++i) count += same_bits(ba[i], bb[i]) ? 0 : 1;
  }
  return count;
}

InjectionResult inject(const nn::PolicyNetwork& clean, const InjectionConfig& config, Rng& rng,
                       std::span<const std::vector<double>> samples) {
  config.validate();
  clean.validate();
  require_surgery_shape(clean.body());
  if (config.trigger.dim() != clean.input_dim()) {
    throw DimensionError("injection trigger", clean.input_dim(), config.trigger.dim());
  }
  if (config.target_action >= clean.output_dim()) throw ConfigError("attack.infrectro.target_action out of range");

  const auto support = backdoor::trigger_support(config.trigger);
  std::vector<std::size_t> candidates;
  if (config.require_positive_support_weight) {
    const auto& first = clean.body().layer(0);
    for (std::size_t i = 0; i < first.spec.out_dim; ++i) {
      for (const auto n : support) {
        if (first.weights(i, n) > 0.0) {
          candidates.push_back(i);
          break;
        }
      }
    }
    if (candidates.empty()) throw ArtifactError("no first-layer neuron has a positive weight on the trigger support");
  }

  BackdoorPath path;
  path.neurons = select_backdoor_path(clean.body(), rng, candidates);
  path.gamma_amp = config.gamma_amp;
  path.suppression_weight = config.suppression_weight;
  path.clean_weight_magnitude = config.clean_weight_magnitude;
  path.target_action = config.target_action;

  const auto optimized = config.trigger.with_pattern(optimize_trigger(clean.body(), path.neurons.front(), config.trigger));
  nn::PolicyNetwork backdoored = clean;
  auto& body = backdoored.mutable_body();
  path.lambda = rewire_switch(body, path.neurons.front(), optimized, config.lambda, config.clean_weight_magnitude);
  amplify_path(body, path);
  rig_output_layer(body, path);
  backdoored.validate();

  InjectionReport report = verify_injection(backdoored, clean, path, optimized, samples);
  report.weights_modified = count_modified_parameters(clean.body(), backdoored.body());
  return {std::move(backdoored), std::move(report)};
}

nlohmann::json to_json(const BackdoorPath& path) {
  return {{"neurons", path.neurons},
          {"lambda", path.lambda},
          {"gamma_amp", path.gamma_amp},
          {"suppression_weight", path.suppression_weight},
          {"clean_weight_magnitude", path.clean_weight_magnitude},
          {"target_action", path.target_action}};
}

nlohmann::json to_json(const InjectionReport& report) {
  return {{"optimized_trigger", backdoor::to_json(report.optimized_trigger)},
          {"path", to_json(report.path)},
          {"samples", report.samples},
          {"clean_agreement", report.clean_agreement},
          {"triggered_target_prob", report.triggered_target_prob},
          {"triggered_argmax_rate", report.triggered_argmax_rate},
          {"switch_inactive", report.switch_inactive},
          {"equivalence_violations", report.equivalence_violations},
          {"weights_modified", report.weights_modified}};
}

}  // namespace rlbd::attacks
