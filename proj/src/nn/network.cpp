#include "rlbd/nn/network.hpp"

#include <algorithm>
#include <cmath>

#include "rlbd/error.hpp"

namespace rlbd::nn {

double activate(Activation act, double z) {
  switch (act) {
    case Activation::ReLU:
      return z > 0.0 ? z : 0.0;
    case Activation::Tanh:
      return std::tanh(z);
    case Activation::Identity:
      return z;
  }
  return z;
}

double activation_derivative(Activation act, double z, double q) {
  switch (act) {
    case Activation::ReLU:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh:
      return 1.0 - q * q;
    case Activation::Identity:
      return 1.0;
  }
  return 1.0;
}

double lipschitz_constant(Activation act) {
  switch (act) {
    case Activation::ReLU:
    case Activation::Tanh:
    case Activation::Identity:
      return 1.0;
  }
  return 1.0;
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::ReLU:
      return "relu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ArtifactError("unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

Mlp Mlp::zeros(std::span<const LayerSpec> specs) {
  std::vector<DenseLayer> layers;
  layers.reserve(specs.size());
  for (const auto& spec : specs) {
    layers.push_back({spec, Matrix(spec.out_dim, spec.in_dim), std::vector<double>(spec.out_dim, 0.0)});
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::random_init(std::span<const LayerSpec> specs, Rng& rng, double output_scale) {
  Mlp net = zeros(specs);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    auto& layer = net.layers_[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.spec.in_dim));
    const double scale = (l + 1 == net.layers_.size()) ? output_scale : 1.0;
    for (double& w : layer.weights.values()) w = scale * bound * (2.0 * uniform01(rng) - 1.0);
    for (double& b : layer.biases) b = scale * bound * (2.0 * uniform01(rng) - 1.0);
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.values().size() + layer.biases.size();
  return n;
}

std::vector<LayerSpec> Mlp::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& layer : layers_) out.push_back(layer.spec);
  return out;
}

void Mlp::validate() const {
  if (layers_.empty()) throw ArtifactError("network has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const auto& spec = layer.spec;
    if (spec.in_dim == 0 || spec.out_dim == 0) {
      throw ArtifactError("layer " + std::to_string(l) + " has a zero dimension");
    }
    if (l > 0 && spec.in_dim != layers_[l - 1].spec.out_dim) {
      throw DimensionError("layer " + std::to_string(l) + " in_dim", layers_[l - 1].spec.out_dim, spec.in_dim);
    }
    if (layer.weights.rows() != spec.out_dim || layer.weights.cols() != spec.in_dim) {
      throw ArtifactError("layer " + std::to_string(l) + " weight shape does not match its spec");
    }
    if (layer.biases.size() != spec.out_dim) {
      throw DimensionError("layer " + std::to_string(l) + " bias length", spec.out_dim, layer.biases.size());
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::ranges::all_of(layer.weights.values(), finite) || !std::ranges::all_of(layer.biases, finite)) {
      throw ArtifactError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
  if (layers_.back().spec.activation != Activation::Identity) {
    throw ArtifactError("output layer activation must be identity");
  }
}

ForwardTrace forward(const Mlp& net, std::span<const double> input) {
  if (input.size() != net.input_dim()) throw DimensionError("forward input", net.input_dim(), input.size());
  if (!std::ranges::all_of(input, [](double v) { return std::isfinite(v); })) {
    throw Error("forward input contains non-finite values");
  }
  ForwardTrace trace;
  trace.pre_activations.reserve(net.layer_count());
  trace.post_activations.reserve(net.layer_count());
  std::span<const double> x = input;
  for (const auto& layer : net.layers()) {
    std::vector<double> z(layer.spec.out_dim);
    std::vector<double> q(layer.spec.out_dim);
    for (std::size_t i = 0; i < z.size(); ++i) {
      // Dot product first, bias last: weight surgery relies on this order.
      double acc = 0.0;
      const auto w = layer.weights.row(i);
      for (std::size_t n = 0; n < x.size(); ++n) acc += w[n] * x[n];
      z[i] = acc + layer.biases[i];
      q[i] = activate(layer.spec.activation, z[i]);
    }
    trace.pre_activations.push_back(std::move(z));
    trace.post_activations.push_back(std::move(q));
    x = trace.post_activations.back();
  }
  return trace;
}

std::vector<double> forward_output(const Mlp& net, std::span<const double> input) {
  auto trace = forward(net, input);
  return std::move(trace.post_activations.back());
}

Mlp prune_input_path(const Mlp& net, std::size_t j) {
  if (j >= net.input_dim()) throw DimensionError("prune index out of range (input dim)", net.input_dim(), j);
  Mlp pruned = net;
  auto& w = pruned.mutable_layer(0).weights;
  for (std::size_t r = 0; r < w.rows(); ++r) w(r, j) = 0.0;
  return pruned;
}

PolicyNetwork::PolicyNetwork(Mlp body, PolicyHead head) : body_(std::move(body)), head_(head) { validate(); }

void PolicyNetwork::validate() const {
  body_.validate();
  if (const auto* cat = std::get_if<CategoricalHead>(&head_)) {
    if (cat->action_count != body_.output_dim()) {
      throw DimensionError("categorical head action count", body_.output_dim(), cat->action_count);
    }
  } else {
    const double sigma = std::get<GaussianHead>(head_).sigma_f;
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArtifactError("gaussian head requires sigma_f > 0");
  }
}

PolicyNetwork prune_input_path(const PolicyNetwork& net, std::size_t j) {
  return PolicyNetwork(prune_input_path(net.body(), j), net.head());
}

Categorical softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error("softmax of empty logits");
  if (!std::ranges::all_of(logits, [](double v) { return std::isfinite(v); })) {
    throw Error("non-finite logits");
  }
  Categorical dist;
  dist.logits.assign(logits.begin(), logits.end());
  dist.probs.resize(logits.size());
  const double max = *std::ranges::max_element(logits);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    dist.probs[i] = std::exp(logits[i] - max);
    sum += dist.probs[i];
  }
  for (double& p : dist.probs) p /= sum;
  return dist;
}

ActionDistribution action_distribution(const PolicyNetwork& net, std::span<const double> input) {
  auto out = forward_output(net.body(), input);
  if (net.is_categorical()) return softmax(out);
  if (!std::ranges::all_of(out, [](double v) { return std::isfinite(v); })) {
    throw Error("non-finite gaussian mean");
  }
  return Gaussian{std::move(out), std::get<GaussianHead>(net.head()).sigma_f};
}

std::size_t sample_categorical(const Categorical& dist, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.probs.size(); ++i) {
    if (dist.probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += dist.probs[i];
    if (u < cumulative) return i;
  }
  // Rounding left the cumulative sum a hair below u.
  return last_positive;
}

std::vector<double> sample_gaussian(const Gaussian& dist, Rng& rng) {
  std::vector<double> a(dist.mean.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = dist.mean[i] + dist.sigma * standard_normal(rng);
  return a;
}

Action sample_action(const ActionDistribution& dist, Rng& rng) {
  if (const auto* cat = std::get_if<Categorical>(&dist)) return sample_categorical(*cat, rng);
  return sample_gaussian(std::get<Gaussian>(dist), rng);
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::ranges::max_element(values) - values.begin());
}

}  // namespace rlbd::nn
