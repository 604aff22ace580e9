#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rlbd/random.hpp"

namespace rlbd::nn {

enum class Activation { ReLU, Tanh, Identity };

double activate(Activation act, double z);
// Derivative of the activation expressed through the pre-activation z and output q.
double activation_derivative(Activation act, double z, double q);
// Declared Lipschitz constant; all supported activations are 1-Lipschitz.
double lipschitz_constant(Activation act);

std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::Identity;

  bool operator==(const LayerSpec&) const = default;
};

// Dense row-major matrix; element (r, c) lives at r * cols + c.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct DenseLayer {
  LayerSpec spec;
  Matrix weights;  // [out_dim x in_dim]
  std::vector<double> biases;

  bool operator==(const DenseLayer&) const = default;
};

struct ForwardTrace {
  std::vector<std::vector<double>> pre_activations;   // z per layer
  std::vector<std::vector<double>> post_activations;  // q per layer

  const std::vector<double>& output() const { return post_activations.back(); }
};

// Multi-layer perceptron over explicit weights. Hidden layers may use any
// activation; the output layer is always Identity.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  static Mlp zeros(std::span<const LayerSpec> specs);
  // Uniform(-1/sqrt(in), 1/sqrt(in)) init; the output layer is additionally scaled.
  static Mlp random_init(std::span<const LayerSpec> specs, Rng& rng, double output_scale = 1.0);

  std::size_t input_dim() const { return layers_.front().spec.in_dim; }
  std::size_t output_dim() const { return layers_.back().spec.out_dim; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const;

  const DenseLayer& layer(std::size_t l) const { return layers_.at(l); }
  DenseLayer& mutable_layer(std::size_t l) { return layers_.at(l); }
  std::span<const DenseLayer> layers() const noexcept { return layers_; }
  std::vector<LayerSpec> specs() const;

  // Throws ArtifactError on inconsistent shapes or non-finite parameters.
  void validate() const;

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

ForwardTrace forward(const Mlp& net, std::span<const double> input);
std::vector<double> forward_output(const Mlp& net, std::span<const double> input);

// Copy of `net` with column j of the first weight matrix zeroed.
Mlp prune_input_path(const Mlp& net, std::size_t j);

struct CategoricalHead {
  std::size_t action_count = 0;
  bool operator==(const CategoricalHead&) const = default;
};

struct GaussianHead {
  double sigma_f = 1.0;
  bool operator==(const GaussianHead&) const = default;
};

using PolicyHead = std::variant<CategoricalHead, GaussianHead>;

class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(Mlp body, PolicyHead head);

  const Mlp& body() const noexcept { return body_; }
  // Exclusive-access hook for weight surgery; callers must keep every LayerSpec intact.
  Mlp& mutable_body() noexcept { return body_; }
  const PolicyHead& head() const noexcept { return head_; }

  bool is_categorical() const { return std::holds_alternative<CategoricalHead>(head_); }
  std::size_t input_dim() const { return body_.input_dim(); }
  std::size_t output_dim() const { return body_.output_dim(); }

  void validate() const;

  bool operator==(const PolicyNetwork&) const = default;

 private:
  Mlp body_;
  PolicyHead head_;
};

inline ForwardTrace forward(const PolicyNetwork& net, std::span<const double> input) {
  return forward(net.body(), input);
}

PolicyNetwork prune_input_path(const PolicyNetwork& net, std::size_t j);

struct Categorical {
  std::vector<double> logits;
  std::vector<double> probs;
};

struct Gaussian {
  std::vector<double> mean;
  double sigma = 1.0;
};

using ActionDistribution = std::variant<Categorical, Gaussian>;
using Action = std::variant<std::size_t, std::vector<double>>;

// Numerically stable softmax; throws Error on non-finite logits.
Categorical softmax(std::span<const double> logits);

ActionDistribution action_distribution(const PolicyNetwork& net, std::span<const double> input);

std::size_t sample_categorical(const Categorical& dist, Rng& rng);
std::vector<double> sample_gaussian(const Gaussian& dist, Rng& rng);
Action sample_action(const ActionDistribution& dist, Rng& rng);

// First index of the maximum element.
std::size_t argmax(std::span<const double> values);

}  // namespace rlbd::nn
