#pragma once

#include <span>
#include <vector>

#include "rlbd/nn/network.hpp"

namespace rlbd::rl {

// Parameter-shaped gradient for an Mlp.
struct MlpGradient {
  std::vector<nn::Matrix> weights;
  std::vector<std::vector<double>> biases;

  static MlpGradient zeros_like(const nn::Mlp& net);

  double squared_norm() const;
  void scale(double factor);
};

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output) for one sample.
void backprop(const nn::Mlp& net, const nn::ForwardTrace& trace, std::span<const double> input,
              std::span<const double> output_grad, MlpGradient& grad);

}  // namespace rlbd::rl
