#include "rlbd/rl/gradient.hpp"

namespace rlbd::rl {

MlpGradient MlpGradient::zeros_like(const nn::Mlp& net) {
  MlpGradient g;
  for (const auto& layer : net.layers()) {
    g.weights.emplace_back(layer.weights.rows(), layer.weights.cols());
    g.biases.emplace_back(layer.biases.size(), 0.0);
  }
  return g;
}

double MlpGradient::squared_norm() const {
  double sum = 0.0;
  for (const auto& w : weights)
    for (double v : w.values()) sum += v * v;
  for (const auto& b : biases)
    for (double v : b) sum += v * v;
  return sum;
}

void MlpGradient::scale(double factor) {
  for (auto& w : weights)
    for (double& v : w.values()) v *= factor;
  for (auto& b : biases)
    for (double& v : b) v *= factor;
}

void backprop(const nn::Mlp& net, const nn::ForwardTrace& trace, std::span<const double> input,
              std::span<const double> output_grad, MlpGradient& grad) {
  const std::size_t layers = net.layer_count();
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  for (std::size_t l = layers; l-- > 0;) {
    const auto& layer = net.layer(l);
    const auto& z = trace.pre_activations[l];
    const auto& q = trace.post_activations[l];
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta[i] *= nn::activation_derivative(layer.spec.activation, z[i], q[i]);
    }
    const std::span<const double> x = (l == 0) ? input : std::span<const double>(trace.post_activations[l - 1]);
    auto& gw = grad.weights[l];
    auto& gb = grad.biases[l];
    for (std::size_t i = 0; i < delta.size(); ++i) {
      if (delta[i] == 0.0) continue;
      auto row = gw.row(i);
      for (std::size_t n = 0; n < x.size(); ++n) row[n] += delta[i] * x[n];
      gb[i] += delta[i];
    }
    if (l == 0) break;
    std::vector<double> next(layer.spec.in_dim, 0.0);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      if (delta[i] == 0.0) continue;
      const auto w = layer.weights.row(i);
      for (std::size_t n = 0; n < next.size(); ++n) next[n] += w[n] * delta[i];
    }
    delta = std::move(next);
  }
}

}  // namespace rlbd::rl
