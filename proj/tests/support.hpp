#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "rlbd/nn/network.hpp"
#include "rlbd/random.hpp"

namespace rlbd::test {

inline nn::DenseLayer dense(std::vector<std::vector<double>> w, std::vector<double> b,
                            nn::Activation act = nn::Activation::Identity) {
  const std::size_t rows = w.size();
  const std::size_t cols = w.front().size();
  nn::DenseLayer layer{{cols, rows, act}, nn::Matrix(rows, cols), std::move(b)};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) layer.weights(r, c) = w[r][c];
  }
  return layer;
}

// Hidden layers use `hidden_act`; the last layer is Identity. Entries uniform in [-scale, scale].
inline nn::Mlp random_mlp(const std::vector<std::size_t>& dims, Rng& rng, double scale = 1.0,
                          nn::Activation hidden_act = nn::Activation::ReLU) {
  std::vector<nn::LayerSpec> specs;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    specs.push_back({dims[l], dims[l + 1], l + 2 == dims.size() ? nn::Activation::Identity : hidden_act});
  }
  nn::Mlp net = nn::Mlp::zeros(specs);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (double& w : net.mutable_layer(l).weights.values()) w = scale * (2.0 * uniform01(rng) - 1.0);
    for (double& b : net.mutable_layer(l).biases) b = scale * (2.0 * uniform01(rng) - 1.0);
  }
  return net;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * uniform01(rng);
  return v;
}

inline double chi_square_p_value(const std::vector<double>& observed, const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  }
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// One-sample Kolmogorov-Smirnov test against `cdf`, asymptotic p-value.
inline double ks_p_value(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace rlbd::test
