#include <gtest/gtest.h>

#include <bit>
#include <chrono>
#include <cmath>

#include "rlbd/attacks/infrectrorl.hpp"
#include "rlbd/backdoor/trigger.hpp"
#include "rlbd/envs/pixel_grid.hpp"
#include "rlbd/error.hpp"
#include "support.hpp"

using namespace rlbd;
using namespace rlbd::attacks;
using backdoor::TriggerSpec;
using rlbd::test::dense;

namespace {

TriggerSpec box_trigger(std::vector<std::uint8_t> mask, double lo = 0.0, double hi = 1.0) {
  const std::size_t d = mask.size();
  return TriggerSpec(std::move(mask), std::vector<double>(d, lo), std::vector<double>(d, lo),
                     std::vector<double>(d, hi));
}

nn::PolicyNetwork random_policy(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  Rng rng(seed);
  return nn::PolicyNetwork(test::random_mlp(dims, rng, 0.5), nn::CategoricalHead{dims.back()});
}

std::vector<std::vector<double>> pixel_grid_states(std::size_t n, std::uint64_t seed) {
  envs::PixelGrid env;
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  while (out.size() < n) {
    out.push_back(env.reset(rng));
    bool done = false;
    while (!done && out.size() < n) {
      const auto t = env.step(uniform_index(rng, envs::kPixelGridActions));
      out.push_back(t.next_obs);
      done = t.done;
    }
  }
  return out;
}

InjectionConfig default_injection() {
  InjectionConfig cfg;
  cfg.trigger = backdoor::corner_patch_trigger(2, 8);
  return cfg;
}

double preactivation(const nn::Mlp& net, std::size_t q, std::span<const double> x) {
  return nn::forward(net, x).pre_activations[0][q];
}

}  // namespace

TEST(SelectPath, DeterministicAndInRange) {
  const auto net = random_policy({4, 4, 4, 3}, 1).body();
  Rng a(5);
  Rng b(5);
  const auto p = select_backdoor_path(net, a);
  EXPECT_EQ(p, select_backdoor_path(net, b));
  ASSERT_EQ(p.size(), 2u);
  for (auto q : p) EXPECT_LT(q, 4u);
}

TEST(SelectPath, FollowsTheOnlyConnection) {
  auto net = random_policy({4, 4, 4, 3}, 2).body();
  auto& second = net.mutable_layer(1);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) second.weights(i, j) = i == 2 ? 0.5 : 0.0;
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(select_backdoor_path(net, rng)[1], 2u);
  }
}

TEST(SelectPath, UnconnectedLayerFallsBackToAnyNeuron) {
  auto net = random_policy({4, 4, 4, 3}, 2).body();
  for (double& w : net.mutable_layer(1).weights.values()) w = 0.0;
  Rng rng(1);
  EXPECT_LT(select_backdoor_path(net, rng)[1], 4u);
}

TEST(SelectPath, SwitchNeuronIsUniform) {
  const nn::Mlp net({dense(std::vector<std::vector<double>>(8, std::vector<double>(3, 1.0)), std::vector<double>(8, 0.0),
                           nn::Activation::ReLU),
                     dense(std::vector<std::vector<double>>(2, std::vector<double>(8, 1.0)), {0.0, 0.0})});
  std::vector<double> counts(8, 0.0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(99, static_cast<std::uint64_t>(i)));
    counts[select_backdoor_path(net, rng)[0]] += 1.0;
  }
  EXPECT_GT(test::chi_square_p_value(counts, std::vector<double>(8, n / 8.0)), 0.01);
}

TEST(SelectPath, RejectsUnsupportedNetworks) {
  Rng rng(1);
  EXPECT_THROW(select_backdoor_path(random_policy({4, 3}, 1).body(), rng), ArtifactError);
  const auto tanh_net = test::random_mlp({4, 5, 3}, rng, 1.0, nn::Activation::Tanh);
  EXPECT_THROW(select_backdoor_path(tanh_net, rng), ArtifactError);
}

TEST(OptimizeTrigger, SignRule) {
  const nn::Mlp net({dense({{-0.5, 0.3}}, {0.0}, nn::Activation::ReLU), dense({{1.0}, {1.0}}, {0.0, 0.0})});
  EXPECT_EQ(optimize_trigger(net, 0, box_trigger({1, 1})), (std::vector<double>{0.0, 1.0}));
}

TEST(OptimizeTrigger, ZeroWeightsPickLowerBound) {
  const nn::Mlp net({dense({{0.0, 0.0, 0.0}}, {0.0}, nn::Activation::ReLU), dense({{1.0}}, {0.0})});
  EXPECT_EQ(optimize_trigger(net, 0, box_trigger({1, 1, 1}, 0.2, 0.9)), (std::vector<double>{0.2, 0.2, 0.2}));
}

TEST(OptimizeTrigger, AttainsGridMaximum) {
  Rng rng(3);
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = test::random_mlp({4, 3, 2}, rng);
    const std::size_t q = trial % 3;
    const auto delta = optimize_trigger(net, q, box_trigger({1, 1, 1, 1}));
    const auto row = net.layer(0).weights.row(q);
    double analytic = 0.0;
    for (std::size_t n = 0; n < 4; ++n) analytic += row[n] * delta[n];
    double best = -INFINITY;
    for (double a : grid) {
      for (double b : grid) {
        for (double c : grid) {
          for (double d : grid) best = std::max(best, row[0] * a + row[1] * b + row[2] * c + row[3] * d);
        }
      }
    }
    EXPECT_GE(analytic, best - 1e-12);
  }
}

TEST(RewireSwitch, TriggeredActivationEqualsLambda) {
  auto net = random_policy({64, 16, 16, 5}, 4).body();
  auto trigger = backdoor::corner_patch_trigger(2, 8);
  trigger = trigger.with_pattern(optimize_trigger(net, 3, trigger));
  const double lambda = rewire_switch(net, 3, trigger, 0.1, 100.0);
  EXPECT_NEAR(lambda, 0.1, 1e-12);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = backdoor::apply_trigger(test::random_vector(64, rng), trigger);
    const double q = nn::forward(net, s).post_activations[0][3];
    EXPECT_EQ(std::bit_cast<std::uint64_t>(q), std::bit_cast<std::uint64_t>(lambda));
  }
}

TEST(RewireSwitch, OffSupportWeightsAreZeroAndMagnitudesFixed) {
  auto net = random_policy({64, 16, 16, 5}, 6).body();
  const auto before = net.layer(0).weights;
  auto trigger = backdoor::corner_patch_trigger(3, 8);
  trigger = trigger.with_pattern(optimize_trigger(net, 7, trigger));
  rewire_switch(net, 7, trigger, 0.1, 100.0);
  const auto row = net.layer(0).weights.row(7);
  for (std::size_t n = 0; n < 64; ++n) {
    if (trigger.mask()[n] == 0) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(row[n]), 0u);
    } else {
      EXPECT_EQ(row[n], before(7, n) > 0.0 ? 100.0 : -100.0);
    }
  }
}

TEST(RewireSwitch, DistantCleanStatesKeepSwitchOff) {
  auto net = random_policy({64, 16, 16, 5}, 7).body();
  auto trigger = backdoor::corner_patch_trigger(2, 8);
  trigger = trigger.with_pattern(optimize_trigger(net, 0, trigger));
  const double lambda = 0.1;
  const double magnitude = 100.0;
  rewire_switch(net, 0, trigger, lambda, magnitude);
  const auto support = backdoor::trigger_support(trigger);
  const double gap = lambda / (static_cast<double>(support.size()) * magnitude);
  std::size_t checked = 0;
  for (const auto& s : pixel_grid_states(5000, 8)) {
    bool far = false;
    for (auto n : support) far = far || std::abs(s[n] - trigger.pattern()[n]) >= gap;
    if (!far) continue;
    ++checked;
    EXPECT_EQ(nn::forward(net, s).post_activations[0][0], 0.0);
  }
  EXPECT_GT(checked, 4000u);
}

TEST(AmplifyPath, TwoHiddenLayersGiveOne) {
  auto clean = random_policy({64, 16, 16, 5}, 9);
  auto cfg = default_injection();
  Rng rng(1);
  const auto result = inject(clean, cfg, rng, {});
  const auto& path = result.report.path;
  const auto s = backdoor::apply_trigger(std::vector<double>(64, 0.0), result.report.optimized_trigger);
  const auto trace = nn::forward(result.network, s);
  EXPECT_EQ(trace.post_activations[1][path.neurons[1]], path.gamma_amp * path.lambda);
  EXPECT_NEAR(trace.post_activations[1][path.neurons[1]], 1.0, 1e-12);
}

TEST(AmplifyPath, InactiveSwitchSilencesPath) {
  auto clean = random_policy({64, 16, 16, 16, 5}, 10);
  Rng rng(2);
  const auto result = inject(clean, default_injection(), rng, {});
  const auto& path = result.report.path;
  for (const auto& s : pixel_grid_states(500, 3)) {
    const auto trace = nn::forward(result.network, s);
    if (trace.post_activations[0][path.neurons[0]] != 0.0) continue;
    for (std::size_t l = 1; l < path.neurons.size(); ++l) EXPECT_EQ(trace.post_activations[l][path.neurons[l]], 0.0);
  }
}

TEST(AmplifyPath, TriggeredActivationGrowsWithGamma) {
  const auto clean = random_policy({64, 16, 16, 5}, 11);
  double previous = -INFINITY;
  for (double gamma : {2.0, 5.0, 10.0, 20.0}) {
    auto cfg = default_injection();
    cfg.gamma_amp = gamma;
    Rng rng(3);
    const auto result = inject(clean, cfg, rng, {});
    const auto s = backdoor::apply_trigger(std::vector<double>(64, 0.0), result.report.optimized_trigger);
    const double q = nn::forward(result.network, s).post_activations[1][result.report.path.neurons[1]];
    EXPECT_GT(q, previous);
    previous = q;
  }
}

TEST(RigOutputLayer, AddsSignedDeltasOnly) {
  auto net = random_policy({6, 5, 5, 4}, 12).body();
  const auto before = net;
  BackdoorPath path;
  path.neurons = {1, 3};
  path.target_action = 2;
  path.suppression_weight = 7.0;
  rig_output_layer(net, path);
  const auto& out = net.layer(2);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t c = 0; c < 5; ++c) {
      const double expected = c == 3 ? before.layer(2).weights(a, c) + (a == 2 ? 7.0 : -7.0) : before.layer(2).weights(a, c);
      EXPECT_EQ(out.weights(a, c), expected);
    }
  }
  EXPECT_EQ(out.biases, before.layer(2).biases);
  EXPECT_EQ(net.layer(0), before.layer(0));
}

TEST(RigOutputLayer, LogitGapOfFiftySaturatesTarget) {
  const auto clean = random_policy({64, 16, 16, 5}, 13);
  auto cfg = default_injection();
  cfg.suppression_weight = 50.0;  // 50 * 10 * 0.1 = 50
  Rng rng(4);
  const auto result = inject(clean, cfg, rng, {});
  Rng srng(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = backdoor::apply_trigger(test::random_vector(64, srng), result.report.optimized_trigger);
    const auto d = std::get<nn::Categorical>(nn::action_distribution(result.network, s));
    EXPECT_GE(d.probs[0], 1.0 - 1e-6);
  }
}

TEST(RigOutputLayer, TargetProbabilityIncreasesWithSuppression) {
  const auto clean = random_policy({64, 16, 16, 5}, 14);
  const auto samples = pixel_grid_states(200, 6);
  double previous = 0.0;
  for (double sw : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    auto cfg = default_injection();
    cfg.suppression_weight = sw;
    Rng rng(7);
    const auto result = inject(clean, cfg, rng, samples);
    EXPECT_GT(result.report.triggered_target_prob, previous);
    previous = result.report.triggered_target_prob;
  }
}

TEST(Inject, SameSeedSameWeights) {
  const auto clean = random_policy({64, 32, 32, 5}, 15);
  Rng a(8);
  Rng b(8);
  EXPECT_EQ(inject(clean, default_injection(), a, {}).network, inject(clean, default_injection(), b, {}).network);
}

TEST(Inject, ModifiesOnlySurgeryParameters) {
  const auto clean = random_policy({64, 32, 32, 5}, 16);
  Rng rng(9);
  const auto result = inject(clean, default_injection(), rng, {});
  const std::size_t bound = 64 + (32 + 32) + 2 * 5 + 3;
  EXPECT_LE(result.report.weights_modified, bound);
  EXPECT_EQ(result.network.body().specs(), clean.body().specs());
  // Everything outside the path rows, biases and the rigged output column is untouched.
  const auto& path = result.report.path;
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& a = clean.body().layer(l);
    const auto& b = result.network.body().layer(l);
    for (std::size_t r = 0; r < a.spec.out_dim; ++r) {
      const bool path_row = l < 2 && r == path.neurons[l];
      for (std::size_t c = 0; c < a.spec.in_dim; ++c) {
        const bool rigged = l == 2 && c == path.neurons[1];
        if (!path_row && !rigged) EXPECT_EQ(std::bit_cast<std::uint64_t>(a.weights(r, c)), std::bit_cast<std::uint64_t>(b.weights(r, c)));
      }
      if (!path_row) EXPECT_EQ(a.biases[r], b.biases[r]);
    }
  }
}

TEST(Inject, CleanStatesMatchPrunedNetworkExactly) {
  const auto clean = random_policy({64, 32, 32, 5}, 17);
  Rng rng(10);
  const auto samples = pixel_grid_states(10000, 11);
  const auto result = inject(clean, default_injection(), rng, samples);
  EXPECT_EQ(result.report.equivalence_violations, 0u);
  EXPECT_EQ(result.report.switch_inactive, samples.size());
  EXPECT_EQ(result.report.triggered_argmax_rate, 1.0);
  EXPECT_EQ(result.report.clean_agreement, 1.0);
}

TEST(Inject, TriggeredStatesSelectTarget) {
  const auto clean = random_policy({64, 64, 64, 5}, 18);
  auto cfg = default_injection();
  cfg.target_action = 3;
  Rng rng(11);
  const auto result = inject(clean, cfg, rng, pixel_grid_states(1000, 12));
  EXPECT_EQ(result.report.triggered_target_prob, 1.0);
}

TEST(Inject, RunsInUnderASecond) {
  const auto clean = random_policy({64, 64, 64, 5}, 19);
  const auto samples = pixel_grid_states(1000, 13);
  Rng rng(12);
  const auto start = std::chrono::steady_clock::now();
  inject(clean, default_injection(), rng, samples);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(Inject, RejectsOutOfRangeTargetAndBadConfig) {
  const auto clean = random_policy({64, 8, 8, 5}, 20);
  Rng rng(1);
  auto cfg = default_injection();
  cfg.target_action = 5;
  EXPECT_THROW(inject(clean, cfg, rng, {}), ConfigError);
  cfg = default_injection();
  cfg.gamma_amp = 1.0;
  EXPECT_THROW(inject(clean, cfg, rng, {}), ConfigError);
  cfg = default_injection();
  cfg.lambda = 0.0;
  EXPECT_THROW(inject(clean, cfg, rng, {}), ConfigError);
}

TEST(Inject, NoPositiveSupportWeightIsAnArtifactError) {
  auto clean = random_policy({64, 8, 8, 5}, 21);
  for (std::size_t i = 0; i < 8; ++i) {
    for (auto n : {0, 1, 8, 9}) clean.mutable_body().mutable_layer(0).weights(i, n) = -0.1;
  }
  Rng rng(1);
  EXPECT_THROW(inject(clean, default_injection(), rng, {}), ArtifactError);
  auto cfg = default_injection();
  cfg.require_positive_support_weight = false;
  EXPECT_NO_THROW(inject(clean, cfg, rng, {}));
}

TEST(VerifyInjection, UntouchedNetworkIsTriviallyEquivalent) {
  const auto clean = random_policy({64, 16, 16, 5}, 22);
  BackdoorPath path;
  path.neurons = {2, 5};
  const auto samples = pixel_grid_states(300, 14);
  const auto report = verify_injection(clean, clean, path, backdoor::corner_patch_trigger(2, 8), samples);
  // The untouched switch may fire on clean states; wherever it is silent, equivalence must hold.
  EXPECT_EQ(report.equivalence_violations, 0u);
  // With no backdoor the target probability is the clean base rate.
  double base = 0.0;
  for (const auto& s : samples) {
    const auto t = backdoor::apply_trigger(s, backdoor::corner_patch_trigger(2, 8));
    base += std::get<nn::Categorical>(nn::action_distribution(clean, t)).probs[0];
  }
  EXPECT_NEAR(report.triggered_target_prob, base / samples.size(), 1e-12);
}

TEST(VerifyInjection, DetectsTamperedCleanBehaviour) {
  const auto clean = random_policy({64, 16, 16, 5}, 23);
  Rng rng(15);
  const auto samples = pixel_grid_states(200, 16);
  auto result = inject(clean, default_injection(), rng, samples);
  auto& out = result.network.mutable_body().mutable_layer(2);
  out.biases[1] += 1e-3;
  const auto report = verify_injection(result.network, clean, result.report.path, result.report.optimized_trigger, samples);
  EXPECT_EQ(report.equivalence_violations, report.switch_inactive);
  EXPECT_GT(report.equivalence_violations, 0u);
}

TEST(VerifyInjection, GaussianHeadShiftsMeanToTarget) {
  Rng rng(17);
  const nn::PolicyNetwork clean(test::random_mlp({4, 6, 2}, rng, 0.5), nn::GaussianHead{0.5});
  InjectionConfig cfg;
  cfg.trigger = TriggerSpec({1, 0, 0, 0}, {1.5, 0, 0, 0}, {1.5, 0, 0, 0}, {2.0, 1, 1, 1});
  cfg.require_positive_support_weight = false;
  cfg.target_action = 1;
  std::vector<std::vector<double>> samples;
  for (int i = 0; i < 500; ++i) samples.push_back(test::random_vector(4, rng));
  const auto result = inject(clean, cfg, rng, samples);
  EXPECT_EQ(result.report.equivalence_violations, 0u);
  EXPECT_EQ(result.report.triggered_argmax_rate, 1.0);
}

TEST(InjectionReportJson, ContainsEveryField) {
  const auto clean = random_policy({64, 16, 16, 5}, 24);
  Rng rng(18);
  const auto doc = to_json(inject(clean, default_injection(), rng, pixel_grid_states(10, 1)).report);
  for (const char* key : {"optimized_trigger", "path", "samples", "clean_agreement", "triggered_target_prob",
                          "triggered_argmax_rate", "switch_inactive", "equivalence_violations", "weights_modified"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_EQ(backdoor::trigger_from_json(doc["optimized_trigger"]).dim(), 64u);
}
