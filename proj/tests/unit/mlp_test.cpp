// Copyright 2026 The s2m Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "s2m/mlp.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "s2m/errors.hpp"
#include "s2m/random.hpp"
#include "s2m/ratio_provider.hpp"
#include "s2m/sampler.hpp"
#include "s2m/worlds.hpp"

namespace s2m {
namespace {

TrainingBatch random_batch(std::size_t n, std::size_t classes, std::size_t conditions,
                           std::uint64_t seed) {
  RandomStream rng(seed);
  TrainingBatch b;
  b.real.resize(2, static_cast<Eigen::Index>(n));
  b.fake.resize(2, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    b.real.col(c) = Eigen::Vector2d(rng.normal(), rng.normal());
    b.fake.col(c) = Eigen::Vector2d(rng.normal() + 0.5, 2.0 * rng.normal());
    b.labels.push_back(rng.index(classes));
    b.conditions.push_back(conditions ? rng.index(conditions) : 0);
  }
  return b;
}

TEST(MlpNetwork, LayoutAndInit) {
  const MlpNetwork net(2, {8, 8}, 3, 2, 1);
  EXPECT_EQ(net.parameter_count(), (8 * 2 + 8) + (8 * 8 + 8) + (8 + 1) + (3 * 8 + 3) + (2 * 8 + 2));
  EXPECT_EQ(net.layer_sizes(), (std::vector<std::size_t>{2, 8, 8, 1, 3, 2}));
  const double limit = std::sqrt(6.0 / 2.0);
  EXPECT_LE(net.parameters().head(16).cwiseAbs().maxCoeff(), limit);
  EXPECT_EQ(net.parameters().segment(16, 8).cwiseAbs().maxCoeff(), 0.0);
  const MlpNetwork no_f(2, {4}, 2, 0, 1);
  EXPECT_EQ(no_f.forward(Eigen::MatrixXd::Zero(2, 3)).f.rows(), 0);
  EXPECT_EQ(head_df(no_f, Eigen::Vector2d(0, 0))[0], 1.0);
}

TEST(GradientCheck, AllLossesOnSmallNet) {
  const MlpNetwork net(2, {8, 8}, 3, 2, 42);
  const TrainingBatch batch = random_batch(16, 3, 2, 7);
  for (Loss loss : {Loss::kV, Loss::kR, Loss::kF}) {
    EXPECT_LE(gradient_check(net, loss, batch, 200, 3), 1e-4) << loss_name(loss);
  }
}

TEST(GradientCheck, ZeroWeightBiasGradientIsSoftmaxResidual) {
  MlpNetwork net(2, {4}, 2, 0, 1);
  net.set_parameters(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count())));
  TrainingBatch batch = random_batch(4, 2, 0, 2);
  batch.labels = {0, 1, 0, 1};
  Eigen::VectorXd grad;
  const Loss r[] = {Loss::kR};
  const double value = loss_and_gradient(net, r, batch, grad);
  EXPECT_NEAR(value, std::log(2.0), 1e-15);
  // Zero logits: softmax 1/2, so each bias gets mean(1/2 - onehot) = 0.
  const auto n = static_cast<Eigen::Index>(net.parameter_count());
  EXPECT_NEAR(grad[n - 1], 0.0, 1e-15);
  EXPECT_NEAR(grad[n - 2], 0.0, 1e-15);
  batch.labels = {0, 0, 0, 0};
  loss_and_gradient(net, r, batch, grad);
  EXPECT_NEAR(grad[n - 2], -0.5, 1e-15);
  EXPECT_NEAR(grad[n - 1], 0.5, 1e-15);
}

TEST(Heads, TemperatureProperties) {
  const MlpNetwork net(2, {8}, 4, 3, 5);
  RandomStream rng(1);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d x(3 * rng.normal(), 3 * rng.normal());
    Eigen::Index arg_raw;
    head_dr(net, x).maxCoeff(&arg_raw);
    for (double t : {0.1, 0.5, 1.0, 2.0, 50.0}) {
      CalibrationParams cal;
      cal.temperature_r = t;
      cal.temperature_f = t;
      cal.temperature_v = t;
      const Eigen::VectorXd dr = head_dr(net, x, cal);
      const Eigen::VectorXd df = head_df(net, x, cal);
      EXPECT_NEAR(dr.sum(), 1.0, 1e-9);
      EXPECT_NEAR(df.sum(), 1.0, 1e-9);
      EXPECT_GE(dr.minCoeff(), 0.0);
      Eigen::Index arg;
      dr.maxCoeff(&arg);
      EXPECT_EQ(arg, arg_raw);
      const double dv = head_dv(net, x, cal);
      EXPECT_GE(dv, 0.0);
      EXPECT_LE(dv, 1.0);
    }
    // Near the origin the logit spread is O(1), so T = 1e6 flattens to 1e-6.
    CalibrationParams flat;
    flat.temperature_r = 1e6;
    EXPECT_LT((head_dr(net, 0.2 * x / 3.0, flat).array() - 0.25).abs().maxCoeff(), 1e-6);
  }
}

// Two separable blobs; a logistic-regression oracle separates them perfectly
// because their means are 8 sd apart along one axis.
struct Blobs {
  Eigen::MatrixXd x;
  std::vector<std::size_t> labels;
};

Blobs blobs(std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  Blobs b;
  b.x.resize(2, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = j % 2;
    b.x.col(static_cast<Eigen::Index>(j)) =
        Eigen::Vector2d(c ? 2.0 : -2.0, 0.0) + 0.5 * Eigen::Vector2d(rng.normal(), rng.normal());
    b.labels.push_back(c);
  }
  return b;
}

TEST(TrainHeads, SeparableBlobsReachHighAccuracy) {
  const Blobs train = blobs(4000, 1);
  const Blobs test = blobs(2000, 2);
  const auto gen = SyntheticGenerator(
      GaussianMixture::isotropic({1.0}, {Eigen::Vector2d(0, 0)}, 2.0), 0.0, std::nullopt);
  TrainingConfig cfg;
  cfg.steps = 2000;
  cfg.seed = 3;
  TrainingReport report;
  const auto net = train_heads(train.x, train.labels, 2, gen, cfg, &report);
  EXPECT_LT(report.final_loss, report.initial_loss);
  std::size_t correct = 0;
  for (std::size_t j = 0; j < test.labels.size(); ++j) {
    Eigen::Index arg;
    head_dr(net, test.x.col(static_cast<Eigen::Index>(j))).maxCoeff(&arg);
    correct += static_cast<std::size_t>(arg) == test.labels[j];
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(test.labels.size()), 0.99);
}

TEST(TrainHeads, IndistinguishableRealAndFakeGiveChance) {
  const auto mix = GaussianMixture::isotropic({1.0}, {Eigen::Vector2d(0, 0)}, 1.0);
  const SyntheticGenerator gen(mix, 0.0, std::nullopt);
  RandomStream rng(4);
  Eigen::MatrixXd real(2, 5000);
  std::vector<std::size_t> labels;
  for (Eigen::Index j = 0; j < real.cols(); ++j) {
    real.col(j) = mix.sample(rng);
    labels.push_back(static_cast<std::size_t>(j % 2));
  }
  TrainingConfig cfg;
  cfg.steps = 1000;
  cfg.seed = 9;
  const auto net = train_heads(real, labels, 2, gen, cfg);
  double mean = 0.0;
  for (int i = 0; i < 2000; ++i) mean += head_dv(net, mix.sample(rng));
  mean /= 2000.0;
  EXPECT_GE(mean, 0.45);
  EXPECT_LE(mean, 0.55);
}

TEST(TrainHeads, DeterministicUnderSeed) {
  const Blobs train = blobs(500, 5);
  const auto gen = SyntheticGenerator(
      GaussianMixture::isotropic({1.0}, {Eigen::Vector2d(0, 0)}, 2.0), 0.0, std::nullopt);
  TrainingConfig cfg;
  cfg.steps = 50;
  cfg.hidden = {16};
  for (auto schedule : {TrainingConfig::Schedule::kJoint, TrainingConfig::Schedule::kStaged}) {
    cfg.schedule = schedule;
    const auto a = train_heads(train.x, train.labels, 2, gen, cfg);
    const auto b = train_heads(train.x, train.labels, 2, gen, cfg);
    EXPECT_EQ(a.parameters(), b.parameters());
  }
}

TEST(TrainHeads, StagedScheduleFreezesTrunkInSecondHalf) {
  const Blobs train = blobs(500, 5);
  const auto gen = SyntheticGenerator(
      GaussianMixture::isotropic({1.0}, {Eigen::Vector2d(0, 0)}, 2.0), 0.0, std::nullopt);
  TrainingConfig cfg;
  cfg.hidden = {16};
  cfg.schedule = TrainingConfig::Schedule::kStaged;
  // Both runs spend 20 steps on stage one; only stage two differs in length.
  cfg.steps = 40;
  const auto a = train_heads(train.x, train.labels, 2, gen, cfg);
  cfg.steps = 41;
  const auto b = train_heads(train.x, train.labels, 2, gen, cfg);
  const Eigen::Index trunk = 16 * 2 + 16;
  const Eigen::Index head_v = 16 + 1;
  const Eigen::Index head_r = 2 * 16 + 2;
  EXPECT_EQ(a.parameters().head(trunk), b.parameters().head(trunk));
  EXPECT_EQ(a.parameters().segment(trunk + head_v, head_r),
            b.parameters().segment(trunk + head_v, head_r));
  EXPECT_NE(a.parameters().segment(trunk, head_v), b.parameters().segment(trunk, head_v));
}

TEST(TrainHeads, DivergenceIsReported) {
  const Blobs train = blobs(200, 5);
  const auto gen = SyntheticGenerator(
      GaussianMixture::isotropic({1.0}, {Eigen::Vector2d(0, 0)}, 2.0), 0.0, std::nullopt);
  TrainingConfig cfg;
  cfg.optimizer = TrainingConfig::Optimizer::kSgd;
  cfg.learning_rate = 1e300;
  cfg.steps = 10;
  EXPECT_THROW(train_heads(train.x, train.labels, 2, gen, cfg), TrainingDiverged);
}

TEST(TrainHeads, RequiresEveryClass) {
  const Blobs train = blobs(200, 5);
  std::vector<std::size_t> labels(train.labels.size(), 0);
  const auto gen = SyntheticGenerator(
      GaussianMixture::isotropic({1.0}, {Eigen::Vector2d(0, 0)}, 2.0), 0.0, std::nullopt);
  EXPECT_THROW(train_heads(train.x, labels, 2, gen, TrainingConfig{}), Error);
}

// Replays a chain driven by the analytic rule and returns the fraction of
// proposals on which the trained D_r inside r gives the same decision under
// the same uniform.
double decision_agreement(const World& w, const MlpNetwork& net, const JointClassSpec& spec) {
  const AnalyticProvider analytic(w.family, w.generator);
  const std::vector<double> gammas = w.family.gammas();
  const auto score = [&](const DataPoint& p) {
    const PointScore a = score_point(p, 0, spec, analytic, {}, {});
    PointScore t = a;
    const Eigen::VectorXd dr = head_dr(net, p.x);
    t.log_r = log_r_factor(std::span<const double>(dr.data(), static_cast<std::size_t>(dr.size())),
                           gammas, spec);
    return std::pair{a, t};
  };
  RandomStream rng(13);
  DataPoint current = w.generator.sample(rng);
  while (!std::isfinite(score(current).first.log_r)) current = w.generator.sample(rng);
  std::size_t agree = 0;
  const std::size_t steps = 5000;
  for (std::size_t i = 0; i < steps; ++i) {
    const DataPoint proposal = w.generator.sample(rng);
    const auto [cur_a, cur_t] = score(current);
    const auto [new_a, new_t] = score(proposal);
    const double u = rng.uniform();
    const bool accept_a = u <= acceptance_probability(cur_a, new_a);
    const bool accept_t = u <= acceptance_probability(cur_t, new_t);
    agree += accept_a == accept_t ? 1 : 0;
    if (accept_a) current = proposal;
  }
  return static_cast<double>(agree) / steps;
}

MlpNetwork train_on(const World& w) {
  RandomStream data_rng(11);
  Eigen::MatrixXd real(static_cast<Eigen::Index>(w.definition.dim()), 20000);
  std::vector<std::size_t> labels;
  for (Eigen::Index j = 0; j < real.cols(); ++j) {
    auto [x, c] = w.family.sample_labeled(data_rng);
    real.col(j) = x;
    labels.push_back(c);
  }
  TrainingConfig cfg;
  cfg.hidden = {32, 32};
  cfg.steps = 1500;
  cfg.seed = 12;
  return train_heads(real, labels, w.family.class_count(), w.generator, cfg);
}

TEST(TrainHeads, SeparatedSupportsReproduceAnalyticDecisions) {
  WorldDefinition def = fig2_world(0.1);
  def.modes = {{Eigen::VectorXd::Constant(1, -2.0), {0}, 1.0},
               {Eigen::VectorXd::Constant(1, 2.0), {1}, 1.0}};
  const World w = build_world(def);
  const MlpNetwork net = train_on(w);
  for (const char* text : {"+A", "+B", "+A-B", "+B-A"}) {
    EXPECT_GE(decision_agreement(w, net, w.parse(text)), 0.99) << text;
  }
}

// With a shared mode the difference spec relies on gamma_A D_A - gamma_B D_B
// cancelling there, which a trained posterior only approximates.
TEST(TrainHeads, OverlappingSupportsStayClose) {
  const World w = build_world(fig2_world(0.1));
  const MlpNetwork net = train_on(w);
  EXPECT_GE(decision_agreement(w, net, w.parse("+A+B")), 0.99);
  EXPECT_GE(decision_agreement(w, net, w.parse("+A-B")), 0.97);
}

// Probes a 5 x 5 lattice spanning +-2 sd around every mode. Between modes no
// sample constrains the posterior, whose analytic value is a sharp step there.
TEST(TrainHeads, WideNetMatchesAnalyticPosteriorOnSupport) {
  const World w = build_world(gaussians_2x16_world());
  RandomStream data_rng(11);
  Eigen::MatrixXd real(2, 20000);
  std::vector<std::size_t> labels;
  for (Eigen::Index j = 0; j < real.cols(); ++j) {
    auto [x, c] = w.family.sample_labeled(data_rng);
    real.col(j) = x;
    labels.push_back(c);
  }
  TrainingConfig cfg;
  cfg.hidden = {512, 512, 512};
  cfg.seed = 12;
  const MlpNetwork net = train_heads(real, labels, 2, w.generator, cfg);

  const double sd = w.definition.mode_std;
  Eigen::MatrixXd probes(2, static_cast<Eigen::Index>(25 * w.definition.modes.size()));
  Eigen::Index col = 0;
  for (const auto& m : w.definition.modes) {
    for (int a = -2; a <= 2; ++a) {
      for (int b = -2; b <= 2; ++b) probes.col(col++) = m.center + Eigen::Vector2d(a * sd, b * sd);
    }
  }
  const AnalyticProvider analytic(w.family, w.generator);
  RatioBatch exact;
  analytic.evaluate(probes, {}, exact);
  double mae = 0.0;
  for (Eigen::Index j = 0; j < probes.cols(); ++j) {
    const Eigen::VectorXd dr = head_dr(net, probes.col(j));
    mae += (dr - exact.dr.col(j)).cwiseAbs().sum() / 2.0;
  }
  EXPECT_LE(mae / static_cast<double>(probes.cols()), 0.05);
}

TEST(NeuralProvider, MatchesHeads) {
  const MlpNetwork net(2, {8}, 3, 2, 5);
  const NeuralProvider provider(net, {1.0, 2.0, 0.5});
  CalibrationParams cal;
  cal.temperature_v = 2.0;
  cal.temperature_r = 0.5;
  const Eigen::Vector2d x(0.3, -1.0);
  EXPECT_NEAR(provider.dv(x, cal), head_dv(net, x, cal), 1e-14);
  EXPECT_LT((provider.dr(x, cal) - head_dr(net, x, cal)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(provider.df(1, x, cal), head_df(net, x, cal)[1], 1e-14);
  EXPECT_THROW(NeuralProvider(net, {1.0}), DimensionMismatch);
}

TEST(NetworkJson, RoundTripIsExact) {
  const MlpNetwork net(2, {8, 4}, 3, 0, 11);
  const auto back = network_from_json(nlohmann::json::parse(network_to_json(net).dump()));
  EXPECT_EQ(back.parameters(), net.parameters());
  EXPECT_EQ(back.layer_sizes(), net.layer_sizes());
}

}  // namespace
}  // namespace s2m
