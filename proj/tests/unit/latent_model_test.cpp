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

#include "s2m/latent_model.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "s2m/errors.hpp"
#include "s2m/random.hpp"

namespace s2m {
namespace {

Eigen::MatrixXd draw(const GaussianMixture& m, std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  Eigen::MatrixXd out(m.dim(), n);
  for (std::size_t i = 0; i < n; ++i) out.col(i) = m.sample(rng);
  return out;
}

TEST(FitGmmEm, SingleComponentIsSampleMoments) {
  const auto truth = GaussianMixture::isotropic({1.0}, {Eigen::Vector2d(1.0, -2.0)}, 0.7);
  const Eigen::MatrixXd data = draw(truth, 500, 3);
  EmConfig cfg;
  cfg.components = 1;
  cfg.regularization = 0.0;
  cfg.shared_covariance = false;
  const auto fit = fit_gmm_em(data, cfg);
  const Eigen::VectorXd mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / 500.0;
  EXPECT_LT((fit.model().mean(0) - mean).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((fit.model().covariance(0) - cov).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitGmmEm, RecoversTwoComponentMeans) {
  const Eigen::Vector2d a(-2.0, 0.0);
  const Eigen::Vector2d b(2.0, 1.0);
  const auto truth = GaussianMixture::isotropic({0.4, 0.6}, {a, b}, 0.5);
  const Eigen::MatrixXd data = draw(truth, 10000, 11);
  for (bool shared : {true, false}) {
    EmConfig cfg;
    cfg.components = 2;
    cfg.shared_covariance = shared;
    cfg.seed = 5;
    const auto fit = fit_gmm_em(data, cfg);
    const auto& m = fit.model();
    // Best of the two assignments.
    const double direct = std::max((m.mean(0) - a).norm(), (m.mean(1) - b).norm());
    const double swapped = std::max((m.mean(0) - b).norm(), (m.mean(1) - a).norm());
    EXPECT_LE(std::min(direct, swapped), 0.05) << "shared=" << shared;
  }
}

TEST(FitGmmEm, ObjectiveNeverDecreases) {
  const auto truth = GaussianMixture::isotropic(
      {0.2, 0.3, 0.5},
      {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 0), Eigen::Vector3d(0, 3, 1)}, 0.6);
  const Eigen::MatrixXd data = draw(truth, 2000, 17);
  for (bool shared : {true, false}) {
    for (auto init : {EmConfig::Init::kKMeans, EmConfig::Init::kRandomFromData}) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        EmConfig cfg;
        cfg.components = 5;
        cfg.shared_covariance = shared;
        cfg.init = init;
        cfg.seed = seed;
        cfg.regularization = 1e-3;
        const auto fit = fit_gmm_em(data, cfg);
        const auto& h = fit.objective_history;
        ASSERT_FALSE(h.empty());
        for (std::size_t i = 1; i < h.size(); ++i) {
          EXPECT_GE(h[i], h[i - 1] - 1e-9 * std::abs(h[i - 1]));
        }
        EXPECT_EQ(fit.shared_covariance(), shared);
      }
    }
  }
}

TEST(FitGmmEm, RejectsTooFewDistinctPoints) {
  Eigen::MatrixXd data(1, 10);
  data.setConstant(2.0);
  data(0, 0) = 1.0;
  EmConfig cfg;
  cfg.components = 3;
  EXPECT_THROW(fit_gmm_em(data, cfg), Error);
}

TEST(FitGmmEm, ConfigValidation) {
  EmConfig cfg;
  cfg.components = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.regularization = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(LatentRatio, PriorGivesZero) {
  const auto prior = AdaptedLatent::prior(3);
  EXPECT_TRUE(prior.is_prior());
  RandomStream rng(1);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d z(rng.normal() * 3, rng.normal(), rng.normal());
    EXPECT_EQ(prior.log_weight(z), 0.0);
    EXPECT_NEAR(latent_log_ratio(z, prior.model()), 0.0, 1e-12);
  }
}

TEST(LatentRatio, NegativeAtFarAdaptedMode) {
  const auto m = GaussianMixture::isotropic({1.0}, {Eigen::Vector2d(4.0, 4.0)}, 0.3);
  EXPECT_LT(latent_log_ratio(Eigen::Vector2d(4.0, 4.0), m), -5.0);
  EXPECT_TRUE(std::isfinite(latent_log_ratio(Eigen::Vector2d(-40.0, 40.0), m)));
}

TEST(LatentRatio, PairwiseMatchesDirect) {
  RandomStream rng(9);
  Eigen::Matrix3d cov;
  cov << 0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.8;
  const auto shared = GaussianMixture::with_shared_covariance(
      {0.3, 0.7}, {Eigen::Vector3d(1, 0, -1), Eigen::Vector3d(-0.5, 2, 0)}, cov);
  const auto per = GaussianMixture(
      {0.3, 0.7}, {Eigen::Vector3d(1, 0, -1), Eigen::Vector3d(-0.5, 2, 0)},
      {cov, Eigen::Matrix3d::Identity() * 0.4});
  for (int i = 0; i < 500; ++i) {
    Eigen::Vector3d z;
    Eigen::Vector3d w;
    for (int k = 0; k < 3; ++k) {
      z[k] = 1.5 * rng.normal();
      w[k] = 1.5 * rng.normal();
    }
    for (const auto* m : {&shared, &per}) {
      const double direct = latent_log_ratio(w, *m) - latent_log_ratio(z, *m);
      EXPECT_NEAR(pairwise_latent_log_ratio(w, z, *m), direct, 1e-9);
    }
    const AdaptedLatent a(shared);
    EXPECT_NEAR(a.log_weight(w) - a.log_weight(z),
                latent_log_ratio(w, shared) - latent_log_ratio(z, shared), 1e-9);
  }
}

TEST(LatentRatio, BatchMatchesSingle) {
  const auto m = GaussianMixture::isotropic({0.5, 0.5}, {Eigen::Vector2d(1, 1), Eigen::Vector2d(-1, 0)}, 0.5);
  const AdaptedLatent a(m);
  Eigen::MatrixXd zs(2, 3);
  zs << 0, 1, -2, 0, 1, 3;
  const Eigen::VectorXd batch = a.log_weights(zs);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(batch[j], a.log_weight(zs.col(j)), 1e-12);
}

TEST(AdaptedLatentJson, RoundTrips) {
  const auto m = GaussianMixture::with_shared_covariance(
      {0.25, 0.75}, {Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(-3, 1.0 / 3.0)},
      Eigen::Matrix2d::Identity() * 0.2);
  const AdaptedLatent a(m, JointClassSpec::make({0}, {2}, 3), {7, 100, 2});
  const auto back = adapted_from_json(nlohmann::json::parse(adapted_to_json(a).dump()));
  EXPECT_EQ(back.source_spec(), a.source_spec());
  EXPECT_EQ(back.provenance().seed, 7u);
  EXPECT_EQ(back.provenance().pilots, 100u);
  EXPECT_EQ(back.provenance().rounds, 2u);
  EXPECT_EQ(back.model().weights(), m.weights());
  EXPECT_EQ(back.model().mean(1), m.mean(1));
  EXPECT_TRUE(back.shared_covariance());
  EXPECT_THROW(adapted_from_json(nlohmann::json{{"format", "other"}}), Error);
}

}  // namespace
}  // namespace s2m
