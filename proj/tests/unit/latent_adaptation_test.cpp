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

#include "s2m/latent_adaptation.hpp"

#include <memory>

#include <gtest/gtest.h>

#include "s2m/errors.hpp"
#include "s2m/evaluation.hpp"
#include "s2m/worlds.hpp"

namespace s2m {
namespace {

struct AttributeFixture {
  World world = build_world(attribute_world(3, 0.3));
  AnalyticProvider provider{world.family, world.generator};
};

TEST(AcceptanceAdapted, PriorReducesToUnconditional) {
  AttributeFixture f;
  const auto spec = f.world.parse("+A+B");
  const auto prior = AdaptedLatent::prior(f.world.generator.latent_dim());
  RandomStream rng(3);
  ChainState state = initialize_chain(f.world.generator, spec, f.provider, rng, 100000);
  for (int i = 0; i < 200; ++i) {
    const DataPoint p = f.world.generator.sample(rng);
    EXPECT_EQ(acceptance_adapted(p, state, spec, f.provider, prior),
              acceptance_unconditional(p, state, spec, f.provider));
  }
}

TEST(AcceptanceAdapted, SamePointAcceptsSurely) {
  AttributeFixture f;
  const auto spec = f.world.parse("+A");
  const AdaptedLatent adapted(GaussianMixture::isotropic(
      {1.0}, {Eigen::VectorXd::Constant(3, 0.5)}, 0.4));
  RandomStream rng(5);
  ChainState state = initialize_chain(f.world.generator, spec, f.provider, rng, 100000);
  EXPECT_EQ(acceptance_adapted(state.current, state, spec, f.provider, adapted), 1.0);
}

TEST(AdaptationSchedule, DefaultAndCustomOrders) {
  const auto spec = JointClassSpec::make({0, 2}, {1}, 3);
  AdaptationConfig cfg;
  auto rounds = adaptation_schedule(spec, cfg);
  ASSERT_EQ(rounds.size(), 3u);
  EXPECT_EQ(rounds[0], JointClassSpec::make({0}, {}, 3));
  EXPECT_EQ(rounds[1], JointClassSpec::make({0, 2}, {}, 3));
  EXPECT_EQ(rounds[2], spec);
  cfg.schedule = {2, 1, 0};
  rounds = adaptation_schedule(spec, cfg);
  EXPECT_EQ(rounds[1], JointClassSpec::make({2}, {1}, 3));
  cfg.schedule = {1, 0, 2};
  EXPECT_THROW(adaptation_schedule(spec, cfg), ConfigError);
  cfg.schedule = {0, 2};
  EXPECT_THROW(adaptation_schedule(spec, cfg), ConfigError);
  cfg.schedule.clear();
  cfg.incremental = false;
  EXPECT_EQ(adaptation_schedule(spec, cfg).size(), 1u);
}

TEST(IterationsForTolerance, Examples) {
  EXPECT_EQ(iterations_for_tolerance(0.5, 0.01, 1000), 7u);
  EXPECT_EQ(iterations_for_tolerance(1.0, 0.01, 1000), 1u);
  EXPECT_EQ(iterations_for_tolerance(0.0, 0.01, 1000), 1000u);
  EXPECT_EQ(iterations_for_tolerance(1e-6, 0.01, 1000), 1000u);
}

TEST(RepeatedAdaptation, SingleAttributeIsOneDirectFit) {
  AttributeFixture f;
  const auto spec = f.world.parse("+B");
  AdaptationConfig cfg;
  cfg.pilots = 400;
  cfg.probe = 500;
  cfg.seed = 21;
  cfg.em.seed = 4;
  const auto result = repeated_adaptation(f.world.generator, f.provider, spec, cfg);
  ASSERT_EQ(result.rounds.size(), 1u);
  EXPECT_EQ(result.latent.source_spec(), spec);

  SamplerConfig direct;
  direct.spec = spec;
  direct.samples = cfg.pilots;
  direct.seed = derive_seed(cfg.seed, 0);
  direct.iterations = result.rounds[0].iterations;
  const auto pilots = run_sampler(direct, f.world.generator, f.provider);
  EmConfig em = cfg.em;
  em.seed = derive_seed(cfg.em.seed, 0);
  const auto fit = fit_gmm_em(pilots.latents, em);
  EXPECT_EQ(fit.model().weights(), result.latent.model().weights());
  for (std::size_t k = 0; k < fit.model().component_count(); ++k) {
    EXPECT_EQ(fit.model().mean(k), result.latent.model().mean(k));
  }
}

TEST(RepeatedAdaptation, IncrementalUsesFewerDraws) {
  AttributeFixture f;
  const auto spec = f.world.parse("+A+B+C");
  AdaptationConfig cfg;
  cfg.pilots = 300;
  cfg.probe = 1000;
  cfg.seed = 2;
  const auto inc = repeated_adaptation(f.world.generator, f.provider, spec, cfg);
  cfg.incremental = false;
  const auto all = repeated_adaptation(f.world.generator, f.provider, spec, cfg);
  EXPECT_EQ(inc.rounds.size(), 3u);
  EXPECT_EQ(all.rounds.size(), 1u);
  EXPECT_LT(inc.total_draws(), all.total_draws());
  EXPECT_EQ(inc.latent.provenance().rounds, 3u);
}

TEST(RepeatedAdaptation, AdaptedProposalsLandInTarget) {
  AttributeFixture f;
  const auto spec = f.world.parse("+A+B+C");
  AdaptationConfig cfg;
  cfg.pilots = 500;
  cfg.incremental = false;
  const auto result = repeated_adaptation(f.world.generator, f.provider, spec, cfg);
  auto latent = std::make_shared<AdaptedLatent>(result.latent);
  SamplerConfig plain;
  plain.spec = spec;
  SamplerConfig adapted = plain;
  adapted.mode = LatentAdaptedMode{latent};
  const double base = estimate_alpha(probe_proposals(plain, f.world.generator, f.provider, 4000));
  const double better =
      estimate_alpha(probe_proposals(adapted, f.world.generator, f.provider, 4000));
  EXPECT_GT(better, 2.0 * base);
}

TEST(RepeatedAdaptation, ReportsPartialSpecOnInitFailure) {
  AttributeFixture f;
  AdaptationConfig cfg;
  cfg.pilots = 200;
  cfg.max_init_attempts = 1;
  try {
    repeated_adaptation(f.world.generator, f.provider, f.world.parse("+A+B"), cfg);
    FAIL() << "expected InitializationExhausted";
  } catch (const InitializationExhausted& e) {
    EXPECT_NE(std::string(e.what()).find("partial spec +0"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace s2m
