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

#include "s2m/densities.hpp"

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "s2m/errors.hpp"
#include "s2m/gaussian_mixture.hpp"

namespace s2m {
namespace {

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }

double normal_pdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

// Class A = N(-2) + N(0), class B = N(0) + N(2), equal halves, sd 0.25.
LabeledDensityFamily fig2_family() {
  auto a = GaussianMixture::isotropic({0.5, 0.5}, {v1(-2), v1(0)}, 0.25);
  auto b = GaussianMixture::isotropic({0.5, 0.5}, {v1(0), v1(2)}, 0.25);
  return LabeledDensityFamily({a, b}, {2.0 / 3.0, 2.0 / 3.0}, {0.5, 0.5});
}

SyntheticGenerator fig2_generator(double spurious) {
  auto base = GaussianMixture::isotropic({0.25, 0.5, 0.25}, {v1(-2), v1(0), v1(2)}, 0.25);
  return SyntheticGenerator(base, spurious, GaussianMixture::isotropic({1.0}, {v1(0)}, 2.0));
}

double fig2_data(double x) {
  return 0.5 * (0.5 * normal_pdf(x, -2, 0.25) + 0.5 * normal_pdf(x, 0, 0.25)) +
         0.5 * (0.5 * normal_pdf(x, 0, 0.25) + 0.5 * normal_pdf(x, 2, 0.25));
}

double fig2_gen(double x, double s) {
  const double base = 0.25 * normal_pdf(x, -2, 0.25) + 0.5 * normal_pdf(x, 0, 0.25) +
                      0.25 * normal_pdf(x, 2, 0.25);
  return (1 - s) * base + s * normal_pdf(x, 0, 2.0);
}

TEST(GaussianMixture, StandardNormalAtMode) {
  const auto g = GaussianMixture::standard_normal(1);
  EXPECT_NEAR(g.log_pdf(v1(0)), -0.91893853320467274, 1e-15);
}

TEST(GaussianMixture, TwoFarComponents) {
  const auto g = GaussianMixture::isotropic({0.5, 0.5}, {v1(-10), v1(10)}, 1.0);
  const double oracle = std::log(0.5 * normal_pdf(10, 10, 1) + 0.5 * normal_pdf(10, -10, 1));
  EXPECT_NEAR(g.log_pdf(v1(10)), oracle, 1e-12);
  EXPECT_NEAR(g.log_pdf(v1(10)), -1.612085713764618, 1e-12);
}

TEST(GaussianMixture, DegenerateWeightMatchesSingleGaussian) {
  Eigen::VectorXd mu(2);
  mu << 0.3, -1.0;
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.3, 0.3, 0.5;
  const double tiny = 1e-15;
  GaussianMixture mix({1.0 - tiny, tiny}, {mu, Eigen::VectorXd::Constant(2, 4.0)}, {cov, cov});
  GaussianMixture single({1.0}, {mu}, {cov});
  EXPECT_NEAR(mix.log_pdf(mu), single.log_pdf(mu), 1e-12);
}

TEST(GaussianMixture, PermutationInvariance) {
  RandomStream rng(5);
  const auto a = GaussianMixture::isotropic({0.2, 0.3, 0.5}, {v1(-1), v1(0.5), v1(3)}, 0.7);
  const auto b = GaussianMixture::isotropic({0.5, 0.2, 0.3}, {v1(3), v1(-1), v1(0.5)}, 0.7);
  for (int t = 0; t < 100; ++t) {
    const auto x = v1(rng.normal() * 3);
    EXPECT_NEAR(a.log_pdf(x), b.log_pdf(x), 1e-12);
  }
}

TEST(GaussianMixture, BatchMatchesPointwise) {
  RandomStream rng(8);
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.4, 0.4, 0.8;
  GaussianMixture g({0.4, 0.6}, {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)},
                    {cov, cov * 2.0});
  Eigen::MatrixXd pts(2, 50);
  for (Eigen::Index j = 0; j < 50; ++j) pts.col(j) << rng.normal(), rng.normal();
  const Eigen::VectorXd batch = g.log_pdf_batch(pts);
  for (Eigen::Index j = 0; j < 50; ++j) {
    EXPECT_NEAR(batch[j], g.log_pdf(Eigen::VectorXd(pts.col(j))), 1e-12);
  }
}

TEST(GaussianMixture, ValidationErrors) {
  EXPECT_THROW(GaussianMixture::isotropic({0.5, 0.4}, {v1(0), v1(1)}, 1.0), Error);
  EXPECT_THROW(GaussianMixture::isotropic({1.2, -0.2}, {v1(0), v1(1)}, 1.0), Error);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(GaussianMixture({1.0}, {Eigen::VectorXd::Zero(2)}, {bad}), Error);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.1, 0.0, 1.0;
  EXPECT_THROW(GaussianMixture({1.0}, {Eigen::VectorXd::Zero(2)}, {asym}), Error);
  const auto g = GaussianMixture::standard_normal(2);
  EXPECT_THROW(g.log_pdf(v1(0)), DimensionMismatch);
}

TEST(GaussianMixture, CollapsedSampleNearMean) {
  Eigen::VectorXd mu(3);
  mu << 1.0, -2.0, 0.5;
  const auto g = GaussianMixture::isotropic({1.0}, {mu}, 1e-6);
  RandomStream rng(1);
  EXPECT_LT((g.sample(rng) - mu).norm(), 1e-5);
}

TEST(GaussianMixture, ComponentFrequencies) {
  const auto g = GaussianMixture::isotropic({0.3, 0.7}, {v1(-50), v1(50)}, 1.0);
  RandomStream rng(99);
  const int n = 100000;
  int left = 0;
  for (int i = 0; i < n; ++i) left += g.sample(rng)[0] < 0 ? 1 : 0;
  const double sd = std::sqrt(0.3 * 0.7 / n);
  EXPECT_NEAR(left / double(n), 0.3, 3 * sd);
}

TEST(GaussianMixture, SeedDeterminism) {
  const auto g = GaussianMixture::isotropic({0.3, 0.7}, {v1(-1), v1(1)}, 1.0);
  RandomStream a(42), b(42);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(g.sample(a)[0], g.sample(b)[0]);
}

TEST(GaussianMixture, OwnSampleLikelihoodMatchesIndependentEstimate) {
  const auto g = GaussianMixture::isotropic({0.5, 0.5}, {v1(-1), v1(2)}, 0.6);
  RandomStream r1(10), r2(20);
  const int n = 100000;
  double m1 = 0, m2 = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double a = g.log_pdf(g.sample(r1));
    m1 += a;
    sq += a * a;
    m2 += g.log_pdf(g.sample(r2));
  }
  m1 /= n;
  m2 /= n;
  const double se = std::sqrt((sq / n - m1 * m1) / n);
  EXPECT_NEAR(m1, m2, 3 * std::sqrt(2.0) * se);
}

TEST(GaussianMixture, JsonRoundTrip) {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.2, 0.2, 0.5;
  const auto shared = GaussianMixture::with_shared_covariance(
      {0.25, 0.75}, {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)}, cov);
  const auto back = mixture_from_json(nlohmann::json::parse(mixture_to_json(shared).dump()));
  EXPECT_TRUE(back.shared_covariance());
  EXPECT_EQ(back.weights(), shared.weights());
  EXPECT_EQ(back.covariance(1), cov);
  const auto per = GaussianMixture::isotropic({0.5, 0.5}, {v1(0), v1(1)}, 0.3);
  const auto back2 = mixture_from_json(mixture_to_json(per));
  EXPECT_FALSE(back2.shared_covariance());
  EXPECT_EQ(back2.log_pdf(v1(0.4)), per.log_pdf(v1(0.4)));
  EXPECT_THROW(mixture_from_json(nlohmann::json{{"format", "other"}}), Error);
}

TEST(AnalyticDv, MatchedDensitiesGiveHalf) {
  const auto family = fig2_family();
  const SyntheticGenerator gen(
      GaussianMixture::isotropic({0.25, 0.5, 0.25}, {v1(-2), v1(0), v1(2)}, 0.25), 0.0,
      std::nullopt);
  for (double x : {-2.0, -0.3, 0.0, 1.1, 2.0}) {
    EXPECT_NEAR(analytic_dv(family, gen, v1(x)), 0.5, 1e-12);
  }
}

TEST(AnalyticDv, LimitAndUndefined) {
  const auto family = fig2_family();
  const SyntheticGenerator gen(GaussianMixture::isotropic({1.0}, {v1(40)}, 0.25), 0.0,
                               std::nullopt);
  EXPECT_NEAR(analytic_dv(family, gen, v1(0)), 1.0, 1e-12);
  EXPECT_THROW(analytic_dv(family, gen, v1(1e6)), DensityUndefined);
}

TEST(AnalyticDv, GridMatchesDirectQuotient) {
  const auto family = fig2_family();
  const auto gen = fig2_generator(0.1);
  for (int i = 0; i <= 100; ++i) {
    const double x = -3.0 + 6.0 * i / 100.0;
    const double pd = fig2_data(x), pg = fig2_gen(x, 0.1);
    const double dv = analytic_dv(family, gen, v1(x));
    EXPECT_NEAR(dv, pd / (pd + pg), 1e-10);
    EXPECT_GT(dv, 0.0);
    EXPECT_LT(dv, 1.0);
    EXPECT_NEAR((1.0 / dv - 1.0) / (pg / pd), 1.0, 1e-10);
  }
}

TEST(AnalyticDr, GridMatchesBayesRule) {
  const auto family = fig2_family();
  for (int i = 0; i <= 100; ++i) {
    const double x = -3.0 + 6.0 * i / 100.0;
    const double a = 0.5 * (0.5 * normal_pdf(x, -2, 0.25) + 0.5 * normal_pdf(x, 0, 0.25));
    const double b = 0.5 * (0.5 * normal_pdf(x, 0, 0.25) + 0.5 * normal_pdf(x, 2, 0.25));
    const auto dr = analytic_dr(family, v1(x));
    EXPECT_NEAR(dr[0], a / (a + b), 1e-10);
    EXPECT_NEAR(dr.sum(), 1.0, 1e-12);
  }
  EXPECT_NEAR(analytic_dr(family, 0, v1(0)), 0.5, 1e-12);
  EXPECT_NEAR(analytic_dr(family, 1, v1(2)), 1.0, 1e-6);
}

TEST(AnalyticDr, UndefinedFarAway) {
  EXPECT_THROW(analytic_dr(fig2_family(), v1(1e8)), DensityUndefined);
}

TEST(AnalyticDf, UnconditionalIsOne) {
  const auto gen = fig2_generator(0.1);
  EXPECT_EQ(analytic_df(gen, v1(0.7)).size(), 1);
  EXPECT_EQ(analytic_df(gen, 0, v1(0.7)), 1.0);
}

TEST(AnalyticDf, SymmetricConditionsAndGrid) {
  const auto c0 = GaussianMixture::isotropic({1.0}, {v1(-1)}, 0.5);
  const auto c1 = GaussianMixture::isotropic({1.0}, {v1(1)}, 0.5);
  const SyntheticGenerator gen({c0, c1}, {0.5, 0.5}, 0.0, std::nullopt);
  EXPECT_NEAR(analytic_df(gen, 0, v1(0)), 0.5, 1e-12);
  for (int i = 0; i <= 100; ++i) {
    const double x = -3.0 + 6.0 * i / 100.0;
    const double a = normal_pdf(x, -1, 0.5), b = normal_pdf(x, 1, 0.5);
    EXPECT_NEAR(analytic_df(gen, 0, v1(x)), a / (a + b), 1e-10);
  }
}

TEST(SyntheticGenerator, LatentMapsToSample) {
  const auto gen = fig2_generator(0.2);
  RandomStream rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto p = gen.sample(rng);
    ASSERT_TRUE(p.has_latent());
    EXPECT_EQ(p.z.size(), 2);
    EXPECT_EQ(gen.map_latent(p.z), p.x);
  }
}

TEST(SyntheticGenerator, SpuriousFraction) {
  const auto gen = fig2_generator(0.2);
  RandomStream rng(17);
  const int n = 100000;
  int spurious = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = gen.sample(rng);
    spurious += gen.is_spurious(gen.component_of(p.z)) ? 1 : 0;
  }
  EXPECT_NEAR(spurious / double(n), 0.2, 3 * std::sqrt(0.16 / n));
}

TEST(SyntheticGenerator, MatchesDataWithoutSpurious) {
  const auto gen = fig2_generator(0.0);
  RandomStream rng(23);
  const int n = 100000, bins = 32;
  std::vector<double> counts(bins, 0.0);
  double outside = 0;
  for (int i = 0; i < n; ++i) {
    const double x = gen.sample(rng).x[0];
    const int b = static_cast<int>(std::floor((x + 3.0) / 6.0 * bins));
    if (b < 0 || b >= bins) {
      outside += 1;
    } else {
      counts[b] += 1;
    }
  }
  double tv = outside / n;
  for (int b = 0; b < bins; ++b) {
    double mass = 0;
    const double lo = -3.0 + 6.0 * b / bins, w = 6.0 / bins;
    for (int s = 0; s < 64; ++s) mass += fig2_data(lo + (s + 0.5) * w / 64) * w / 64;
    tv += std::abs(counts[b] / n - mass);
  }
  EXPECT_LE(0.5 * tv, 0.02);
}

TEST(SyntheticGenerator, SeedDeterminism) {
  const auto gen = fig2_generator(0.1);
  RandomStream a(7), b(7);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(gen.sample(a).x, gen.sample(b).x);
}

TEST(SupportContainment, AcceptsCoveringAndRejectsNarrowGenerator) {
  const auto family = fig2_family();
  EXPECT_NO_THROW(check_support_containment(family, fig2_generator(0.1)));
  const SyntheticGenerator narrow(GaussianMixture::isotropic({1.0}, {v1(-2)}, 0.25), 0.0,
                                  std::nullopt);
  EXPECT_THROW(check_support_containment(family, narrow), Error);
}

TEST(LabeledDensityFamily, GammasAndTarget) {
  const auto family = fig2_family();
  EXPECT_NEAR(family.gammas()[0], 4.0 / 3.0, 1e-15);
  const auto overlap = validate_spec({0, 1}, {}, 2);
  const double at0 = family.unnormalized_target(v1(0), overlap);
  EXPECT_NEAR(at0, (2.0 / 3.0) * 0.5 * normal_pdf(0, 0, 0.25), 1e-9);
  EXPECT_LT(family.unnormalized_target(v1(2), overlap), 1e-12);
}

}  // namespace
}  // namespace s2m
