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

#include "s2m/evaluation.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "s2m/errors.hpp"
#include "s2m/random.hpp"

namespace s2m {
namespace {

ModeWorld line_world() {
  return ModeWorld({{Eigen::VectorXd::Constant(1, -1.0), {0}},
                    {Eigen::VectorXd::Constant(1, 1.0), {1}},
                    {Eigen::VectorXd::Constant(1, 3.0), {0, 1}}},
                   0.1);
}

TEST(AssignToMode, TieGoesToLowestIndex) {
  const auto w = line_world();
  EXPECT_EQ(assign_to_mode(Eigen::VectorXd::Constant(1, 0.0), w), 0u);
  EXPECT_EQ(assign_to_mode(Eigen::VectorXd::Constant(1, 2.0), w), 1u);
  EXPECT_EQ(assign_to_mode(Eigen::VectorXd::Constant(1, 2.0001), w), 2u);
}

TEST(ModeWorld, RejectsDuplicateCenters) {
  EXPECT_THROW(ModeWorld({{Eigen::VectorXd::Zero(1), {0}}, {Eigen::VectorXd::Zero(1), {1}}}, 1.0),
               Error);
  EXPECT_THROW(ModeWorld({{Eigen::VectorXd::Zero(1), {0}}}, 0.0), Error);
}

TEST(Metrics, AccuracyCountsAdmittedModes) {
  const auto w = line_world();
  Eigen::MatrixXd pts(1, 4);
  pts << -1.0, 1.0, 3.0, 3.1;
  EXPECT_DOUBLE_EQ(accuracy(pts, w, JointClassSpec::make({0}, {}, 2)), 0.75);
  EXPECT_DOUBLE_EQ(accuracy(pts, w, JointClassSpec::make({0, 1}, {}, 2)), 0.5);
  EXPECT_DOUBLE_EQ(accuracy(pts, w, JointClassSpec::make({1}, {0}, 2)), 0.25);
  const auto counts = mode_counts(pts, w);
  EXPECT_EQ(counts, (std::vector<std::size_t>{1, 1, 2}));
}

TEST(Metrics, HighQualityMatchesChiSquareMass) {
  // In 2D, P(|x - mu| <= 4 sigma) = 1 - exp(-8).
  const double sigma = 0.05;
  const ModeWorld w({{Eigen::Vector2d(0, 0), {0}}, {Eigen::Vector2d(5, 5), {1}}}, sigma);
  RandomStream rng(4);
  const std::size_t n = 200000;
  Eigen::MatrixXd pts(2, n);
  for (std::size_t i = 0; i < n; ++i) {
    pts.col(i) = (i % 2 ? Eigen::Vector2d(5, 5) : Eigen::Vector2d(0, 0)) +
                 sigma * Eigen::Vector2d(rng.normal(), rng.normal());
  }
  EXPECT_NEAR(high_quality_ratio(pts, w), 1.0 - std::exp(-8.0), 1e-4);
  EXPECT_NEAR(mode_std(pts, w), sigma, 5e-4);
}

TEST(Metrics, ModeStdOfKnownOffsets) {
  const ModeWorld w({{Eigen::Vector2d(0, 0), {0}}}, 1.0);
  Eigen::MatrixXd pts(2, 2);
  pts << 0.3, 0.0, 0.4, 0.0;
  // Squared offsets 0.25 and 0 over 4 coordinates.
  EXPECT_NEAR(mode_std(pts, w), std::sqrt(0.25 / 4.0), 1e-15);
}

TEST(Histogram, OverflowAndFrequencies) {
  const Binning b{0.0, 1.0, 4, 8};
  const std::vector<double> xs{0.1, 0.1, 0.3, 0.99, 1.0, -0.5};
  const auto h = histogram(xs, b);
  ASSERT_EQ(h.size(), 5u);
  EXPECT_DOUBLE_EQ(h[0], 2.0 / 6);
  EXPECT_DOUBLE_EQ(h[1], 1.0 / 6);
  EXPECT_DOUBLE_EQ(h[2], 0.0);
  EXPECT_DOUBLE_EQ(h[3], 1.0 / 6);
  EXPECT_DOUBLE_EQ(h[4], 2.0 / 6);
}

TEST(ExactBinMasses, UniformAndLinear) {
  const Binning b{0.0, 2.0, 4, 8};
  const auto u = exact_bin_masses([](double) { return 3.0; }, b);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(u[i], 0.25, 1e-15);
  EXPECT_EQ(u[4], 0.0);
  // The midpoint rule is exact for linear densities.
  const auto lin = exact_bin_masses([](double x) { return x; }, b);
  EXPECT_NEAR(lin[0], 0.0625, 1e-14);
  EXPECT_NEAR(lin[3], 0.4375, 1e-14);
}

TEST(TvDistance, KnownValuesAndMetricProperties) {
  const std::vector<double> p{0.5, 0.5, 0.0};
  const std::vector<double> q{0.0, 0.5, 0.5};
  const std::vector<double> r{0.2, 0.3, 0.5};
  EXPECT_DOUBLE_EQ(tv_distance(p, q), 0.5);
  EXPECT_DOUBLE_EQ(tv_distance(p, p), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(p, r), tv_distance(r, p));
  EXPECT_LE(tv_distance(p, q), tv_distance(p, r) + tv_distance(r, q) + 1e-15);
  const std::vector<double> disjoint_a{1.0, 0.0};
  const std::vector<double> disjoint_b{0.0, 1.0};
  EXPECT_DOUBLE_EQ(tv_distance(disjoint_a, disjoint_b), 1.0);
  EXPECT_THROW(tv_distance(p, disjoint_a), Error);
}

TEST(TvHistogram, TranslationInvariant) {
  RandomStream rng(8);
  std::vector<double> xs(5000);
  for (double& x : xs) x = rng.normal();
  const auto density = [](double x) { return std::exp(-0.5 * x * x); };
  const double base = tv_histogram(xs, density, {-4.0, 4.0, 32, 8});
  std::vector<double> shifted = xs;
  for (double& x : shifted) x += 10.0;
  const double moved = tv_histogram(
      shifted, [&](double x) { return density(x - 10.0); }, {6.0, 14.0, 32, 8});
  EXPECT_NEAR(base, moved, 1e-3);  // edge samples may round into a neighbor bin
  EXPECT_LT(base, 0.05);
}

TEST(Binning, Validates) {
  EXPECT_THROW((Binning{1.0, 1.0, 4, 8}.validate()), ConfigError);
  EXPECT_THROW((Binning{0.0, 1.0, 0, 8}.validate()), ConfigError);
}

TEST(EvalReport, JsonRoundTripAndTable) {
  const auto w = line_world();
  Eigen::MatrixXd pts(1, 3);
  pts << -1.0, 1.05, 3.0;
  const std::vector<std::string> names{"A", "B"};
  EvalReport r = evaluate_samples(pts, w, JointClassSpec::make({0}, {1}, 2), names);
  EXPECT_EQ(r.spec, "+A-B");
  EXPECT_EQ(r.samples, 3u);
  EXPECT_NEAR(r.accuracy, 1.0 / 3, 1e-15);
  r.tv_distance = 0.125;
  r.acceptance_curve = {0.5, 0.25};
  const auto back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  EXPECT_EQ(back, r);
  const std::vector<EvalReport> rows{r, back};
  const std::string table = render_table(rows);
  EXPECT_NE(table.find("+A-B"), std::string::npos);
}

}  // namespace
}  // namespace s2m
