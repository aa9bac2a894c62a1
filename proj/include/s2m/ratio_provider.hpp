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

// The density-ratio trio consumed by the sampler. A provider evaluates, for
// a batch of points, the real-vs-generated log odds log(1/D_v - 1), the
// single-positive label posterior D_r(. | x), and (for conditional
// generators) the condition posterior D_f(. | x), after temperature scaling.

#ifndef S2M_RATIO_PROVIDER_HPP_
#define S2M_RATIO_PROVIDER_HPP_

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "s2m/densities.hpp"

namespace s2m {

struct CalibrationParams {
  double temperature_v = 1.0;
  double temperature_r = 1.0;
  double temperature_f = 1.0;
  /// Replaces gamma_k = pi_k / p_data(k) when non-empty (one per class).
  std::vector<double> gamma_overrides;

  /// Throws ConfigError unless temperatures are positive and finite and the
  /// overrides are empty or n positive values.
  void validate(std::size_t class_count) const;

  friend bool operator==(const CalibrationParams&, const CalibrationParams&) = default;
};

struct RatioBatch {
  /// log(1 / D_v(x) - 1), one per point.
  Eigen::VectorXd log_dv_odds;
  /// D_r(k | x), classes x points.
  Eigen::MatrixXd dr;
  /// D_f(c | x), conditions x points; zero rows for unconditional generators.
  Eigen::MatrixXd df;
};

class RatioProvider {
 public:
  virtual ~RatioProvider() = default;

  virtual std::size_t class_count() const = 0;
  /// Number of generator conditions; 0 means D_f is the constant 1.
  virtual std::size_t condition_count() const = 0;
  virtual std::size_t dim() const = 0;
  /// gamma_k = pi_k / p_data(k) as known to the provider.
  virtual std::vector<double> default_gammas() const = 0;

  virtual void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& points,
                        const CalibrationParams& calibration, RatioBatch& out) const = 0;

  /// Overrides when given, otherwise the defaults.
  std::vector<double> gammas(const CalibrationParams& calibration) const;

  double dv(const Eigen::Ref<const Eigen::VectorXd>& x,
            const CalibrationParams& calibration = {}) const;
  Eigen::VectorXd dr(const Eigen::Ref<const Eigen::VectorXd>& x,
                     const CalibrationParams& calibration = {}) const;
  /// D_f(c | x), or 1 when the provider has no conditions.
  double df(std::size_t c, const Eigen::Ref<const Eigen::VectorXd>& x,
            const CalibrationParams& calibration = {}) const;
};

/// Optimal classifiers from closed-form densities. The logits are the log
/// densities themselves: log p_data(x) - log p_G(x) for D_v and
/// log p(x | y_c = 1) + log p_data(c) for D_r, so temperature 1 reproduces the
/// exact ratios.
class AnalyticProvider final : public RatioProvider {
 public:
  AnalyticProvider(LabeledDensityFamily family, SyntheticGenerator generator);

  std::size_t class_count() const override { return family_.class_count(); }
  std::size_t condition_count() const override;
  std::size_t dim() const override { return family_.dim(); }
  std::vector<double> default_gammas() const override { return family_.gammas(); }

  void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& points,
                const CalibrationParams& calibration, RatioBatch& out) const override;

  const LabeledDensityFamily& family() const { return family_; }
  const SyntheticGenerator& generator() const { return generator_; }

 private:
  LabeledDensityFamily family_;
  SyntheticGenerator generator_;
  std::vector<double> log_observed_priors_;
  std::vector<double> log_condition_priors_;
};

/// Divides each column of logits by the temperature and applies softmax.
void tempered_softmax(Eigen::MatrixXd& logits, double temperature);

}  // namespace s2m

#endif  // S2M_RATIO_PROVIDER_HPP_
