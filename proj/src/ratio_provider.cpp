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

#include "s2m/ratio_provider.hpp"

#include <cmath>
#include <string>

#include "s2m/errors.hpp"
#include "s2m/numeric.hpp"

namespace s2m {

void CalibrationParams::validate(std::size_t class_count) const {
  const auto check = [](double t, const char* field) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw ConfigError(field, "temperature must be positive and finite");
    }
  };
  check(temperature_v, "temperature_v");
  check(temperature_r, "temperature_r");
  check(temperature_f, "temperature_f");
  if (gamma_overrides.empty()) return;
  if (gamma_overrides.size() != class_count) {
    throw ConfigError("gamma", "expected " + std::to_string(class_count) + " values");
  }
  for (double g : gamma_overrides) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw ConfigError("gamma", "values must be positive and finite");
    }
  }
}

std::vector<double> RatioProvider::gammas(const CalibrationParams& calibration) const {
  return calibration.gamma_overrides.empty() ? default_gammas()
                                             : calibration.gamma_overrides;
}

double RatioProvider::dv(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const CalibrationParams& calibration) const {
  RatioBatch batch;
  evaluate(x, calibration, batch);
  return 1.0 / (1.0 + std::exp(batch.log_dv_odds[0]));
}

Eigen::VectorXd RatioProvider::dr(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const CalibrationParams& calibration) const {
  RatioBatch batch;
  evaluate(x, calibration, batch);
  return batch.dr.col(0);
}

double RatioProvider::df(std::size_t c, const Eigen::Ref<const Eigen::VectorXd>& x,
                         const CalibrationParams& calibration) const {
  if (condition_count() == 0) return 1.0;
  RatioBatch batch;
  evaluate(x, calibration, batch);
  return batch.df(static_cast<Eigen::Index>(c), 0);
}

void tempered_softmax(Eigen::MatrixXd& logits, double temperature) {
  if (temperature != 1.0) logits /= temperature;
  softmax_columns(logits);
}

AnalyticProvider::AnalyticProvider(LabeledDensityFamily family, SyntheticGenerator generator)
    : family_(std::move(family)), generator_(std::move(generator)) {
  if (family_.dim() != generator_.dim()) {
    throw DimensionMismatch("family and generator dimensions differ");
  }
  for (double p : family_.observed_priors()) log_observed_priors_.push_back(std::log(p));
  for (std::size_t c = 0; c < generator_.condition_count(); ++c) {
    log_condition_priors_.push_back(std::log(generator_.condition_prior(c)));
  }
}

std::size_t AnalyticProvider::condition_count() const {
  return generator_.conditional() ? generator_.condition_count() : 0;
}

void AnalyticProvider::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                const CalibrationParams& calibration,
                                RatioBatch& out) const {
  if (static_cast<std::size_t>(points.rows()) != dim()) {
    throw DimensionMismatch("point dimension does not match provider");
  }
  out.dr = family_.log_class_densities(points);
  for (std::size_t k = 0; k < class_count(); ++k) {
    out.dr.row(static_cast<Eigen::Index>(k)).array() += log_observed_priors_[k];
  }
  const Eigen::RowVectorXd log_data = log_sum_exp_columns(out.dr);
  tempered_softmax(out.dr, calibration.temperature_r);

  if (condition_count() == 0) {
    out.log_dv_odds = generator_.log_density_batch(points);
    out.df.resize(0, points.cols());
  } else {
    out.df = generator_.log_conditional_densities(points);
    for (std::size_t c = 0; c < log_condition_priors_.size(); ++c) {
      out.df.row(static_cast<Eigen::Index>(c)).array() += log_condition_priors_[c];
    }
    out.log_dv_odds = log_sum_exp_columns(out.df).transpose();
    tempered_softmax(out.df, calibration.temperature_f);
  }
  out.log_dv_odds -= log_data.transpose();
  if (calibration.temperature_v != 1.0) out.log_dv_odds /= calibration.temperature_v;
}

}  // namespace s2m
