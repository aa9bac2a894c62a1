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

#include "s2m/gaussian_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "s2m/errors.hpp"
#include "s2m/numeric.hpp"

namespace s2m {

GaussianMixture::GaussianMixture(std::vector<double> weights,
                                 std::vector<Eigen::VectorXd> means,
                                 std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      covariances_(std::move(covariances)) {
  if (covariances_.size() != means_.size()) {
    throw Error("one covariance per component is required");
  }
  factorize();
}

GaussianMixture GaussianMixture::with_shared_covariance(
    std::vector<double> weights, std::vector<Eigen::VectorXd> means,
    const Eigen::MatrixXd& covariance) {
  GaussianMixture mixture;
  mixture.weights_ = std::move(weights);
  mixture.means_ = std::move(means);
  mixture.covariances_ = {covariance};
  mixture.shared_ = true;
  mixture.factorize();
  return mixture;
}

GaussianMixture GaussianMixture::isotropic(std::vector<double> weights,
                                           std::vector<Eigen::VectorXd> means,
                                           double stddev) {
  if (means.empty()) throw Error("mixture needs at least one component");
  const auto d = means.front().size();
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d) * stddev * stddev;
  std::vector<Eigen::MatrixXd> covs(means.size(), cov);
  return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

GaussianMixture GaussianMixture::standard_normal(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return with_shared_covariance({1.0}, {Eigen::VectorXd::Zero(d)},
                                Eigen::MatrixXd::Identity(d, d));
}

void GaussianMixture::factorize() {
  if (weights_.empty() || weights_.size() != means_.size()) {
    throw Error("mixture needs matching, non-empty weights and means");
  }
  dim_ = static_cast<std::size_t>(means_.front().size());
  if (dim_ == 0) throw Error("mixture dimension must be positive");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error("mixture weights must be positive and finite");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error("mixture weights must sum to 1 (got " + format_double(total) + ")");
  }
  for (const auto& mu : means_) {
    if (static_cast<std::size_t>(mu.size()) != dim_) {
      throw DimensionMismatch("mixture means differ in dimension");
    }
    if (!mu.allFinite()) throw Error("mixture means must be finite");
  }
  log_weights_.resize(weights_.size());
  cumulative_.resize(weights_.size());
  double running = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    log_weights_[k] = std::log(weights_[k]);
    running += weights_[k];
    cumulative_[k] = running;
  }
  cumulative_.back() = 1.0;

  factors_.clear();
  log_norms_.clear();
  for (const auto& cov : covariances_) {
    if (static_cast<std::size_t>(cov.rows()) != dim_ ||
        static_cast<std::size_t>(cov.cols()) != dim_) {
      throw DimensionMismatch("covariance shape does not match mixture dimension");
    }
    if (!cov.allFinite() || !cov.isApprox(cov.transpose(), 1e-12)) {
      throw Error("covariance must be finite and symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw Error("covariance is not positive definite");
    }
    Eigen::MatrixXd factor = llt.matrixL();
    const double log_det_half = factor.diagonal().array().log().sum();
    if (!std::isfinite(log_det_half)) {
      throw Error("covariance is numerically singular");
    }
    factors_.push_back(std::move(factor));
    log_norms_.push_back(-static_cast<double>(dim_) * kLogSqrt2Pi - log_det_half);
  }
}

const Eigen::MatrixXd& GaussianMixture::covariance(std::size_t k) const {
  return covariances_[shared_ ? 0 : k];
}

const Eigen::MatrixXd& GaussianMixture::cholesky_factor(std::size_t k) const {
  return factors_[shared_ ? 0 : k];
}

double GaussianMixture::component_log_pdf(
    std::size_t k, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const std::size_t f = shared_ ? 0 : k;
  const Eigen::VectorXd y =
      factors_[f].triangularView<Eigen::Lower>().solve(x - means_[k]);
  return log_norms_[f] - 0.5 * y.squaredNorm();
}

Eigen::MatrixXd GaussianMixture::component_log_terms(
    const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  if (static_cast<std::size_t>(points.rows()) != dim_) {
    throw DimensionMismatch("point dimension " + std::to_string(points.rows()) +
                            " does not match mixture dimension " +
                            std::to_string(dim_));
  }
  const auto m = static_cast<Eigen::Index>(weights_.size());
  Eigen::MatrixXd terms(m, points.cols());
  Eigen::MatrixXd diff(points.rows(), points.cols());
  for (Eigen::Index k = 0; k < m; ++k) {
    const std::size_t f = shared_ ? 0 : static_cast<std::size_t>(k);
    diff = points.colwise() - means_[k];
    factors_[f].triangularView<Eigen::Lower>().solveInPlace(diff);
    terms.row(k) = (log_weights_[k] + log_norms_[f]) -
                   0.5 * diff.colwise().squaredNorm().array();
  }
  return terms;
}

Eigen::VectorXd GaussianMixture::log_pdf_batch(
    const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  return log_sum_exp_columns(component_log_terms(points)).transpose();
}

double GaussianMixture::log_pdf(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) {
    throw DimensionMismatch("point dimension " + std::to_string(x.size()) +
                            " does not match mixture dimension " +
                            std::to_string(dim_));
  }
  double acc = kNegInf;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    acc = log_add_exp(acc, log_weights_[k] + component_log_pdf(k, x));
  }
  return acc;
}

std::size_t GaussianMixture::component_at(double u) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min<std::size_t>(it - cumulative_.begin(), weights_.size() - 1);
}

Eigen::VectorXd GaussianMixture::transform(
    std::size_t k, const Eigen::Ref<const Eigen::VectorXd>& noise) const {
  return means_[k] + cholesky_factor(k) * noise;
}

Eigen::VectorXd GaussianMixture::sample(RandomStream& rng) const {
  const std::size_t k = component_at(rng.uniform());
  Eigen::VectorXd noise(static_cast<Eigen::Index>(dim_));
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
  return transform(k, noise);
}

GaussianMixture GaussianMixture::blend(const GaussianMixture& a,
                                       const GaussianMixture& b,
                                       double b_weight) {
  if (a.dim() != b.dim()) throw DimensionMismatch("cannot blend mixtures of different dimension");
  if (!(b_weight > 0.0 && b_weight < 1.0)) {
    throw Error("blend weight must lie in (0, 1)");
  }
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (std::size_t k = 0; k < a.component_count(); ++k) {
    weights.push_back(a.weights_[k] * (1.0 - b_weight));
    means.push_back(a.means_[k]);
    covs.push_back(a.covariance(k));
  }
  for (std::size_t k = 0; k < b.component_count(); ++k) {
    weights.push_back(b.weights_[k] * b_weight);
    means.push_back(b.means_[k]);
    covs.push_back(b.covariance(k));
  }
  // Products drift by a few ulps; restore the exact unit sum.
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= total;
  return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

nlohmann::json mixture_to_json(const GaussianMixture& mixture) {
  nlohmann::json doc;
  doc["format"] = "s2m-gaussian-mixture";
  doc["version"] = 1;
  doc["dim"] = mixture.dim();
  doc["weights"] = mixture.weights();
  doc["shared_covariance"] = mixture.shared_covariance();
  nlohmann::json means = nlohmann::json::array();
  for (std::size_t k = 0; k < mixture.component_count(); ++k) {
    const auto& mu = mixture.mean(k);
    means.push_back(std::vector<double>(mu.data(), mu.data() + mu.size()));
  }
  doc["means"] = std::move(means);
  nlohmann::json covs = nlohmann::json::array();
  const std::size_t stored = mixture.shared_covariance() ? 1 : mixture.component_count();
  for (std::size_t k = 0; k < stored; ++k) {
    const Eigen::MatrixXd& cov = mixture.covariance(k);
    std::vector<double> row_major;
    for (Eigen::Index r = 0; r < cov.rows(); ++r) {
      for (Eigen::Index c = 0; c < cov.cols(); ++c) row_major.push_back(cov(r, c));
    }
    covs.push_back(std::move(row_major));
  }
  doc["covariances"] = std::move(covs);
  return doc;
}

GaussianMixture mixture_from_json(const nlohmann::json& doc) {
  if (doc.value("format", std::string()) != "s2m-gaussian-mixture") {
    throw Error("not a gaussian-mixture document");
  }
  if (doc.value("version", 0) != 1) throw Error("unsupported mixture version");
  const auto d = doc.at("dim").get<Eigen::Index>();
  auto weights = doc.at("weights").get<std::vector<double>>();
  std::vector<Eigen::VectorXd> means;
  for (const auto& m : doc.at("means")) {
    const auto v = m.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != d) {
      throw DimensionMismatch("mixture mean has wrong length");
    }
    means.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), d));
  }
  std::vector<Eigen::MatrixXd> covs;
  for (const auto& c : doc.at("covariances")) {
    const auto v = c.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != d * d) {
      throw DimensionMismatch("mixture covariance has wrong size");
    }
    Eigen::MatrixXd cov(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index col = 0; col < d; ++col) cov(r, col) = v[r * d + col];
    }
    covs.push_back(std::move(cov));
  }
  if (doc.value("shared_covariance", false)) {
    if (covs.size() != 1) throw Error("shared mixture must store one covariance");
    return GaussianMixture::with_shared_covariance(std::move(weights),
                                                   std::move(means), covs.front());
  }
  return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

}  // namespace s2m
