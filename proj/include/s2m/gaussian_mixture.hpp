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

#ifndef S2M_GAUSSIAN_MIXTURE_HPP_
#define S2M_GAUSSIAN_MIXTURE_HPP_

#include <cstddef>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "s2m/random.hpp"

namespace s2m {

/// Finite mixture of multivariate normals, sum_k w_k N(mu_k, Sigma_k).
///
/// Covariances are either one per component or a single shared matrix.
/// Each covariance is Cholesky-factored at construction; densities are
/// evaluated in log space throughout.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                  std::vector<Eigen::MatrixXd> covariances);

  static GaussianMixture with_shared_covariance(std::vector<double> weights,
                                                std::vector<Eigen::VectorXd> means,
                                                const Eigen::MatrixXd& covariance);

  /// Components with covariance stddev^2 * I.
  static GaussianMixture isotropic(std::vector<double> weights,
                                   std::vector<Eigen::VectorXd> means,
                                   double stddev);

  static GaussianMixture standard_normal(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t component_count() const { return weights_.size(); }
  bool shared_covariance() const { return shared_; }

  const std::vector<double>& weights() const { return weights_; }
  const Eigen::VectorXd& mean(std::size_t k) const { return means_[k]; }
  const Eigen::MatrixXd& covariance(std::size_t k) const;
  /// Lower Cholesky factor L with L L^T = Sigma_k.
  const Eigen::MatrixXd& cholesky_factor(std::size_t k) const;

  double log_pdf(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Log density of every column of `points`.
  Eigen::VectorXd log_pdf_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const;

  /// log w_k + log N(x | mu_k, Sigma_k) for every component and column,
  /// as a (components x points) matrix.
  Eigen::MatrixXd component_log_terms(
      const Eigen::Ref<const Eigen::MatrixXd>& points) const;

  double component_log_pdf(std::size_t k,
                           const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Component whose cumulative-weight interval contains u in [0, 1].
  std::size_t component_at(double u) const;

  /// mu_k + L_k * noise.
  Eigen::VectorXd transform(std::size_t k,
                            const Eigen::Ref<const Eigen::VectorXd>& noise) const;

  Eigen::VectorXd sample(RandomStream& rng) const;

  /// (1 - b_weight) * a + b_weight * b as one mixture; the components of `a`
  /// come first. The result always stores per-component covariances.
  static GaussianMixture blend(const GaussianMixture& a, const GaussianMixture& b,
                               double b_weight);

 private:
  GaussianMixture() = default;
  void factorize();

  std::size_t dim_ = 0;
  bool shared_ = false;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<double> cumulative_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covariances_;  // size 1 when shared
  std::vector<Eigen::MatrixXd> factors_;
  std::vector<double> log_norms_;  // -d/2 log 2pi - log|L|
};

/// JSON form: {"format": "s2m-gaussian-mixture", "version": 1, "dim": d,
/// "weights": [...], "means": [[...], ...], "shared_covariance": bool,
/// "covariances": [[row-major d*d], ...]} with one covariance entry when
/// shared.
nlohmann::json mixture_to_json(const GaussianMixture& mixture);
GaussianMixture mixture_from_json(const nlohmann::json& doc);

}  // namespace s2m

#endif  // S2M_GAUSSIAN_MIXTURE_HPP_
