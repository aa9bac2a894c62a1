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

// Gaussian-mixture latent priors fitted by EM, and the latent density ratio
// p_z(z) / p~_z(z) against the standard-normal prior p_z.
//
// With a shared covariance the ratio reduces to |Sigma|^{1/2} exp(-s(z)),
//
//   s(z) = log sum_i phi_i exp(-1/2 (z - mu_i)^T Sigma^{-1} (z - mu_i) + 1/2 z^T z),
//
// so the ratio of two such ratios is exp(s(z) - s(z')) and no determinant is
// ever needed.

#ifndef S2M_LATENT_MODEL_HPP_
#define S2M_LATENT_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "s2m/gaussian_mixture.hpp"
#include "s2m/joint_class.hpp"

namespace s2m {

struct EmConfig {
  enum class Init { kKMeans, kRandomFromData };

  std::size_t components = 8;
  std::size_t max_iterations = 200;
  /// Stop when the mean per-sample objective improves by less than this.
  double tolerance = 1e-6;
  /// Added to covariance diagonals; see fit_gmm_em.
  double regularization = 1e-6;
  bool shared_covariance = true;
  Init init = Init::kKMeans;
  std::uint64_t seed = 0;
  /// Fresh initializations tried after a degenerate fit before giving up.
  std::size_t max_restarts = 3;

  void validate() const;

  friend bool operator==(const EmConfig&, const EmConfig&) = default;
};

struct AdaptationProvenance {
  std::uint64_t seed = 0;
  std::size_t pilots = 0;
  std::size_t rounds = 0;
};

class AdaptedLatent {
 public:
  explicit AdaptedLatent(GaussianMixture model, JointClassSpec source_spec = {},
                         AdaptationProvenance provenance = {});

  /// The standard-normal prior itself, as a one-component mixture.
  static AdaptedLatent prior(std::size_t latent_dim);

  const GaussianMixture& model() const { return model_; }
  bool shared_covariance() const { return model_.shared_covariance(); }
  /// Whether the model is exactly N(0, I); its log weights are then 0.
  bool is_prior() const { return is_prior_; }
  std::size_t dim() const { return model_.dim(); }
  const JointClassSpec& source_spec() const { return source_spec_; }
  const AdaptationProvenance& provenance() const { return provenance_; }
  void set_provenance(const AdaptationProvenance& p) { provenance_ = p; }

  /// log p_z(z) - log p~_z(z) up to an additive constant that cancels in
  /// acceptance ratios: -s(z) for a shared covariance, the direct log ratio
  /// otherwise. One value per column.
  Eigen::VectorXd log_weights(const Eigen::Ref<const Eigen::MatrixXd>& latents) const;
  double log_weight(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  /// Objective value after each EM iteration (empty when not fitted here).
  std::vector<double> objective_history;
  /// Plain data log-likelihood after each EM iteration.
  std::vector<double> log_likelihood_history;

 private:
  GaussianMixture model_;
  JointClassSpec source_spec_;
  AdaptationProvenance provenance_;
  bool is_prior_ = false;
};

/// Fits a mixture to the columns of `latents` by EM in log space.
///
/// Regularization is a MAP penalty: the shared covariance is S + eps I and a
/// per-component covariance is S_k + eps N / (M N_k) I, where S and S_k are
/// the responsibility-weighted scatter matrices. The EM objective is then
/// log-likelihood - eps N / 2 * tr(Sigma^{-1}) (shared) or
/// - eps N / (2M) * sum_k tr(Sigma_k^{-1}), which equals the plain
/// log-likelihood at eps = 0 and is non-decreasing across iterations.
/// Throws DegenerateComponent when a weight falls below 1e-12 on every
/// restart.
AdaptedLatent fit_gmm_em(const Eigen::Ref<const Eigen::MatrixXd>& latents,
                         const EmConfig& config);

/// log N(z | 0, I) - log p~_z(z), evaluated directly.
double latent_log_ratio(const Eigen::Ref<const Eigen::VectorXd>& z,
                        const GaussianMixture& adapted);

/// s(z) from the header comment; requires a shared-covariance mixture.
double shared_covariance_score(const Eigen::Ref<const Eigen::VectorXd>& z,
                               const GaussianMixture& adapted);

/// log of (p_z(z')/p~_z(z')) / (p_z(z)/p~_z(z)); s(z) - s(z') when the
/// covariance is shared.
double pairwise_latent_log_ratio(const Eigen::Ref<const Eigen::VectorXd>& z_new,
                                 const Eigen::Ref<const Eigen::VectorXd>& z_old,
                                 const GaussianMixture& adapted);

/// Mixture JSON plus "source_spec" (index text form), "universe_size" and
/// "provenance" {seed, pilots, rounds}; format "s2m-adapted-latent".
nlohmann::json adapted_to_json(const AdaptedLatent& adapted);
AdaptedLatent adapted_from_json(const nlohmann::json& doc);

}  // namespace s2m

#endif  // S2M_LATENT_MODEL_HPP_
