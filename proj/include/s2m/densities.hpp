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

// Closed-form class densities, exact-density generators, and the optimal
// classifiers they induce:
//
//   D_v(x)   = p_data(x) / (p_data(x) + p_G(x))
//   D_r(c|x) = p(x | y_c = 1) p_data(c) / p_data(x)
//   D_f(c|x) = p_G(x | c) p_G(c) / p_G(x)
//
// where p_data(x) = sum_c p_data(c) p(x | y_c = 1).

#ifndef S2M_DENSITIES_HPP_
#define S2M_DENSITIES_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "s2m/gaussian_mixture.hpp"
#include "s2m/joint_class.hpp"
#include "s2m/random.hpp"

namespace s2m {

struct DataPoint {
  Eigen::VectorXd x;
  /// Generator latent that maps to x; empty when not recorded.
  Eigen::VectorXd z;

  bool has_latent() const { return z.size() > 0; }
};

/// n class-conditional densities p(x | y_k = 1) with their priors.
class LabeledDensityFamily {
 public:
  /// `class_priors` are pi_k = p(y_k = 1) in (0, 1]; `observed_priors` are the
  /// single-positive label frequencies p_data(k), summing to one.
  LabeledDensityFamily(std::vector<GaussianMixture> class_densities,
                       std::vector<double> class_priors,
                       std::vector<double> observed_priors);

  std::size_t class_count() const { return densities_.size(); }
  std::size_t dim() const { return densities_.front().dim(); }

  const GaussianMixture& class_density(std::size_t k) const { return densities_[k]; }
  const std::vector<double>& class_priors() const { return class_priors_; }
  const std::vector<double>& observed_priors() const { return observed_priors_; }

  /// gamma_k = pi_k / p_data(k).
  std::vector<double> gammas() const;

  /// log p(x | y_k = 1) as a (classes x points) matrix.
  Eigen::MatrixXd log_class_densities(const Eigen::Ref<const Eigen::MatrixXd>& points) const;

  Eigen::VectorXd log_data_density_batch(
      const Eigen::Ref<const Eigen::MatrixXd>& points) const;
  double log_data_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// f_(I,J)(x) from f_k(x) = pi_k p(x | y_k = 1): the target density times
  /// its class prior, not normalized.
  double unnormalized_target(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const JointClassSpec& spec) const;

  /// Draws a labeled single-positive datum: c ~ p_data(c), x ~ p(x | y_c = 1).
  std::pair<Eigen::VectorXd, std::size_t> sample_labeled(RandomStream& rng) const;

 private:
  std::vector<GaussianMixture> densities_;
  std::vector<double> class_priors_;
  std::vector<double> observed_priors_;
  std::vector<double> log_observed_priors_;
};

/// Exact-density stand-in for a trained generator.
///
/// The latent is z ~ N(0, I) of dimension dim + 1. The first latent
/// coordinate picks a pushforward component by where Phi(z_0) falls in the
/// cumulative weights; the remaining coordinates are the normal draw that
/// the component's Cholesky factor maps to data space. So G is
/// deterministic, its pushforward density is the mixture, and a refitted
/// latent prior reweights both the component choice and the position.
class SyntheticGenerator {
 public:
  /// Unconditional generator: (1 - s) * base + s * background.
  SyntheticGenerator(const GaussianMixture& base, double spurious_mass,
                     const std::optional<GaussianMixture>& background);

  /// Conditional generator with p_G(. | c) = (1 - s) * base_c + s * background.
  SyntheticGenerator(const std::vector<GaussianMixture>& per_condition,
                     std::vector<double> condition_priors, double spurious_mass,
                     const std::optional<GaussianMixture>& background);

  bool conditional() const { return conditional_; }
  std::size_t condition_count() const { return pushforwards_.size(); }
  double condition_prior(std::size_t c) const { return condition_priors_[c]; }
  std::size_t dim() const { return pushforwards_.front().dim(); }
  std::size_t latent_dim() const { return dim() + 1; }
  double spurious_mass() const { return spurious_mass_; }

  const GaussianMixture& pushforward(std::size_t condition = 0) const {
    return pushforwards_[condition];
  }

  /// Pushforward component selected by latent z.
  std::size_t component_of(const Eigen::Ref<const Eigen::VectorXd>& z,
                           std::size_t condition = 0) const;
  /// Whether component k of the pushforward is the spurious background.
  bool is_spurious(std::size_t component, std::size_t condition = 0) const;

  /// G(z) (or G(z, c) for conditional generators).
  Eigen::VectorXd map_latent(const Eigen::Ref<const Eigen::VectorXd>& z,
                             std::size_t condition = 0) const;

  /// Draws z from the latent prior and returns (G(z), z).
  DataPoint sample(RandomStream& rng, std::size_t condition = 0) const;

  /// log p_G(x) (marginal over conditions).
  Eigen::VectorXd log_density_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const;
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// log p_G(x | c) for every condition, (conditions x points).
  Eigen::MatrixXd log_conditional_densities(
      const Eigen::Ref<const Eigen::MatrixXd>& points) const;

 private:
  bool conditional_;
  double spurious_mass_;
  std::size_t background_components_ = 0;
  std::vector<GaussianMixture> pushforwards_;
  std::vector<double> condition_priors_;
  std::vector<double> log_condition_priors_;
};

double analytic_dv(const LabeledDensityFamily& family,
                   const SyntheticGenerator& generator,
                   const Eigen::Ref<const Eigen::VectorXd>& x);

/// D_r(. | x) as a simplex vector over the n classes.
Eigen::VectorXd analytic_dr(const LabeledDensityFamily& family,
                            const Eigen::Ref<const Eigen::VectorXd>& x);
double analytic_dr(const LabeledDensityFamily& family, std::size_t c,
                   const Eigen::Ref<const Eigen::VectorXd>& x);

/// D_f(. | x) over generator conditions; the constant 1 for an unconditional
/// generator.
Eigen::VectorXd analytic_df(const SyntheticGenerator& generator,
                            const Eigen::Ref<const Eigen::VectorXd>& x);
double analytic_df(const SyntheticGenerator& generator, std::size_t c,
                   const Eigen::Ref<const Eigen::VectorXd>& x);

/// Checks on a regular grid over the family's bounding box that p_G(x) >=
/// 1e-12 wherever some class density p(x | y_k = 1) >= 1e-9 (every target
/// built from the family is dominated by the class densities). Throws Error
/// naming the first offending grid point.
void check_support_containment(const LabeledDensityFamily& family,
                               const SyntheticGenerator& generator,
                               std::size_t points_per_axis = 0);

}  // namespace s2m

#endif  // S2M_DENSITIES_HPP_
