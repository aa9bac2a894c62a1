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
#include <limits>
#include <numeric>
#include <string>

#include "s2m/errors.hpp"
#include "s2m/numeric.hpp"

namespace s2m {
namespace {

void check_unit_sum(const std::vector<double>& p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(std::string(what) + " must be positive and finite");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(std::string(what) + " must sum to 1");
  }
}

// Below this a density is zero in double precision.
const double kLogSmallest = std::log(std::numeric_limits<double>::denorm_min());

bool vanishes(double log_value) { return !(log_value >= kLogSmallest); }

std::vector<double> logs(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::log(v[i]);
  return out;
}

}  // namespace

LabeledDensityFamily::LabeledDensityFamily(std::vector<GaussianMixture> class_densities,
                                           std::vector<double> class_priors,
                                           std::vector<double> observed_priors)
    : densities_(std::move(class_densities)),
      class_priors_(std::move(class_priors)),
      observed_priors_(std::move(observed_priors)) {
  const std::size_t n = densities_.size();
  if (n == 0) throw Error("density family needs at least one class");
  if (class_priors_.size() != n || observed_priors_.size() != n) {
    throw Error("one class prior and one observed prior per class are required");
  }
  for (const auto& d : densities_) {
    if (d.dim() != densities_.front().dim()) {
      throw DimensionMismatch("class densities differ in dimension");
    }
  }
  for (double pi : class_priors_) {
    if (!(pi > 0.0 && pi <= 1.0)) throw Error("class priors must lie in (0, 1]");
  }
  check_unit_sum(observed_priors_, "observed priors");
  log_observed_priors_ = logs(observed_priors_);
}

std::vector<double> LabeledDensityFamily::gammas() const {
  std::vector<double> g(class_count());
  for (std::size_t k = 0; k < g.size(); ++k) {
    g[k] = class_priors_[k] / observed_priors_[k];
  }
  return g;
}

Eigen::MatrixXd LabeledDensityFamily::log_class_densities(
    const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(class_count()), points.cols());
  for (std::size_t k = 0; k < class_count(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = densities_[k].log_pdf_batch(points).transpose();
  }
  return out;
}

Eigen::VectorXd LabeledDensityFamily::log_data_density_batch(
    const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  Eigen::MatrixXd terms = log_class_densities(points);
  for (std::size_t k = 0; k < class_count(); ++k) {
    terms.row(static_cast<Eigen::Index>(k)).array() += log_observed_priors_[k];
  }
  return log_sum_exp_columns(terms).transpose();
}

double LabeledDensityFamily::log_data_density(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return log_data_density_batch(x)[0];
}

double LabeledDensityFamily::unnormalized_target(
    const Eigen::Ref<const Eigen::VectorXd>& x, const JointClassSpec& spec) const {
  std::vector<double> f(class_count());
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = class_priors_[k] * std::exp(densities_[k].log_pdf(x));
  }
  return joint_density_value(f, spec);
}

std::pair<Eigen::VectorXd, std::size_t> LabeledDensityFamily::sample_labeled(
    RandomStream& rng) const {
  const double u = rng.uniform();
  double running = 0.0;
  std::size_t c = class_count() - 1;
  for (std::size_t k = 0; k < class_count(); ++k) {
    running += observed_priors_[k];
    if (u < running) {
      c = k;
      break;
    }
  }
  return {densities_[c].sample(rng), c};
}

SyntheticGenerator::SyntheticGenerator(const GaussianMixture& base,
                                       double spurious_mass,
                                       const std::optional<GaussianMixture>& background)
    : SyntheticGenerator(std::vector<GaussianMixture>{base}, {1.0}, spurious_mass,
                         background) {
  conditional_ = false;
}

SyntheticGenerator::SyntheticGenerator(const std::vector<GaussianMixture>& per_condition,
                                       std::vector<double> condition_priors,
                                       double spurious_mass,
                                       const std::optional<GaussianMixture>& background)
    : conditional_(true),
      spurious_mass_(spurious_mass),
      condition_priors_(std::move(condition_priors)) {
  if (per_condition.empty()) throw Error("generator needs at least one condition");
  if (condition_priors_.size() != per_condition.size()) {
    throw Error("one prior per generator condition is required");
  }
  check_unit_sum(condition_priors_, "condition priors");
  log_condition_priors_ = logs(condition_priors_);
  if (!(spurious_mass >= 0.0 && spurious_mass < 1.0)) {
    throw Error("spurious mass must lie in [0, 1)");
  }
  if (spurious_mass > 0.0 && !background) {
    throw Error("a background component is required when spurious mass > 0");
  }
  for (const auto& base : per_condition) {
    if (base.dim() != per_condition.front().dim()) {
      throw DimensionMismatch("generator conditions differ in dimension");
    }
    if (spurious_mass > 0.0) {
      pushforwards_.push_back(GaussianMixture::blend(base, *background, spurious_mass));
      background_components_ = background->component_count();
    } else {
      pushforwards_.push_back(base);
    }
  }
}

std::size_t SyntheticGenerator::component_of(const Eigen::Ref<const Eigen::VectorXd>& z,
                                             std::size_t condition) const {
  if (static_cast<std::size_t>(z.size()) != latent_dim()) {
    throw DimensionMismatch("latent dimension mismatch");
  }
  return pushforwards_[condition].component_at(normal_cdf(z[0]));
}

bool SyntheticGenerator::is_spurious(std::size_t component, std::size_t condition) const {
  const std::size_t m = pushforwards_[condition].component_count();
  return component + background_components_ >= m;
}

Eigen::VectorXd SyntheticGenerator::map_latent(const Eigen::Ref<const Eigen::VectorXd>& z,
                                               std::size_t condition) const {
  const std::size_t k = component_of(z, condition);
  return pushforwards_[condition].transform(k, z.tail(z.size() - 1));
}

DataPoint SyntheticGenerator::sample(RandomStream& rng, std::size_t condition) const {
  Eigen::VectorXd z(static_cast<Eigen::Index>(latent_dim()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return {map_latent(z, condition), std::move(z)};
}

Eigen::MatrixXd SyntheticGenerator::log_conditional_densities(
    const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(condition_count()), points.cols());
  for (std::size_t c = 0; c < condition_count(); ++c) {
    out.row(static_cast<Eigen::Index>(c)) = pushforwards_[c].log_pdf_batch(points).transpose();
  }
  return out;
}

Eigen::VectorXd SyntheticGenerator::log_density_batch(
    const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  if (condition_count() == 1) return pushforwards_.front().log_pdf_batch(points);
  Eigen::MatrixXd terms = log_conditional_densities(points);
  for (std::size_t c = 0; c < condition_count(); ++c) {
    terms.row(static_cast<Eigen::Index>(c)).array() += log_condition_priors_[c];
  }
  return log_sum_exp_columns(terms).transpose();
}

double SyntheticGenerator::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return log_density_batch(x)[0];
}

double analytic_dv(const LabeledDensityFamily& family, const SyntheticGenerator& generator,
                   const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double log_data = family.log_data_density(x);
  const double log_gen = generator.log_density(x);
  if (vanishes(log_data) && vanishes(log_gen)) {
    throw DensityUndefined("data and generator densities both vanish at the query point");
  }
  // 1 / (1 + p_G / p_data), evaluated through the log ratio.
  return 1.0 / (1.0 + std::exp(log_gen - log_data));
}

Eigen::VectorXd analytic_dr(const LabeledDensityFamily& family,
                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::MatrixXd logits = family.log_class_densities(Eigen::MatrixXd(x));
  for (std::size_t k = 0; k < family.class_count(); ++k) {
    logits(static_cast<Eigen::Index>(k), 0) += std::log(family.observed_priors()[k]);
  }
  if (vanishes(logits.maxCoeff()) || logits.hasNaN()) {
    throw DensityUndefined("data density vanishes at the query point");
  }
  softmax_columns(logits);
  return logits.col(0);
}

double analytic_dr(const LabeledDensityFamily& family, std::size_t c,
                   const Eigen::Ref<const Eigen::VectorXd>& x) {
  return analytic_dr(family, x)[static_cast<Eigen::Index>(c)];
}

Eigen::VectorXd analytic_df(const SyntheticGenerator& generator,
                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (!generator.conditional()) return Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd logits = generator.log_conditional_densities(Eigen::MatrixXd(x));
  for (std::size_t c = 0; c < generator.condition_count(); ++c) {
    logits(static_cast<Eigen::Index>(c), 0) += std::log(generator.condition_prior(c));
  }
  if (vanishes(logits.maxCoeff()) || logits.hasNaN()) {
    throw DensityUndefined("generator density vanishes at the query point");
  }
  softmax_columns(logits);
  return logits.col(0);
}

double analytic_df(const SyntheticGenerator& generator, std::size_t c,
                   const Eigen::Ref<const Eigen::VectorXd>& x) {
  return analytic_df(generator, x)[static_cast<Eigen::Index>(c)];
}

void check_support_containment(const LabeledDensityFamily& family,
                               const SyntheticGenerator& generator,
                               std::size_t points_per_axis) {
  const auto d = static_cast<Eigen::Index>(family.dim());
  if (static_cast<std::size_t>(d) != generator.dim()) {
    throw DimensionMismatch("generator and family dimensions differ");
  }
  if (points_per_axis == 0) points_per_axis = d == 1 ? 2001 : d == 2 ? 201 : 31;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (std::size_t k = 0; k < family.class_count(); ++k) {
    const auto& mix = family.class_density(k);
    for (std::size_t m = 0; m < mix.component_count(); ++m) {
      const Eigen::VectorXd spread = 6.0 * mix.covariance(m).diagonal().cwiseSqrt();
      lo = lo.cwiseMin(mix.mean(m) - spread);
      hi = hi.cwiseMax(mix.mean(m) + spread);
    }
  }
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < d; ++i) total *= points_per_axis;
  constexpr std::size_t kBlock = 4096;
  const double log_target_floor = std::log(1e-9);
  const double log_gen_floor = std::log(1e-12);
  Eigen::MatrixXd grid(d, static_cast<Eigen::Index>(std::min(total, kBlock)));
  for (std::size_t start = 0; start < total; start += kBlock) {
    const std::size_t count = std::min(kBlock, total - start);
    grid.resize(d, static_cast<Eigen::Index>(count));
    for (std::size_t p = 0; p < count; ++p) {
      std::size_t idx = start + p;
      for (Eigen::Index i = 0; i < d; ++i) {
        const std::size_t step = idx % points_per_axis;
        idx /= points_per_axis;
        grid(i, static_cast<Eigen::Index>(p)) =
            lo[i] + (hi[i] - lo[i]) * static_cast<double>(step) /
                        static_cast<double>(points_per_axis - 1);
      }
    }
    const Eigen::MatrixXd classes = family.log_class_densities(grid);
    const Eigen::VectorXd gen = generator.log_density_batch(grid);
    for (Eigen::Index p = 0; p < grid.cols(); ++p) {
      if (classes.col(p).maxCoeff() >= log_target_floor && gen[p] < log_gen_floor) {
        std::string where;
        for (Eigen::Index i = 0; i < d; ++i) {
          where += (i ? ", " : "") + format_double(grid(i, p));
        }
        throw Error("generator support does not cover the target classes near (" +
                    where + ")");
      }
    }
  }
}

}  // namespace s2m
