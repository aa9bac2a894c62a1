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

#include "s2m/latent_model.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>

#include <Eigen/Cholesky>

#include "s2m/errors.hpp"
#include "s2m/numeric.hpp"
#include "s2m/random.hpp"

namespace s2m {
namespace {

struct Parameters {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;  // one entry when shared
};

class Degenerate : public std::exception {};

GaussianMixture build(const Parameters& p, bool shared) {
  if (shared) {
    return GaussianMixture::with_shared_covariance(p.weights, p.means, p.covariances.front());
  }
  return GaussianMixture(p.weights, p.means, p.covariances);
}

double trace_inverse(const Eigen::MatrixXd& cov) {
  const auto d = cov.rows();
  return cov.llt().solve(Eigen::MatrixXd::Identity(d, d)).trace();
}

double penalty(const Parameters& p, const EmConfig& config, double n) {
  if (config.regularization == 0.0) return 0.0;
  double total = 0.0;
  for (const auto& cov : p.covariances) total += trace_inverse(cov);
  const double scale = config.shared_covariance
                           ? n / 2.0
                           : n / (2.0 * static_cast<double>(config.components));
  return config.regularization * scale * total;
}

Eigen::MatrixXd data_covariance(const Eigen::Ref<const Eigen::MatrixXd>& z) {
  const Eigen::VectorXd mean = z.rowwise().mean();
  const Eigen::MatrixXd centered = z.colwise() - mean;
  return centered * centered.transpose() / static_cast<double>(z.cols());
}

std::vector<Eigen::VectorXd> kmeans_centers(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                            std::size_t m, RandomStream& rng) {
  const Eigen::Index n = z.cols();
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(z.col(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)))));
  Eigen::VectorXd nearest = (z.colwise() - centers.back()).colwise().squaredNorm().transpose();
  while (centers.size() < m) {
    // k-means++ seeding: next center drawn with probability proportional to D^2.
    const double target = rng.uniform() * nearest.sum();
    double running = 0.0;
    Eigen::Index pick = n - 1;
    for (Eigen::Index j = 0; j < n; ++j) {
      running += nearest[j];
      if (running > target && nearest[j] > 0.0) {
        pick = j;
        break;
      }
    }
    centers.push_back(z.col(pick));
    nearest = nearest.cwiseMin(
        (z.colwise() - centers.back()).colwise().squaredNorm().transpose());
  }
  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 20; ++iter) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < m; ++k) {
        const double dist = (z.col(j) - centers[k]).squaredNorm();
        if (dist < best) {
          best = dist;
          assignment[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(k);
        }
      }
    }
    std::vector<Eigen::VectorXd> sums(m, Eigen::VectorXd::Zero(z.rows()));
    std::vector<double> counts(m, 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto k = static_cast<std::size_t>(assignment[static_cast<std::size_t>(j)]);
      sums[k] += z.col(j);
      counts[k] += 1.0;
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (counts[k] > 0.0) centers[k] = sums[k] / counts[k];
    }
  }
  return centers;
}

Parameters initialize(const Eigen::Ref<const Eigen::MatrixXd>& z, const EmConfig& config,
                      RandomStream& rng) {
  const std::size_t m = config.components;
  Parameters p;
  p.weights.assign(m, 1.0 / static_cast<double>(m));
  if (config.init == EmConfig::Init::kKMeans) {
    p.means = kmeans_centers(z, m, rng);
  } else {
    std::set<Eigen::Index> chosen;
    while (chosen.size() < m) {
      chosen.insert(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(z.cols()))));
    }
    for (Eigen::Index j : chosen) p.means.push_back(z.col(j));
  }
  const auto d = z.rows();
  const Eigen::MatrixXd cov =
      data_covariance(z) + config.regularization * Eigen::MatrixXd::Identity(d, d);
  p.covariances.assign(config.shared_covariance ? 1 : m, cov);
  return p;
}

void maximize(const Eigen::Ref<const Eigen::MatrixXd>& z, const Eigen::MatrixXd& resp,
              const EmConfig& config, Parameters& p) {
  const std::size_t m = config.components;
  const auto n = static_cast<double>(z.cols());
  const auto d = z.rows();
  const Eigen::VectorXd mass = resp.rowwise().sum();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < m; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    const double nk = mass[ki];
    if (!(nk / n >= 1e-12)) throw Degenerate();
    p.weights[k] = nk / n;
    p.means[k] = z * resp.row(ki).transpose() / nk;
    const Eigen::MatrixXd centered = z.colwise() - p.means[k];
    const Eigen::MatrixXd scatter =
        centered * resp.row(ki).transpose().asDiagonal() * centered.transpose();
    if (config.shared_covariance) {
      pooled += scatter;
    } else {
      p.covariances[k] = scatter / nk +
                         config.regularization * n / (static_cast<double>(m) * nk) * identity;
    }
  }
  if (config.shared_covariance) {
    p.covariances.front() = pooled / n + config.regularization * identity;
  }
  double total = 0.0;
  for (double w : p.weights) total += w;
  for (double& w : p.weights) w /= total;
}

std::optional<AdaptedLatent> fit_once(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                      const EmConfig& config, std::uint64_t seed) {
  RandomStream rng(seed);
  Parameters p = initialize(z, config, rng);
  const auto n = static_cast<double>(z.cols());
  std::vector<double> objective;
  std::vector<double> loglik;
  try {
    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
      const GaussianMixture mixture = build(p, config.shared_covariance);
      Eigen::MatrixXd terms = mixture.component_log_terms(z);
      const Eigen::RowVectorXd per_point = log_sum_exp_columns(terms);
      const double ll = per_point.sum();
      if (!std::isfinite(ll)) throw Degenerate();
      loglik.push_back(ll);
      objective.push_back(ll - penalty(p, config, n));
      const std::size_t t = objective.size();
      const bool converged =
          t > 1 && (objective[t - 1] - objective[t - 2]) / n < config.tolerance;
      if (converged || iter + 1 == config.max_iterations) break;
      terms.rowwise() -= per_point;
      maximize(z, terms.array().exp().matrix(), config, p);
    }
    AdaptedLatent fitted(build(p, config.shared_covariance));
    fitted.objective_history = std::move(objective);
    fitted.log_likelihood_history = std::move(loglik);
    return fitted;
  } catch (const Degenerate&) {
    return std::nullopt;
  } catch (const DimensionMismatch&) {
    throw;
  } catch (const Error&) {
    // A covariance that stopped being positive definite.
    return std::nullopt;
  }
}

}  // namespace

void EmConfig::validate() const {
  if (components < 1) throw ConfigError("components", "must be at least 1");
  if (max_iterations < 1) throw ConfigError("max_iterations", "must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance", "must be positive");
  if (!(regularization >= 0.0) || !std::isfinite(regularization)) {
    throw ConfigError("regularization", "must be finite and non-negative");
  }
}

AdaptedLatent::AdaptedLatent(GaussianMixture model, JointClassSpec source_spec,
                             AdaptationProvenance provenance)
    : model_(std::move(model)),
      source_spec_(std::move(source_spec)),
      provenance_(provenance) {
  const auto d = static_cast<Eigen::Index>(model_.dim());
  is_prior_ = model_.component_count() == 1 && model_.mean(0).isZero(0.0) &&
              model_.covariance(0) == Eigen::MatrixXd::Identity(d, d);
}

AdaptedLatent AdaptedLatent::prior(std::size_t latent_dim) {
  return AdaptedLatent(GaussianMixture::standard_normal(latent_dim));
}

Eigen::VectorXd AdaptedLatent::log_weights(
    const Eigen::Ref<const Eigen::MatrixXd>& latents) const {
  if (static_cast<std::size_t>(latents.rows()) != dim()) {
    throw DimensionMismatch("latent dimension does not match the adapted model");
  }
  if (is_prior_) return Eigen::VectorXd::Zero(latents.cols());
  const Eigen::RowVectorXd half_norm = 0.5 * latents.colwise().squaredNorm();
  if (!model_.shared_covariance()) {
    return (-half_norm.array() - static_cast<double>(dim()) * kLogSqrt2Pi).transpose().matrix() -
           model_.log_pdf_batch(latents);
  }
  const auto m = static_cast<Eigen::Index>(model_.component_count());
  const auto& factor = model_.cholesky_factor(0);
  Eigen::MatrixXd terms(m, latents.cols());
  Eigen::MatrixXd diff(latents.rows(), latents.cols());
  for (Eigen::Index k = 0; k < m; ++k) {
    diff = latents.colwise() - model_.mean(static_cast<std::size_t>(k));
    factor.triangularView<Eigen::Lower>().solveInPlace(diff);
    terms.row(k) = std::log(model_.weights()[static_cast<std::size_t>(k)]) -
                   0.5 * diff.colwise().squaredNorm().array() + half_norm.array();
  }
  return -log_sum_exp_columns(terms).transpose();
}

double AdaptedLatent::log_weight(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return log_weights(z)[0];
}

AdaptedLatent fit_gmm_em(const Eigen::Ref<const Eigen::MatrixXd>& latents,
                         const EmConfig& config) {
  config.validate();
  std::set<std::vector<double>> distinct;
  for (Eigen::Index j = 0; j < latents.cols() && distinct.size() < config.components; ++j) {
    distinct.insert(std::vector<double>(latents.col(j).data(),
                                        latents.col(j).data() + latents.rows()));
  }
  if (distinct.size() < config.components) {
    throw Error("EM needs at least " + std::to_string(config.components) +
                " distinct latent vectors");
  }
  if (!latents.allFinite()) throw Error("latent vectors must be finite");
  for (std::size_t attempt = 0; attempt <= config.max_restarts; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? config.seed : derive_seed(config.seed, attempt);
    if (auto fitted = fit_once(latents, config, seed)) return std::move(*fitted);
  }
  throw DegenerateComponent("a mixture component collapsed on every one of " +
                            std::to_string(config.max_restarts + 1) + " initializations");
}

double latent_log_ratio(const Eigen::Ref<const Eigen::VectorXd>& z,
                        const GaussianMixture& adapted) {
  if (static_cast<std::size_t>(z.size()) != adapted.dim()) {
    throw DimensionMismatch("latent dimension does not match the adapted model");
  }
  const double log_prior =
      -0.5 * z.squaredNorm() - static_cast<double>(z.size()) * kLogSqrt2Pi;
  return log_prior - adapted.log_pdf(z);
}

double shared_covariance_score(const Eigen::Ref<const Eigen::VectorXd>& z,
                               const GaussianMixture& adapted) {
  if (!adapted.shared_covariance()) {
    throw Error("shared_covariance_score needs a shared-covariance mixture");
  }
  return -AdaptedLatent(adapted).log_weight(z);
}

double pairwise_latent_log_ratio(const Eigen::Ref<const Eigen::VectorXd>& z_new,
                                 const Eigen::Ref<const Eigen::VectorXd>& z_old,
                                 const GaussianMixture& adapted) {
  if (adapted.shared_covariance()) {
    return shared_covariance_score(z_old, adapted) - shared_covariance_score(z_new, adapted);
  }
  return latent_log_ratio(z_new, adapted) - latent_log_ratio(z_old, adapted);
}

nlohmann::json adapted_to_json(const AdaptedLatent& adapted) {
  nlohmann::json doc;
  doc["format"] = "s2m-adapted-latent";
  doc["version"] = 1;
  doc["mixture"] = mixture_to_json(adapted.model());
  doc["source_spec"] = format_spec(adapted.source_spec());
  doc["universe_size"] = adapted.source_spec().universe_size();
  doc["provenance"] = {{"seed", adapted.provenance().seed},
                       {"pilots", adapted.provenance().pilots},
                       {"rounds", adapted.provenance().rounds}};
  return doc;
}

AdaptedLatent adapted_from_json(const nlohmann::json& doc) {
  if (doc.value("format", std::string()) != "s2m-adapted-latent") {
    throw Error("not an adapted-latent document");
  }
  if (doc.value("version", 0) != 1) throw Error("unsupported adapted-latent version");
  const auto& prov = doc.at("provenance");
  return AdaptedLatent(
      mixture_from_json(doc.at("mixture")),
      parse_spec(doc.at("source_spec").get<std::string>(),
                 doc.at("universe_size").get<std::size_t>()),
      {prov.at("seed").get<std::uint64_t>(), prov.at("pilots").get<std::size_t>(),
       prov.at("rounds").get<std::size_t>()});
}

}  // namespace s2m
