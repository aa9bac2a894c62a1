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

#include "s2m/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "s2m/errors.hpp"

namespace s2m {
namespace {

struct Proposal {
  DataPoint point;
  std::size_t condition = 0;
};

struct Emitted {
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  double log_r;
  std::size_t chain;
  std::size_t steps;
  double rate;
};

struct Tally {
  std::vector<double> acceptance_sum;
  std::vector<double> acceptance_count;
  ChainDiagnostics diagnostics;
};

const AdaptedLatent* adapted_of(const ProposalMode& mode) {
  if (const auto* a = std::get_if<LatentAdaptedMode>(&mode)) return a->adapted.get();
  return nullptr;
}

// Scores the columns of `points` (latents alongside, when adapted).
void score_columns(const Eigen::Ref<const Eigen::MatrixXd>& points,
                   const Eigen::Ref<const Eigen::MatrixXd>& latents,
                   std::span<const std::size_t> conditions, const JointClassSpec& spec,
                   const RatioProvider& provider, const CalibrationParams& calibration,
                   const ProposalMode& mode, std::span<const double> gammas,
                   RatioBatch& batch, std::vector<PointScore>& out) {
  provider.evaluate(points, calibration, batch);
  const auto count = points.cols();
  out.resize(static_cast<std::size_t>(count));
  const bool conditional =
      std::holds_alternative<ConditionalMode>(mode) && provider.condition_count() > 0;
  const AdaptedLatent* adapted = adapted_of(mode);
  Eigen::VectorXd latent_weights;
  if (adapted != nullptr) latent_weights = adapted->log_weights(latents);
  const std::size_t n = provider.class_count();
  std::vector<double> column(n);
  for (Eigen::Index j = 0; j < count; ++j) {
    PointScore& s = out[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < n; ++k) column[k] = batch.dr(static_cast<Eigen::Index>(k), j);
    s.log_r = log_r_factor(column, gammas, spec);
    s.log_dv_odds = batch.log_dv_odds[j];
    if (!std::isfinite(s.log_dv_odds)) {
      throw ProviderContractViolation("D_v left the open interval (0, 1)");
    }
    s.log_df = 0.0;
    if (conditional) {
      const double df = batch.df(static_cast<Eigen::Index>(conditions[static_cast<std::size_t>(j)]), j);
      if (!(df > 0.0)) {
        throw ProviderContractViolation("D_f(c | x) = 0 at a point proposed under condition c");
      }
      s.log_df = std::log(df);
    }
    s.log_latent = adapted != nullptr ? latent_weights[j] : 0.0;
  }
}

class Engine {
 public:
  Engine(const SamplerConfig& config, const SyntheticGenerator& generator,
         const RatioProvider& provider)
      : config_(config),
        generator_(generator),
        provider_(provider),
        gammas_(provider.gammas(config.calibration)),
        adapted_(adapted_of(config.mode)) {
    if (const auto* c = std::get_if<ConditionalMode>(&config.mode)) {
      fixed_condition_ = c->condition;
    }
  }

  const SamplerConfig& config() const { return config_; }

  Proposal draw(RandomStream& rng) const {
    Proposal p;
    if (fixed_condition_) {
      p.condition = *fixed_condition_;
    } else if (generator_.condition_count() > 1) {
      const double u = rng.uniform();
      double running = 0.0;
      p.condition = generator_.condition_count() - 1;
      for (std::size_t c = 0; c < generator_.condition_count(); ++c) {
        running += generator_.condition_prior(c);
        if (u < running) {
          p.condition = c;
          break;
        }
      }
    }
    if (adapted_ != nullptr && !adapted_->is_prior()) {
      p.point.z = adapted_->model().sample(rng);
    } else {
      p.point.z.resize(static_cast<Eigen::Index>(generator_.latent_dim()));
      for (Eigen::Index i = 0; i < p.point.z.size(); ++i) p.point.z[i] = rng.normal();
    }
    p.point.x = generator_.map_latent(p.point.z, p.condition);
    return p;
  }

  void score(std::span<const Proposal> proposals, std::vector<PointScore>& out) {
    const auto count = static_cast<Eigen::Index>(proposals.size());
    points_.resize(static_cast<Eigen::Index>(generator_.dim()), count);
    conditions_.resize(proposals.size());
    const bool latent = adapted_ != nullptr;
    latents_.resize(latent ? static_cast<Eigen::Index>(generator_.latent_dim()) : 0, count);
    for (Eigen::Index j = 0; j < count; ++j) {
      const Proposal& p = proposals[static_cast<std::size_t>(j)];
      points_.col(j) = p.point.x;
      if (latent) {
        if (!p.point.has_latent()) throw Error("latent-adapted chains need latents");
        latents_.col(j) = p.point.z;
      }
      conditions_[static_cast<std::size_t>(j)] = p.condition;
    }
    score_columns(points_, latents_, conditions_, config_.spec, provider_, config_.calibration,
                  config_.mode, gammas_, batch_, out);
  }

  // Brings every state to its starting point.
  void initialize(std::span<ChainState> states, std::span<RandomStream* const> rngs) {
    for (ChainState& s : states) s = ChainState{};
    if (config_.initial_point) {
      std::vector<Proposal> start(states.size());
      for (auto& p : start) {
        p.point.x = *config_.initial_point;
        p.condition = fixed_condition_.value_or(0);
      }
      score(start, scores_);
      for (std::size_t i = 0; i < states.size(); ++i) {
        if (!(scores_[i].log_r > kNegInf)) {
          throw InitializationExhausted(0, "the configured initial point has r = 0");
        }
        states[i].current = start[i].point;
        states[i].condition = start[i].condition;
        states[i].score = scores_[i];
      }
      return;
    }
    std::vector<std::size_t> pending(states.size());
    for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;
    const bool anywhere = config_.init == InitPolicy::kFirstProposal;
    for (std::size_t attempt = 0; !pending.empty(); ++attempt) {
      if (attempt == config_.max_init_attempts) {
        throw InitializationExhausted(
            attempt, "no proposal with r > 0 for " + format_spec(config_.spec) + " in " +
                         std::to_string(attempt) + " draws");
      }
      proposals_.resize(pending.size());
      for (std::size_t i = 0; i < pending.size(); ++i) proposals_[i] = draw(*rngs[pending[i]]);
      score(proposals_, scores_);
      std::vector<std::size_t> still;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        ChainState& s = states[pending[i]];
        ++s.init_draws;
        if (anywhere || scores_[i].log_r > kNegInf) {
          s.current = std::move(proposals_[i].point);
          s.condition = proposals_[i].condition;
          s.score = scores_[i];
        } else {
          still.push_back(pending[i]);
        }
      }
      pending.swap(still);
    }
  }

  // One MH step for the chains in `active`; returns their acceptance
  // probabilities.
  const std::vector<double>& step(std::span<ChainState> states,
                                  std::span<RandomStream* const> rngs,
                                  std::span<const std::size_t> active) {
    proposals_.resize(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) proposals_[i] = draw(*rngs[active[i]]);
    score(proposals_, scores_);
    alphas_.resize(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
      ChainState& s = states[active[i]];
      const double alpha = acceptance_probability(s.score, scores_[i]);
      const double u = rngs[active[i]]->uniform();
      alphas_[i] = alpha;
      ++s.step;
      if (alpha > 0.0 && u <= alpha) {
        s.current = std::move(proposals_[i].point);
        s.condition = proposals_[i].condition;
        s.score = scores_[i];
        ++s.accepted;
      }
    }
    return alphas_;
  }

  // Steps chains outside the support until they are inside it.
  void ensure_support(std::span<ChainState> states, std::span<RandomStream* const> rngs,
                      Tally& tally) {
    for (std::size_t extra = 0;; ++extra) {
      std::vector<std::size_t> outside;
      for (std::size_t i = 0; i < states.size(); ++i) {
        if (!states[i].in_support()) outside.push_back(i);
      }
      if (outside.empty()) return;
      if (extra == config_.max_init_attempts) {
        throw InitializationExhausted(
            extra, "chains never reached r > 0 for " + format_spec(config_.spec));
      }
      step(states, rngs, outside);
      tally.diagnostics.mh_steps += outside.size();
    }
  }

 private:
  const SamplerConfig& config_;
  const SyntheticGenerator& generator_;
  const RatioProvider& provider_;
  std::vector<double> gammas_;
  const AdaptedLatent* adapted_;
  std::optional<std::size_t> fixed_condition_;

  Eigen::MatrixXd points_;
  Eigen::MatrixXd latents_;
  std::vector<std::size_t> conditions_;
  RatioBatch batch_;
  std::vector<Proposal> proposals_;
  std::vector<PointScore> scores_;
  std::vector<double> alphas_;
};

// Runs `rounds` emissions of K steps for a block of chains.
void run_block(Engine& engine, std::span<RandomStream* const> rngs, std::size_t first_chain,
               std::size_t rounds, const StepObserver& observer, Tally& tally,
               std::vector<Emitted>& emitted) {
  const std::size_t k = engine.config().iterations;
  std::vector<ChainState> states(rngs.size());
  engine.initialize(states, rngs);
  for (const ChainState& s : states) {
    tally.diagnostics.init_draws += s.init_draws;
    tally.diagnostics.init_draws_per_chain.push_back(s.init_draws);
  }
  tally.diagnostics.chains += states.size();
  if (observer) observer(0, first_chain, states);

  std::vector<std::size_t> all(states.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::vector<Emitted>> per_chain(states.size());
  if (tally.acceptance_sum.size() < rounds * k) {
    tally.acceptance_sum.resize(rounds * k, 0.0);
    tally.acceptance_count.resize(rounds * k, 0.0);
  }
  std::size_t global_step = 0;
  for (std::size_t round = 0; round < rounds; ++round) {
    for (std::size_t t = 0; t < k; ++t, ++global_step) {
      const auto& alphas = engine.step(states, rngs, all);
      double sum = 0.0;
      for (double a : alphas) sum += a;
      tally.acceptance_sum[global_step] += sum;
      tally.acceptance_count[global_step] += static_cast<double>(alphas.size());
      if (observer) observer(global_step + 1, first_chain, states);
    }
    engine.ensure_support(states, rngs, tally);
    for (std::size_t i = 0; i < states.size(); ++i) {
      const ChainState& s = states[i];
      per_chain[i].push_back({s.current.x, s.current.z, s.score.log_r, first_chain + i, s.step,
                              s.step ? static_cast<double>(s.accepted) / s.step : 0.0});
    }
  }
  for (const ChainState& s : states) {
    tally.diagnostics.mh_steps += rounds * k;
    tally.diagnostics.accepted += s.accepted;
  }
  for (auto& chain : per_chain) {
    for (auto& e : chain) emitted.push_back(std::move(e));
  }
}

SamplerResult assemble(std::vector<Emitted>& emitted, Tally& tally, std::size_t limit) {
  if (emitted.size() > limit) emitted.resize(limit);
  SamplerResult result;
  const auto n = static_cast<Eigen::Index>(emitted.size());
  const Eigen::Index d = n ? emitted.front().x.size() : 0;
  const Eigen::Index dz = n ? emitted.front().z.size() : 0;
  result.points.resize(d, n);
  result.latents.resize(dz, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Emitted& e = emitted[static_cast<std::size_t>(j)];
    result.points.col(j) = e.x;
    if (dz > 0 && e.z.size() == dz) result.latents.col(j) = e.z;
    result.log_r.push_back(e.log_r);
    result.chain_ids.push_back(e.chain);
    result.steps.push_back(e.steps);
    result.acceptance_rate.push_back(e.rate);
  }
  result.diagnostics = std::move(tally.diagnostics);
  result.diagnostics.mean_acceptance.resize(tally.acceptance_sum.size());
  for (std::size_t t = 0; t < tally.acceptance_sum.size(); ++t) {
    result.diagnostics.mean_acceptance[t] =
        tally.acceptance_count[t] > 0 ? tally.acceptance_sum[t] / tally.acceptance_count[t] : 0.0;
  }
  return result;
}

}  // namespace

void SamplerConfig::validate(const SyntheticGenerator& generator,
                             const RatioProvider& provider) const {
  if (iterations < 1) throw ConfigError("iterations", "K must be at least 1");
  if (chains < 1) throw ConfigError("chains", "must be at least 1");
  if (samples < 1) throw ConfigError("samples", "must be at least 1");
  if (block_size < 1) throw ConfigError("block_size", "must be at least 1");
  if (max_init_attempts < 1) throw ConfigError("max_init_attempts", "must be at least 1");
  if (spec.universe_size() != provider.class_count()) {
    throw ConfigError("spec", "spec universe does not match the provider's class count");
  }
  if (provider.dim() != generator.dim()) {
    throw DimensionMismatch("provider and generator dimensions differ");
  }
  calibration.validate(provider.class_count());
  if (const auto* c = std::get_if<ConditionalMode>(&mode)) {
    if (!generator.conditional() || c->condition >= generator.condition_count()) {
      throw ConfigError("condition", "generator has no condition " +
                                         std::to_string(c->condition));
    }
  }
  if (const auto* a = std::get_if<LatentAdaptedMode>(&mode)) {
    if (!a->adapted) throw ConfigError("mode", "latent-adapted mode needs a model");
    if (a->adapted->dim() != generator.latent_dim()) {
      throw DimensionMismatch("adapted latent dimension does not match the generator");
    }
    if (initial_point) {
      throw ConfigError("initial_point", "not available with latent-adapted proposals");
    }
  }
  if (initial_point && static_cast<std::size_t>(initial_point->size()) != generator.dim()) {
    throw DimensionMismatch("initial point dimension does not match the generator");
  }
}

double log_r_factor(std::span<const double> dr, std::span<const double> gammas,
                    const JointClassSpec& spec) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i : spec.intersection()) lo = std::min(lo, gammas[i] * dr[i]);
  double hi = 0.0;
  for (std::size_t j : spec.difference()) hi = std::max(hi, gammas[j] * dr[j]);
  const double r = std::max(lo - hi, 0.0);
  return r > 0.0 ? std::log(r) : kNegInf;
}

double log_r_factor(const Eigen::Ref<const Eigen::VectorXd>& x, const JointClassSpec& spec,
                    const RatioProvider& provider, const CalibrationParams& calibration) {
  const Eigen::VectorXd dr = provider.dr(x, calibration);
  const auto gammas = provider.gammas(calibration);
  return log_r_factor(std::span<const double>(dr.data(), static_cast<std::size_t>(dr.size())),
                      gammas, spec);
}

double acceptance_probability(const PointScore& current, const PointScore& proposal) {
  if (!(proposal.log_r > kNegInf)) return 0.0;
  if (!(current.log_r > kNegInf)) return 1.0;
  const double delta = proposal.log_weight() - current.log_weight();
  return delta >= 0.0 ? 1.0 : std::exp(delta);
}

PointScore score_point(const DataPoint& point, std::size_t condition,
                       const JointClassSpec& spec, const RatioProvider& provider,
                       const CalibrationParams& calibration, const ProposalMode& mode) {
  const auto gammas = provider.gammas(calibration);
  const std::size_t c[1] = {condition};
  Eigen::MatrixXd latents(point.z.size(), 1);
  if (point.has_latent()) latents.col(0) = point.z;
  if (adapted_of(mode) != nullptr && !point.has_latent()) {
    throw Error("latent-adapted scoring needs a latent");
  }
  RatioBatch batch;
  std::vector<PointScore> out;
  score_columns(point.x, latents, c, spec, provider, calibration, mode, gammas, batch, out);
  return out.front();
}

double acceptance_unconditional(const DataPoint& proposal, const ChainState& state,
                                const JointClassSpec& spec, const RatioProvider& provider,
                                const CalibrationParams& calibration) {
  const ProposalMode mode = UnconditionalMode{};
  return acceptance_probability(
      score_point(state.current, 0, spec, provider, calibration, mode),
      score_point(proposal, 0, spec, provider, calibration, mode));
}

double acceptance_conditional(const DataPoint& proposal, const ChainState& state,
                              const JointClassSpec& spec, const RatioProvider& provider,
                              std::size_t condition, const CalibrationParams& calibration) {
  const ProposalMode mode = ConditionalMode{condition};
  const PointScore proposed = score_point(proposal, condition, spec, provider, calibration, mode);
  return acceptance_probability(
      score_point(state.current, condition, spec, provider, calibration, mode), proposed);
}

ChainState initialize_chain(const SyntheticGenerator& generator, const JointClassSpec& spec,
                            const RatioProvider& provider, RandomStream& rng,
                            std::size_t max_attempts, const CalibrationParams& calibration,
                            const ProposalMode& mode) {
  SamplerConfig config;
  config.spec = spec;
  config.mode = mode;
  config.calibration = calibration;
  config.max_init_attempts = max_attempts;
  config.validate(generator, provider);
  Engine engine(config, generator, provider);
  ChainState state;
  RandomStream* streams[1] = {&rng};
  engine.initialize(std::span<ChainState>(&state, 1), streams);
  return state;
}

std::vector<PointScore> probe_proposals(const SamplerConfig& config,
                                        const SyntheticGenerator& generator,
                                        const RatioProvider& provider, std::size_t count) {
  config.validate(generator, provider);
  Engine engine(config, generator, provider);
  RandomStream rng(derive_seed(config.seed, ~std::uint64_t{0}));
  std::vector<Proposal> proposals;
  proposals.reserve(count);
  for (std::size_t i = 0; i < count; ++i) proposals.push_back(engine.draw(rng));
  std::vector<PointScore> scores;
  engine.score(proposals, scores);
  return scores;
}

double estimate_alpha(std::span<const PointScore> scores, double relative) {
  if (!(relative > 0.0 && relative <= 1.0)) {
    throw ConfigError("relative", "must lie in (0, 1]");
  }
  const auto data_weight = [](const PointScore& s) {
    return s.log_r == kNegInf ? kNegInf : s.log_r - s.log_dv_odds - s.log_df;
  };
  double top = kNegInf;
  for (const auto& s : scores) top = std::max(top, data_weight(s));
  if (top == kNegInf) return 0.0;
  const double cut = top + std::log(relative);
  const auto hits = std::count_if(scores.begin(), scores.end(),
                                  [&](const PointScore& s) { return data_weight(s) >= cut; });
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

std::size_t iterations_for_tolerance(double alpha, double epsilon, std::size_t max_iterations) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon", "must lie in (0, 1)");
  }
  if (alpha >= 1.0) return 1;
  if (!(alpha > 0.0)) return max_iterations;
  const double k = std::ceil(std::log(epsilon) / std::log1p(-alpha));
  if (!(k < static_cast<double>(max_iterations))) return max_iterations;
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

SamplerResult run_chain(const SamplerConfig& config, const SyntheticGenerator& generator,
                        const RatioProvider& provider, RandomStream& rng,
                        const StepObserver& observer) {
  config.validate(generator, provider);
  Engine engine(config, generator, provider);
  RandomStream* streams[1] = {&rng};
  Tally tally;
  std::vector<Emitted> emitted;
  if (config.emission == Emission::kContinuedChain) {
    run_block(engine, streams, 0, config.samples, observer, tally, emitted);
  } else {
    for (std::size_t s = 0; s < config.samples; ++s) {
      run_block(engine, streams, s, 1, observer, tally, emitted);
    }
  }
  return assemble(emitted, tally, config.samples);
}

SamplerResult run_sampler(const SamplerConfig& config, const SyntheticGenerator& generator,
                          const RatioProvider& provider, const StepObserver& observer) {
  config.validate(generator, provider);
  Engine engine(config, generator, provider);
  const bool fresh = config.emission == Emission::kFreshChain;
  const std::size_t chains = fresh ? config.samples : config.chains;
  const std::size_t rounds = fresh ? 1 : (config.samples + chains - 1) / chains;
  Tally tally;
  std::vector<Emitted> emitted;
  emitted.reserve(chains * rounds);
  for (std::size_t first = 0; first < chains; first += config.block_size) {
    const std::size_t count = std::min(config.block_size, chains - first);
    std::vector<RandomStream> streams;
    streams.reserve(count);
    for (std::size_t i = 0; i < count; ++i) streams.emplace_back(derive_seed(config.seed, first + i));
    std::vector<RandomStream*> pointers(count);
    for (std::size_t i = 0; i < count; ++i) pointers[i] = &streams[i];
    run_block(engine, pointers, first, rounds, observer, tally, emitted);
  }
  return assemble(emitted, tally, config.samples);
}

}  // namespace s2m
