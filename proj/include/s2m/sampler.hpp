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

// Independence Metropolis-Hastings over generator proposals. Every point gets
// a log weight
//
//   w(x) = log r(x) - log(1/D_v(x) - 1) - log D_f(c|x) + log p_z(z)/p~_z(z)
//
// (the last two terms only for conditional and latent-adapted proposals)
// and a move x -> x' is accepted with probability min(1, exp(w(x') - w(x))).
// r(x) is the joint-class formula applied to gamma_k D_r(k|x); r = 0 is
// carried as -infinity and rejects before any subtraction.

#ifndef S2M_SAMPLER_HPP_
#define S2M_SAMPLER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "s2m/densities.hpp"
#include "s2m/joint_class.hpp"
#include "s2m/latent_model.hpp"
#include "s2m/numeric.hpp"
#include "s2m/random.hpp"
#include "s2m/ratio_provider.hpp"

namespace s2m {

struct UnconditionalMode {};

/// Proposals from p_G(. | c); adds the D_f correction.
struct ConditionalMode {
  std::size_t condition = 0;
};

/// Proposals z ~ p~_z pushed through the generator; adds the latent ratio.
struct LatentAdaptedMode {
  std::shared_ptr<const AdaptedLatent> adapted;
};

using ProposalMode = std::variant<UnconditionalMode, ConditionalMode, LatentAdaptedMode>;

enum class Emission {
  /// Every sample is a new chain: initialize, run K steps, emit.
  kFreshChain,
  /// Each chain emits its state every K steps and keeps going.
  kContinuedChain,
};

enum class InitPolicy {
  /// Draw proposals until r > 0 before the first MH step.
  kSupport,
  /// Start from the first proposal whatever its r; a chain outside the
  /// support accepts the first proposal inside it. Emission still waits
  /// until the chain is inside the support.
  kFirstProposal,
};

struct SamplerConfig {
  /// K, MH steps per emitted sample.
  std::size_t iterations = 100;
  /// Parallel chains for continued emission; fresh emission uses one chain
  /// per sample.
  std::size_t chains = 1;
  std::size_t samples = 1;
  JointClassSpec spec;
  ProposalMode mode;
  CalibrationParams calibration;
  std::uint64_t seed = 0;
  Emission emission = Emission::kFreshChain;
  InitPolicy init = InitPolicy::kSupport;
  std::size_t max_init_attempts = 100000;
  /// When set, every chain starts here instead of being initialized.
  std::optional<Eigen::VectorXd> initial_point;
  /// Chains advanced together through one batched provider call.
  std::size_t block_size = 512;

  void validate(const SyntheticGenerator& generator, const RatioProvider& provider) const;
};

struct PointScore {
  double log_r = kNegInf;
  double log_dv_odds = 0.0;
  double log_df = 0.0;
  double log_latent = 0.0;

  double log_weight() const { return log_r - log_dv_odds - log_df + log_latent; }
};

struct ChainState {
  DataPoint current;
  std::size_t condition = 0;
  PointScore score;
  std::size_t step = 0;
  std::size_t accepted = 0;
  std::size_t init_draws = 0;

  bool in_support() const { return score.log_r > kNegInf; }
};

struct ChainDiagnostics {
  /// Mean acceptance probability over chains at MH step t (index t - 1).
  std::vector<double> mean_acceptance;
  std::size_t chains = 0;
  std::size_t mh_steps = 0;
  std::size_t accepted = 0;
  /// Proposals drawn while initializing, summed over chains.
  std::size_t init_draws = 0;
  std::vector<std::size_t> init_draws_per_chain;

  double acceptance_rate() const {
    return mh_steps ? static_cast<double>(accepted) / static_cast<double>(mh_steps) : 0.0;
  }
  /// MH steps plus initialization draws.
  std::size_t total_draws() const { return mh_steps + init_draws; }
};

struct SamplerResult {
  /// Emitted samples, one column each.
  Eigen::MatrixXd points;
  /// Latents of the emitted samples; zero rows when chains carry none.
  Eigen::MatrixXd latents;
  std::vector<double> log_r;
  std::vector<std::size_t> chain_ids;
  /// MH steps the chain had taken when the sample was emitted.
  std::vector<std::size_t> steps;
  /// The chain's accepted / steps at emission.
  std::vector<double> acceptance_rate;
  ChainDiagnostics diagnostics;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
};

/// Called after initialization (step 0) and after every MH step with the
/// states of a block of chains whose first global index is `first_chain`.
using StepObserver = std::function<void(std::size_t step, std::size_t first_chain,
                                        std::span<const ChainState> states)>;

/// log r from a posterior column: log of the joint-class formula applied to
/// gamma_k D_r(k | x); -infinity when it is zero.
double log_r_factor(std::span<const double> dr, std::span<const double> gammas,
                    const JointClassSpec& spec);
double log_r_factor(const Eigen::Ref<const Eigen::VectorXd>& x, const JointClassSpec& spec,
                    const RatioProvider& provider, const CalibrationParams& calibration = {});

/// min(1, exp(w(x') - w(x))); 0 when r(x') = 0 and 1 when r(x) = 0 < r(x').
double acceptance_probability(const PointScore& current, const PointScore& proposal);

/// Scores x under the given proposal mode. `condition` is the generator
/// condition x was drawn under (used by ConditionalMode). Throws
/// ProviderContractViolation for non-finite D_v odds, or for D_f(c|x) = 0 in
/// conditional mode.
PointScore score_point(const DataPoint& point, std::size_t condition,
                       const JointClassSpec& spec, const RatioProvider& provider,
                       const CalibrationParams& calibration, const ProposalMode& mode);

double acceptance_unconditional(const DataPoint& proposal, const ChainState& state,
                                const JointClassSpec& spec, const RatioProvider& provider,
                                const CalibrationParams& calibration = {});

double acceptance_conditional(const DataPoint& proposal, const ChainState& state,
                              const JointClassSpec& spec, const RatioProvider& provider,
                              std::size_t condition,
                              const CalibrationParams& calibration = {});

/// Draws proposals until r > 0. Throws InitializationExhausted after
/// `max_attempts` draws.
ChainState initialize_chain(const SyntheticGenerator& generator, const JointClassSpec& spec,
                            const RatioProvider& provider, RandomStream& rng,
                            std::size_t max_attempts,
                            const CalibrationParams& calibration = {},
                            const ProposalMode& mode = {});

/// Draws `count` proposals under config.mode from the stream
/// derive_seed(config.seed, 2^64 - 1) and scores them.
std::vector<PointScore> probe_proposals(const SamplerConfig& config,
                                        const SyntheticGenerator& generator,
                                        const RatioProvider& provider, std::size_t count);

/// Fraction of proposals that belong to the target, judged by the
/// data-space weight w(x) without the latent term (the target density over
/// the generator density, up to a constant): members have a weight at least
/// `relative` times the largest one. This is the alpha of the bound
/// TV(t) <= (1 - alpha)^t when the proposal matches the data within the
/// target; the threshold keeps far tails of smooth densities, where the
/// weight is positive but negligible, from counting. 0 when no proposal has
/// r > 0.
double estimate_alpha(std::span<const PointScore> scores, double relative = 1e-3);

/// Smallest K with (1 - alpha)^K <= epsilon, clamped to [1, max_iterations].
std::size_t iterations_for_tolerance(double alpha, double epsilon, std::size_t max_iterations);

/// One chain driven by `rng`, emitting config.samples samples (re-initialized
/// per sample under fresh emission).
SamplerResult run_chain(const SamplerConfig& config, const SyntheticGenerator& generator,
                        const RatioProvider& provider, RandomStream& rng,
                        const StepObserver& observer = {});

/// All chains, each with its own stream RandomStream(derive_seed(seed, chain)).
/// Output order is by chain, then by emission.
SamplerResult run_sampler(const SamplerConfig& config, const SyntheticGenerator& generator,
                          const RatioProvider& provider, const StepObserver& observer = {});

}  // namespace s2m

#endif  // S2M_SAMPLER_HPP_
