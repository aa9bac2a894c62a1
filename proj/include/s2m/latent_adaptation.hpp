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

// Latent-adapted proposals: acceptance with the latent density-ratio
// correction, and the repeated schedule that grows the target one attribute
// per round, refitting the latent mixture on each round's chain output.

#ifndef S2M_LATENT_ADAPTATION_HPP_
#define S2M_LATENT_ADAPTATION_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "s2m/densities.hpp"
#include "s2m/latent_model.hpp"
#include "s2m/ratio_provider.hpp"
#include "s2m/sampler.hpp"

namespace s2m {

/// The unconditional acceptance times (p_z(z')/p~_z(z')) / (p_z(z)/p~_z(z)).
/// Both points must carry latents.
double acceptance_adapted(const DataPoint& proposal, const ChainState& state,
                          const JointClassSpec& spec, const RatioProvider& provider,
                          const AdaptedLatent& adapted,
                          const CalibrationParams& calibration = {});

struct AdaptationConfig {
  EmConfig em;
  /// Pilot latents per round (m).
  std::size_t pilots = 10000;
  /// Attribute order; round r targets the first r + 1 entries, each keeping
  /// its side (intersection or difference) of the final spec. Empty means
  /// the intersection ascending, then the difference ascending. The first
  /// entry must be an intersection member.
  std::vector<std::size_t> schedule;
  /// false: a single round on the full spec.
  bool incremental = true;
  /// Chain length per round is the smallest K with (1 - alpha)^K <= epsilon,
  /// alpha estimated from `probe` proposals.
  double epsilon = 0.01;
  std::size_t probe = 2000;
  std::size_t max_iterations = 2000;
  std::size_t max_init_attempts = 100000;
  CalibrationParams calibration;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdaptationRound {
  JointClassSpec spec;
  double alpha = 0.0;
  std::size_t iterations = 0;
  std::size_t probe_draws = 0;
  std::size_t init_draws = 0;
  std::size_t mh_steps = 0;

  std::size_t draws() const { return probe_draws + init_draws + mh_steps; }
};

struct AdaptationResult {
  AdaptedLatent latent;
  std::vector<AdaptationRound> rounds;

  /// Every generator proposal consumed: probes, initialization and MH steps.
  std::size_t total_draws() const;
};

/// The per-round specs of the schedule for `spec`.
std::vector<JointClassSpec> adaptation_schedule(const JointClassSpec& spec,
                                                const AdaptationConfig& config);

/// Runs the schedule. Throws InitializationExhausted naming the partial spec
/// reached when a round cannot initialize.
AdaptationResult repeated_adaptation(const SyntheticGenerator& generator,
                                     const RatioProvider& provider, const JointClassSpec& spec,
                                     const AdaptationConfig& config);

}  // namespace s2m

#endif  // S2M_LATENT_ADAPTATION_HPP_
