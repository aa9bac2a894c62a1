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

#include "s2m/latent_adaptation.hpp"

#include <algorithm>
#include <memory>
#include <string>

#include "s2m/errors.hpp"

namespace s2m {

double acceptance_adapted(const DataPoint& proposal, const ChainState& state,
                          const JointClassSpec& spec, const RatioProvider& provider,
                          const AdaptedLatent& adapted, const CalibrationParams& calibration) {
  // Non-owning handle; the mode only lives for this call.
  const ProposalMode mode =
      LatentAdaptedMode{std::shared_ptr<const AdaptedLatent>(std::shared_ptr<void>(), &adapted)};
  const PointScore proposed = score_point(proposal, 0, spec, provider, calibration, mode);
  return acceptance_probability(score_point(state.current, 0, spec, provider, calibration, mode),
                                proposed);
}

void AdaptationConfig::validate() const {
  em.validate();
  if (pilots < em.components) {
    throw ConfigError("adaptation.pilots", "must be at least the number of components");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("adaptation.epsilon", "must lie in (0, 1)");
  }
  if (probe < 1) throw ConfigError("adaptation.probe", "must be at least 1");
  if (max_iterations < 1) throw ConfigError("adaptation.max_iterations", "must be at least 1");
}

std::size_t AdaptationResult::total_draws() const {
  std::size_t total = 0;
  for (const auto& r : rounds) total += r.draws();
  return total;
}

std::vector<JointClassSpec> adaptation_schedule(const JointClassSpec& spec,
                                                const AdaptationConfig& config) {
  if (!config.incremental) return {spec};
  const IndexSet& in = spec.intersection();
  const IndexSet& out = spec.difference();
  std::vector<std::size_t> order = config.schedule;
  if (order.empty()) {
    order = in;
    order.insert(order.end(), out.begin(), out.end());
  }
  IndexSet all = in;
  all.insert(all.end(), out.begin(), out.end());
  std::sort(all.begin(), all.end());
  IndexSet sorted = order;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != all) {
    throw ConfigError("adaptation.schedule", "must order exactly the spec's classes");
  }
  if (!std::binary_search(in.begin(), in.end(), order.front())) {
    throw ConfigError("adaptation.schedule", "must start with an intersection class");
  }
  std::vector<JointClassSpec> rounds;
  IndexSet cur_in;
  IndexSet cur_out;
  for (std::size_t k : order) {
    (std::binary_search(in.begin(), in.end(), k) ? cur_in : cur_out).push_back(k);
    rounds.push_back(JointClassSpec::make(cur_in, cur_out, spec.universe_size()));
  }
  return rounds;
}

AdaptationResult repeated_adaptation(const SyntheticGenerator& generator,
                                     const RatioProvider& provider, const JointClassSpec& spec,
                                     const AdaptationConfig& config) {
  config.validate();
  const auto specs = adaptation_schedule(spec, config);
  std::shared_ptr<const AdaptedLatent> current;
  AdaptationResult result{AdaptedLatent::prior(generator.latent_dim()), {}};
  for (std::size_t round = 0; round < specs.size(); ++round) {
    SamplerConfig sampler;
    sampler.spec = specs[round];
    sampler.calibration = config.calibration;
    sampler.samples = config.pilots;
    sampler.max_init_attempts = config.max_init_attempts;
    sampler.seed = derive_seed(config.seed, round);
    if (current) {
      sampler.mode = LatentAdaptedMode{current};
    } else {
      sampler.mode = UnconditionalMode{};
    }

    AdaptationRound info;
    info.spec = specs[round];
    const auto probe = probe_proposals(sampler, generator, provider, config.probe);
    info.probe_draws = config.probe;
    info.alpha = estimate_alpha(probe);
    info.iterations = iterations_for_tolerance(info.alpha, config.epsilon, config.max_iterations);
    sampler.iterations = info.iterations;

    SamplerResult run;
    try {
      run = run_sampler(sampler, generator, provider);
    } catch (const InitializationExhausted& e) {
      throw InitializationExhausted(e.attempts(), "adaptation stopped at partial spec " +
                                                      format_spec(specs[round]) + ": " +
                                                      e.what());
    }
    info.init_draws = run.diagnostics.init_draws;
    info.mh_steps = run.diagnostics.mh_steps;
    result.rounds.push_back(info);

    EmConfig em = config.em;
    em.seed = derive_seed(config.em.seed, round);
    AdaptedLatent fitted = fit_gmm_em(run.latents, em);
    auto next = std::make_shared<AdaptedLatent>(
        fitted.model(), specs[round],
        AdaptationProvenance{config.seed, config.pilots, round + 1});
    next->objective_history = std::move(fitted.objective_history);
    next->log_likelihood_history = std::move(fitted.log_likelihood_history);
    current = next;
  }
  result.latent = *current;
  return result;
}

}  // namespace s2m
