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

// Config-driven experiment runner. One JSON document (format
// "s2m-experiment", version 1) names the world, the ratio backend, the specs
// to sample, sampler and calibration settings, optional latent adaptation,
// an optional sweep grid and the evaluation to perform. Field reference is in
// the README.
//
// Seeds: every stream derives from the top-level seed s:
//   real training data       derive_seed(s, 1)
//   network training         derive_seed(s, 2)
//   sampler, spec i          derive_seed(derive_seed(s, 3), i)
//   adaptation, spec i       derive_seed(derive_seed(s, 4), i)
//   raw baseline, spec i     derive_seed(derive_seed(s, 5), i)
//   sweep point p, spec i    derive_seed(derive_seed(derive_seed(s, 6), p), i)

#ifndef S2M_EXPERIMENT_HPP_
#define S2M_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2m/errors.hpp"
#include "s2m/evaluation.hpp"
#include "s2m/latent_adaptation.hpp"
#include "s2m/mlp.hpp"
#include "s2m/worlds.hpp"

namespace s2m {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// A pipeline failure tagged with the stage it happened in.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct WorldSource {
  /// Builtin world name, or empty when `file` is used.
  std::string builtin;
  nlohmann::json params = nlohmann::json::object();
  /// World JSON path; relative paths resolve against the config file.
  std::string file;

  friend bool operator==(const WorldSource&, const WorldSource&) = default;
};

struct BackendConfig {
  enum class Kind { kAnalytic, kLearned };
  Kind kind = Kind::kAnalytic;
  TrainingConfig training;
  /// Labeled real samples drawn from the world for training.
  std::size_t real_samples = 50000;
  /// Load this network instead of training (learned backend).
  std::string network_file;
  /// Write the trained network to the output directory.
  bool save_network = true;

  friend bool operator==(const BackendConfig&, const BackendConfig&) = default;
};

struct SamplerSection {
  std::size_t iterations = 100;
  std::size_t chains = 1;
  std::size_t samples = 10000;
  Emission emission = Emission::kFreshChain;
  InitPolicy init = InitPolicy::kSupport;
  std::size_t max_init_attempts = 100000;
  std::size_t block_size = 512;
  /// Conditional proposals from this generator condition.
  std::optional<std::size_t> condition;
  /// Every chain starts here instead of being initialized.
  std::optional<std::vector<double>> initial_point;

  friend bool operator==(const SamplerSection&, const SamplerSection&) = default;
};

struct CalibrationSection {
  double temperature_v = 1.0;
  double temperature_r = 1.0;
  double temperature_f = 1.0;
  /// Replaces every gamma_k when non-empty.
  std::vector<double> gamma_overrides;
  /// Multiplies gamma_i for i in the intersection of specs whose difference
  /// set is non-empty.
  double intersection_gamma_scale = 1.0;

  /// Calibration for one spec given the provider's default gammas.
  CalibrationParams resolve(const JointClassSpec& spec,
                            const std::vector<double>& default_gammas) const;

  friend bool operator==(const CalibrationSection&, const CalibrationSection&) = default;
};

struct AdaptationSection {
  EmConfig em;
  std::size_t pilots = 10000;
  /// Class names in schedule order; empty uses the default order.
  std::vector<std::string> schedule;
  bool incremental = true;
  double epsilon = 0.01;
  std::size_t probe = 2000;
  std::size_t max_iterations = 2000;

  friend bool operator==(const AdaptationSection&, const AdaptationSection&) = default;
};

struct SweepSection {
  std::vector<std::size_t> iterations;
  std::vector<double> temperature_v;
  std::vector<double> temperature_r;
  std::vector<double> temperature_f;
  std::vector<double> intersection_gamma_scale;

  /// Number of grid points (product of the non-empty axes).
  std::size_t points() const;
  friend bool operator==(const SweepSection&, const SweepSection&) = default;
};

struct TvSection {
  double lo = -4.0;
  double hi = 4.0;
  std::size_t bins = 64;

  friend bool operator==(const TvSection&, const TvSection&) = default;
};

struct EvaluationSection {
  /// 1D worlds only: histogram TV against the exact target.
  std::optional<TvSection> tv;
  /// Also record TV(t) of the step-t marginal for every step (1D, fresh
  /// emission).
  bool tv_curve = false;
  /// Also evaluate raw generator draws for each spec.
  bool raw_baseline = false;
  bool acceptance_curve = true;

  friend bool operator==(const EvaluationSection&, const EvaluationSection&) = default;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  WorldSource world;
  BackendConfig backend;
  std::vector<std::string> specs;
  SamplerSection sampler;
  CalibrationSection calibration;
  std::optional<AdaptationSection> adaptation;
  std::optional<SweepSection> sweep;
  EvaluationSection evaluation;
  std::string output_dir = "s2m-out";
  /// Directory of the config file, for resolving relative paths; not
  /// serialized.
  std::filesystem::path base_dir;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
/// Equal serializations (base_dir is not compared).
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
/// Strict parse: unknown keys and bad values throw ConfigError naming the
/// field path.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Structural checks plus world construction and spec parsing; throws
/// ConfigError or StageError.
void validate_config(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical config serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct AdaptationSummary {
  std::string spec;
  std::vector<AdaptationRound> rounds;
  std::size_t total_draws = 0;
  std::shared_ptr<const AdaptedLatent> latent;
};

struct SpecRun {
  std::string spec;
  SamplerResult samples;
};

struct RunResult {
  std::vector<EvalReport> reports;
  std::vector<AdaptationSummary> adaptation;
  std::vector<SpecRun> runs;
  /// Present when the learned backend trained a network.
  std::optional<TrainingReport> training;
};

struct SweepRow {
  std::size_t point = 0;
  std::string spec;
  std::size_t iterations = 0;
  double temperature_v = 1.0;
  double temperature_r = 1.0;
  double temperature_f = 1.0;
  double intersection_gamma_scale = 1.0;
  std::optional<EvalReport> report;
  /// Failure message when the point errored.
  std::string error;
};

/// Runs the pipeline in memory: world, backend, optional adaptation,
/// sampling, evaluation.
RunResult run_experiment(const ExperimentConfig& config);

/// One run per grid point (shared world and backend), per-point failures
/// recorded in the row. Throws ConfigError when the config has no grid.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string artifact_version = kArtifactVersion;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> files;
};

/// run_experiment, then writes report.json, samples.csv, diagnostics.csv,
/// network.json (trained network), latent-<i>.json (adapted latent of spec
/// i) and manifest.json into output_dir.
RunManifest run_and_write(const ExperimentConfig& config);
/// run_sweep, then writes sweep.csv and manifest.json.
RunManifest sweep_and_write(const ExperimentConfig& config);

nlohmann::json manifest_to_json(const RunManifest& manifest);

/// Reports (and adaptation summaries) as the report.json document.
nlohmann::json results_to_json(const RunResult& result);
/// Table text for a report.json document.
std::string render_report_file(const nlohmann::json& doc);

// CSV numbers use the shortest round-trip decimal form (format_double), so
// equal runs produce byte-identical files.

/// spec,chain,step,log_r,acceptance_rate,x0..x{d-1}; one row per emitted
/// sample, acceptance_rate being the chain's accepted / steps at emission.
std::string samples_csv(const RunResult& result);
/// spec,step,mean_acceptance,accuracy,tv; step 0 is initialization and has
/// no acceptance value. Empty cells were not recorded.
std::string diagnostics_csv(const RunResult& result);
/// point,spec,iterations,temperature_v,temperature_r,temperature_f,
/// intersection_gamma_scale,accuracy,high_quality,mode_std,acceptance_rate,
/// tv,error; one row per (grid point, spec).
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace s2m

#endif  // S2M_EXPERIMENT_HPP_
