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

// Sample-quality metrics over worlds made of labeled modes, and histogram
// total-variation estimates against exact densities.

#ifndef S2M_EVALUATION_HPP_
#define S2M_EVALUATION_HPP_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "s2m/joint_class.hpp"

namespace s2m {

struct Mode {
  Eigen::VectorXd center;
  /// Classes the mode belongs to.
  IndexSet labels;
};

class ModeWorld {
 public:
  ModeWorld(std::vector<Mode> modes, double sigma);

  const std::vector<Mode>& modes() const { return modes_; }
  std::size_t size() const { return modes_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(modes_.front().center.size()); }
  /// Generation-time standard deviation of every mode.
  double sigma() const { return sigma_; }

 private:
  std::vector<Mode> modes_;
  double sigma_;
};

/// Nearest center in Euclidean distance; ties go to the lowest index.
std::size_t assign_to_mode(const Eigen::Ref<const Eigen::VectorXd>& x, const ModeWorld& world);
std::vector<std::size_t> assign_to_modes(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                         const ModeWorld& world);

/// Fraction of samples whose nearest mode is admitted by `spec`.
double accuracy(const Eigen::Ref<const Eigen::MatrixXd>& points, const ModeWorld& world,
                const JointClassSpec& spec);

/// Fraction of samples within 4 sigma of their nearest mode.
double high_quality_ratio(const Eigen::Ref<const Eigen::MatrixXd>& points,
                          const ModeWorld& world);

/// sqrt of the mean squared per-axis deviation from the nearest center,
/// pooled over axes, samples and modes.
double mode_std(const Eigen::Ref<const Eigen::MatrixXd>& points, const ModeWorld& world);

std::vector<std::size_t> mode_counts(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                     const ModeWorld& world);

struct Binning {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t bins = 64;
  /// Midpoint-rule subdivisions per bin for exact bin masses.
  std::size_t subdivisions = 8;

  void validate() const;
  double width() const { return (hi - lo) / static_cast<double>(bins); }
};

/// Bin frequencies of the samples; the last entry (index `bins`) is the
/// overflow bin for samples outside [lo, hi).
std::vector<double> histogram(std::span<const double> samples, const Binning& binning);

/// Bin masses of a (possibly unnormalized) density by the midpoint rule,
/// normalized over [lo, hi); the overflow entry is 0.
std::vector<double> exact_bin_masses(const std::function<double(double)>& density,
                                     const Binning& binning);

/// Half the L1 distance between two distributions on the same bins.
double tv_distance(std::span<const double> p, std::span<const double> q);

/// tv_distance(histogram(samples), exact_bin_masses(density)).
double tv_histogram(std::span<const double> samples,
                    const std::function<double(double)>& density, const Binning& binning);

/// TV(t) for per-step snapshots of many parallel chains.
std::vector<double> convergence_curve(const std::vector<std::vector<double>>& snapshots,
                                      const std::function<double(double)>& density,
                                      const Binning& binning);

struct EvalReport {
  std::string spec;
  /// "s2m" for sampler output, "raw" for unfiltered generator draws.
  std::string source = "s2m";
  std::size_t samples = 0;
  double accuracy = 0.0;
  double high_quality = 0.0;
  double mode_std = 0.0;
  std::vector<std::size_t> mode_counts;
  std::optional<double> tv_distance;
  std::vector<double> acceptance_curve;
  double acceptance_rate = 0.0;
  /// Fraction of chain states admitted by the spec after step t (t = 0 is
  /// initialization), when recorded.
  std::vector<double> accuracy_curve;
  /// TV(t) of the step-t marginal, when recorded.
  std::vector<double> tv_curve;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalReport evaluate_samples(const Eigen::Ref<const Eigen::MatrixXd>& points,
                            const ModeWorld& world, const JointClassSpec& spec,
                            std::span<const std::string> class_names = {});

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

/// Fixed-width text table, one row per report.
std::string render_table(std::span<const EvalReport> reports);

}  // namespace s2m

#endif  // S2M_EVALUATION_HPP_
