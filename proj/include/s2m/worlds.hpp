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

// Synthetic worlds built from labeled Gaussian modes. Each mode carries the
// set of classes it belongs to; class k's density is the mixture of the
// modes labeled k, p(x | y_k = 1) = sum_{m : k in S_m} w_m N(x; c_m, s^2 I) / pi_k
// with pi_k = sum_{m : k in S_m} w_m. Every mode lies in exactly one joint
// class, so the joint-class formula is exact on these worlds.

#ifndef S2M_WORLDS_HPP_
#define S2M_WORLDS_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "s2m/densities.hpp"
#include "s2m/evaluation.hpp"
#include "s2m/joint_class.hpp"

namespace s2m {

struct ModeDefinition {
  Eigen::VectorXd center;
  IndexSet labels;
  double weight = 1.0;

  friend bool operator==(const ModeDefinition&, const ModeDefinition&) = default;
};

struct WorldDefinition {
  enum class Generator {
    /// The generator reproduces the mode population (weights w_m).
    kPopulation,
    /// The generator reproduces the single-positive data marginal
    /// sum_k p_data(k) p(x | y_k = 1).
    kDataMarginal,
  };

  std::string name;
  std::vector<std::string> class_names;
  std::vector<ModeDefinition> modes;
  double mode_std = 0.05;
  /// p_data(k); empty means uniform.
  std::vector<double> observed_priors;
  double spurious_mass = 0.0;
  /// Background component N(mean, std^2 I); an empty mean means the
  /// centroid of the modes.
  Eigen::VectorXd background_mean;
  double background_std = 1.0;
  /// Conditional generator with p_G(. | c) = (1 - s) p(x | y_c = 1) + s bg.
  bool conditional = false;
  Generator generator = Generator::kPopulation;

  std::size_t class_count() const { return class_names.size(); }
  std::size_t dim() const;
  void validate() const;

  friend bool operator==(const WorldDefinition&, const WorldDefinition&) = default;
};

struct World {
  WorldDefinition definition;
  LabeledDensityFamily family;
  SyntheticGenerator generator;
  ModeWorld modes;

  /// Mass of the joint class under the mode population.
  double population_mass(const JointClassSpec& spec) const;
  /// Mass the generator puts on modes admitted by the spec (background
  /// excluded).
  double generator_mass(const JointClassSpec& spec) const;
  JointClassSpec parse(const std::string& spec_text) const;
  std::string format(const JointClassSpec& spec) const;
};

/// Builds densities and generator; checks generator support containment.
World build_world(const WorldDefinition& definition);

/// Three modes at -2 {A}, 0 {A, B}, +2 {B}, sd 0.25, equal weights; the
/// background is N(0, 2^2).
WorldDefinition fig2_world(double spurious_mass = 0.1);

/// Two 4 x 4 grids with unit spacing, A on {0..3}^2 and B on {1..4}^2,
/// sharing a 3 x 3 block: 23 equally weighted modes, sd 0.05. The background
/// is N((2, 2), 1.5^2 I).
WorldDefinition gaussians_2x16_world(double spurious_mass = 0.15);

/// One mode per label subset of `attributes` independent attributes, each
/// present with probability q; modes on a unit grid with sd 0.025.
WorldDefinition attribute_world(std::size_t attributes = 3, double q = 0.3);

/// A at 0 with weight alpha and B at 3 with weight 1 - alpha, sd 0.25,
/// p_data = (alpha, 1 - alpha) and no background, so p_G = p_data and spec
/// +A-B has proposal mass alpha.
WorldDefinition convergence_world(double alpha);

/// Builtin by name: "fig2-1d", "gaussians-2x16", "attributes",
/// "convergence". `params` may set spurious_mass, attributes, q, alpha.
WorldDefinition builtin_world(const std::string& name, const nlohmann::json& params = {});

/// {"format": "s2m-world", "version": 1, "name", "class_names", "mode_std",
///  "modes": [{"center": [...], "labels": ["A", ...], "weight"}],
///  "observed_priors", "spurious_mass", "background": {"mean", "std"},
///  "conditional", "generator": "population" | "data"}
nlohmann::json world_to_json(const WorldDefinition& definition);
WorldDefinition world_from_json(const nlohmann::json& doc);

}  // namespace s2m

#endif  // S2M_WORLDS_HPP_
