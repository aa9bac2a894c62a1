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

#include "s2m/worlds.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "s2m/errors.hpp"

namespace s2m {
namespace {

Eigen::VectorXd point(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Eigen::VectorXd centroid(const WorldDefinition& def) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(def.dim()));
  for (const auto& m : def.modes) c += m.center;
  return c / static_cast<double>(def.modes.size());
}

std::vector<double> normalized(std::vector<double> w) {
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

std::size_t WorldDefinition::dim() const {
  return modes.empty() ? 0 : static_cast<std::size_t>(modes.front().center.size());
}

void WorldDefinition::validate() const {
  const std::size_t n = class_count();
  if (n == 0) throw ConfigError("world.class_names", "at least one class is required");
  if (modes.empty()) throw ConfigError("world.modes", "at least one mode is required");
  std::vector<bool> seen(n, false);
  for (const auto& m : modes) {
    if (m.center.size() != modes.front().center.size() || m.center.size() == 0) {
      throw ConfigError("world.modes", "centers must share one positive dimension");
    }
    if (!(m.weight > 0.0) || !std::isfinite(m.weight)) {
      throw ConfigError("world.modes", "weights must be positive");
    }
    for (std::size_t k : m.labels) {
      if (k >= n) throw ConfigError("world.modes", "label index out of range");
      seen[k] = true;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!seen[k]) throw ConfigError("world.modes", "class " + class_names[k] + " has no mode");
  }
  if (!(mode_std > 0.0)) throw ConfigError("world.mode_std", "must be positive");
  if (!observed_priors.empty()) {
    if (observed_priors.size() != n) {
      throw ConfigError("world.observed_priors", "one value per class is required");
    }
    double total = 0.0;
    for (double p : observed_priors) {
      if (!(p > 0.0)) throw ConfigError("world.observed_priors", "values must be positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("world.observed_priors", "values must sum to 1");
    }
  }
  if (!(spurious_mass >= 0.0 && spurious_mass < 1.0)) {
    throw ConfigError("world.spurious_mass", "must lie in [0, 1)");
  }
  if (background_mean.size() != 0 && static_cast<std::size_t>(background_mean.size()) != dim()) {
    throw ConfigError("world.background.mean", "dimension does not match the modes");
  }
  if (!(background_std > 0.0)) throw ConfigError("world.background.std", "must be positive");
}

World build_world(const WorldDefinition& def) {
  def.validate();
  const std::size_t n = def.class_count();
  double total_weight = 0.0;
  for (const auto& m : def.modes) total_weight += m.weight;

  std::vector<GaussianMixture> classes;
  std::vector<double> pis;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> w;
    std::vector<Eigen::VectorXd> mu;
    for (const auto& m : def.modes) {
      if (std::find(m.labels.begin(), m.labels.end(), k) == m.labels.end()) continue;
      w.push_back(m.weight);
      mu.push_back(m.center);
    }
    double pi = 0.0;
    for (double x : w) pi += x;
    pis.push_back(pi / total_weight);
    classes.push_back(GaussianMixture::isotropic(normalized(std::move(w)), std::move(mu),
                                                 def.mode_std));
  }
  std::vector<double> observed = def.observed_priors;
  if (observed.empty()) observed.assign(n, 1.0 / static_cast<double>(n));
  LabeledDensityFamily family(classes, pis, observed);

  std::optional<GaussianMixture> background;
  if (def.spurious_mass > 0.0) {
    const Eigen::VectorXd mean = def.background_mean.size() ? def.background_mean : centroid(def);
    background = GaussianMixture::isotropic({1.0}, {mean}, def.background_std);
  }

  std::optional<SyntheticGenerator> generator;
  if (def.conditional) {
    generator.emplace(classes, observed, def.spurious_mass, background);
  } else if (def.generator == WorldDefinition::Generator::kPopulation) {
    std::vector<double> w;
    std::vector<Eigen::VectorXd> mu;
    for (const auto& m : def.modes) {
      w.push_back(m.weight);
      mu.push_back(m.center);
    }
    generator.emplace(
        GaussianMixture::isotropic(normalized(std::move(w)), std::move(mu), def.mode_std),
        def.spurious_mass, background);
  } else {
    // sum_k p_data(k) p(x | y_k = 1), collapsed to one weight per mode.
    std::vector<double> w(def.modes.size(), 0.0);
    std::vector<Eigen::VectorXd> mu;
    for (std::size_t i = 0; i < def.modes.size(); ++i) {
      for (std::size_t k : def.modes[i].labels) {
        w[i] += observed[k] * def.modes[i].weight / (pis[k] * total_weight);
      }
      mu.push_back(def.modes[i].center);
    }
    std::vector<double> kept_w;
    std::vector<Eigen::VectorXd> kept_mu;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] > 0.0) {
        kept_w.push_back(w[i]);
        kept_mu.push_back(mu[i]);
      }
    }
    generator.emplace(GaussianMixture::isotropic(normalized(std::move(kept_w)),
                                                 std::move(kept_mu), def.mode_std),
                      def.spurious_mass, background);
  }
  check_support_containment(family, *generator);

  std::vector<Mode> modes;
  for (const auto& m : def.modes) modes.push_back({m.center, m.labels});
  return World{def, std::move(family), std::move(*generator), ModeWorld(modes, def.mode_std)};
}

double World::population_mass(const JointClassSpec& spec) const {
  double total = 0.0;
  double hit = 0.0;
  for (const auto& m : definition.modes) {
    total += m.weight;
    if (spec.admits(m.labels)) hit += m.weight;
  }
  return hit / total;
}

double World::generator_mass(const JointClassSpec& spec) const {
  double hit = 0.0;
  for (std::size_t c = 0; c < generator.condition_count(); ++c) {
    const auto& mix = generator.pushforward(c);
    double cond = 0.0;
    for (std::size_t k = 0; k < mix.component_count(); ++k) {
      if (generator.is_spurious(k, c)) continue;
      const auto m = assign_to_mode(mix.mean(k), modes);
      if (spec.admits(modes.modes()[m].labels)) cond += mix.weights()[k];
    }
    hit += generator.condition_prior(c) * cond;
  }
  return hit;
}

JointClassSpec World::parse(const std::string& spec_text) const {
  return parse_spec(spec_text, definition.class_count(), definition.class_names);
}

std::string World::format(const JointClassSpec& spec) const {
  return format_spec(spec, definition.class_names);
}

WorldDefinition fig2_world(double spurious_mass) {
  WorldDefinition def;
  def.name = "fig2-1d";
  def.class_names = {"A", "B"};
  def.modes = {{point({-2.0}), {0}, 1.0}, {point({0.0}), {0, 1}, 1.0}, {point({2.0}), {1}, 1.0}};
  def.mode_std = 0.25;
  def.observed_priors = {0.5, 0.5};
  def.spurious_mass = spurious_mass;
  def.background_mean = point({0.0});
  def.background_std = 2.0;
  return def;
}

WorldDefinition gaussians_2x16_world(double spurious_mass) {
  WorldDefinition def;
  def.name = "gaussians-2x16";
  def.class_names = {"A", "B"};
  for (int x = 0; x <= 4; ++x) {
    for (int y = 0; y <= 4; ++y) {
      const bool in_a = x <= 3 && y <= 3;
      const bool in_b = x >= 1 && y >= 1;
      if (!in_a && !in_b) continue;
      IndexSet labels;
      if (in_a) labels.push_back(0);
      if (in_b) labels.push_back(1);
      def.modes.push_back({point({double(x), double(y)}), labels, 1.0});
    }
  }
  def.mode_std = 0.05;
  def.observed_priors = {0.5, 0.5};
  def.spurious_mass = spurious_mass;
  def.background_mean = point({2.0, 2.0});
  def.background_std = 1.5;
  return def;
}

WorldDefinition attribute_world(std::size_t attributes, double q) {
  if (attributes < 1 || attributes > 8) {
    throw ConfigError("world.attributes", "must lie in [1, 8]");
  }
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("world.q", "must lie in (0, 1)");
  WorldDefinition def;
  def.name = "attributes";
  for (std::size_t k = 0; k < attributes; ++k) {
    def.class_names.push_back(std::string(1, static_cast<char>('A' + k)));
  }
  const std::size_t count = std::size_t{1} << attributes;
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(double(count))));
  for (std::size_t mask = 0; mask < count; ++mask) {
    IndexSet labels;
    double w = 1.0;
    for (std::size_t k = 0; k < attributes; ++k) {
      if ((mask >> k) & 1U) {
        labels.push_back(k);
        w *= q;
      } else {
        w *= 1.0 - q;
      }
    }
    def.modes.push_back(
        {point({double(mask % side), double(mask / side)}), std::move(labels), w});
  }
  def.mode_std = 0.025;
  def.observed_priors.assign(attributes, 1.0 / static_cast<double>(attributes));
  return def;
}

WorldDefinition convergence_world(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("world.alpha", "must lie in (0, 1]");
  WorldDefinition def;
  def.name = "convergence";
  def.class_names = {"A", "B"};
  if (alpha == 1.0) {
    // B needs a mode; give it a negligible one far away.
    alpha = 1.0 - 1e-9;
  }
  def.modes = {{point({0.0}), {0}, alpha}, {point({3.0}), {1}, 1.0 - alpha}};
  def.mode_std = 0.25;
  def.observed_priors = {alpha, 1.0 - alpha};
  return def;
}

WorldDefinition builtin_world(const std::string& name, const nlohmann::json& params) {
  const auto get = [&](const char* key, double fallback) {
    return params.is_object() && params.contains(key) ? params[key].get<double>() : fallback;
  };
  if (name == "fig2-1d") return fig2_world(get("spurious_mass", 0.1));
  if (name == "gaussians-2x16") return gaussians_2x16_world(get("spurious_mass", 0.15));
  if (name == "attributes") {
    return attribute_world(static_cast<std::size_t>(get("attributes", 3)), get("q", 0.3));
  }
  if (name == "convergence") return convergence_world(get("alpha", 0.5));
  throw ConfigError("world.builtin", "unknown builtin world \"" + name + "\"");
}

nlohmann::json world_to_json(const WorldDefinition& def) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : def.modes) {
    std::vector<std::string> labels;
    for (std::size_t k : m.labels) labels.push_back(def.class_names.at(k));
    modes.push_back({{"center", std::vector<double>(m.center.data(),
                                                    m.center.data() + m.center.size())},
                     {"labels", labels},
                     {"weight", m.weight}});
  }
  nlohmann::json doc{{"format", "s2m-world"},
                     {"version", 1},
                     {"name", def.name},
                     {"class_names", def.class_names},
                     {"mode_std", def.mode_std},
                     {"modes", modes},
                     {"observed_priors", def.observed_priors},
                     {"spurious_mass", def.spurious_mass},
                     {"conditional", def.conditional},
                     {"generator", def.generator == WorldDefinition::Generator::kPopulation
                                       ? "population"
                                       : "data"}};
  doc["background"] = {
      {"mean", std::vector<double>(def.background_mean.data(),
                                   def.background_mean.data() + def.background_mean.size())},
      {"std", def.background_std}};
  return doc;
}

WorldDefinition world_from_json(const nlohmann::json& doc) {
  if (doc.value("format", std::string("s2m-world")) != "s2m-world") {
    throw ConfigError("world", "not a world document");
  }
  if (doc.value("version", 1) != 1) throw ConfigError("world.version", "unsupported version");
  WorldDefinition def;
  try {
    def.name = doc.value("name", std::string("custom"));
    def.class_names = doc.at("class_names").get<std::vector<std::string>>();
    def.mode_std = doc.at("mode_std").get<double>();
    for (const auto& m : doc.at("modes")) {
      const auto c = m.at("center").get<std::vector<double>>();
      ModeDefinition mode;
      mode.center = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
      for (const auto& label : m.at("labels")) {
        if (label.is_number_unsigned()) {
          mode.labels.push_back(label.get<std::size_t>());
          continue;
        }
        const auto text = label.get<std::string>();
        const auto it = std::find(def.class_names.begin(), def.class_names.end(), text);
        if (it == def.class_names.end()) {
          throw ConfigError("world.modes.labels", "unknown class \"" + text + "\"");
        }
        mode.labels.push_back(static_cast<std::size_t>(it - def.class_names.begin()));
      }
      std::sort(mode.labels.begin(), mode.labels.end());
      mode.weight = m.value("weight", 1.0);
      def.modes.push_back(std::move(mode));
    }
    def.observed_priors = doc.value("observed_priors", std::vector<double>{});
    def.spurious_mass = doc.value("spurious_mass", 0.0);
    def.conditional = doc.value("conditional", false);
    const auto gen = doc.value("generator", std::string("population"));
    if (gen == "population") {
      def.generator = WorldDefinition::Generator::kPopulation;
    } else if (gen == "data") {
      def.generator = WorldDefinition::Generator::kDataMarginal;
    } else {
      throw ConfigError("world.generator", "expected \"population\" or \"data\"");
    }
    if (doc.contains("background")) {
      const auto mean = doc["background"].value("mean", std::vector<double>{});
      def.background_mean =
          Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
      def.background_std = doc["background"].value("std", 1.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("world", e.what());
  }
  def.validate();
  return def;
}

}  // namespace s2m
