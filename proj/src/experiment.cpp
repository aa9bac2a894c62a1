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

#include "s2m/experiment.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

#include "s2m/numeric.hpp"

namespace s2m {
namespace {

using nlohmann::json;

// Strict reader over one JSON object: typed getters that name the field path
// on error, and a check that no unknown key was present.
class Fields {
 public:
  Fields(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_, "must be an object");
  }

  std::string path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key) && !doc_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key), "is required");
    return doc_.at(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (has(key)) out = convert<T>(doc_.at(key), path(key));
  }

  template <typename T>
  T required(const std::string& key) {
    return convert<T>(at(key), path(key));
  }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(where, "expected a non-negative integer");
      }
      return v.get<T>();
    } else {
      if (!v.is_array()) throw ConfigError(where, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

template <typename E, std::size_t N>
E parse_enum(const std::string& text, const EnumName<E> (&names)[N], const std::string& where) {
  std::string options;
  for (const auto& n : names) {
    if (text == n.name) return n.value;
    options += std::string(options.empty() ? "" : ", ") + n.name;
  }
  throw ConfigError(where, "\"" + text + "\" is not one of " + options);
}

template <typename E, std::size_t N>
std::string enum_name(E value, const EnumName<E> (&names)[N]) {
  for (const auto& n : names) {
    if (n.value == value) return n.name;
  }
  return "?";
}

constexpr EnumName<BackendConfig::Kind> kBackendKinds[] = {
    {BackendConfig::Kind::kAnalytic, "analytic"}, {BackendConfig::Kind::kLearned, "learned"}};
constexpr EnumName<Emission> kEmissions[] = {{Emission::kFreshChain, "fresh"},
                                             {Emission::kContinuedChain, "continued"}};
constexpr EnumName<InitPolicy> kInitPolicies[] = {{InitPolicy::kSupport, "support"},
                                                  {InitPolicy::kFirstProposal, "first-proposal"}};
constexpr EnumName<TrainingConfig::Optimizer> kOptimizers[] = {
    {TrainingConfig::Optimizer::kAdam, "adam"}, {TrainingConfig::Optimizer::kSgd, "sgd"}};
constexpr EnumName<TrainingConfig::Schedule> kSchedules[] = {
    {TrainingConfig::Schedule::kJoint, "joint"}, {TrainingConfig::Schedule::kStaged, "staged"}};
constexpr EnumName<EmConfig::Init> kEmInits[] = {{EmConfig::Init::kKMeans, "kmeans"},
                                                 {EmConfig::Init::kRandomFromData, "random"}};

template <typename E, std::size_t N>
void read_enum(Fields& f, const std::string& key, E& out, const EnumName<E> (&names)[N]) {
  if (f.has(key)) out = parse_enum(f.required<std::string>(key), names, f.path(key));
}

json training_to_json(const TrainingConfig& t) {
  return {{"hidden", t.hidden},
          {"optimizer", enum_name(t.optimizer, kOptimizers)},
          {"learning_rate", t.learning_rate},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_epsilon", t.adam_epsilon},
          {"batch_size", t.batch_size},
          {"steps", t.steps},
          {"schedule", enum_name(t.schedule, kSchedules)}};
}

TrainingConfig training_from_json(const json& doc, const std::string& path) {
  Fields f(doc, path);
  TrainingConfig t;
  f.read("hidden", t.hidden);
  read_enum(f, "optimizer", t.optimizer, kOptimizers);
  f.read("learning_rate", t.learning_rate);
  f.read("beta1", t.beta1);
  f.read("beta2", t.beta2);
  f.read("adam_epsilon", t.adam_epsilon);
  f.read("batch_size", t.batch_size);
  f.read("steps", t.steps);
  read_enum(f, "schedule", t.schedule, kSchedules);
  f.finish();
  return t;
}

json em_to_json(const EmConfig& em) {
  return {{"components", em.components},
          {"max_iterations", em.max_iterations},
          {"tolerance", em.tolerance},
          {"regularization", em.regularization},
          {"shared_covariance", em.shared_covariance},
          {"init", enum_name(em.init, kEmInits)},
          {"max_restarts", em.max_restarts}};
}

EmConfig em_from_json(const json& doc, const std::string& path) {
  Fields f(doc, path);
  EmConfig em;
  f.read("components", em.components);
  f.read("max_iterations", em.max_iterations);
  f.read("tolerance", em.tolerance);
  f.read("regularization", em.regularization);
  f.read("shared_covariance", em.shared_covariance);
  read_enum(f, "init", em.init, kEmInits);
  f.read("max_restarts", em.max_restarts);
  f.finish();
  return em;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError("output", "cannot write " + path.string());
  out << text;
  if (!out) throw StageError("output", "failed writing " + path.string());
}

template <typename F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

// Everything a run shares across specs and sweep points.
struct Prepared {
  World world;
  std::unique_ptr<RatioProvider> provider;
  std::vector<JointClassSpec> specs;
  std::optional<MlpNetwork> network;
  std::optional<TrainingReport> training;
};

WorldDefinition load_world_definition(const ExperimentConfig& config) {
  if (!config.world.file.empty()) {
    std::filesystem::path p = config.world.file;
    if (p.is_relative()) p = config.base_dir / p;
    std::ifstream in(p);
    if (!in) throw ConfigError("world.file", "cannot open " + p.string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("world.file", std::string("invalid JSON: ") + e.what());
    }
    return world_from_json(doc);
  }
  return builtin_world(config.world.builtin, config.world.params);
}

Prepared prepare(const ExperimentConfig& config, bool build_backend) {
  Prepared p{in_stage("world", [&] { return build_world(load_world_definition(config)); }),
             nullptr, {}, std::nullopt, std::nullopt};
  for (std::size_t i = 0; i < config.specs.size(); ++i) {
    try {
      p.specs.push_back(p.world.parse(config.specs[i]));
    } catch (const Error& e) {
      throw ConfigError("specs[" + std::to_string(i) + "]", e.what());
    }
  }
  if (config.sampler.condition && *config.sampler.condition >= p.world.generator.condition_count()) {
    throw ConfigError("sampler.condition", "exceeds the generator's condition count");
  }
  if (config.sampler.condition && !p.world.generator.conditional()) {
    throw ConfigError("sampler.condition", "the world's generator is unconditional");
  }
  if (config.sampler.initial_point &&
      config.sampler.initial_point->size() != p.world.definition.dim()) {
    throw ConfigError("sampler.initial_point", "dimension does not match the world");
  }
  if (config.evaluation.tv && p.world.definition.dim() != 1) {
    throw ConfigError("evaluation.tv", "histogram TV needs a one-dimensional world");
  }
  if (config.adaptation) {
    for (std::size_t i = 0; i < config.adaptation->schedule.size(); ++i) {
      const auto& names = p.world.definition.class_names;
      if (std::find(names.begin(), names.end(), config.adaptation->schedule[i]) == names.end()) {
        throw ConfigError("adaptation.schedule[" + std::to_string(i) + "]", "unknown class");
      }
    }
  }
  if (!build_backend) return p;

  if (config.backend.kind == BackendConfig::Kind::kAnalytic) {
    p.provider = std::make_unique<AnalyticProvider>(p.world.family, p.world.generator);
    return p;
  }
  MlpNetwork net = in_stage("training", [&] {
    if (!config.backend.network_file.empty()) {
      std::filesystem::path path = config.backend.network_file;
      if (path.is_relative()) path = config.base_dir / path;
      std::ifstream in(path);
      if (!in) throw Error("cannot open " + path.string());
      return network_from_json(json::parse(in));
    }
    RandomStream rng(derive_seed(config.seed, 1));
    const auto n = static_cast<Eigen::Index>(config.backend.real_samples);
    Eigen::MatrixXd real(static_cast<Eigen::Index>(p.world.definition.dim()), n);
    std::vector<std::size_t> labels;
    labels.reserve(config.backend.real_samples);
    for (Eigen::Index j = 0; j < n; ++j) {
      auto [x, c] = p.world.family.sample_labeled(rng);
      real.col(j) = x;
      labels.push_back(c);
    }
    TrainingConfig training = config.backend.training;
    training.seed = derive_seed(config.seed, 2);
    TrainingReport report;
    MlpNetwork trained = train_heads(real, labels, p.world.family.class_count(),
                                     p.world.generator, training, &report);
    p.training = report;
    return trained;
  });
  const std::size_t want = p.world.generator.conditional() ? p.world.generator.condition_count() : 0;
  if (net.input_dim() != p.world.definition.dim() ||
      net.class_count() != p.world.family.class_count() || net.condition_count() != want) {
    throw StageError("training", "network shape does not match the world");
  }
  p.provider = std::make_unique<NeuralProvider>(net, p.world.family.gammas());
  p.network = std::move(net);
  return p;
}

std::shared_ptr<const AdaptedLatent> adapt(const ExperimentConfig& config, const Prepared& p,
                                           std::size_t index, AdaptationSummary* summary) {
  const auto& section = *config.adaptation;
  const JointClassSpec& spec = p.specs[index];
  return in_stage("adaptation " + config.specs[index], [&] {
    AdaptationConfig ac;
    ac.em = section.em;
    ac.pilots = section.pilots;
    ac.incremental = section.incremental;
    ac.epsilon = section.epsilon;
    ac.probe = section.probe;
    ac.max_iterations = section.max_iterations;
    ac.max_init_attempts = config.sampler.max_init_attempts;
    ac.calibration = config.calibration.resolve(spec, p.provider->default_gammas());
    ac.seed = derive_seed(derive_seed(config.seed, 4), index);
    ac.em.seed = derive_seed(ac.seed, ~std::uint64_t{0});
    for (const auto& name : section.schedule) {
      const auto& names = p.world.definition.class_names;
      ac.schedule.push_back(static_cast<std::size_t>(
          std::find(names.begin(), names.end(), name) - names.begin()));
    }
    auto result = repeated_adaptation(p.world.generator, *p.provider, spec, ac);
    if (summary) {
      summary->spec = config.specs[index];
      summary->rounds = result.rounds;
      summary->total_draws = result.total_draws();
    }
    auto latent = std::make_shared<const AdaptedLatent>(std::move(result.latent));
    if (summary) summary->latent = latent;
    return latent;
  });
}

SamplerConfig sampler_for(const ExperimentConfig& config, const Prepared& p, std::size_t index,
                          std::shared_ptr<const AdaptedLatent> latent) {
  SamplerConfig sc;
  sc.iterations = config.sampler.iterations;
  sc.chains = config.sampler.chains;
  sc.samples = config.sampler.samples;
  sc.spec = p.specs[index];
  sc.calibration = config.calibration.resolve(sc.spec, p.provider->default_gammas());
  sc.emission = config.sampler.emission;
  sc.init = config.sampler.init;
  sc.max_init_attempts = config.sampler.max_init_attempts;
  sc.block_size = config.sampler.block_size;
  if (config.sampler.initial_point) {
    const auto& v = *config.sampler.initial_point;
    sc.initial_point = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (latent) {
    sc.mode = LatentAdaptedMode{std::move(latent)};
  } else if (config.sampler.condition) {
    sc.mode = ConditionalMode{*config.sampler.condition};
  }
  return sc;
}

std::function<double(double)> target_density(const Prepared& p, const JointClassSpec& spec) {
  return [&p, spec](double x) {
    return p.world.family.unnormalized_target(Eigen::VectorXd::Constant(1, x), spec);
  };
}

// Samples one spec and evaluates it.
EvalReport sample_and_evaluate(const ExperimentConfig& config, const Prepared& p,
                               std::size_t index, const SamplerConfig& sc, SamplerResult* keep) {
  const auto& spec = p.specs[index];
  std::vector<std::vector<double>> snapshots;
  std::vector<std::size_t> admitted(sc.iterations + 1, 0), seen(sc.iterations + 1, 0);
  const bool curve = config.evaluation.tv_curve && config.evaluation.tv;
  const bool track = config.evaluation.acceptance_curve && sc.emission == Emission::kFreshChain;
  if (curve) {
    if (sc.emission != Emission::kFreshChain) {
      throw ConfigError("evaluation.tv_curve", "needs fresh-chain emission");
    }
    snapshots.assign(sc.iterations + 1, std::vector<double>(sc.samples, 0.0));
  }
  StepObserver observer;
  if (curve || track) {
    observer = [&](std::size_t step, std::size_t first, std::span<const ChainState> states) {
      for (std::size_t k = 0; k < states.size(); ++k) {
        const auto& x = states[k].current.x;
        if (curve) snapshots[step][first + k] = x[0];
        if (track) {
          const auto& mode = p.world.modes.modes()[assign_to_mode(x, p.world.modes)];
          admitted[step] += spec.admits(mode.labels) ? 1 : 0;
          ++seen[step];
        }
      }
    };
  }
  SamplerResult result = in_stage("sampling " + config.specs[index],
                                  [&] { return run_sampler(sc, p.world.generator, *p.provider, observer); });
  EvalReport report = evaluate_samples(result.points, p.world.modes, spec,
                                       p.world.definition.class_names);
  report.acceptance_rate = result.diagnostics.acceptance_rate();
  if (config.evaluation.acceptance_curve) report.acceptance_curve = result.diagnostics.mean_acceptance;
  if (track) {
    for (std::size_t t = 0; t < seen.size(); ++t) {
      report.accuracy_curve.push_back(
          seen[t] ? static_cast<double>(admitted[t]) / static_cast<double>(seen[t]) : 0.0);
    }
  }
  if (config.evaluation.tv) {
    const Binning b{config.evaluation.tv->lo, config.evaluation.tv->hi, config.evaluation.tv->bins, 8};
    const std::vector<double> xs(result.points.data(), result.points.data() + result.points.size());
    report.tv_distance = tv_histogram(xs, target_density(p, spec), b);
    if (curve) report.tv_curve = convergence_curve(snapshots, target_density(p, spec), b);
  }
  if (keep) *keep = std::move(result);
  return report;
}

EvalReport raw_baseline(const ExperimentConfig& config, const Prepared& p, std::size_t index) {
  RandomStream rng(derive_seed(derive_seed(config.seed, 5), index));
  const auto n = static_cast<Eigen::Index>(config.sampler.samples);
  Eigen::MatrixXd points(static_cast<Eigen::Index>(p.world.definition.dim()), n);
  const std::size_t condition = config.sampler.condition.value_or(0);
  for (Eigen::Index j = 0; j < n; ++j) points.col(j) = p.world.generator.sample(rng, condition).x;
  EvalReport report = evaluate_samples(points, p.world.modes, p.specs[index],
                                       p.world.definition.class_names);
  report.source = "raw";
  if (config.evaluation.tv) {
    const Binning b{config.evaluation.tv->lo, config.evaluation.tv->hi, config.evaluation.tv->bins, 8};
    const std::vector<double> xs(points.data(), points.data() + points.size());
    report.tv_distance = tv_histogram(xs, target_density(p, p.specs[index]), b);
  }
  return report;
}

// Re-roots a validator's field path under `prefix`, replacing `strip` if the
// path starts with it.
[[noreturn]] void rethrow_under(const ConfigError& e, const std::string& prefix,
                                const std::string& strip = "") {
  std::string field = e.field();
  if (!strip.empty() && field.rfind(strip, 0) == 0) field = field.substr(strip.size());
  if (!field.empty() && field.front() == '.') field.erase(0, 1);
  throw ConfigError(field.empty() ? prefix : prefix + "." + field, e.message());
}

void check_structure(const ExperimentConfig& c) {
  if (c.world.builtin.empty() == c.world.file.empty()) {
    throw ConfigError("world", "exactly one of \"builtin\" and \"file\" is required");
  }
  if (c.specs.empty()) throw ConfigError("specs", "at least one spec is required");
  if (c.sampler.iterations < 1) throw ConfigError("sampler.iterations", "must be at least 1");
  if (c.sampler.samples < 1) throw ConfigError("sampler.samples", "must be at least 1");
  if (c.sampler.chains < 1) throw ConfigError("sampler.chains", "must be at least 1");
  if (c.sampler.block_size < 1) throw ConfigError("sampler.block_size", "must be at least 1");
  if (c.sampler.max_init_attempts < 1) {
    throw ConfigError("sampler.max_init_attempts", "must be at least 1");
  }
  if (c.backend.kind == BackendConfig::Kind::kLearned) {
    try {
      c.backend.training.validate();
    } catch (const ConfigError& e) {
      rethrow_under(e, "backend");
    }
    if (c.backend.network_file.empty() && c.backend.real_samples < 1) {
      throw ConfigError("backend.real_samples", "must be at least 1");
    }
  }
  CalibrationParams probe;
  probe.temperature_v = c.calibration.temperature_v;
  probe.temperature_r = c.calibration.temperature_r;
  probe.temperature_f = c.calibration.temperature_f;
  try {
    probe.validate(0);
  } catch (const ConfigError& e) {
    rethrow_under(e, "calibration");
  }
  if (!(c.calibration.intersection_gamma_scale > 0.0) ||
      !std::isfinite(c.calibration.intersection_gamma_scale)) {
    throw ConfigError("calibration.intersection_gamma_scale", "must be positive");
  }
  for (double g : c.calibration.gamma_overrides) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw ConfigError("calibration.gamma_overrides", "entries must be positive");
    }
  }
  if (c.adaptation) {
    if (c.sampler.condition) {
      throw ConfigError("adaptation", "latent adaptation needs unconditional proposals");
    }
    AdaptationConfig ac;
    ac.em = c.adaptation->em;
    ac.pilots = c.adaptation->pilots;
    ac.epsilon = c.adaptation->epsilon;
    ac.probe = c.adaptation->probe;
    ac.max_iterations = c.adaptation->max_iterations;
    try {
      ac.em.validate();
    } catch (const ConfigError& e) {
      rethrow_under(e, "adaptation.em");
    }
    ac.validate();
  }
  if (c.sweep) {
    const auto& s = *c.sweep;
    if (s.points() == 0) throw ConfigError("sweep", "grid is empty");
    for (std::size_t k : s.iterations) {
      if (k < 1) throw ConfigError("sweep.iterations", "entries must be at least 1");
    }
    for (const auto* axis : {&s.temperature_v, &s.temperature_r, &s.temperature_f,
                             &s.intersection_gamma_scale}) {
      for (double v : *axis) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("sweep", "entries must be positive");
      }
    }
  }
  if (c.evaluation.tv) {
    const Binning b{c.evaluation.tv->lo, c.evaluation.tv->hi, c.evaluation.tv->bins, 8};
    try {
      b.validate();
    } catch (const ConfigError& e) {
      rethrow_under(e, "evaluation.tv", "binning");
    }
  }
}

std::string csv_number(double v) { return format_double(v); }

}  // namespace

CalibrationParams CalibrationSection::resolve(const JointClassSpec& spec,
                                              const std::vector<double>& default_gammas) const {
  CalibrationParams cal;
  cal.temperature_v = temperature_v;
  cal.temperature_r = temperature_r;
  cal.temperature_f = temperature_f;
  if (gamma_overrides.empty() && (intersection_gamma_scale == 1.0 || spec.difference().empty())) {
    return cal;
  }
  cal.gamma_overrides = gamma_overrides.empty() ? default_gammas : gamma_overrides;
  if (cal.gamma_overrides.size() != default_gammas.size()) {
    throw ConfigError("calibration.gamma_overrides", "needs one entry per class");
  }
  if (!spec.difference().empty()) {
    for (std::size_t i : spec.intersection()) cal.gamma_overrides[i] *= intersection_gamma_scale;
  }
  return cal;
}

std::size_t SweepSection::points() const {
  std::size_t n = 1;
  bool any = false;
  for (std::size_t size : {iterations.size(), temperature_v.size(), temperature_r.size(),
                           temperature_f.size(), intersection_gamma_scale.size()}) {
    if (size == 0) continue;
    any = true;
    n *= size;
  }
  return any ? n : 0;
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["format"] = "s2m-experiment";
  doc["version"] = 1;
  doc["name"] = c.name;
  doc["seed"] = c.seed;
  json world = json::object();
  if (!c.world.builtin.empty()) {
    world["builtin"] = c.world.builtin;
    world["params"] = c.world.params.is_null() ? json::object() : c.world.params;
  } else {
    world["file"] = c.world.file;
  }
  doc["world"] = world;
  json backend{{"kind", enum_name(c.backend.kind, kBackendKinds)}};
  if (c.backend.kind == BackendConfig::Kind::kLearned) {
    backend["training"] = training_to_json(c.backend.training);
    backend["real_samples"] = c.backend.real_samples;
    backend["network_file"] = c.backend.network_file;
    backend["save_network"] = c.backend.save_network;
  }
  doc["backend"] = backend;
  doc["specs"] = c.specs;
  json sampler{{"iterations", c.sampler.iterations},
               {"chains", c.sampler.chains},
               {"samples", c.sampler.samples},
               {"emission", enum_name(c.sampler.emission, kEmissions)},
               {"init", enum_name(c.sampler.init, kInitPolicies)},
               {"max_init_attempts", c.sampler.max_init_attempts},
               {"block_size", c.sampler.block_size}};
  if (c.sampler.condition) sampler["condition"] = *c.sampler.condition;
  if (c.sampler.initial_point) sampler["initial_point"] = *c.sampler.initial_point;
  doc["sampler"] = sampler;
  doc["calibration"] = {{"temperature_v", c.calibration.temperature_v},
                        {"temperature_r", c.calibration.temperature_r},
                        {"temperature_f", c.calibration.temperature_f},
                        {"gamma_overrides", c.calibration.gamma_overrides},
                        {"intersection_gamma_scale", c.calibration.intersection_gamma_scale}};
  if (c.adaptation) {
    const auto& a = *c.adaptation;
    doc["adaptation"] = {{"em", em_to_json(a.em)},
                         {"pilots", a.pilots},
                         {"schedule", a.schedule},
                         {"incremental", a.incremental},
                         {"epsilon", a.epsilon},
                         {"probe", a.probe},
                         {"max_iterations", a.max_iterations}};
  }
  if (c.sweep) {
    const auto& s = *c.sweep;
    json sweep = json::object();
    if (!s.iterations.empty()) sweep["iterations"] = s.iterations;
    if (!s.temperature_v.empty()) sweep["temperature_v"] = s.temperature_v;
    if (!s.temperature_r.empty()) sweep["temperature_r"] = s.temperature_r;
    if (!s.temperature_f.empty()) sweep["temperature_f"] = s.temperature_f;
    if (!s.intersection_gamma_scale.empty()) {
      sweep["intersection_gamma_scale"] = s.intersection_gamma_scale;
    }
    doc["sweep"] = sweep;
  }
  json eval{{"tv_curve", c.evaluation.tv_curve},
            {"raw_baseline", c.evaluation.raw_baseline},
            {"acceptance_curve", c.evaluation.acceptance_curve}};
  if (c.evaluation.tv) {
    eval["tv"] = {{"lo", c.evaluation.tv->lo},
                  {"hi", c.evaluation.tv->hi},
                  {"bins", c.evaluation.tv->bins}};
  }
  doc["evaluation"] = eval;
  doc["output_dir"] = c.output_dir;
  return doc;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

ExperimentConfig config_from_json(const json& doc) {
  Fields top(doc, "");
  if (top.required<std::string>("format") != "s2m-experiment") {
    throw ConfigError("format", "must be \"s2m-experiment\"");
  }
  if (top.required<std::size_t>("version") != 1) {
    throw ConfigError("version", "unsupported version");
  }
  ExperimentConfig c;
  top.read("name", c.name);
  top.read("seed", c.seed);
  {
    Fields f(top.at("world"), "world");
    f.read("builtin", c.world.builtin);
    if (f.has("params")) {
      c.world.params = f.at("params");
      if (!c.world.params.is_object()) throw ConfigError("world.params", "must be an object");
    }
    f.read("file", c.world.file);
    f.finish();
  }
  if (top.has("backend")) {
    Fields f(top.at("backend"), "backend");
    read_enum(f, "kind", c.backend.kind, kBackendKinds);
    if (f.has("training")) c.backend.training = training_from_json(f.at("training"), "backend.training");
    f.read("real_samples", c.backend.real_samples);
    f.read("network_file", c.backend.network_file);
    f.read("save_network", c.backend.save_network);
    f.finish();
  }
  c.specs = top.required<std::vector<std::string>>("specs");
  if (top.has("sampler")) {
    Fields f(top.at("sampler"), "sampler");
    f.read("iterations", c.sampler.iterations);
    f.read("chains", c.sampler.chains);
    f.read("samples", c.sampler.samples);
    read_enum(f, "emission", c.sampler.emission, kEmissions);
    read_enum(f, "init", c.sampler.init, kInitPolicies);
    f.read("max_init_attempts", c.sampler.max_init_attempts);
    f.read("block_size", c.sampler.block_size);
    if (f.has("condition")) c.sampler.condition = f.required<std::size_t>("condition");
    if (f.has("initial_point")) {
      c.sampler.initial_point = f.required<std::vector<double>>("initial_point");
    }
    f.finish();
  }
  if (top.has("calibration")) {
    Fields f(top.at("calibration"), "calibration");
    f.read("temperature_v", c.calibration.temperature_v);
    f.read("temperature_r", c.calibration.temperature_r);
    f.read("temperature_f", c.calibration.temperature_f);
    f.read("gamma_overrides", c.calibration.gamma_overrides);
    f.read("intersection_gamma_scale", c.calibration.intersection_gamma_scale);
    f.finish();
  }
  if (top.has("adaptation")) {
    Fields f(top.at("adaptation"), "adaptation");
    AdaptationSection a;
    if (f.has("em")) a.em = em_from_json(f.at("em"), "adaptation.em");
    f.read("pilots", a.pilots);
    f.read("schedule", a.schedule);
    f.read("incremental", a.incremental);
    f.read("epsilon", a.epsilon);
    f.read("probe", a.probe);
    f.read("max_iterations", a.max_iterations);
    f.finish();
    c.adaptation = a;
  }
  if (top.has("sweep")) {
    Fields f(top.at("sweep"), "sweep");
    SweepSection s;
    const auto axis = [&](const char* key, auto& out) {
      if (!f.has(key)) return;
      f.read(key, out);
      if (out.empty()) throw ConfigError(f.path(key), "grid axis must be non-empty");
    };
    axis("iterations", s.iterations);
    axis("temperature_v", s.temperature_v);
    axis("temperature_r", s.temperature_r);
    axis("temperature_f", s.temperature_f);
    axis("intersection_gamma_scale", s.intersection_gamma_scale);
    f.finish();
    c.sweep = s;
  }
  if (top.has("evaluation")) {
    Fields f(top.at("evaluation"), "evaluation");
    if (f.has("tv")) {
      Fields t(f.at("tv"), "evaluation.tv");
      TvSection tv;
      t.read("lo", tv.lo);
      t.read("hi", tv.hi);
      t.read("bins", tv.bins);
      t.finish();
      c.evaluation.tv = tv;
    }
    f.read("tv_curve", c.evaluation.tv_curve);
    f.read("raw_baseline", c.evaluation.raw_baseline);
    f.read("acceptance_curve", c.evaluation.acceptance_curve);
    f.finish();
  }
  top.read("output_dir", c.output_dir);
  top.finish();
  check_structure(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("", "config is not valid JSON: " + std::string(e.what()));
  }
  ExperimentConfig c = config_from_json(doc);
  c.base_dir = path.parent_path();
  return c;
}

void validate_config(const ExperimentConfig& config) {
  check_structure(config);
  prepare(config, false);
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

RunResult run_prepared(const ExperimentConfig& config, const Prepared& p) {
  RunResult out;
  out.training = p.training;
  for (std::size_t i = 0; i < p.specs.size(); ++i) {
    std::shared_ptr<const AdaptedLatent> latent;
    if (config.adaptation) {
      AdaptationSummary summary;
      latent = adapt(config, p, i, &summary);
      out.adaptation.push_back(std::move(summary));
    }
    SamplerConfig sc = sampler_for(config, p, i, latent);
    sc.seed = derive_seed(derive_seed(config.seed, 3), i);
    SpecRun run{config.specs[i], {}};
    out.reports.push_back(sample_and_evaluate(config, p, i, sc, &run.samples));
    out.runs.push_back(std::move(run));
    if (config.evaluation.raw_baseline) out.reports.push_back(raw_baseline(config, p, i));
  }
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  check_structure(config);
  const Prepared p = prepare(config, true);
  return run_prepared(config, p);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  check_structure(config);
  if (!config.sweep) throw ConfigError("sweep", "a sweep grid is required");
  const Prepared p = prepare(config, true);
  const SweepSection& s = *config.sweep;

  std::vector<std::shared_ptr<const AdaptedLatent>> latents(p.specs.size());
  if (config.adaptation) {
    for (std::size_t i = 0; i < p.specs.size(); ++i) latents[i] = adapt(config, p, i, nullptr);
  }
  const auto or_base = [](const auto& axis, auto base) {
    return axis.empty() ? std::vector<decltype(base)>{base} : axis;
  };
  const auto ks = or_base(s.iterations, config.sampler.iterations);
  const auto tvs = or_base(s.temperature_v, config.calibration.temperature_v);
  const auto trs = or_base(s.temperature_r, config.calibration.temperature_r);
  const auto tfs = or_base(s.temperature_f, config.calibration.temperature_f);
  const auto gs = or_base(s.intersection_gamma_scale, config.calibration.intersection_gamma_scale);

  std::vector<SweepRow> rows;
  std::size_t point = 0;
  for (std::size_t k : ks) {
    for (double tv : tvs) {
      for (double tr : trs) {
        for (double tf : tfs) {
          for (double g : gs) {
            ExperimentConfig at = config;
            at.sampler.iterations = k;
            at.calibration.temperature_v = tv;
            at.calibration.temperature_r = tr;
            at.calibration.temperature_f = tf;
            at.calibration.intersection_gamma_scale = g;
            for (std::size_t i = 0; i < p.specs.size(); ++i) {
              SweepRow row{point, config.specs[i], k, tv, tr, tf, g, std::nullopt, {}};
              try {
                SamplerConfig sc = sampler_for(at, p, i, latents[i]);
                sc.seed = derive_seed(derive_seed(derive_seed(config.seed, 6), point), i);
                row.report = sample_and_evaluate(at, p, i, sc, nullptr);
              } catch (const std::exception& e) {
                row.error = e.what();
              }
              rows.push_back(std::move(row));
            }
            ++point;
          }
        }
      }
    }
  }
  return rows;
}

nlohmann::json results_to_json(const RunResult& result) {
  json doc{{"format", "s2m-report"}, {"version", 1}};
  json reports = json::array();
  for (const auto& r : result.reports) reports.push_back(report_to_json(r));
  doc["reports"] = reports;
  json adaptation = json::array();
  for (const auto& a : result.adaptation) {
    json rounds = json::array();
    for (const auto& r : a.rounds) {
      rounds.push_back({{"spec", format_spec(r.spec)},
                        {"alpha", r.alpha},
                        {"iterations", r.iterations},
                        {"probe_draws", r.probe_draws},
                        {"init_draws", r.init_draws},
                        {"mh_steps", r.mh_steps}});
    }
    adaptation.push_back({{"spec", a.spec}, {"rounds", rounds}, {"total_draws", a.total_draws}});
  }
  doc["adaptation"] = adaptation;
  if (result.training) {
    doc["training"] = {{"initial_loss", result.training->initial_loss},
                       {"final_loss", result.training->final_loss}};
  }
  return doc;
}

std::string render_report_file(const nlohmann::json& doc) {
  if (doc.value("format", std::string()) != "s2m-report") {
    throw Error("not a report document");
  }
  std::vector<EvalReport> reports;
  for (const auto& r : doc.at("reports")) reports.push_back(report_from_json(r));
  std::string out = render_table(reports);
  if (doc.contains("adaptation")) {
    for (const auto& a : doc["adaptation"]) {
      out += "adaptation " + a.at("spec").get<std::string>() + ": " +
             std::to_string(a.at("rounds").size()) + " rounds, " +
             std::to_string(a.at("total_draws").get<std::size_t>()) + " generator draws\n";
    }
  }
  return out;
}

std::string samples_csv(const RunResult& result) {
  std::ostringstream out;
  Eigen::Index dim = 0;
  for (const auto& run : result.runs) dim = std::max(dim, run.samples.points.rows());
  out << "spec,chain,step,log_r,acceptance_rate";
  for (Eigen::Index d = 0; d < dim; ++d) out << ",x" << d;
  out << "\n";
  for (const auto& run : result.runs) {
    const auto& s = run.samples;
    for (std::size_t j = 0; j < s.size(); ++j) {
      out << run.spec << "," << s.chain_ids[j] << "," << s.steps[j] << "," << csv_number(s.log_r[j])
          << "," << csv_number(s.acceptance_rate[j]);
      for (Eigen::Index d = 0; d < s.points.rows(); ++d) {
        out << "," << csv_number(s.points(d, static_cast<Eigen::Index>(j)));
      }
      out << "\n";
    }
  }
  return out.str();
}

std::string diagnostics_csv(const RunResult& result) {
  std::ostringstream out;
  out << "spec,step,mean_acceptance,accuracy,tv\n";
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& run = result.runs[i];
    const auto& acc = run.samples.diagnostics.mean_acceptance;
    const EvalReport* report = nullptr;
    for (const auto& r : result.reports) {
      if (r.source == "s2m" && r.spec == run.spec) report = &r;
    }
    const std::size_t steps = acc.size() + 1;
    for (std::size_t t = 0; t < steps; ++t) {
      out << run.spec << "," << t << ",";
      if (t >= 1) out << csv_number(acc[t - 1]);
      out << ",";
      if (report && t < report->accuracy_curve.size()) out << csv_number(report->accuracy_curve[t]);
      out << ",";
      if (report && t < report->tv_curve.size()) out << csv_number(report->tv_curve[t]);
      out << "\n";
    }
  }
  return out.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "point,spec,iterations,temperature_v,temperature_r,temperature_f,"
         "intersection_gamma_scale,accuracy,high_quality,mode_std,acceptance_rate,tv,error\n";
  for (const auto& r : rows) {
    out << r.point << "," << r.spec << "," << r.iterations << "," << csv_number(r.temperature_v)
        << "," << csv_number(r.temperature_r) << "," << csv_number(r.temperature_f) << ","
        << csv_number(r.intersection_gamma_scale) << ",";
    if (r.report) {
      out << csv_number(r.report->accuracy) << "," << csv_number(r.report->high_quality) << ","
          << csv_number(r.report->mode_std) << "," << csv_number(r.report->acceptance_rate) << ",";
      if (r.report->tv_distance) out << csv_number(*r.report->tv_distance);
      out << ",";
    } else {
      out << ",,,,,";
    }
    // Quote the message; embedded quotes are doubled.
    if (!r.error.empty()) {
      std::string quoted;
      for (char ch : r.error) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      out << '"' << quoted << '"';
    }
    out << "\n";
  }
  return out.str();
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"format", "s2m-manifest"},
          {"version", 1},
          {"config_hash", m.config_hash},
          {"seed", m.seed},
          {"artifact_version", m.artifact_version},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at},
          {"files", m.files}};
}

namespace {

std::filesystem::path prepare_output(const ExperimentConfig& config) {
  const std::filesystem::path dir = config.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw StageError("output", "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void finish_manifest(RunManifest& m, const std::filesystem::path& dir,
                     const ExperimentConfig& config) {
  write_file(dir / "config.json", config_to_json(config).dump(2) + "\n");
  m.files.insert(m.files.begin(), "config.json");
  m.files.push_back("manifest.json");
  m.finished_at = utc_now();
  write_file(dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
}

}  // namespace

RunManifest run_and_write(const ExperimentConfig& config) {
  RunManifest m;
  m.config_hash = config_hash(config);
  m.seed = config.seed;
  m.started_at = utc_now();
  const auto dir = prepare_output(config);
  check_structure(config);
  const Prepared p = prepare(config, true);
  const RunResult result = run_prepared(config, p);
  write_file(dir / "report.json", results_to_json(result).dump(2) + "\n");
  write_file(dir / "samples.csv", samples_csv(result));
  write_file(dir / "diagnostics.csv", diagnostics_csv(result));
  m.files = {"report.json", "samples.csv", "diagnostics.csv"};
  if (p.network && config.backend.save_network && config.backend.network_file.empty()) {
    write_file(dir / "network.json", network_to_json(*p.network).dump() + "\n");
    m.files.push_back("network.json");
  }
  for (std::size_t i = 0; i < result.adaptation.size(); ++i) {
    const std::string name = "latent-" + std::to_string(i) + ".json";
    write_file(dir / name, adapted_to_json(*result.adaptation[i].latent).dump(2) + "\n");
    m.files.push_back(name);
  }
  finish_manifest(m, dir, config);
  return m;
}

RunManifest sweep_and_write(const ExperimentConfig& config) {
  RunManifest m;
  m.config_hash = config_hash(config);
  m.seed = config.seed;
  m.started_at = utc_now();
  const auto dir = prepare_output(config);
  const auto rows = run_sweep(config);
  write_file(dir / "sweep.csv", sweep_csv(rows));
  m.files = {"sweep.csv"};
  finish_manifest(m, dir, config);
  return m;
}

}  // namespace s2m
