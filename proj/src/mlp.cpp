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

#include "s2m/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "s2m/errors.hpp"
#include "s2m/numeric.hpp"
#include "s2m/random.hpp"

namespace s2m {
namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_labels(std::span<const std::size_t> labels, Eigen::Index count, std::size_t range,
                  const char* what) {
  if (static_cast<Eigen::Index>(labels.size()) != count) {
    throw DimensionMismatch(std::string(what) + ": one label per point is required");
  }
  for (std::size_t c : labels) {
    if (c >= range) throw Error(std::string(what) + ": label out of range");
  }
}

// Mean cross-entropy of column-softmaxed logits; optionally the gradient.
double cross_entropy(const Eigen::MatrixXd& logits, std::span<const std::size_t> labels,
                     Eigen::MatrixXd* grad) {
  Eigen::MatrixXd p = logits;
  const Eigen::RowVectorXd lse = log_sum_exp_columns(p);
  const double n = static_cast<double>(logits.cols());
  double total = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    total += lse[j] - logits(static_cast<Eigen::Index>(labels[j]), j);
  }
  if (grad) {
    softmax_columns(p);
    for (Eigen::Index j = 0; j < p.cols(); ++j) p(static_cast<Eigen::Index>(labels[j]), j) -= 1.0;
    *grad = p / n;
  }
  return total / n;
}

}  // namespace

class MlpBackprop {
 public:
  static double run(const MlpNetwork& net, std::span<const Loss> losses,
                    const TrainingBatch& batch, Eigen::VectorXd* gradient);

  // Which hidden units are active, over every point of the batch.
  static std::vector<bool> relu_pattern(const MlpNetwork& net, const TrainingBatch& batch) {
    std::vector<bool> out;
    for (const Eigen::MatrixXd* points : {&batch.real, &batch.fake}) {
      if (points->cols() == 0) continue;
      std::vector<Eigen::MatrixXd> inputs;
      const Eigen::MatrixXd last = net.trunk(*points, &inputs);
      inputs.push_back(last);
      for (std::size_t l = 1; l < inputs.size(); ++l) {
        for (Eigen::Index i = 0; i < inputs[l].size(); ++i) out.push_back(inputs[l](i) > 0.0);
      }
    }
    return out;
  }
};

MlpNetwork::MlpNetwork(std::size_t input, std::vector<std::size_t> hidden,
                       std::size_t classes, std::size_t conditions, std::uint64_t seed)
    : input_(input), hidden_(std::move(hidden)), classes_(classes), conditions_(conditions) {
  if (input_ < 1) throw ConfigError("network.input", "must be at least 1");
  if (classes_ < 1) throw ConfigError("network.classes", "must be at least 1");
  for (std::size_t h : hidden_) {
    if (h < 1) throw ConfigError("network.hidden", "widths must be at least 1");
  }
  Eigen::Index offset = 0;
  Eigen::Index fan_in = static_cast<Eigen::Index>(input_);
  const auto add = [&](std::size_t out) {
    const auto rows = static_cast<Eigen::Index>(out);
    layers_.push_back({offset, rows, fan_in});
    offset += rows * fan_in + rows;
  };
  for (std::size_t h : hidden_) {
    add(h);
    fan_in = static_cast<Eigen::Index>(h);
  }
  add(1);
  add(classes_);
  if (conditions_ > 0) add(conditions_);

  params_ = Eigen::VectorXd::Zero(offset);
  RandomStream rng(seed);
  for (const auto& b : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(b.cols));
    for (Eigen::Index i = 0; i < b.rows * b.cols; ++i) {
      params_[b.offset + i] = limit * (2.0 * rng.uniform() - 1.0);
    }
  }
}

std::vector<std::size_t> MlpNetwork::layer_sizes() const {
  std::vector<std::size_t> sizes{input_};
  sizes.insert(sizes.end(), hidden_.begin(), hidden_.end());
  sizes.push_back(1);
  sizes.push_back(classes_);
  if (conditions_ > 0) sizes.push_back(conditions_);
  return sizes;
}

void MlpNetwork::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != params_.size()) {
    throw DimensionMismatch("parameter vector has " + std::to_string(params.size()) +
                            " entries, network needs " + std::to_string(params_.size()));
  }
  params_ = params;
}

Eigen::Map<const Eigen::MatrixXd> MlpNetwork::weight(const Block& b) const {
  return {params_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const Eigen::VectorXd> MlpNetwork::bias(const Block& b) const {
  return {params_.data() + b.offset + b.rows * b.cols, b.rows};
}

Eigen::MatrixXd MlpNetwork::trunk(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                  std::vector<Eigen::MatrixXd>* activations) const {
  if (static_cast<std::size_t>(points.rows()) != input_) {
    throw DimensionMismatch("network input has dimension " + std::to_string(input_) +
                            ", points have " + std::to_string(points.rows()));
  }
  Eigen::MatrixXd a = points;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    if (activations) activations->push_back(a);
    Eigen::MatrixXd z = weight(layers_[l]) * a;
    z.colwise() += bias(layers_[l]);
    a = z.cwiseMax(0.0);
  }
  return a;
}

MlpNetwork::Logits MlpNetwork::forward(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  const Eigen::MatrixXd h = trunk(points, nullptr);
  const std::size_t first_head = hidden_.size();
  Logits out;
  const auto head = [&](std::size_t k) {
    Eigen::MatrixXd z = weight(layers_[k]) * h;
    z.colwise() += bias(layers_[k]);
    return z;
  };
  out.v = head(first_head);
  out.r = head(first_head + 1);
  if (conditions_ > 0) {
    out.f = head(first_head + 2);
  } else {
    out.f.resize(0, points.cols());
  }
  return out;
}

double MlpBackprop::run(const MlpNetwork& net, std::span<const Loss> losses,
                        const TrainingBatch& batch, Eigen::VectorXd* gradient) {
  const bool want_v = std::find(losses.begin(), losses.end(), Loss::kV) != losses.end();
  const bool want_r = std::find(losses.begin(), losses.end(), Loss::kR) != losses.end();
  const bool want_f = std::find(losses.begin(), losses.end(), Loss::kF) != losses.end() &&
                      net.conditions_ > 0;
  const Eigen::Index nr = batch.real.cols();
  const Eigen::Index nf = batch.fake.cols();
  if ((want_v || want_r) && nr == 0) throw Error("loss needs real points");
  if ((want_v || want_f) && nf == 0) throw Error("loss needs generated points");
  if (want_r) check_labels(batch.labels, nr, net.classes_, "real labels");
  if (want_f) check_labels(batch.conditions, nf, net.conditions_, "fake conditions");

  const auto d = static_cast<Eigen::Index>(net.input_);
  Eigen::MatrixXd x(d, nr + nf);
  if (nr > 0) x.leftCols(nr) = batch.real;
  if (nf > 0) x.rightCols(nf) = batch.fake;

  std::vector<Eigen::MatrixXd> acts;
  const Eigen::MatrixXd h = net.trunk(x, &acts);
  const std::size_t first_head = net.hidden_.size();
  const auto head = [&](std::size_t k) {
    Eigen::MatrixXd z = net.weight(net.layers_[k]) * h;
    z.colwise() += net.bias(net.layers_[k]);
    return z;
  };

  double total = 0.0;
  const bool grad = gradient != nullptr;
  Eigen::MatrixXd dh;
  if (grad) {
    gradient->setZero(net.params_.size());
    dh = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  }
  const auto head_grad = [&](std::size_t k, const Eigen::MatrixXd& dz, Eigen::Index first,
                             Eigen::Index count) {
    const auto& b = net.layers_[k];
    const auto cols = h.middleCols(first, count);
    Eigen::Map<Eigen::MatrixXd>(gradient->data() + b.offset, b.rows, b.cols) +=
        dz * cols.transpose();
    Eigen::Map<Eigen::VectorXd>(gradient->data() + b.offset + b.rows * b.cols, b.rows) +=
        dz.rowwise().sum();
    dh.middleCols(first, count).noalias() += net.weight(b).transpose() * dz;
  };

  if (want_v) {
    const Eigen::MatrixXd s = head(first_head);
    double real_term = 0.0;
    double fake_term = 0.0;
    Eigen::MatrixXd ds(1, nr + nf);
    for (Eigen::Index j = 0; j < nr; ++j) {
      real_term += softplus(-s(0, j));
      ds(0, j) = -sigmoid(-s(0, j)) / static_cast<double>(nr);
    }
    for (Eigen::Index j = nr; j < nr + nf; ++j) {
      fake_term += softplus(s(0, j));
      ds(0, j) = sigmoid(s(0, j)) / static_cast<double>(nf);
    }
    total += real_term / static_cast<double>(nr) + fake_term / static_cast<double>(nf);
    if (grad) head_grad(first_head, ds, 0, nr + nf);
  }
  if (want_r) {
    const Eigen::MatrixXd logits = head(first_head + 1).leftCols(nr);
    Eigen::MatrixXd dz;
    total += cross_entropy(logits, batch.labels, grad ? &dz : nullptr);
    if (grad) head_grad(first_head + 1, dz, 0, nr);
  }
  if (want_f) {
    const Eigen::MatrixXd logits = head(first_head + 2).rightCols(nf);
    Eigen::MatrixXd dz;
    total += cross_entropy(logits, batch.conditions, grad ? &dz : nullptr);
    if (grad) head_grad(first_head + 2, dz, nr, nf);
  }
  if (!grad) return total;

  Eigen::MatrixXd da = std::move(dh);
  Eigen::MatrixXd a = h;
  for (std::size_t l = net.hidden_.size(); l-- > 0;) {
    const auto& b = net.layers_[l];
    const Eigen::MatrixXd dz = (a.array() > 0.0).select(da, 0.0);
    Eigen::Map<Eigen::MatrixXd>(gradient->data() + b.offset, b.rows, b.cols) +=
        dz * acts[l].transpose();
    Eigen::Map<Eigen::VectorXd>(gradient->data() + b.offset + b.rows * b.cols, b.rows) +=
        dz.rowwise().sum();
    if (l > 0) da = net.weight(b).transpose() * dz;
    a = acts[l];
  }
  return total;
}

std::string loss_name(Loss loss) {
  switch (loss) {
    case Loss::kV:
      return "L_v";
    case Loss::kR:
      return "L_r";
    case Loss::kF:
      return "L_f";
  }
  return "?";
}

double loss_value(const MlpNetwork& net, Loss loss, const TrainingBatch& batch) {
  const Loss one[] = {loss};
  return MlpBackprop::run(net, one, batch, nullptr);
}

double loss_and_gradient(const MlpNetwork& net, std::span<const Loss> losses,
                         const TrainingBatch& batch, Eigen::VectorXd& gradient) {
  return MlpBackprop::run(net, losses, batch, &gradient);
}

double gradient_check(const MlpNetwork& net, Loss loss, const TrainingBatch& batch,
                      std::size_t samples, std::uint64_t seed, std::size_t* skipped) {
  const Loss one[] = {loss};
  Eigen::VectorXd analytic;
  loss_and_gradient(net, one, batch, analytic);
  const auto n = net.parameter_count();
  std::vector<std::size_t> picks(n);
  std::iota(picks.begin(), picks.end(), std::size_t{0});
  if (samples < n) {
    RandomStream rng(seed);
    for (std::size_t i = 0; i < samples; ++i) std::swap(picks[i], picks[i + rng.index(n - i)]);
    picks.resize(samples);
  }
  constexpr double kStep = 1e-4;
  MlpNetwork probe = net;
  Eigen::VectorXd params = net.parameters();
  const std::vector<bool> pattern = MlpBackprop::relu_pattern(net, batch);
  double worst = 0.0;
  if (skipped) *skipped = 0;
  for (std::size_t p : picks) {
    const double keep = params[static_cast<Eigen::Index>(p)];
    params[static_cast<Eigen::Index>(p)] = keep + kStep;
    probe.set_parameters(params);
    const double up = loss_value(probe, loss, batch);
    bool kink = MlpBackprop::relu_pattern(probe, batch) != pattern;
    params[static_cast<Eigen::Index>(p)] = keep - kStep;
    probe.set_parameters(params);
    const double down = loss_value(probe, loss, batch);
    kink = kink || MlpBackprop::relu_pattern(probe, batch) != pattern;
    params[static_cast<Eigen::Index>(p)] = keep;
    if (kink) {
      if (skipped) ++*skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * kStep);
    const double a = analytic[static_cast<Eigen::Index>(p)];
    worst = std::max(worst, std::abs(a - numeric) /
                                std::max(std::abs(a) + std::abs(numeric), 1e-7));
  }
  return worst;
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("training.learning_rate", "must be positive");
  }
  if (batch_size < 1) throw ConfigError("training.batch_size", "must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("training.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("training.beta2", "must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("training.adam_epsilon", "must be positive");
  for (std::size_t h : hidden) {
    if (h < 1) throw ConfigError("training.hidden", "widths must be at least 1");
  }
}

namespace {

struct BatchSource {
  const Eigen::Ref<const Eigen::MatrixXd>& real;
  std::span<const std::size_t> labels;
  const SyntheticGenerator& generator;
  std::vector<double> cumulative;  // condition prior CDF

  TrainingBatch draw(RandomStream& rng, std::size_t size) const {
    TrainingBatch b;
    const auto d = real.rows();
    const auto n = static_cast<Eigen::Index>(size);
    b.real.resize(d, n);
    b.labels.resize(size);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto i = rng.index(static_cast<std::size_t>(real.cols()));
      b.real.col(j) = real.col(static_cast<Eigen::Index>(i));
      b.labels[static_cast<std::size_t>(j)] = labels[i];
    }
    b.fake.resize(d, n);
    b.conditions.assign(size, 0);
    for (Eigen::Index j = 0; j < n; ++j) {
      std::size_t c = 0;
      if (generator.conditional()) {
        const double u = rng.uniform();
        c = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end() - 1, u) - cumulative.begin());
      }
      b.fake.col(j) = generator.sample(rng, c).x;
      b.conditions[static_cast<std::size_t>(j)] = c;
    }
    return b;
  }
};

}  // namespace

MlpNetwork train_heads(const Eigen::Ref<const Eigen::MatrixXd>& real,
                       std::span<const std::size_t> labels, std::size_t classes,
                       const SyntheticGenerator& generator, const TrainingConfig& config,
                       TrainingReport* report) {
  config.validate();
  if (static_cast<std::size_t>(real.rows()) != generator.dim()) {
    throw DimensionMismatch("real data and generator dimensions differ");
  }
  check_labels(labels, real.cols(), classes, "training labels");
  std::vector<std::size_t> per_class(classes, 0);
  for (std::size_t c : labels) ++per_class[c];
  for (std::size_t k = 0; k < classes; ++k) {
    if (per_class[k] == 0) {
      throw Error("training data has no sample of class " + std::to_string(k));
    }
  }

  const std::size_t conditions = generator.conditional() ? generator.condition_count() : 0;
  MlpNetwork net(generator.dim(), config.hidden, classes, conditions,
                 derive_seed(config.seed, 0));
  BatchSource source{real, labels, generator, {}};
  double running = 0.0;
  for (std::size_t c = 0; c < generator.condition_count(); ++c) {
    running += generator.condition_prior(c);
    source.cumulative.push_back(running);
  }
  RandomStream batches(derive_seed(config.seed, 1));
  RandomStream held_out_rng(derive_seed(config.seed, 2));
  const TrainingBatch held_out = source.draw(held_out_rng, std::max<std::size_t>(config.batch_size, 1024));

  const std::vector<Loss> all{Loss::kV, Loss::kR, Loss::kF};
  if (report) {
    Eigen::VectorXd unused;
    report->initial_loss = loss_and_gradient(net, all, held_out, unused);
  }

  Eigen::VectorXd params = net.parameters();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  std::size_t adam_t = 0;
  // The staged schedule freezes the trunk (a prefix of the flat layout)
  // and the D_r head (right after the one-row D_v head).
  const std::size_t first_stage =
      config.schedule == TrainingConfig::Schedule::kStaged ? config.steps / 2 : 0;
  Eigen::Index frozen = 0;
  {
    std::size_t in = generator.dim();
    for (std::size_t h : config.hidden) {
      frozen += static_cast<Eigen::Index>(h * in + h);
      in = h;
    }
  }
  const Eigen::Index head_v = static_cast<Eigen::Index>(
      config.hidden.empty() ? generator.dim() : config.hidden.back()) + 1;
  const Eigen::Index head_r = static_cast<Eigen::Index>(classes) * (head_v - 1) +
                              static_cast<Eigen::Index>(classes);

  for (std::size_t step = 0; step < config.steps; ++step) {
    const TrainingBatch batch = source.draw(batches, config.batch_size);
    std::vector<Loss> active = all;
    const bool staged = config.schedule == TrainingConfig::Schedule::kStaged;
    if (staged && step < first_stage) active = {Loss::kR};
    if (staged && step == first_stage) {
      m.setZero();
      v.setZero();
      adam_t = 0;
    }
    loss_and_gradient(net, active, batch, grad);
    if (staged && step >= first_stage) {
      grad.head(frozen).setZero();
      grad.segment(frozen + head_v, head_r).setZero();
    }
    if (config.optimizer == TrainingConfig::Optimizer::kSgd) {
      params -= config.learning_rate * grad;
    } else {
      ++adam_t;
      m = config.beta1 * m + (1.0 - config.beta1) * grad;
      v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam_t));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam_t));
      params.array() -= config.learning_rate * (m.array() / c1) /
                        ((v.array() / c2).sqrt() + config.adam_epsilon);
    }
    if (!params.allFinite()) {
      throw TrainingDiverged(step, "non-finite parameter after training step " +
                                       std::to_string(step));
    }
    net.set_parameters(params);
  }
  if (report) {
    Eigen::VectorXd unused;
    report->final_loss = loss_and_gradient(net, all, held_out, unused);
  }
  return net;
}

double head_dv(const MlpNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& x,
               const CalibrationParams& calibration) {
  const auto logits = net.forward(x);
  return sigmoid(logits.v[0] / calibration.temperature_v);
}

Eigen::VectorXd head_dr(const MlpNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const CalibrationParams& calibration) {
  auto logits = net.forward(x);
  tempered_softmax(logits.r, calibration.temperature_r);
  return logits.r.col(0);
}

Eigen::VectorXd head_df(const MlpNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const CalibrationParams& calibration) {
  if (net.condition_count() == 0) return Eigen::VectorXd::Ones(1);
  auto logits = net.forward(x);
  tempered_softmax(logits.f, calibration.temperature_f);
  return logits.f.col(0);
}

NeuralProvider::NeuralProvider(MlpNetwork net, std::vector<double> gammas)
    : net_(std::move(net)), gammas_(std::move(gammas)) {
  if (gammas_.size() != net_.class_count()) {
    throw DimensionMismatch("one gamma per class is required");
  }
  for (double g : gammas_) {
    if (!(g > 0.0) || !std::isfinite(g)) throw Error("gammas must be positive and finite");
  }
}

void NeuralProvider::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& points,
                              const CalibrationParams& calibration, RatioBatch& out) const {
  auto logits = net_.forward(points);
  // log(1/sigmoid(s) - 1) = -s.
  out.log_dv_odds = -logits.v.transpose() / calibration.temperature_v;
  tempered_softmax(logits.r, calibration.temperature_r);
  out.dr = std::move(logits.r);
  if (net_.condition_count() > 0) tempered_softmax(logits.f, calibration.temperature_f);
  out.df = std::move(logits.f);
}

nlohmann::json network_to_json(const MlpNetwork& net) {
  const auto& p = net.parameters();
  return {{"format", "s2m-mlp"},
          {"version", 1},
          {"input", net.input_dim()},
          {"hidden", net.hidden()},
          {"classes", net.class_count()},
          {"conditions", net.condition_count()},
          {"parameters", std::vector<double>(p.data(), p.data() + p.size())}};
}

MlpNetwork network_from_json(const nlohmann::json& doc) {
  if (doc.value("format", std::string()) != "s2m-mlp") throw Error("not a network document");
  if (doc.value("version", 0) != 1) throw Error("unsupported network version");
  MlpNetwork net(doc.at("input").get<std::size_t>(),
                 doc.at("hidden").get<std::vector<std::size_t>>(),
                 doc.at("classes").get<std::size_t>(), doc.at("conditions").get<std::size_t>(),
                 0);
  const auto p = doc.at("parameters").get<std::vector<double>>();
  net.set_parameters(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
  return net;
}

}  // namespace s2m
