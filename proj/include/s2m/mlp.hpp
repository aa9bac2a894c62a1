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

// Three-headed feedforward classifier trained as a density-ratio estimator.
//
// A ReLU trunk feeds three linear heads: one logit for D_v (sigmoid), n
// logits for D_r and n_G logits for D_f (softmax). Losses are means over the
// batch:
//
//   L_v = mean_real softplus(-s) + mean_fake softplus(s)
//   L_r = mean_real -log softmax(r)_c      (real data, single positive label)
//   L_f = mean_fake -log softmax(f)_c      (generated data, its condition)
//
// so at the optimum sigmoid(s) = p_data / (p_data + p_G) and the softmaxes are
// the label and condition posteriors.
//
// Parameters live in one flat vector: for each trunk layer the weight matrix
// (column-major, out x in) then its bias, then the v, r and f heads in the
// same form. Gradients are accumulated column by column in batch order, so
// training with a fixed seed is bitwise reproducible on one build.

#ifndef S2M_MLP_HPP_
#define S2M_MLP_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "s2m/densities.hpp"
#include "s2m/ratio_provider.hpp"

namespace s2m {

class MlpNetwork {
 public:
  /// `conditions` = 0 builds no D_f head. Weights are drawn uniformly from
  /// +-sqrt(6 / fan_in) (He-uniform); biases start at zero.
  MlpNetwork(std::size_t input, std::vector<std::size_t> hidden, std::size_t classes,
             std::size_t conditions, std::uint64_t seed);

  std::size_t input_dim() const { return input_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  std::size_t class_count() const { return classes_; }
  std::size_t condition_count() const { return conditions_; }
  /// input, hidden..., then the head widths 1, n, n_G.
  std::vector<std::size_t> layer_sizes() const;

  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& parameters() const { return params_; }
  /// Replaces all parameters; the size must match.
  void set_parameters(const Eigen::VectorXd& params);
  bool finite() const { return params_.allFinite(); }

  struct Logits {
    Eigen::RowVectorXd v;
    Eigen::MatrixXd r;
    Eigen::MatrixXd f;  // zero rows without a D_f head
  };
  Logits forward(const Eigen::Ref<const Eigen::MatrixXd>& points) const;

 private:
  friend class MlpBackprop;

  struct Block {
    Eigen::Index offset;
    Eigen::Index rows;
    Eigen::Index cols;
  };
  Eigen::Map<const Eigen::MatrixXd> weight(const Block& b) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Block& b) const;
  Eigen::MatrixXd trunk(const Eigen::Ref<const Eigen::MatrixXd>& points,
                        std::vector<Eigen::MatrixXd>* activations) const;

  std::size_t input_;
  std::vector<std::size_t> hidden_;
  std::size_t classes_;
  std::size_t conditions_;
  std::vector<Block> layers_;  // trunk, then v, r and (optionally) f heads
  Eigen::VectorXd params_;
};

enum class Loss { kV, kR, kF };

std::string loss_name(Loss loss);

/// Real points with their single positive labels and generated points with
/// their conditions (conditions ignored when the network has no D_f head).
struct TrainingBatch {
  Eigen::MatrixXd real;
  std::vector<std::size_t> labels;
  Eigen::MatrixXd fake;
  std::vector<std::size_t> conditions;
};

double loss_value(const MlpNetwork& net, Loss loss, const TrainingBatch& batch);

/// Sum of the selected losses and its gradient with respect to the flat
/// parameter vector.
double loss_and_gradient(const MlpNetwork& net, std::span<const Loss> losses,
                         const TrainingBatch& batch, Eigen::VectorXd& gradient);

/// Largest relative error |a - n| / max(|a| + |n|, 1e-7) between analytic
/// gradients a and central differences n (step 1e-4) over `samples` random
/// parameters (all of them when the network is smaller). A parameter whose
/// +-step flips any ReLU on the batch is skipped, since the loss is not
/// differentiable across the kink; `skipped` receives how many were.
double gradient_check(const MlpNetwork& net, Loss loss, const TrainingBatch& batch,
                      std::size_t samples = 200, std::uint64_t seed = 0,
                      std::size_t* skipped = nullptr);

struct TrainingConfig {
  enum class Optimizer { kSgd, kAdam };
  /// kJoint sums all losses every step. kStaged spends the first half of the
  /// steps on L_r (trunk and D_r head), then freezes the trunk and trains the
  /// D_v and D_f heads.
  enum class Schedule { kJoint, kStaged };

  std::vector<std::size_t> hidden = {64, 64};
  Optimizer optimizer = Optimizer::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t steps = 2000;
  Schedule schedule = Schedule::kJoint;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

struct TrainingReport {
  /// Summed loss on a held-out batch before training and after it.
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Trains on a fixed labeled real dataset (columns of `real`, with labels)
/// and fresh generator draws every step. Real batches are drawn with
/// replacement; for a conditional generator the fake condition follows the
/// generator's condition prior. Throws TrainingDiverged when a step leaves a
/// non-finite parameter.
MlpNetwork train_heads(const Eigen::Ref<const Eigen::MatrixXd>& real,
                       std::span<const std::size_t> labels, std::size_t classes,
                       const SyntheticGenerator& generator, const TrainingConfig& config,
                       TrainingReport* report = nullptr);

double head_dv(const MlpNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& x,
               const CalibrationParams& calibration = {});
Eigen::VectorXd head_dr(const MlpNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const CalibrationParams& calibration = {});
/// The constant 1 (one entry) when the network has no D_f head.
Eigen::VectorXd head_df(const MlpNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const CalibrationParams& calibration = {});

/// Ratio provider backed by a trained network; gamma_k is supplied since the
/// network cannot know the class priors pi_k.
class NeuralProvider final : public RatioProvider {
 public:
  NeuralProvider(MlpNetwork net, std::vector<double> gammas);

  std::size_t class_count() const override { return net_.class_count(); }
  std::size_t condition_count() const override { return net_.condition_count(); }
  std::size_t dim() const override { return net_.input_dim(); }
  std::vector<double> default_gammas() const override { return gammas_; }

  void evaluate(const Eigen::Ref<const Eigen::MatrixXd>& points,
                const CalibrationParams& calibration, RatioBatch& out) const override;

  const MlpNetwork& network() const { return net_; }

 private:
  MlpNetwork net_;
  std::vector<double> gammas_;
};

/// {"format": "s2m-mlp", "version": 1, "input", "hidden", "classes",
///  "conditions", "parameters": [flat vector]}.
nlohmann::json network_to_json(const MlpNetwork& net);
MlpNetwork network_from_json(const nlohmann::json& doc);

}  // namespace s2m

#endif  // S2M_MLP_HPP_
