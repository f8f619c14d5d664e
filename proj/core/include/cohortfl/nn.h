// Copyright 2026 The cohortfl Authors
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

#ifndef COHORTFL_NN_H_
#define COHORTFL_NN_H_

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace cohortfl {

using ParamVector = Eigen::VectorXd;

// Fully connected net: dims = {input, hidden..., output}. Rectifier on the
// hidden layers, softmax on the output. Parameters live in one flat vector:
// for each layer, the weight matrix in column-major order, then the bias.
struct LayerShapes {
  std::vector<int> dims;

  // 79 inputs -> 79 -> 128 -> 9 classes.
  static LayerShapes defaults() { return LayerShapes{{79, 79, 128, 9}}; }

  int num_layers() const { return static_cast<int>(dims.size()) - 1; }
  int param_count() const;
  // Offset of layer l's weight block / bias block in the flat vector.
  int weight_offset(int l) const;
  int bias_offset(int l) const;
};

// Uniform weights in +-sqrt(6 / (fan_in + fan_out)) per matrix, biases zero.
ParamVector init_params(const LayerShapes& shapes, uint64_t seed);

// Row-per-sample class probabilities. Throws on width mismatch.
Eigen::MatrixXd forward(const LayerShapes& shapes, const ParamVector& params,
                        const Eigen::MatrixXd& features);

// Mean of -log p(true class). Throws on row mismatch or label out of range.
double xent_loss(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

// Exact analytic gradient of the mean cross-entropy over the batch, plus the
// loss value itself.
std::pair<ParamVector, double> backward(const LayerShapes& shapes,
                                        const ParamVector& params,
                                        const Eigen::MatrixXd& features,
                                        const std::vector<int>& labels);

// Argmax class per row; ties resolve to the lowest class id.
std::vector<int> predict(const LayerShapes& shapes, const ParamVector& params,
                         const Eigen::MatrixXd& features);

struct AdagradState {
  ParamVector accumulator;  // running sum of squared gradients, >= 0
  double learning_rate = 0.1;
  double stability = 1e-7;

  AdagradState() = default;
  AdagradState(int param_count, double lr, double stab = 1e-7)
      : accumulator(ParamVector::Zero(param_count)),
        learning_rate(lr),
        stability(stab) {}
};

// theta -= lr * g / sqrt(acc + stability) after acc += g^2, per coordinate.
void adagrad_step(ParamVector& params, AdagradState& state,
                  const ParamVector& grad);

void sgd_step(ParamVector& params, double learning_rate,
              const ParamVector& grad);

// a + s*b. Throws on layout mismatch.
ParamVector vec_add_scaled(const ParamVector& a, const ParamVector& b,
                           double s);
double vec_l2_norm(const ParamVector& a);

}  // namespace cohortfl

#endif  // COHORTFL_NN_H_
