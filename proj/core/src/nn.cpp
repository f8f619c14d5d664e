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

#include "cohortfl/nn.h"

#include <cmath>
#include <stdexcept>

#include "cohortfl/rng.h"

namespace cohortfl {

namespace {

using Eigen::MatrixXd;

Eigen::Map<const MatrixXd> weights(const LayerShapes& s,
                                   const ParamVector& params, int l) {
  return {params.data() + s.weight_offset(l), s.dims[l], s.dims[l + 1]};
}

Eigen::Map<const Eigen::VectorXd> bias(const LayerShapes& s,
                                       const ParamVector& params, int l) {
  return {params.data() + s.bias_offset(l), s.dims[l + 1]};
}

void check_shapes(const LayerShapes& s, const ParamVector& params,
                  const MatrixXd& features) {
  if (static_cast<int>(s.dims.size()) < 2) {
    throw std::invalid_argument("LayerShapes needs input and output widths");
  }
  if (params.size() != s.param_count()) {
    throw std::invalid_argument("parameter vector does not match shapes");
  }
  if (features.cols() != s.dims.front()) {
    throw std::invalid_argument("feature width does not match input layer");
  }
}

// Activations per layer, post-nonlinearity; front() is the input batch.
std::vector<MatrixXd> run_forward(const LayerShapes& s,
                                  const ParamVector& params,
                                  const MatrixXd& features) {
  std::vector<MatrixXd> acts;
  acts.reserve(s.num_layers() + 1);
  acts.push_back(features);
  for (int l = 0; l < s.num_layers(); ++l) {
    MatrixXd z = acts.back() * weights(s, params, l);
    z.rowwise() += bias(s, params, l).transpose();
    if (l + 1 < s.num_layers()) {
      acts.push_back(z.cwiseMax(0.0));
    } else {
      // Row-stable softmax.
      Eigen::VectorXd m = z.rowwise().maxCoeff();
      z.colwise() -= m;
      MatrixXd e = z.array().exp().matrix();
      Eigen::VectorXd sum = e.rowwise().sum();
      acts.push_back(e.array().colwise() / sum.array());
    }
  }
  return acts;
}

}  // namespace

int LayerShapes::param_count() const {
  int n = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    n += dims[l] * dims[l + 1] + dims[l + 1];
  }
  return n;
}

int LayerShapes::weight_offset(int l) const {
  int off = 0;
  for (int k = 0; k < l; ++k) {
    off += dims[k] * dims[k + 1] + dims[k + 1];
  }
  return off;
}

int LayerShapes::bias_offset(int l) const {
  return weight_offset(l) + dims[l] * dims[l + 1];
}

ParamVector init_params(const LayerShapes& shapes, uint64_t seed) {
  ParamVector params = ParamVector::Zero(shapes.param_count());
  Rng rng = make_stream(seed, StreamKind::kParamInit);
  for (int l = 0; l < shapes.num_layers(); ++l) {
    const int fan_in = shapes.dims[l], fan_out = shapes.dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    double* w = params.data() + shapes.weight_offset(l);
    for (int i = 0; i < fan_in * fan_out; ++i) {
      w[i] = (2.0 * rng.uniform01() - 1.0) * limit;
    }
    // biases stay zero
  }
  return params;
}

Eigen::MatrixXd forward(const LayerShapes& shapes, const ParamVector& params,
                        const Eigen::MatrixXd& features) {
  check_shapes(shapes, params, features);
  return run_forward(shapes, params, features).back();
}

double xent_loss(const Eigen::MatrixXd& probs,
                 const std::vector<int>& labels) {
  if (static_cast<size_t>(probs.rows()) != labels.size()) {
    throw std::invalid_argument("xent_loss: row count mismatch");
  }
  double sum = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= probs.cols()) {
      throw std::invalid_argument("xent_loss: label out of range");
    }
    sum -= std::log(probs(static_cast<Eigen::Index>(i), labels[i]));
  }
  return sum / static_cast<double>(labels.size());
}

std::pair<ParamVector, double> backward(const LayerShapes& shapes,
                                        const ParamVector& params,
                                        const Eigen::MatrixXd& features,
                                        const std::vector<int>& labels) {
  check_shapes(shapes, params, features);
  if (static_cast<size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("backward: batch row count mismatch");
  }
  const auto acts = run_forward(shapes, params, features);
  const double loss = xent_loss(acts.back(), labels);
  const double inv_n = 1.0 / static_cast<double>(features.rows());

  ParamVector grad = ParamVector::Zero(params.size());
  // Softmax + cross-entropy: dZ = (P - onehot) / n.
  MatrixXd dz = acts.back() * inv_n;
  for (size_t i = 0; i < labels.size(); ++i) {
    dz(static_cast<Eigen::Index>(i), labels[i]) -= inv_n;
  }
  for (int l = shapes.num_layers() - 1; l >= 0; --l) {
    Eigen::Map<MatrixXd> dw(grad.data() + shapes.weight_offset(l),
                            shapes.dims[l], shapes.dims[l + 1]);
    Eigen::Map<Eigen::VectorXd> db(grad.data() + shapes.bias_offset(l),
                                   shapes.dims[l + 1]);
    dw = acts[l].transpose() * dz;
    db = dz.colwise().sum();
    if (l > 0) {
      MatrixXd dh = dz * weights(shapes, params, l).transpose();
      // Rectifier gate; the stored activation is already max(0, z).
      dz = (acts[l].array() > 0.0).cast<double>() * dh.array();
    }
  }
  return {std::move(grad), loss};
}

std::vector<int> predict(const LayerShapes& shapes, const ParamVector& params,
                         const Eigen::MatrixXd& features) {
  const MatrixXd probs = forward(shapes, params, features);
  std::vector<int> out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = static_cast<int>(c);
    }
    out[i] = best;
  }
  return out;
}

void adagrad_step(ParamVector& params, AdagradState& state,
                  const ParamVector& grad) {
  if (params.size() != grad.size() ||
      params.size() != state.accumulator.size()) {
    throw std::invalid_argument("adagrad_step: layout mismatch");
  }
  state.accumulator.array() += grad.array().square();
  params.array() -=
      state.learning_rate * grad.array() /
      (state.accumulator.array() + state.stability).sqrt();
}

void sgd_step(ParamVector& params, double learning_rate,
              const ParamVector& grad) {
  if (params.size() != grad.size()) {
    throw std::invalid_argument("sgd_step: layout mismatch");
  }
  params -= learning_rate * grad;
}

ParamVector vec_add_scaled(const ParamVector& a, const ParamVector& b,
                           double s) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("vec_add_scaled: layout mismatch");
  }
  return a + s * b;
}

double vec_l2_norm(const ParamVector& a) { return a.norm(); }

}  // namespace cohortfl
