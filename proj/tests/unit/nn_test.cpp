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

#include <cmath>
#include <vector>

#include <doctest.h>

#include "cohortfl/nn.h"
#include "cohortfl/rng.h"

using namespace cohortfl;
using Eigen::MatrixXd;

namespace {

// Central finite differences of the batch loss, the independent oracle for
// backward(). Step 1e-5; the loss is smooth away from rectifier kinks.
ParamVector fd_gradient(const LayerShapes& shapes, const ParamVector& params,
                        const MatrixXd& features,
                        const std::vector<int>& labels) {
  const double h = 1e-5;
  ParamVector g(params.size());
  ParamVector p = params;
  for (int i = 0; i < params.size(); ++i) {
    p[i] = params[i] + h;
    const double up = xent_loss(forward(shapes, p, features), labels);
    p[i] = params[i] - h;
    const double dn = xent_loss(forward(shapes, p, features), labels);
    p[i] = params[i];
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double max_rel_err(const ParamVector& a, const ParamVector& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-3});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

MatrixXd random_batch(int rows, int cols, uint64_t seed,
                      std::vector<int>* labels, int num_classes) {
  Rng rng(seed);
  MatrixXd x(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) x(r, c) = rng.normal();
  }
  labels->clear();
  for (int r = 0; r < rows; ++r) {
    labels->push_back(static_cast<int>(rng.below(num_classes)));
  }
  return x;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("parameter layout sizes") {
  CHECK(LayerShapes::defaults().param_count() == 17721);
  CHECK(LayerShapes{{79, 9}}.param_count() == 720);
  const LayerShapes s{{4, 3, 2}};
  CHECK(s.param_count() == 4 * 3 + 3 + 3 * 2 + 2);
  CHECK(s.weight_offset(0) == 0);
  CHECK(s.bias_offset(0) == 12);
  CHECK(s.weight_offset(1) == 15);
  CHECK(s.bias_offset(1) == 21);
}

TEST_CASE("init_params is deterministic with zero biases in bounds") {
  const LayerShapes s{{5, 4, 3}};
  const ParamVector a = init_params(s, 77);
  const ParamVector b = init_params(s, 77);
  CHECK(a == b);
  CHECK(init_params(s, 78) != a);

  for (int l = 0; l < s.num_layers(); ++l) {
    const double limit =
        std::sqrt(6.0 / (s.dims[l] + s.dims[l + 1]));
    for (int i = 0; i < s.dims[l] * s.dims[l + 1]; ++i) {
      CHECK(std::abs(a[s.weight_offset(l) + i]) <= limit);
    }
    for (int i = 0; i < s.dims[l + 1]; ++i) {
      CHECK(a[s.bias_offset(l) + i] == 0.0);
    }
  }
}

TEST_CASE("forward with all-zero parameters is uniform") {
  const LayerShapes s{{79, 79, 128, 9}};
  const ParamVector zero = ParamVector::Zero(s.param_count());
  MatrixXd x = MatrixXd::Constant(3, 79, 0.7);
  const MatrixXd p = forward(s, zero, x);
  REQUIRE(p.rows() == 3);
  REQUIRE(p.cols() == 9);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 9; ++c) {
      CHECK(p(r, c) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward rows are probability distributions") {
  const LayerShapes s{{6, 5, 4}};
  const ParamVector params = init_params(s, 123);
  std::vector<int> labels;
  const MatrixXd x = random_batch(20, 6, 9, &labels, 4);
  const MatrixXd p = forward(s, params, x);
  for (int r = 0; r < p.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < p.cols(); ++c) {
      CHECK(p(r, c) > 0.0);
      CHECK(p(r, c) < 1.0);
      sum += p(r, c);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("forward matches a hand-evaluated 2-2-2 net") {
  // Weight matrices are stored column-major per layer, then the bias:
  // W0 = [[0.5, -0.3], [0.2, 0.4]], b0 = [0.1, -0.2],
  // W1 = [[1.0, -1.0], [0.5, 0.25]], b1 = [0.0, 0.3].
  const LayerShapes s{{2, 2, 2}};
  ParamVector params(12);
  params << 0.5, 0.2, -0.3, 0.4, 0.1, -0.2, 1.0, 0.5, -1.0, 0.25, 0.0, 0.3;
  MatrixXd x(2, 2);
  x << 1.0, 2.0, -1.0, 0.5;  // second row drives hidden unit 0 into the cutoff
  const MatrixXd p = forward(s, params, x);
  CHECK(p(0, 0) == doctest::Approx(0.8550783685121771).epsilon(1e-12));
  CHECK(p(0, 1) == doctest::Approx(0.14492163148782286).epsilon(1e-12));
  CHECK(p(1, 0) == doctest::Approx(0.4439861094553801).epsilon(1e-12));
  CHECK(p(1, 1) == doctest::Approx(0.5560138905446199).epsilon(1e-12));
}

TEST_CASE("forward rejects shape mismatches") {
  const LayerShapes s{{3, 2}};
  const ParamVector params = ParamVector::Zero(s.param_count());
  CHECK_THROWS_AS(forward(s, params, MatrixXd::Zero(1, 4)),
                  std::invalid_argument);
  CHECK_THROWS_AS(forward(s, ParamVector::Zero(5), MatrixXd::Zero(1, 3)),
                  std::invalid_argument);
}

TEST_CASE("xent_loss values") {
  MatrixXd uniform = MatrixXd::Constant(4, 9, 1.0 / 9.0);
  CHECK(xent_loss(uniform, {0, 3, 5, 8}) ==
        doctest::Approx(2.1972245773362196).epsilon(1e-12));

  MatrixXd sure(1, 2);
  sure << 1.0, 0.0;
  CHECK(xent_loss(sure, {0}) == 0.0);

  MatrixXd p(2, 2);
  p << 0.8, 0.2, 0.3, 0.7;
  CHECK(xent_loss(p, {0, 1}) ==
        doctest::Approx(0.2899092476264711).epsilon(1e-12));

  CHECK_THROWS_AS(xent_loss(p, {0}), std::invalid_argument);
  CHECK_THROWS_AS(xent_loss(p, {0, 2}), std::invalid_argument);
}

TEST_CASE("backward matches central finite differences") {
  for (uint64_t seed : {1ull, 2ull}) {
    const LayerShapes s432{{4, 3, 2}};
    const ParamVector p1 = init_params(s432, seed);
    std::vector<int> labels;
    const MatrixXd x1 = random_batch(8, 4, seed + 10, &labels, 2);
    const auto [g1, loss1] = backward(s432, p1, x1, labels);
    CHECK(loss1 == doctest::Approx(xent_loss(forward(s432, p1, x1), labels))
                       .epsilon(1e-12));
    CHECK(max_rel_err(g1, fd_gradient(s432, p1, x1, labels)) < 1e-6);

    const LayerShapes s1085{{10, 8, 5}};
    const ParamVector p2 = init_params(s1085, seed + 20);
    const MatrixXd x2 = random_batch(6, 10, seed + 30, &labels, 5);
    const auto [g2, loss2] = backward(s1085, p2, x2, labels);
    CHECK(max_rel_err(g2, fd_gradient(s1085, p2, x2, labels)) < 1e-6);
  }
}

TEST_CASE("backward degenerate cases") {
  // A single-output net's softmax is identically 1: loss 0, gradient 0.
  const LayerShapes s{{1, 1}};
  ParamVector params(2);
  params << 1.7, -0.4;
  MatrixXd x(3, 1);
  x << 1.0, -2.0, 0.5;
  const auto [g, loss] = backward(s, params, x, {0, 0, 0});
  CHECK(loss == 0.0);
  CHECK(g.norm() == 0.0);

  // Duplicating every batch row leaves the mean gradient unchanged.
  const LayerShapes s2{{3, 4}};
  const ParamVector p = init_params(s2, 5);
  std::vector<int> labels;
  const MatrixXd xb = random_batch(5, 3, 6, &labels, 4);
  MatrixXd xd(10, 3);
  xd << xb, xb;
  std::vector<int> labels2 = labels;
  labels2.insert(labels2.end(), labels.begin(), labels.end());
  const auto [gb, lb] = backward(s2, p, xb, labels);
  const auto [gd, ld] = backward(s2, p, xd, labels2);
  CHECK((gb - gd).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(lb == doctest::Approx(ld).epsilon(1e-12));
}

TEST_CASE("adagrad_step follows the update rule") {
  // First step with g = 3: accumulator 9, step -lr * 3 / sqrt(9 + stab).
  ParamVector theta = ParamVector::Zero(1);
  AdagradState st(1, 0.1);
  ParamVector g(1);
  g << 3.0;
  adagrad_step(theta, st, g);
  CHECK(theta[0] == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(st.accumulator[0] == 9.0);

  // g = 0 changes nothing.
  ParamVector z = ParamVector::Zero(1);
  adagrad_step(theta, st, z);
  CHECK(theta[0] == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(st.accumulator[0] == 9.0);

  // Two unit gradients: second step magnitude lr / sqrt(2).
  ParamVector theta2 = ParamVector::Zero(1);
  AdagradState st2(1, 0.1);
  ParamVector one(1);
  one << 1.0;
  adagrad_step(theta2, st2, one);
  const double after_first = theta2[0];
  CHECK(after_first == doctest::Approx(-0.09999999500000037).epsilon(1e-12));
  adagrad_step(theta2, st2, one);
  CHECK(theta2[0] - after_first ==
        doctest::Approx(-0.07071067635088787).epsilon(1e-12));
}

TEST_CASE("adagrad accumulator is monotone nondecreasing") {
  Rng rng(31);
  ParamVector theta = ParamVector::Zero(4);
  AdagradState st(4, 0.1);
  ParamVector prev = st.accumulator;
  for (int step = 0; step < 50; ++step) {
    ParamVector g(4);
    for (int i = 0; i < 4; ++i) g[i] = rng.normal();
    adagrad_step(theta, st, g);
    for (int i = 0; i < 4; ++i) {
      CHECK(st.accumulator[i] >= prev[i]);
      CHECK(st.accumulator[i] >= 0.0);
    }
    prev = st.accumulator;
  }
}

TEST_CASE("sgd_step is a plain scaled subtraction") {
  ParamVector theta(2);
  theta << 1.0, -2.0;
  ParamVector g(2);
  g << 0.5, 0.25;
  sgd_step(theta, 0.1, g);
  CHECK(theta[0] == 1.0 - 0.1 * 0.5);
  CHECK(theta[1] == -2.0 - 0.1 * 0.25);
}

TEST_CASE("vector helpers") {
  ParamVector zero = ParamVector::Zero(3);
  CHECK(vec_l2_norm(zero) == 0.0);

  ParamVector v(2);
  v << 3.0, 4.0;
  CHECK(vec_l2_norm(v) == 5.0);

  CHECK(vec_add_scaled(v, v, -1.0).norm() == 0.0);
  ParamVector w(2);
  w << 1.0, 1.0;
  const ParamVector sum = vec_add_scaled(v, w, 2.0);
  CHECK(sum[0] == 5.0);
  CHECK(sum[1] == 6.0);

  CHECK_THROWS_AS(vec_add_scaled(v, zero, 1.0), std::invalid_argument);
}

TEST_SUITE_END();
