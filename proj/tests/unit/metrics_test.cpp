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

#include <algorithm>
#include <vector>

#include <doctest.h>

#include "cohortfl/metrics.h"
#include "cohortfl/rng.h"

using namespace cohortfl;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("confusion matrix counts") {
  auto cm = confusion({0, 1, 1}, {0, 0, 1}, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.total() == 3);

  auto diag = confusion({0, 1, 2, 2}, {0, 1, 2, 2}, 3);
  for (int t = 0; t < 3; ++t) {
    for (int p = 0; p < 3; ++p) {
      CHECK(diag.at(t, p) == (t == p ? (t == 2 ? 2 : 1) : 0));
    }
  }

  CHECK(confusion({}, {}, 3).total() == 0);
  CHECK_THROWS_AS(confusion({0}, {0, 1}, 2), std::invalid_argument);
  CHECK_THROWS_AS(confusion({2}, {0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(confusion({0}, {-1}, 2), std::invalid_argument);
}

TEST_CASE("perfect predictions give unit F1") {
  const auto rep = f1_report(confusion({0, 1, 2}, {0, 1, 2}, 3));
  CHECK(rep.micro == 1.0);
  CHECK(rep.macro == 1.0);
  CHECK(rep.weighted == 1.0);
  for (double f : rep.per_class_f1) CHECK(f == 1.0);
}

TEST_CASE("hand-computed three-row example is exact") {
  // labels [0,0,1], preds [0,1,1]: class 0 P=1 R=1/2, class 1 P=1/2 R=1,
  // so both per-class F1 = 2/3; micro = macro = weighted = 2/3.
  const auto rep = f1_report(confusion({0, 1, 1}, {0, 0, 1}, 2));
  CHECK(rep.per_class_f1[0] == 2.0 / 3.0);
  CHECK(rep.per_class_f1[1] == 2.0 / 3.0);
  CHECK(rep.micro == 2.0 / 3.0);
  CHECK(rep.macro == 2.0 / 3.0);
  CHECK(rep.weighted == 2.0 / 3.0);
  CHECK(rep.support == std::vector<int64_t>{2, 1});

  // The same rows in a 9-class space: absent classes carry no support and
  // are excluded from the averages, so every value is unchanged.
  const auto rep9 = f1_report(confusion({0, 1, 1}, {0, 0, 1}, 9));
  CHECK(rep9.micro == 2.0 / 3.0);
  CHECK(rep9.macro == 2.0 / 3.0);
  CHECK(rep9.weighted == 2.0 / 3.0);
  CHECK(rep9.per_class_f1[2] == 0.0);
}

TEST_CASE("micro F1 equals accuracy exactly on random vectors") {
  Rng rng(2026);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1000;
    std::vector<int> labels(n), preds(n);
    int64_t hits = 0;
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(9));
      preds[i] = static_cast<int>(rng.below(9));
      hits += preds[i] == labels[i];
    }
    const auto rep = f1_report(confusion(preds, labels, 9));
    CHECK(rep.micro == double(hits) / double(n));
  }
}

TEST_CASE("macro is bounded by the per-class extremes") {
  Rng rng(7);
  const int n = 500;
  std::vector<int> labels(n), preds(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(rng.below(4));
    preds[i] = static_cast<int>(rng.below(4));
  }
  const auto rep = f1_report(confusion(preds, labels, 4));
  const auto [lo, hi] = std::minmax_element(rep.per_class_f1.begin(),
                                            rep.per_class_f1.end());
  CHECK(rep.macro >= *lo);
  CHECK(rep.macro <= *hi);
}

TEST_CASE("row permutation leaves every metric unchanged") {
  std::vector<int> labels = {0, 1, 2, 0, 1, 2, 2, 1};
  std::vector<int> preds = {0, 2, 2, 1, 1, 2, 0, 1};
  const auto a = f1_report(confusion(preds, labels, 3));

  std::vector<size_t> order(labels.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(4);
  rng.shuffle(order);
  std::vector<int> labels2, preds2;
  for (size_t i : order) {
    labels2.push_back(labels[i]);
    preds2.push_back(preds[i]);
  }
  const auto b = f1_report(confusion(preds2, labels2, 3));
  CHECK(a.micro == b.micro);
  CHECK(a.macro == b.macro);
  CHECK(a.weighted == b.weighted);
  CHECK(a.per_class_f1 == b.per_class_f1);
}

TEST_CASE("degenerate inputs") {
  CHECK_THROWS_AS(f1_report(ConfusionMatrix(3)), std::invalid_argument);

  // All predictions wrong: precision + recall = 0 for the true class,
  // per-class F1 defined as 0.
  const auto rep = f1_report(confusion({1, 1}, {0, 0}, 2));
  CHECK(rep.per_class_f1[0] == 0.0);
  CHECK(rep.micro == 0.0);
  CHECK(rep.macro == 0.0);
  CHECK(rep.weighted == 0.0);
}

TEST_SUITE_END();
