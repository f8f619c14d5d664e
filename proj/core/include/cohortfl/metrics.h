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

#ifndef COHORTFL_METRICS_H_
#define COHORTFL_METRICS_H_

#include <cstdint>
#include <vector>

namespace cohortfl {

// Rows are true classes, columns are predicted classes.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<int64_t> counts;  // row-major num_classes^2

  explicit ConfusionMatrix(int num_classes_);
  int64_t& at(int true_class, int pred_class);
  int64_t at(int true_class, int pred_class) const;
  int64_t total() const;
};

struct F1Report {
  std::vector<double> per_class_f1;  // 0 where precision + recall == 0
  std::vector<int64_t> support;      // true-class row counts
  double micro = 0.0;
  double macro = 0.0;     // mean over classes with support > 0
  double weighted = 0.0;  // support-weighted mean, weights sum to 1
};

// Throws std::invalid_argument on length mismatch or out-of-range ids.
ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& labels, int num_classes);

// Throws std::invalid_argument on an all-zero matrix.
F1Report f1_report(const ConfusionMatrix& cm);

}  // namespace cohortfl

#endif  // COHORTFL_METRICS_H_
