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

#include "cohortfl/metrics.h"

#include <stdexcept>

namespace cohortfl {

ConfusionMatrix::ConfusionMatrix(int num_classes_)
    : num_classes(num_classes_),
      counts(static_cast<size_t>(num_classes_) * num_classes_, 0) {
  if (num_classes_ <= 0) {
    throw std::invalid_argument("confusion matrix needs at least one class");
  }
}

int64_t& ConfusionMatrix::at(int true_class, int pred_class) {
  return counts[static_cast<size_t>(true_class) * num_classes + pred_class];
}

int64_t ConfusionMatrix::at(int true_class, int pred_class) const {
  return counts[static_cast<size_t>(true_class) * num_classes + pred_class];
}

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (int64_t c : counts) t += c;
  return t;
}

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& labels, int num_classes) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("confusion: preds/labels length mismatch");
  }
  ConfusionMatrix cm(num_classes);
  for (size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || preds[i] < 0 ||
        preds[i] >= num_classes) {
      throw std::invalid_argument("confusion: class id out of range at row " +
                                  std::to_string(i));
    }
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

F1Report f1_report(const ConfusionMatrix& cm) {
  const int n = cm.num_classes;
  if (cm.total() == 0) {
    throw std::invalid_argument("f1_report: empty confusion matrix");
  }
  F1Report rep;
  rep.per_class_f1.assign(n, 0.0);
  rep.support.assign(n, 0);

  int64_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
  double macro_sum = 0.0, weighted_sum = 0.0;
  int64_t present = 0, support_total = 0;

  for (int c = 0; c < n; ++c) {
    int64_t tp = cm.at(c, c), row = 0, col = 0;
    for (int k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const int64_t fn = row - tp, fp = col - tp;
    rep.support[c] = row;
    pooled_tp += tp;
    pooled_fp += fp;
    pooled_fn += fn;

    const double p = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double r = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
    const double f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    rep.per_class_f1[c] = f1;

    // Zero-support classes carry no information about this evaluation; they
    // are excluded from the macro mean and get weight zero.
    if (row > 0) {
      ++present;
      support_total += row;
      macro_sum += f1;
      weighted_sum += f1 * double(row);
    }
  }

  // Pooled F1 from integer counts with a single division. In single-label
  // classification pooled fp == pooled fn == total - tp, so this quotient is
  // bit-identical to accuracy tp/total, an identity callers rely on.
  const int64_t micro_den = 2 * pooled_tp + pooled_fp + pooled_fn;
  rep.micro = micro_den > 0 ? 2.0 * double(pooled_tp) / double(micro_den) : 0.0;
  rep.macro = present > 0 ? macro_sum / double(present) : 0.0;
  rep.weighted =
      support_total > 0 ? weighted_sum / double(support_total) : 0.0;
  return rep;
}

}  // namespace cohortfl
