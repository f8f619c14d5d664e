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

#include "cohortfl/data.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cohortfl/rng.h"

namespace cohortfl {

const std::vector<std::string>& class_names() {
  static const std::vector<std::string> kNames = {
      "Benign",
      "Bot",
      "DOS attacks-GoldenEye",
      "DOS attacks-Hulk",
      "DOS attacks-SlowHTTPTest",
      "DOS attacks-Slowloris",
      "FTP-BruteForce",
      "Infiltration",
      "SSH-Bruteforce",
  };
  return kNames;
}

std::vector<int64_t> Dataset::histogram() const {
  std::vector<int64_t> h(kNumClasses, 0);
  for (int label : labels) {
    ++h[label];
  }
  return h;
}

std::vector<int> ClientShard::distinct_labels(const Dataset& d) const {
  std::set<int> seen;
  for (int64_t r : row_indices) {
    seen.insert(d.labels[r]);
  }
  return {seen.begin(), seen.end()};
}

std::pair<Eigen::MatrixXd, std::vector<int>> ClientShard::materialize(
    const Dataset& d) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(row_indices.size()),
                    d.rows.cols());
  std::vector<int> y(row_indices.size());
  for (size_t i = 0; i < row_indices.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = d.rows.row(row_indices[i]);
    y[i] = d.labels[row_indices[i]];
  }
  return {std::move(x), std::move(y)};
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') {
    s.pop_back();
  }
}

// Full-string numeric parse; returns false for empty, trailing junk, or
// non-finite values (those cells fall back to the column median).
bool parse_finite(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& drop_columns) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_csv: " + path + ": missing header row");
  }
  strip_cr(line);
  const auto header = split_fields(line);

  int label_idx = -1;
  std::vector<bool> keep(header.size(), true);
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      if (label_idx >= 0) {
        throw std::runtime_error("load_csv: duplicate label column '" +
                                 label_column + "'");
      }
      label_idx = static_cast<int>(i);
      keep[i] = false;
    } else if (std::find(drop_columns.begin(), drop_columns.end(),
                         header[i]) != drop_columns.end()) {
      keep[i] = false;
    }
  }
  if (label_idx < 0) {
    throw std::runtime_error("load_csv: " + path + ": label column '" +
                             label_column + "' not found");
  }
  int num_features = 0;
  for (bool k : keep) num_features += k ? 1 : 0;
  if (num_features != kNumFeatures) {
    throw std::runtime_error(
        "load_csv: " + path + ": expected " + std::to_string(kNumFeatures) +
        " feature columns after drop-list, got " + std::to_string(num_features));
  }

  const auto& names = class_names();
  // Two passes in memory: collect optional cells, then patch the gaps with
  // per-column medians over the finite entries.
  std::vector<std::vector<double>> cells;   // row-major, NaN marks a gap
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error(
          "load_csv: " + path + ": line " + std::to_string(line_no) + ": " +
          std::to_string(fields.size()) + " fields, header has " +
          std::to_string(header.size()));
    }
    const auto name_it =
        std::find(names.begin(), names.end(), fields[label_idx]);
    if (name_it == names.end()) {
      throw std::runtime_error("load_csv: " + path + ": line " +
                               std::to_string(line_no) +
                               ": unknown label '" + fields[label_idx] + "'");
    }
    labels.push_back(static_cast<int>(name_it - names.begin()));
    std::vector<double> row;
    row.reserve(num_features);
    for (size_t i = 0; i < fields.size(); ++i) {
      if (!keep[i]) continue;
      double v;
      row.push_back(parse_finite(fields[i], &v)
                        ? v
                        : std::numeric_limits<double>::quiet_NaN());
    }
    cells.push_back(std::move(row));
  }

  const int64_t n = static_cast<int64_t>(cells.size());
  Dataset d;
  d.rows.resize(n, kNumFeatures);
  d.labels = std::move(labels);
  for (int j = 0; j < kNumFeatures; ++j) {
    std::vector<double> finite;
    for (int64_t i = 0; i < n; ++i) {
      if (!std::isnan(cells[i][j])) finite.push_back(cells[i][j]);
    }
    const double med = median_of(std::move(finite));
    for (int64_t i = 0; i < n; ++i) {
      d.rows(i, j) = std::isnan(cells[i][j]) ? med : cells[i][j];
    }
  }
  return d;
}

namespace {

// The cluster layout is a fixed design of the generator, not a knob: attacks
// sit in four twin pairs on an orthonormal 10-frame, pair centers mutually far
// (kFarMult * separation apart), twins `separation * mult` apart. The twin gap
// is the load-bearing margin; everything else stays comfortably separable.
constexpr double kGenNoiseScale = 0.15;
constexpr double kGenFarMult = 4.0;
constexpr uint64_t kGenFrameSeed = 424242;
struct GenPair {
  int a, b;
  double mult;
};
constexpr GenPair kGenPairs[4] = {{3, 4, 0.85}, {1, 6, 0.85}, {7, 8, 1.0},
                                  {5, 2, 1.0}};

Eigen::MatrixXd generator_frame() {
  Rng rot = make_stream(kGenFrameSeed, StreamKind::kSynthData);
  Eigen::MatrixXd a(kNumFeatures, 10);
  for (int i = 0; i < kNumFeatures; ++i) {
    for (int j = 0; j < 10; ++j) {
      a(i, j) = rot.normal();
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(kNumFeatures, 10);
  const Eigen::MatrixXd r =
      qr.matrixQR().topLeftCorner(10, 10).triangularView<Eigen::Upper>();
  for (int j = 0; j < 10; ++j) {
    // Sign convention R_jj > 0 makes the frame unique for the drawn matrix.
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

Dataset synth_generate(const std::vector<int64_t>& counts, double separation,
                       uint64_t seed) {
  if (counts.size() > static_cast<size_t>(kNumClasses)) {
    throw std::invalid_argument("synth_generate: more than 9 class counts");
  }
  if (!(separation > 0.0)) {
    throw std::invalid_argument("synth_generate: separation must be positive");
  }
  std::vector<int64_t> cnt(kNumClasses, 0);
  int64_t total = 0;
  for (size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 0) {
      throw std::invalid_argument("synth_generate: negative count");
    }
    cnt[c] = counts[c];
    total += counts[c];
  }
  if (total == 0) {
    throw std::invalid_argument("synth_generate: all counts zero");
  }

  const Eigen::MatrixXd frame = generator_frame();
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(kNumClasses, kNumFeatures);
  for (int p = 0; p < 4; ++p) {
    const auto& pr = kGenPairs[p];
    const Eigen::VectorXd center =
        (kGenFarMult * separation / std::sqrt(2.0)) * frame.col(p);
    const Eigen::VectorXd axis =
        (0.5 * separation * pr.mult) * frame.col(4 + p);
    target.row(pr.a) = (center + axis).transpose();
    target.row(pr.b) = (center - axis).transpose();
  }

  // Downstream training z-scores on the mixture; pre-compensate so that the
  // standardized geometry, not the raw one, matches the target layout. Four
  // fixed-point iterations suffice at these scales.
  Eigen::VectorXd props(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    props[c] = double(cnt[c]) / double(total);
  }
  const double noise_var = kGenNoiseScale * kGenNoiseScale;
  Eigen::MatrixXd means = target;
  for (int iter = 0; iter < 4; ++iter) {
    const Eigen::RowVectorXd mu = props.transpose() * means;
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Constant(
        kNumFeatures, noise_var);  // sum_c p_c * ns^2 with equal ns
    for (int c = 0; c < kNumClasses; ++c) {
      var.array() +=
          props[c] * (means.row(c) - mu).array().square();
    }
    const Eigen::RowVectorXd scale = var.array().sqrt();
    means = target.array().rowwise() * scale.array();
  }

  Rng rng = make_stream(seed, StreamKind::kSynthData);
  Dataset d;
  d.rows.resize(total, kNumFeatures);
  d.labels.resize(total);
  int64_t row = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    for (int64_t i = 0; i < cnt[c]; ++i) {
      for (int j = 0; j < kNumFeatures; ++j) {
        d.rows(row, j) = means(c, j) + kGenNoiseScale * rng.normal();
      }
      d.labels[row] = c;
      ++row;
    }
  }
  return d;
}

NormStats fit_normalize(const Dataset& train) {
  if (train.size() == 0) {
    throw std::invalid_argument("fit_normalize: empty dataset");
  }
  const auto n = static_cast<double>(train.rows.rows());
  NormStats s;
  s.mean = train.rows.colwise().mean();
  s.std.resize(train.rows.cols());
  for (Eigen::Index j = 0; j < train.rows.cols(); ++j) {
    const double mn = train.rows.col(j).minCoeff();
    const double mx = train.rows.col(j).maxCoeff();
    if (mn == mx) {
      // Degenerate column: pin the mean to the constant so the normalized
      // column is exactly zero, and substitute unit scale.
      s.mean[j] = mn;
      s.std[j] = 1.0;
      continue;
    }
    const double var =
        (train.rows.col(j).array() - s.mean[j]).square().sum() / n;
    s.std[j] = std::sqrt(var);
    if (s.std[j] == 0.0) s.std[j] = 1.0;
  }
  return s;
}

Dataset apply_normalize(const Dataset& d, const NormStats& stats) {
  if (d.rows.cols() != stats.mean.size() ||
      d.rows.cols() != stats.std.size()) {
    throw std::invalid_argument("apply_normalize: stats width mismatch");
  }
  Dataset out;
  out.rows = (d.rows.rowwise() - stats.mean.transpose()).array().rowwise() /
             stats.std.transpose().array();
  out.labels = d.labels;
  return out;
}

CohortAssignment partition_cohorts(const std::vector<int>& attack_ids,
                                   int num_cohorts, uint64_t seed) {
  if (num_cohorts < 1 || num_cohorts > static_cast<int>(attack_ids.size())) {
    throw std::invalid_argument("partition_cohorts: num_cohorts out of range");
  }
  std::vector<int> ids = attack_ids;
  Rng rng = make_stream(seed, StreamKind::kPartitionCohorts);
  rng.shuffle(ids);

  CohortAssignment out;
  const int n = static_cast<int>(ids.size());
  const int base = n / num_cohorts;
  const int extra = n % num_cohorts;
  int at = 0;
  for (int c = 0; c < num_cohorts; ++c) {
    const int take = base + (c < extra ? 1 : 0);
    std::vector<int> set(ids.begin() + at, ids.begin() + at + take);
    std::sort(set.begin(), set.end());
    out.cohort_label_sets.push_back(std::move(set));
    at += take;
  }
  return out;
}

std::vector<ClientShard> partition_clients(const Dataset& d,
                                           const CohortAssignment& assignment,
                                           int clients_per_cohort,
                                           uint64_t seed) {
  if (clients_per_cohort < 1) {
    throw std::invalid_argument(
        "partition_clients: clients_per_cohort must be >= 1");
  }
  const int num_cohorts = static_cast<int>(assignment.cohort_label_sets.size());
  if (num_cohorts == 0) {
    throw std::invalid_argument("partition_clients: no cohorts");
  }

  std::vector<ClientShard> shards;
  std::vector<std::vector<int>> client_labels;  // attack labels per client
  for (int c = 0; c < num_cohorts; ++c) {
    const auto& set = assignment.cohort_label_sets[c];
    if (set.empty()) {
      throw std::invalid_argument("partition_clients: empty cohort label set");
    }
    // Two-label combinations of the cohort set in lexicographic order; client
    // k of the cohort takes combination k mod C(s,2).
    std::vector<std::pair<int, int>> combos;
    for (size_t i = 0; i < set.size(); ++i) {
      for (size_t j = i + 1; j < set.size(); ++j) {
        combos.emplace_back(set[i], set[j]);
      }
    }
    for (int k = 0; k < clients_per_cohort; ++k) {
      ClientShard shard;
      shard.client_id = static_cast<int>(shards.size());
      shard.cohort_id = c;
      if (combos.empty()) {
        client_labels.push_back({set[0]});
      } else {
        const auto& pr = combos[k % combos.size()];
        client_labels.push_back({pr.first, pr.second});
      }
      shards.push_back(std::move(shard));
    }
  }

  Rng rng = make_stream(seed, StreamKind::kPartitionClients);
  auto deal = [&](int label, const std::vector<int>& holders) {
    std::vector<int64_t> idx;
    for (int64_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] == label) idx.push_back(i);
    }
    if (idx.size() < holders.size()) {
      throw std::runtime_error(
          "partition_clients: insufficient rows for label " +
          std::to_string(label) + ": " + std::to_string(idx.size()) +
          " rows over " + std::to_string(holders.size()) + " clients");
    }
    rng.shuffle(idx);
    const size_t h = holders.size();
    const size_t base = idx.size() / h;
    const size_t extra = idx.size() % h;
    size_t at = 0;
    for (size_t i = 0; i < h; ++i) {
      const size_t take = base + (i < extra ? 1 : 0);
      auto& rows = shards[holders[i]].row_indices;
      rows.insert(rows.end(), idx.begin() + at, idx.begin() + at + take);
      at += take;
    }
  };

  for (int label = 0; label < kNumClasses; ++label) {
    if (label == assignment.benign_id) continue;
    std::vector<int> holders;
    for (size_t cid = 0; cid < shards.size(); ++cid) {
      const auto& labs = client_labels[cid];
      if (std::find(labs.begin(), labs.end(), label) != labs.end()) {
        holders.push_back(static_cast<int>(cid));
      }
    }
    bool in_some_set = false;
    for (const auto& set : assignment.cohort_label_sets) {
      if (std::find(set.begin(), set.end(), label) != set.end()) {
        in_some_set = true;
      }
    }
    if (!in_some_set) continue;  // label not partitioned by this assignment
    if (holders.empty()) {
      throw std::runtime_error(
          "partition_clients: label " + std::to_string(label) +
          " has no holding client (clients_per_cohort too small to cycle "
          "through the cohort's label combinations)");
    }
    deal(label, holders);
  }

  std::vector<int> everyone(shards.size());
  for (size_t i = 0; i < shards.size(); ++i) everyone[i] = static_cast<int>(i);
  deal(assignment.benign_id, everyone);
  return shards;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d,
                                             double test_fraction,
                                             uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument(
        "train_test_split: fraction must be in (0,1)");
  }
  Rng rng = make_stream(seed, StreamKind::kTrainTestSplit);
  std::vector<int64_t> train_idx, test_idx;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<int64_t> idx;
    for (int64_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw std::runtime_error("train_test_split: class " + std::to_string(c) +
                               " has 1 row; cannot stratify");
    }
    rng.shuffle(idx);
    const auto ntest = static_cast<size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + ntest);
    train_idx.insert(train_idx.end(), idx.begin() + ntest, idx.end());
  }
  rng.shuffle(train_idx);
  rng.shuffle(test_idx);

  auto gather = [&](const std::vector<int64_t>& idx) {
    Dataset out;
    out.rows.resize(static_cast<Eigen::Index>(idx.size()), d.rows.cols());
    out.labels.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
      out.rows.row(static_cast<Eigen::Index>(i)) = d.rows.row(idx[i]);
      out.labels[i] = d.labels[idx[i]];
    }
    return out;
  };
  return {gather(train_idx), gather(test_idx)};
}

std::string shard_manifest_csv(const Dataset& d,
                               const std::vector<ClientShard>& shards) {
  std::ostringstream out;
  out << "client_id,cohort_id,label_ids,row_counts\n";
  for (const auto& shard : shards) {
    const auto labels = shard.distinct_labels(d);
    std::vector<int64_t> counts(labels.size(), 0);
    for (int64_t r : shard.row_indices) {
      const auto it =
          std::lower_bound(labels.begin(), labels.end(), d.labels[r]);
      ++counts[it - labels.begin()];
    }
    out << shard.client_id << ',' << shard.cohort_id << ',';
    for (size_t i = 0; i < labels.size(); ++i) {
      out << (i ? "|" : "") << labels[i];
    }
    out << ',';
    for (size_t i = 0; i < counts.size(); ++i) {
      out << (i ? "|" : "") << counts[i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cohortfl
