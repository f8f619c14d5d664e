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

#ifndef COHORTFL_DATA_H_
#define COHORTFL_DATA_H_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cohortfl {

inline constexpr int kNumFeatures = 79;
inline constexpr int kNumClasses = 9;

// Class-name order fixes the label ids (0 = Benign, 1..8 = attacks).
const std::vector<std::string>& class_names();

struct Dataset {
  Eigen::MatrixXd rows;    // n x 79
  std::vector<int> labels; // ids 0..8

  int64_t size() const { return rows.rows(); }
  std::vector<int64_t> histogram() const;
};

struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // strictly positive; degenerate columns get 1
};

struct CohortAssignment {
  std::vector<std::vector<int>> cohort_label_sets;  // disjoint attack ids
  int benign_id = 0;
};

struct ClientShard {
  int client_id = 0;
  int cohort_id = 0;
  // Indices into the partitioned dataset. Every attack row of the dataset
  // lands in exactly one shard; benign rows are dealt across all shards.
  std::vector<int64_t> row_indices;

  // Distinct label ids present, ascending.
  std::vector<int> distinct_labels(const Dataset& d) const;
  std::pair<Eigen::MatrixXd, std::vector<int>> materialize(
      const Dataset& d) const;
};

// CSV ingestion. The label column holds class-name strings; all other
// columns must be numeric after the drop-list is applied (default drops the
// flow timestamp). NaN/inf cells are replaced by the column median over
// finite entries. Errors carry file/line context.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& drop_columns = {"Timestamp"});

// Gaussian class clusters in 79 dimensions with exact per-class counts.
// counts may have up to 9 entries (missing classes are size 0). The cluster
// layout is a fixed design of the generator (a deterministic rotation frame
// with classes in twin pairs); `separation` scales the distance between the
// twins of a pair. Deterministic given seed.
Dataset synth_generate(const std::vector<int64_t>& counts, double separation,
                       uint64_t seed);

NormStats fit_normalize(const Dataset& train);
Dataset apply_normalize(const Dataset& d, const NormStats& stats);

// Random balanced disjoint split of the attack ids (set sizes differ by at
// most one), deterministic given seed.
CohortAssignment partition_cohorts(const std::vector<int>& attack_ids,
                                   int num_cohorts, uint64_t seed);

// Each client gets benign rows plus exactly two attack labels from its
// cohort's set (one if the set is a singleton); label pairs cycle through the
// set's combinations; each label's rows are dealt near-uniformly (sizes
// differ by at most 1) over the clients holding the label.
std::vector<ClientShard> partition_clients(const Dataset& d,
                                           const CohortAssignment& assignment,
                                           int clients_per_cohort,
                                           uint64_t seed);

// Stratified split, deterministic given seed; second element is the test set.
std::pair<Dataset, Dataset> train_test_split(const Dataset& d,
                                             double test_fraction,
                                             uint64_t seed);

// Provenance record: client_id, cohort_id, labels, per-label row counts.
std::string shard_manifest_csv(const Dataset& d,
                               const std::vector<ClientShard>& shards);

}  // namespace cohortfl

#endif  // COHORTFL_DATA_H_
