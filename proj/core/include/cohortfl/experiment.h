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

#ifndef COHORTFL_EXPERIMENT_H_
#define COHORTFL_EXPERIMENT_H_

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "cohortfl/config.h"
#include "cohortfl/continual.h"
#include "cohortfl/data.h"
#include "cohortfl/federation.h"

namespace cohortfl {

// Materialized pipeline: generate/load, stratified split, normalization with
// train statistics, cohort and client partition. Deterministic per config.
struct ExperimentData {
  LayerShapes shapes;
  Dataset train;  // normalized
  Dataset test;   // normalized with the train statistics
  NormStats stats;
  CohortAssignment assignment;
  std::vector<std::vector<ClientShard>> shards_by_cohort;
};

ExperimentData prepare_data(const ExperimentConfig& cfg);

// A live run: federation state plus the algorithm's side bookkeeping.
struct RunState {
  Algorithm algo = Algorithm::kDp;
  FederationState fed;
  std::vector<RehearsalSchedule> schedules;  // dp-r only
  SIState si;                                // dp-si only
  bool finished = false;
};

RunState make_initial_state(const ExperimentConfig& cfg,
                            const ExperimentData& data);

// Advances the run until the round cap, all budgets exhausted, or the
// stop_after_round boundary. On natural termination `finished` is set and the
// last metrics row is guaranteed to carry test F1 values.
void run_rounds(const ExperimentConfig& cfg, const ExperimentData& data,
                RunState& rs);

// Continues a finished, fully exhausted run: reopens cohort_id's ledger with
// an extra_rounds participation allowance (for dp-si, withdrawing its
// consolidation) and runs exactly extra_rounds more rounds. The history is
// restarted, so the emitted rows cover only the relaxation phase;
// extra_rounds = 0 leaves a single row, the checkpoint's final evaluation.
void run_relaxation(const ExperimentConfig& cfg, const ExperimentData& data,
                    RunState& rs, int cohort_id, int extra_rounds);

// CSV schema: round, cohort_<i>_delta..., exhausted_flags, train_loss,
// train_acc, test_micro_f1, test_macro_f1, test_weighted_f1, wall_ms.
// Delta cells are empty for non-private runs; test cells are empty on
// non-evaluation rounds. Parsing is the exact inverse (round-trip identity).
std::string metrics_to_csv(const std::vector<MetricsRow>& history,
                           int num_cohorts);
std::vector<MetricsRow> metrics_from_csv(const std::string& text);

// Checkpoints embed the canonical config text, so a checkpoint alone is
// enough to resume or relax a run. Doubles survive the JSON round trip
// bit-exactly (shortest round-trip serialization).
nlohmann::json checkpoint_to_json(const ExperimentConfig& cfg,
                                  const RunState& rs);
RunState checkpoint_from_json(const ExperimentConfig& cfg,
                              const ExperimentData& data,
                              const nlohmann::json& j);
ExperimentConfig config_from_checkpoint(const nlohmann::json& j);

// Artifact naming: metrics_<confighash>_s<seed_train>.csv and the matching
// checkpoint_*.json under out_dir.
struct RunPaths {
  std::string metrics;
  std::string checkpoint;
};
RunPaths artifact_paths(const ExperimentConfig& cfg,
                        const std::string& out_dir);

// Full drivers used by the CLI: run (or resume from a checkpoint file) and
// write both artifacts. The embedded config governs a resume; a resumed run
// always continues to natural termination.
RunPaths run_training_to_files(const ExperimentConfig& cfg,
                               const std::string& out_dir);
RunPaths resume_training_to_files(const std::string& checkpoint_path,
                                  const std::string& out_dir);
// Writes metrics_<hash>_s<seed>_relax<cohort>_<extra>.csv.
std::string run_relaxation_to_file(const std::string& checkpoint_path,
                                   int cohort_id, int extra_rounds,
                                   const std::string& out_dir);

}  // namespace cohortfl

#endif  // COHORTFL_EXPERIMENT_H_
