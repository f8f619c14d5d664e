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

#ifndef COHORTFL_FEDERATION_H_
#define COHORTFL_FEDERATION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cohortfl/continual.h"
#include "cohortfl/data.h"
#include "cohortfl/nn.h"
#include "cohortfl/privacy.h"

namespace cohortfl {

enum class Algorithm { kNonprivate, kDp, kDpR, kDpSi };

Algorithm algorithm_from_string(const std::string& name);
std::string algorithm_to_string(Algorithm a);

enum class Optimizer { kAdagrad, kSgd };

struct LocalTrainConfig {
  Optimizer optimizer = Optimizer::kAdagrad;
  double learning_rate = 0.1;
  double adagrad_stability = 1e-7;
  int epochs = 1;      // E
  int batch_size = 10; // B
};

struct ClientUpdate {
  ParamVector delta;
  double norm = 0.0;  // always exactly vec_l2_norm(delta)
};

struct CohortRuntime {
  int cohort_id = 0;
  std::vector<ClientShard> shards;
  CohortLedger ledger;
  int m = 1;  // clients sampled per participating round
  double epsilon = 0.0;
  // Relaxation grant: while positive, the cohort participates every round
  // and the budget-threshold refusal is suspended (the grant is the budget).
  int relax_allowance = 0;
  // Instrumentation: one count per dp_client_update call.
  int64_t client_queries = 0;

  CohortRuntime(int id, CohortLedger l) : cohort_id(id), ledger(std::move(l)) {}
};

struct MetricsRow {
  int round = 0;
  // delta spent per cohort after this round; empty for non-private runs.
  std::vector<double> cohort_deltas;
  std::vector<bool> exhausted;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> test_micro_f1;
  std::optional<double> test_macro_f1;
  std::optional<double> test_weighted_f1;
  int64_t wall_ms = 0;
};

struct FederationState {
  ParamVector global_params;
  std::vector<CohortRuntime> cohorts;
  int round = 0;
  std::vector<MetricsRow> history;
  uint64_t root_seed = 0;
};

// Per-round inputs shared by all cohorts.
struct RoundContext {
  const LayerShapes* shapes = nullptr;
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;  // only read when eval_this_round
  NoiseSpec spec;
  LocalTrainConfig local;
  uint64_t root_seed = 0;
  int round = 0;
  bool privacy_enabled = true;  // false: no clip, no noise, no accountant
  bool eval_this_round = false;
  bool timing_enabled = false;  // wall_ms stays 0 when off, for reproducible files
  std::optional<double> sigma_override;  // per-round schedule, if configured
};

// E epochs of shuffled mini-batch local training from `global`; returns the
// parameter delta and its exact norm. Deterministic given the stream.
ClientUpdate dp_client_update(const LayerShapes& shapes,
                              const ParamVector& global,
                              const Eigen::MatrixXd& features,
                              const std::vector<int>& labels,
                              const LocalTrainConfig& cfg, Rng& rng);

// One cohort's contribution for this round. Exhaustion is a normal outcome:
// if composing the round would push delta past Q the cohort is marked
// exhausted and contributes zero without touching the ledger. Otherwise m
// sampled clients' updates are clipped to S, summed, noised with
// N(0, (S sigma)^2) per coordinate, divided by m, and the ledger composes
// one round.
ParamVector dp_cohort_round(CohortRuntime& cohort, const ParamVector& global,
                            const RoundContext& ctx);

// One server round for the configured algorithm. `schedules` is consulted
// for kDpR; `si` for kDpSi (consolidation on exhaustion, importance
// accumulation, and the proximal application of the SI penalty).
void server_round(FederationState& state, Algorithm algo,
                  const RoundContext& ctx,
                  std::vector<RehearsalSchedule>* schedules, SIState* si);

bool all_exhausted(const FederationState& state);

}  // namespace cohortfl

#endif  // COHORTFL_FEDERATION_H_
