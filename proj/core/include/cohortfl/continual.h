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

#ifndef COHORTFL_CONTINUAL_H_
#define COHORTFL_CONTINUAL_H_

#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "cohortfl/nn.h"

namespace cohortfl {

// Rehearsal participation plan for one cohort: a dense prefix of
// ceil((1-rho)*T_c) rounds, then floor(rho*T_c) rehearsal pulses spread
// uniformly over the remaining horizon. The last scheduled participation is
// the one the accountant refuses, so executed rounds stay at T_c - 1.
struct RehearsalSchedule {
  double rho = 0.0;
  int t_c = 0;    // the cohort's rounds_to_exhaustion
  int t_max = 0;  // fixed, known horizon
  int dense_end = 0;
  int interval = 1;
  int remaining_rehearsals = 0;

  static RehearsalSchedule make(double rho, int t_c, int t_max);

  // Pure query: would the cohort participate at round t (ignoring budget)?
  bool should_run(int t) const;
  // Query + pulse bookkeeping: decrements remaining_rehearsals when t is a
  // rehearsal round. Call exactly once per executed round.
  bool consume(int t);

  nlohmann::json to_json() const;
  static RehearsalSchedule from_json(const nlohmann::json& j);
};

// Per-cohort synaptic-importance bookkeeping. The running sum w_l uses the
// cohort's released noisy delta as its gradient proxy (a biased estimate, as
// published); importance is clamped nonnegative at consolidation.
struct SIState {
  double gamma = 1.0;
  double xi = 0.1;

  struct Cohort {
    ParamVector w;           // running importance sum
    ParamVector task_start;  // global params when this task segment began
    ParamVector omega;       // defined only when consolidated
    ParamVector anchor;
    bool consolidated = false;
  };
  std::vector<Cohort> cohorts;

  static SIState make(int num_cohorts, int param_count, double gamma,
                      double xi);

  nlohmann::json to_json() const;
  static SIState from_json(const nlohmann::json& j);
};

// w_l += cohort_delta_l * global_change_l. Throws if already consolidated.
void si_accumulate(SIState& si, int cohort, const ParamVector& cohort_delta,
                   const ParamVector& global_change);

// Freezes the cohort's task: anchor = final_params,
// omega = max(w, 0) / ((final - task_start)^2 + xi). Throws on double
// consolidation.
void si_consolidate(SIState& si, int cohort, const ParamVector& final_params);

// Reopens a consolidated cohort: drops omega/anchor and restarts the path
// accumulator from current_params. Used when a relaxation grant reverses the
// exhaustion that created the task boundary.
void si_withdraw(SIState& si, int cohort, const ParamVector& current_params);

// Sum over the given cohorts of omega . (anchor - params)^2. Throws if any
// cohort in the set is not consolidated.
double si_loss(const SIState& si, const std::vector<int>& exhausted_cohorts,
               const ParamVector& params);

// Exact gradient of si_loss: per coordinate -2 sum_u omega_u (anchor_u -
// params).
ParamVector si_gradient(const SIState& si,
                        const std::vector<int>& exhausted_cohorts,
                        const ParamVector& params);

// Ids of consolidated cohorts, ascending.
std::vector<int> consolidated_cohorts(const SIState& si);

}  // namespace cohortfl

#endif  // COHORTFL_CONTINUAL_H_
