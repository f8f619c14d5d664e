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

#ifndef COHORTFL_CONFIG_H_
#define COHORTFL_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

namespace cohortfl {

// Flat key=value experiment configuration. Defaults are the reference
// operating point (epsilon 6 and 8, delta threshold 1e-5, S = sigma = 1,
// 5% sampling, B = 10, lr = 0.1, gamma = 1, rho = 0.25). Unknown keys are
// errors; see apply_config_key for the full key set.
struct ExperimentConfig {
  std::string algorithm = "dp";  // nonprivate | dp | dp-r | dp-si

  // Federation shape.
  int num_cohorts = 2;
  int clients_per_cohort = 100;   // K
  double sample_fraction = 0.05;  // q; m = round(q * K)

  // Privacy.
  std::vector<double> epsilon = {6.0, 8.0};  // per cohort (or one, broadcast)
  double sigma = 1.0;
  // Optional per-round noise multipliers; round t uses sigma_schedule[t] when
  // present, the constant sigma after the schedule runs out. The ledger
  // composes whatever was actually used.
  std::vector<double> sigma_schedule;
  double sensitivity = 1.0;       // S
  double delta_threshold = 1e-5;  // Q
  // The ledger charges q * charge_margin (capped at 1): a deliberately
  // conservative composition so spent budget dominates the actual q.
  double charge_margin = 2.5;

  // Model and local optimizer.
  std::vector<int> model_shapes = {79, 79, 128, 9};
  std::string optimizer = "adagrad";  // adagrad | sgd
  double learning_rate = 0.1;
  double adagrad_stability = 1e-7;
  int batch_size = 10;  // B
  int local_epochs = 1; // E

  // Continual-learning knobs.
  std::vector<double> rho = {0.25};  // per cohort (or one, broadcast)
  double gamma = 1.0;
  double xi = 0.1;

  // Run shape. round_cap doubles as the rehearsal horizon T_max (the
  // schedule requires the maximum round count fixed up front).
  int round_cap = 100;
  int eval_cadence = 5;     // test-set F1 every this many rounds (plus final)
  bool timing_enabled = false;
  // When positive, stop after this many rounds and write a checkpoint even
  // though the run is unfinished (resume continues it).
  int stop_after_round = 0;

  // Data.
  std::string data_source = "synth";  // synth | csv
  std::string csv_path;
  std::string label_column = "Label";
  std::vector<std::string> drop_columns = {"Timestamp"};
  std::vector<int64_t> synth_counts = {13825, 2250, 1875, 2750, 750,
                                       100,   750,  200,  2500};
  double synth_separation = 4.5;
  double test_fraction = 0.2;

  // Seeds: partition fixes the cohort/client split; init the parameter
  // draw; train the data draw, split, sampling, minibatching, and noise.
  uint64_t seed_partition = 1;
  uint64_t seed_init = 1;
  uint64_t seed_train = 1;

  // Per-cohort value with broadcast semantics.
  double epsilon_for(int cohort) const;
  double rho_for(int cohort) const;
  int clients_sampled() const;  // m
};

// Parses one key=value assignment. Throws std::invalid_argument on unknown
// keys or unparsable values.
void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value);

// Flat text form: key=value lines, '#' comments, blank lines ignored.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Range/consistency checks; throws std::invalid_argument.
void validate_config(const ExperimentConfig& cfg);

// Canonical serialization (sorted keys, shortest round-trip numerals) used
// for hashing; equal configs produce equal bytes.
std::string canonical_config_text(const ExperimentConfig& cfg);
uint64_t config_hash(const ExperimentConfig& cfg);      // FNV-1a 64
std::string config_hash_hex(const ExperimentConfig& cfg);

}  // namespace cohortfl

#endif  // COHORTFL_CONFIG_H_
