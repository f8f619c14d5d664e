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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cohortfl/config.h"
#include "cohortfl/experiment.h"
#include "cohortfl/metrics.h"
#include "cohortfl/privacy.h"

namespace {

using namespace cohortfl;

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::string algo;
  int64_t seed = -1;  // negative: keep the config's seeds
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags* flags, bool config_required) {
  auto* c = cmd->add_option("--config", flags->config_path,
                            "experiment config file (key=value lines)");
  if (config_required) c->required();
  cmd->add_option("--out", flags->out_dir, "output directory");
  cmd->add_option("--algo", flags->algo,
                  "override algorithm (nonprivate|dp|dp-r|dp-si)");
  cmd->add_option("--seed", flags->seed,
                  "override seed_init and seed_train together");
  cmd->add_option("--set", flags->sets,
                  "extra key=value overrides (repeatable)");
}

ExperimentConfig build_config(const CommonFlags& flags) {
  ExperimentConfig cfg = flags.config_path.empty()
                             ? ExperimentConfig{}
                             : load_config(flags.config_path);
  for (const auto& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    }
    apply_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!flags.algo.empty()) cfg.algorithm = flags.algo;
  if (flags.seed >= 0) {
    cfg.seed_init = static_cast<uint64_t>(flags.seed);
    cfg.seed_train = static_cast<uint64_t>(flags.seed);
  }
  validate_config(cfg);
  return cfg;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_partition(const CommonFlags& flags) {
  const ExperimentConfig cfg = build_config(flags);
  const ExperimentData data = prepare_data(cfg);
  std::filesystem::create_directories(flags.out_dir);

  std::vector<ClientShard> all;
  for (const auto& cohort : data.shards_by_cohort) {
    all.insert(all.end(), cohort.begin(), cohort.end());
  }
  const std::string stem = config_hash_hex(cfg);
  const std::string manifest_path =
      flags.out_dir + "/manifest_" + stem + ".csv";
  write_text(manifest_path, shard_manifest_csv(data.train, all));

  nlohmann::json stats{
      {"mean", std::vector<double>(data.stats.mean.data(),
                                   data.stats.mean.data() +
                                       data.stats.mean.size())},
      {"std", std::vector<double>(data.stats.std.data(),
                                  data.stats.std.data() +
                                      data.stats.std.size())}};
  const std::string stats_path =
      flags.out_dir + "/norm_stats_" + stem + ".json";
  write_text(stats_path, stats.dump());

  std::cout << "cohort label sets:";
  for (const auto& set : data.assignment.cohort_label_sets) {
    std::cout << " {";
    for (size_t i = 0; i < set.size(); ++i) {
      std::cout << (i ? "," : "") << set[i];
    }
    std::cout << "}";
  }
  std::cout << "\nmanifest: " << manifest_path << "\nnorm stats: " << stats_path
            << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& resume_path) {
  RunPaths paths;
  if (!resume_path.empty()) {
    paths = resume_training_to_files(resume_path, flags.out_dir);
  } else {
    const ExperimentConfig cfg = build_config(flags);
    paths = run_training_to_files(cfg, flags.out_dir);
  }
  std::cout << "metrics: " << paths.metrics
            << "\ncheckpoint: " << paths.checkpoint << "\n";

  std::ifstream in(paths.metrics);
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto rows = metrics_from_csv(buf.str());
  if (!rows.empty()) {
    const auto& last = rows.back();
    std::cout << "rounds: " << rows.size() << "\nfinal train_acc: "
              << fmt(last.train_acc);
    if (last.test_micro_f1) {
      std::cout << "\nfinal test F1 micro/macro/weighted: "
                << fmt(*last.test_micro_f1) << " " << fmt(*last.test_macro_f1)
                << " " << fmt(*last.test_weighted_f1);
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_relax(const std::string& checkpoint, int cohort, int rounds,
              const std::string& out_dir) {
  const std::string path =
      run_relaxation_to_file(checkpoint, cohort, rounds, out_dir);
  std::cout << "metrics: " << path << "\n";
  return 0;
}

int cmd_accountant(double q, double sigma, double epsilon, double threshold,
                   double margin) {
  const double q_charged = std::min(1.0, margin * q);
  CohortLedger ledger(epsilon, threshold, q_charged, sigma);
  std::cout << "rounds,delta\n";
  while (!ledger.next_round_exceeds_threshold()) {
    ledger.accumulate_round();
    std::cout << ledger.rounds_composed() << "," << fmt(ledger.delta_spent())
              << "\n";
  }
  std::cout << "exhaustion round: " << ledger.rounds_composed() + 1 << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& parameter,
              const std::vector<double>& values,
              const std::vector<int64_t>& seeds) {
  if (parameter != "rho" && parameter != "gamma" &&
      parameter != "sample_fraction") {
    throw std::invalid_argument(
        "sweep parameter must be rho, gamma, or sample_fraction");
  }
  if (values.empty()) throw std::invalid_argument("sweep needs >= 1 value");

  const ExperimentConfig base = build_config(flags);
  std::ostringstream csv;
  csv << "value,seed,test_micro_f1,test_macro_f1,test_weighted_f1,rounds\n";
  for (double value : values) {
    std::vector<double> micros;
    for (int64_t seed : seeds) {
      ExperimentConfig cfg = base;
      if (parameter == "rho") {
        cfg.rho = {value};
      } else if (parameter == "gamma") {
        cfg.gamma = value;
      } else {
        cfg.sample_fraction = value;
      }
      cfg.seed_init = static_cast<uint64_t>(seed);
      cfg.seed_train = static_cast<uint64_t>(seed);
      validate_config(cfg);

      const ExperimentData data = prepare_data(cfg);
      RunState rs = make_initial_state(cfg, data);
      run_rounds(cfg, data, rs);
      const auto& last = rs.fed.history.back();
      csv << fmt(value) << ',' << seed << ',' << fmt(*last.test_micro_f1)
          << ',' << fmt(*last.test_macro_f1) << ','
          << fmt(*last.test_weighted_f1) << ',' << rs.fed.history.size()
          << "\n";
      micros.push_back(*last.test_micro_f1);
    }
    std::cout << parameter << "=" << fmt(value)
              << " median test_micro_f1: " << fmt(median(micros)) << "\n";
  }
  std::filesystem::create_directories(flags.out_dir);
  const std::string path = flags.out_dir + "/sweep_" + parameter + "_" +
                           config_hash_hex(base) + ".csv";
  write_text(path, csv.str());
  std::cout << "summary: " << path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint) {
  std::ifstream in(checkpoint);
  if (!in) throw std::runtime_error("cannot open " + checkpoint);
  nlohmann::json j;
  in >> j;
  const ExperimentConfig cfg = config_from_checkpoint(j);
  validate_config(cfg);
  const ExperimentData data = prepare_data(cfg);
  const RunState rs = checkpoint_from_json(cfg, data, j);

  const auto preds =
      predict(data.shapes, rs.fed.global_params, data.test.rows);
  const auto rep = f1_report(confusion(preds, data.test.labels, kNumClasses));
  std::cout << "class,f1,support\n";
  for (int c = 0; c < kNumClasses; ++c) {
    std::cout << c << "," << fmt(rep.per_class_f1[c]) << ","
              << rep.support[c] << "\n";
  }
  std::cout << "micro: " << fmt(rep.micro) << "\nmacro: " << fmt(rep.macro)
            << "\nweighted: " << fmt(rep.weighted) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated training with per-cohort privacy budgets"};
  app.require_subcommand(1);

  CommonFlags part_flags;
  auto* partition =
      app.add_subcommand("partition", "write shard manifest and norm stats");
  add_common(partition, &part_flags, /*config_required=*/false);

  CommonFlags train_flags;
  std::string resume_path;
  auto* train = app.add_subcommand("train", "run one training experiment");
  add_common(train, &train_flags, /*config_required=*/false);
  train->add_option("--resume", resume_path,
                    "continue from a checkpoint file (its embedded config "
                    "governs the run)");

  std::string relax_checkpoint, relax_out = "out";
  int relax_cohort = 0, relax_rounds = 10;
  auto* relax = app.add_subcommand(
      "relax", "grant an exhausted cohort extra participation rounds");
  relax->add_option("--checkpoint", relax_checkpoint)->required();
  relax->add_option("--cohort", relax_cohort)->required();
  relax->add_option("--rounds", relax_rounds, "extra rounds (default 10)");
  relax->add_option("--out", relax_out, "output directory");

  double acc_q = 0.05, acc_sigma = 1.0, acc_eps = 6.0, acc_thresh = 1e-5,
         acc_margin = 2.5;
  auto* accountant = app.add_subcommand(
      "accountant", "print the per-round privacy spend table");
  accountant->add_option("--q", acc_q, "sampling fraction");
  accountant->add_option("--sigma", acc_sigma, "noise multiplier");
  accountant->add_option("--epsilon", acc_eps, "privacy budget");
  accountant->add_option("--delta-threshold", acc_thresh, "delta threshold Q");
  accountant->add_option("--charge-margin", acc_margin,
                         "ledger charge margin on q");

  CommonFlags sweep_flags;
  std::string sweep_param;
  std::vector<double> sweep_values;
  std::vector<int64_t> sweep_seeds = {1, 2, 3, 4, 5};
  auto* sweep = app.add_subcommand(
      "sweep", "rerun training across one hyperparameter");
  add_common(sweep, &sweep_flags, /*config_required=*/false);
  sweep->add_option("--parameter", sweep_param,
                    "rho | gamma | sample_fraction")
      ->required();
  sweep->add_option("--values", sweep_values)->required()->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "seeds (default 1..5)")
      ->delimiter(',');

  std::string eval_checkpoint;
  auto* evaluate =
      app.add_subcommand("evaluate", "test-set F1 report for a checkpoint");
  evaluate->add_option("--checkpoint", eval_checkpoint)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (partition->parsed()) return cmd_partition(part_flags);
    if (train->parsed()) return cmd_train(train_flags, resume_path);
    if (relax->parsed()) {
      return cmd_relax(relax_checkpoint, relax_cohort, relax_rounds,
                       relax_out);
    }
    if (accountant->parsed()) {
      return cmd_accountant(acc_q, acc_sigma, acc_eps, acc_thresh, acc_margin);
    }
    if (sweep->parsed()) {
      return cmd_sweep(sweep_flags, sweep_param, sweep_values, sweep_seeds);
    }
    if (evaluate->parsed()) return cmd_evaluate(eval_checkpoint);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
