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

#include "cohortfl/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "cohortfl/metrics.h"
#include "cohortfl/privacy.h"

namespace cohortfl {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

LocalTrainConfig local_config(const ExperimentConfig& cfg) {
  LocalTrainConfig local;
  local.optimizer =
      cfg.optimizer == "sgd" ? Optimizer::kSgd : Optimizer::kAdagrad;
  local.learning_rate = cfg.learning_rate;
  local.adagrad_stability = cfg.adagrad_stability;
  local.epochs = cfg.local_epochs;
  local.batch_size = cfg.batch_size;
  return local;
}

RoundContext base_context(const ExperimentConfig& cfg,
                          const ExperimentData& data, const RunState& rs) {
  RoundContext ctx;
  ctx.shapes = &data.shapes;
  ctx.train = &data.train;
  ctx.test = &data.test;
  ctx.spec.sensitivity = cfg.sensitivity;
  ctx.spec.sigma = cfg.sigma;
  ctx.local = local_config(cfg);
  ctx.root_seed = cfg.seed_train;
  ctx.privacy_enabled = rs.algo != Algorithm::kNonprivate;
  ctx.timing_enabled = cfg.timing_enabled;
  return ctx;
}

void set_round(RoundContext& ctx, const ExperimentConfig& cfg, int round,
               bool force_eval) {
  ctx.round = round;
  ctx.eval_this_round = force_eval || (round % cfg.eval_cadence == 0);
  if (round < static_cast<int>(cfg.sigma_schedule.size())) {
    ctx.sigma_override = cfg.sigma_schedule[round];
  } else {
    ctx.sigma_override.reset();
  }
}

// The last emitted row must carry test metrics even when termination misses
// the evaluation cadence; the row's parameters are the final parameters, so
// filling it in afterwards is exact.
void finalize_eval(const ExperimentData& data, RunState& rs) {
  if (rs.fed.history.empty()) return;
  MetricsRow& last = rs.fed.history.back();
  if (last.test_micro_f1.has_value()) return;
  const auto preds =
      predict(data.shapes, rs.fed.global_params, data.test.rows);
  const auto rep = f1_report(confusion(preds, data.test.labels, kNumClasses));
  last.test_micro_f1 = rep.micro;
  last.test_macro_f1 = rep.macro;
  last.test_weighted_f1 = rep.weighted;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << contents;
  if (!out) {
    throw std::runtime_error("write failed: " + path);
  }
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  nlohmann::json j;
  in >> j;
  return j;
}

nlohmann::json row_to_json(const MetricsRow& r) {
  nlohmann::json j{{"round", r.round},
                   {"exhausted", r.exhausted},
                   {"train_loss", r.train_loss},
                   {"train_acc", r.train_acc},
                   {"wall_ms", r.wall_ms}};
  if (!r.cohort_deltas.empty()) j["deltas"] = r.cohort_deltas;
  if (r.test_micro_f1.has_value()) {
    j["test"] = {*r.test_micro_f1, *r.test_macro_f1, *r.test_weighted_f1};
  }
  return j;
}

MetricsRow row_from_json(const nlohmann::json& j) {
  MetricsRow r;
  r.round = j.at("round").get<int>();
  r.exhausted = j.at("exhausted").get<std::vector<bool>>();
  r.train_loss = j.at("train_loss").get<double>();
  r.train_acc = j.at("train_acc").get<double>();
  r.wall_ms = j.at("wall_ms").get<int64_t>();
  if (j.contains("deltas")) {
    r.cohort_deltas = j.at("deltas").get<std::vector<double>>();
  }
  if (j.contains("test")) {
    r.test_micro_f1 = j.at("test").at(0).get<double>();
    r.test_macro_f1 = j.at("test").at(1).get<double>();
    r.test_weighted_f1 = j.at("test").at(2).get<double>();
  }
  return r;
}

}  // namespace

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  ExperimentData d;
  d.shapes = LayerShapes{cfg.model_shapes};
  Dataset full =
      cfg.data_source == "csv"
          ? load_csv(cfg.csv_path, cfg.label_column, cfg.drop_columns)
          : synth_generate(cfg.synth_counts, cfg.synth_separation,
                           cfg.seed_train);
  auto [train_raw, test_raw] =
      train_test_split(full, cfg.test_fraction, cfg.seed_train);
  d.stats = fit_normalize(train_raw);
  d.train = apply_normalize(train_raw, d.stats);
  d.test = apply_normalize(test_raw, d.stats);

  std::vector<int> attacks;
  for (int label = 0; label < kNumClasses; ++label) {
    if (label != 0) attacks.push_back(label);
  }
  d.assignment = partition_cohorts(attacks, cfg.num_cohorts,
                                   cfg.seed_partition);
  auto shards = partition_clients(d.train, d.assignment,
                                  cfg.clients_per_cohort, cfg.seed_partition);
  d.shards_by_cohort.resize(cfg.num_cohorts);
  for (auto& shard : shards) {
    d.shards_by_cohort[shard.cohort_id].push_back(std::move(shard));
  }
  return d;
}

RunState make_initial_state(const ExperimentConfig& cfg,
                            const ExperimentData& data) {
  RunState rs;
  rs.algo = algorithm_from_string(cfg.algorithm);
  rs.fed.global_params = init_params(data.shapes, cfg.seed_init);
  rs.fed.root_seed = cfg.seed_train;
  rs.fed.round = 0;

  const double q_charged =
      std::min(1.0, cfg.charge_margin * cfg.sample_fraction);
  for (int c = 0; c < cfg.num_cohorts; ++c) {
    CohortLedger ledger(cfg.epsilon_for(c), cfg.delta_threshold, q_charged,
                        cfg.sigma);
    CohortRuntime rt(c, std::move(ledger));
    rt.m = cfg.clients_sampled();
    rt.epsilon = cfg.epsilon_for(c);
    rt.shards = data.shards_by_cohort[c];
    rs.fed.cohorts.push_back(std::move(rt));
  }

  if (rs.algo == Algorithm::kDpR) {
    for (int c = 0; c < cfg.num_cohorts; ++c) {
      const int t_c = rounds_to_exhaustion(
          cfg.sample_fraction, cfg.sigma, cfg.epsilon_for(c),
          cfg.delta_threshold, cfg.charge_margin);
      rs.schedules.push_back(
          RehearsalSchedule::make(cfg.rho_for(c), t_c, cfg.round_cap));
    }
  }
  if (rs.algo == Algorithm::kDpSi) {
    rs.si = SIState::make(cfg.num_cohorts, data.shapes.param_count(),
                          cfg.gamma, cfg.xi);
    for (auto& sc : rs.si.cohorts) {
      // The first task segment starts at the initial parameters.
      sc.task_start = rs.fed.global_params;
    }
  }
  return rs;
}

void run_rounds(const ExperimentConfig& cfg, const ExperimentData& data,
                RunState& rs) {
  RoundContext ctx = base_context(cfg, data, rs);
  auto* schedules = rs.algo == Algorithm::kDpR ? &rs.schedules : nullptr;
  auto* si = rs.algo == Algorithm::kDpSi ? &rs.si : nullptr;

  while (rs.fed.round < cfg.round_cap) {
    if (cfg.stop_after_round > 0 && rs.fed.round >= cfg.stop_after_round) {
      rs.finished = false;  // checkpoint boundary; resume continues here
      return;
    }
    set_round(ctx, cfg, rs.fed.round,
              /*force_eval=*/rs.fed.round + 1 == cfg.round_cap);
    server_round(rs.fed, rs.algo, ctx, schedules, si);
    if (rs.algo != Algorithm::kNonprivate && all_exhausted(rs.fed)) {
      break;  // the round that refused the last cohort still executed
    }
  }
  finalize_eval(data, rs);
  rs.finished = true;
}

void run_relaxation(const ExperimentConfig& cfg, const ExperimentData& data,
                    RunState& rs, int cohort_id, int extra_rounds) {
  if (cohort_id < 0 ||
      cohort_id >= static_cast<int>(rs.fed.cohorts.size())) {
    throw std::invalid_argument("run_relaxation: unknown cohort id");
  }
  if (extra_rounds < 0) {
    throw std::invalid_argument("run_relaxation: extra_rounds must be >= 0");
  }
  if (!all_exhausted(rs.fed)) {
    throw std::runtime_error(
        "run_relaxation: requires every cohort's budget exhausted");
  }
  if (rs.fed.history.empty()) {
    throw std::runtime_error("run_relaxation: checkpoint has no history");
  }

  const MetricsRow final_row = rs.fed.history.back();
  rs.fed.history.clear();
  if (extra_rounds == 0) {
    rs.fed.history.push_back(final_row);  // the checkpoint's final evaluation
    rs.finished = true;
    return;
  }

  CohortRuntime& rt = rs.fed.cohorts[cohort_id];
  rt.ledger.relax();
  rt.relax_allowance = extra_rounds;
  if (rs.algo == Algorithm::kDpSi &&
      rs.si.cohorts[cohort_id].consolidated) {
    // The relaxed cohort trains again: its spring is withdrawn and its path
    // restarts at the current parameters.
    si_withdraw(rs.si, cohort_id, rs.fed.global_params);
  }

  RoundContext ctx = base_context(cfg, data, rs);
  auto* schedules = rs.algo == Algorithm::kDpR ? &rs.schedules : nullptr;
  auto* si = rs.algo == Algorithm::kDpSi ? &rs.si : nullptr;
  for (int i = 0; i < extra_rounds; ++i) {
    set_round(ctx, cfg, rs.fed.round, /*force_eval=*/i + 1 == extra_rounds);
    server_round(rs.fed, rs.algo, ctx, schedules, si);
  }
  finalize_eval(data, rs);
  rs.finished = true;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& history,
                           int num_cohorts) {
  std::ostringstream out;
  out << "round";
  for (int c = 0; c < num_cohorts; ++c) {
    out << ",cohort_" << c << "_delta";
  }
  out << ",exhausted_flags,train_loss,train_acc,test_micro_f1,test_macro_f1,"
         "test_weighted_f1,wall_ms\n";
  for (const auto& r : history) {
    out << r.round;
    if (r.cohort_deltas.empty()) {
      for (int c = 0; c < num_cohorts; ++c) out << ',';
    } else {
      for (double d : r.cohort_deltas) out << ',' << fmt_double(d);
    }
    out << ',';
    for (bool e : r.exhausted) out << (e ? '1' : '0');
    out << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.train_acc);
    if (r.test_micro_f1.has_value()) {
      out << ',' << fmt_double(*r.test_micro_f1) << ','
          << fmt_double(*r.test_macro_f1) << ','
          << fmt_double(*r.test_weighted_f1);
    } else {
      out << ",,,";
    }
    out << ',' << r.wall_ms << '\n';
  }
  return out.str();
}

std::vector<MetricsRow> metrics_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument("metrics csv: empty input");
  }
  std::vector<std::string> header;
  {
    std::string cur;
    std::istringstream hs(line);
    while (std::getline(hs, cur, ',')) header.push_back(cur);
  }
  int num_cohorts = 0;
  while (1 + num_cohorts < static_cast<int>(header.size()) &&
         header[1 + num_cohorts] ==
             "cohort_" + std::to_string(num_cohorts) + "_delta") {
    ++num_cohorts;
  }
  const std::vector<std::string> tail = {
      "exhausted_flags", "train_loss",       "train_acc", "test_micro_f1",
      "test_macro_f1",   "test_weighted_f1", "wall_ms"};
  if (header.size() != static_cast<size_t>(1 + num_cohorts + 7) ||
      header[0] != "round" ||
      !std::equal(tail.begin(), tail.end(),
                  header.begin() + 1 + num_cohorts)) {
    throw std::invalid_argument("metrics csv: unexpected header");
  }

  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    f.push_back(cur);
    if (f.size() != static_cast<size_t>(1 + num_cohorts + 7)) {
      throw std::invalid_argument("metrics csv: line " +
                                  std::to_string(line_no) +
                                  ": wrong field count");
    }
    MetricsRow r;
    size_t at = 0;
    r.round = std::stoi(f[at++]);
    bool any_delta = false;
    for (int c = 0; c < num_cohorts; ++c) {
      if (!f[at + c].empty()) any_delta = true;
    }
    for (int c = 0; c < num_cohorts; ++c) {
      if (any_delta) r.cohort_deltas.push_back(std::stod(f[at]));
      ++at;
    }
    const std::string& flags = f[at++];
    if (flags.size() != static_cast<size_t>(num_cohorts)) {
      throw std::invalid_argument("metrics csv: line " +
                                  std::to_string(line_no) +
                                  ": bad exhausted_flags");
    }
    for (char ch : flags) r.exhausted.push_back(ch == '1');
    r.train_loss = std::stod(f[at++]);
    r.train_acc = std::stod(f[at++]);
    if (!f[at].empty()) {
      r.test_micro_f1 = std::stod(f[at]);
      r.test_macro_f1 = std::stod(f[at + 1]);
      r.test_weighted_f1 = std::stod(f[at + 2]);
    }
    at += 3;
    r.wall_ms = std::stoll(f[at]);
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json checkpoint_to_json(const ExperimentConfig& cfg,
                                  const RunState& rs) {
  nlohmann::json j;
  j["version"] = 1;
  j["config"] = canonical_config_text(cfg);
  j["config_hash"] = config_hash_hex(cfg);
  j["algorithm"] = algorithm_to_string(rs.algo);
  j["finished"] = rs.finished;
  j["round"] = rs.fed.round;
  j["global_params"] = std::vector<double>(
      rs.fed.global_params.data(),
      rs.fed.global_params.data() + rs.fed.global_params.size());
  nlohmann::json cohorts = nlohmann::json::array();
  for (const auto& rt : rs.fed.cohorts) {
    cohorts.push_back({{"ledger", rt.ledger.to_json()},
                       {"m", rt.m},
                       {"epsilon", rt.epsilon},
                       {"relax_allowance", rt.relax_allowance},
                       {"client_queries", rt.client_queries}});
  }
  j["cohorts"] = std::move(cohorts);
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : rs.fed.history) hist.push_back(row_to_json(r));
  j["history"] = std::move(hist);
  if (rs.algo == Algorithm::kDpR) {
    nlohmann::json sched = nlohmann::json::array();
    for (const auto& s : rs.schedules) sched.push_back(s.to_json());
    j["schedules"] = std::move(sched);
  }
  if (rs.algo == Algorithm::kDpSi) {
    j["si"] = rs.si.to_json();
  }
  return j;
}

RunState checkpoint_from_json(const ExperimentConfig& cfg,
                              const ExperimentData& data,
                              const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1) {
    throw std::runtime_error("checkpoint: unsupported version");
  }
  if (j.at("config_hash").get<std::string>() != config_hash_hex(cfg)) {
    throw std::runtime_error(
        "checkpoint: config hash mismatch (checkpoint belongs to a different "
        "experiment)");
  }
  RunState rs;
  rs.algo = algorithm_from_string(j.at("algorithm").get<std::string>());
  rs.finished = j.at("finished").get<bool>();
  rs.fed.round = j.at("round").get<int>();
  rs.fed.root_seed = cfg.seed_train;
  const auto params = j.at("global_params").get<std::vector<double>>();
  rs.fed.global_params =
      Eigen::Map<const ParamVector>(params.data(), params.size());
  int c = 0;
  for (const auto& e : j.at("cohorts")) {
    CohortRuntime rt(c, CohortLedger::from_json(e.at("ledger")));
    rt.m = e.at("m").get<int>();
    rt.epsilon = e.at("epsilon").get<double>();
    rt.relax_allowance = e.at("relax_allowance").get<int>();
    rt.client_queries = e.at("client_queries").get<int64_t>();
    rt.shards = data.shards_by_cohort.at(c);
    rs.fed.cohorts.push_back(std::move(rt));
    ++c;
  }
  for (const auto& e : j.at("history")) {
    rs.fed.history.push_back(row_from_json(e));
  }
  if (rs.algo == Algorithm::kDpR) {
    for (const auto& e : j.at("schedules")) {
      rs.schedules.push_back(RehearsalSchedule::from_json(e));
    }
  }
  if (rs.algo == Algorithm::kDpSi) {
    rs.si = SIState::from_json(j.at("si"));
  }
  return rs;
}

ExperimentConfig config_from_checkpoint(const nlohmann::json& j) {
  return parse_config_text(j.at("config").get<std::string>());
}

RunPaths artifact_paths(const ExperimentConfig& cfg,
                        const std::string& out_dir) {
  const std::string stem =
      config_hash_hex(cfg) + "_s" + std::to_string(cfg.seed_train);
  RunPaths p;
  p.metrics = out_dir + "/metrics_" + stem + ".csv";
  p.checkpoint = out_dir + "/checkpoint_" + stem + ".json";
  return p;
}

namespace {

RunPaths write_artifacts(const ExperimentConfig& cfg, const RunState& rs,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const RunPaths paths = artifact_paths(cfg, out_dir);
  write_file(paths.metrics,
             metrics_to_csv(rs.fed.history, cfg.num_cohorts));
  write_file(paths.checkpoint, checkpoint_to_json(cfg, rs).dump());
  return paths;
}

}  // namespace

RunPaths run_training_to_files(const ExperimentConfig& cfg,
                               const std::string& out_dir) {
  validate_config(cfg);
  const ExperimentData data = prepare_data(cfg);
  RunState rs = make_initial_state(cfg, data);
  run_rounds(cfg, data, rs);
  return write_artifacts(cfg, rs, out_dir);
}

RunPaths resume_training_to_files(const std::string& checkpoint_path,
                                  const std::string& out_dir) {
  const nlohmann::json j = load_json_file(checkpoint_path);
  const ExperimentConfig cfg = config_from_checkpoint(j);
  validate_config(cfg);
  const ExperimentData data = prepare_data(cfg);
  RunState rs = checkpoint_from_json(cfg, data, j);
  run_rounds(cfg, data, rs);
  return write_artifacts(cfg, rs, out_dir);
}

std::string run_relaxation_to_file(const std::string& checkpoint_path,
                                   int cohort_id, int extra_rounds,
                                   const std::string& out_dir) {
  const nlohmann::json j = load_json_file(checkpoint_path);
  const ExperimentConfig cfg = config_from_checkpoint(j);
  validate_config(cfg);
  const ExperimentData data = prepare_data(cfg);
  RunState rs = checkpoint_from_json(cfg, data, j);
  run_relaxation(cfg, data, rs, cohort_id, extra_rounds);

  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/metrics_" + config_hash_hex(cfg) +
                           "_s" + std::to_string(cfg.seed_train) + "_relax" +
                           std::to_string(cohort_id) + "_" +
                           std::to_string(extra_rounds) + ".csv";
  write_file(path, metrics_to_csv(rs.fed.history, cfg.num_cohorts));
  return path;
}

}  // namespace cohortfl
