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

#include "cohortfl/config.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cohortfl/data.h"

namespace cohortfl {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + ": not a number: '" + s +
                                "'");
  }
}

int64_t to_int(const std::string& key, const std::string& s) {
  int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("config: " + key + ": not an integer: '" + s +
                                "'");
  }
  return v;
}

uint64_t to_uint(const std::string& key, const std::string& s) {
  uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("config: " + key +
                                ": not a nonnegative integer: '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config: " + key + ": not a bool: '" + s + "'");
}

std::vector<double> to_double_list(const std::string& key,
                                   const std::string& s) {
  std::vector<double> out;
  for (const auto& f : split_list(s)) out.push_back(to_double(key, f));
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += f(v[i]);
  }
  return out;
}

}  // namespace

double ExperimentConfig::epsilon_for(int cohort) const {
  if (epsilon.size() == 1) return epsilon[0];
  return epsilon.at(cohort);
}

double ExperimentConfig::rho_for(int cohort) const {
  if (rho.size() == 1) return rho[0];
  return rho.at(cohort);
}

int ExperimentConfig::clients_sampled() const {
  return static_cast<int>(std::lround(sample_fraction * clients_per_cohort));
}

void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value) {
  if (key == "algorithm") {
    cfg.algorithm = value;
  } else if (key == "num_cohorts") {
    cfg.num_cohorts = static_cast<int>(to_int(key, value));
  } else if (key == "clients_per_cohort") {
    cfg.clients_per_cohort = static_cast<int>(to_int(key, value));
  } else if (key == "sample_fraction") {
    cfg.sample_fraction = to_double(key, value);
  } else if (key == "epsilon") {
    cfg.epsilon = to_double_list(key, value);
  } else if (key == "sigma") {
    cfg.sigma = to_double(key, value);
  } else if (key == "sigma_schedule") {
    cfg.sigma_schedule = value.empty() ? std::vector<double>{}
                                       : to_double_list(key, value);
  } else if (key == "sensitivity") {
    cfg.sensitivity = to_double(key, value);
  } else if (key == "delta_threshold") {
    cfg.delta_threshold = to_double(key, value);
  } else if (key == "charge_margin") {
    cfg.charge_margin = to_double(key, value);
  } else if (key == "model_shapes") {
    cfg.model_shapes.clear();
    for (const auto& f : split_list(value)) {
      cfg.model_shapes.push_back(static_cast<int>(to_int(key, f)));
    }
  } else if (key == "optimizer") {
    cfg.optimizer = value;
  } else if (key == "learning_rate") {
    cfg.learning_rate = to_double(key, value);
  } else if (key == "adagrad_stability") {
    cfg.adagrad_stability = to_double(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = static_cast<int>(to_int(key, value));
  } else if (key == "local_epochs") {
    cfg.local_epochs = static_cast<int>(to_int(key, value));
  } else if (key == "rho") {
    cfg.rho = to_double_list(key, value);
  } else if (key == "gamma") {
    cfg.gamma = to_double(key, value);
  } else if (key == "xi") {
    cfg.xi = to_double(key, value);
  } else if (key == "round_cap") {
    cfg.round_cap = static_cast<int>(to_int(key, value));
  } else if (key == "eval_cadence") {
    cfg.eval_cadence = static_cast<int>(to_int(key, value));
  } else if (key == "timing_enabled") {
    cfg.timing_enabled = to_bool(key, value);
  } else if (key == "stop_after_round") {
    cfg.stop_after_round = static_cast<int>(to_int(key, value));
  } else if (key == "data_source") {
    cfg.data_source = value;
  } else if (key == "csv_path") {
    cfg.csv_path = value;
  } else if (key == "label_column") {
    cfg.label_column = value;
  } else if (key == "drop_columns") {
    cfg.drop_columns = value.empty() ? std::vector<std::string>{}
                                     : split_list(value);
  } else if (key == "synth_counts") {
    cfg.synth_counts.clear();
    for (const auto& f : split_list(value)) {
      cfg.synth_counts.push_back(to_int(key, f));
    }
  } else if (key == "synth_separation") {
    cfg.synth_separation = to_double(key, value);
  } else if (key == "test_fraction") {
    cfg.test_fraction = to_double(key, value);
  } else if (key == "seed_partition") {
    cfg.seed_partition = to_uint(key, value);
  } else if (key == "seed_init") {
    cfg.seed_init = to_uint(key, value);
  } else if (key == "seed_train") {
    cfg.seed_train = to_uint(key, value);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
    }
    apply_config_key(cfg, trim(line.substr(0, eq)),
                     trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config: cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
  };
  if (cfg.algorithm != "nonprivate" && cfg.algorithm != "dp" &&
      cfg.algorithm != "dp-r" && cfg.algorithm != "dp-si") {
    fail("algorithm must be one of nonprivate|dp|dp-r|dp-si");
  }
  if (cfg.num_cohorts < 1) fail("num_cohorts must be >= 1");
  if (cfg.clients_per_cohort < 1) fail("clients_per_cohort must be >= 1");
  if (!(cfg.sample_fraction > 0.0 && cfg.sample_fraction <= 1.0)) {
    fail("sample_fraction must be in (0,1]");
  }
  const int m = cfg.clients_sampled();
  if (m < 1 || m > cfg.clients_per_cohort) {
    fail("sample_fraction * clients_per_cohort rounds to an invalid client "
         "count");
  }
  if (cfg.epsilon.size() != 1 &&
      cfg.epsilon.size() != static_cast<size_t>(cfg.num_cohorts)) {
    fail("epsilon needs one value or one per cohort");
  }
  for (double e : cfg.epsilon) {
    if (!(e > 0.0)) fail("epsilon values must be positive");
  }
  if (!(cfg.sigma > 0.0)) fail("sigma must be positive");
  for (double s : cfg.sigma_schedule) {
    if (!(s > 0.0)) fail("sigma_schedule values must be positive");
  }
  if (!(cfg.sensitivity > 0.0)) fail("sensitivity must be positive");
  if (!(cfg.delta_threshold > 0.0 && cfg.delta_threshold < 1.0)) {
    fail("delta_threshold must be in (0,1)");
  }
  if (!(cfg.charge_margin >= 1.0)) fail("charge_margin must be >= 1");
  if (cfg.model_shapes.size() < 2) fail("model_shapes needs >= 2 entries");
  for (int s : cfg.model_shapes) {
    if (s < 1) fail("model_shapes entries must be positive");
  }
  if (cfg.model_shapes.front() != kNumFeatures) {
    fail("model_shapes must start at the feature width " +
         std::to_string(kNumFeatures));
  }
  if (cfg.model_shapes.back() != kNumClasses) {
    fail("model_shapes must end at the class count " +
         std::to_string(kNumClasses));
  }
  if (cfg.optimizer != "adagrad" && cfg.optimizer != "sgd") {
    fail("optimizer must be adagrad or sgd");
  }
  if (!(cfg.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(cfg.adagrad_stability > 0.0)) {
    fail("adagrad_stability must be positive");
  }
  if (cfg.batch_size < 1) fail("batch_size must be >= 1");
  if (cfg.local_epochs < 0) fail("local_epochs must be >= 0");
  if (cfg.rho.size() != 1 &&
      cfg.rho.size() != static_cast<size_t>(cfg.num_cohorts)) {
    fail("rho needs one value or one per cohort");
  }
  for (double r : cfg.rho) {
    if (!(r >= 0.0 && r < 1.0)) fail("rho values must be in [0,1)");
  }
  if (!(cfg.gamma >= 0.0)) fail("gamma must be >= 0");
  if (!(cfg.xi > 0.0)) fail("xi must be positive");
  if (cfg.round_cap < 1) fail("round_cap must be >= 1");
  if (cfg.eval_cadence < 1) fail("eval_cadence must be >= 1");
  if (cfg.stop_after_round < 0) fail("stop_after_round must be >= 0");
  if (cfg.data_source != "synth" && cfg.data_source != "csv") {
    fail("data_source must be synth or csv");
  }
  if (cfg.data_source == "csv" && cfg.csv_path.empty()) {
    fail("csv_path required when data_source=csv");
  }
  if (cfg.data_source == "synth") {
    if (cfg.synth_counts.empty() ||
        cfg.synth_counts.size() > static_cast<size_t>(kNumClasses)) {
      fail("synth_counts needs 1..9 entries");
    }
    if (!(cfg.synth_separation > 0.0)) {
      fail("synth_separation must be positive");
    }
  }
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    fail("test_fraction must be in (0,1)");
  }
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  // Keys in fixed (alphabetical) order. stop_after_round is deliberately
  // omitted: it only interrupts execution, and a stopped-then-resumed run
  // must land in the same metrics file as a straight-through run.
  std::ostringstream out;
  out << "adagrad_stability=" << fmt_double(cfg.adagrad_stability) << '\n'
      << "algorithm=" << cfg.algorithm << '\n'
      << "batch_size=" << cfg.batch_size << '\n'
      << "charge_margin=" << fmt_double(cfg.charge_margin) << '\n'
      << "clients_per_cohort=" << cfg.clients_per_cohort << '\n'
      << "csv_path=" << cfg.csv_path << '\n'
      << "data_source=" << cfg.data_source << '\n'
      << "delta_threshold=" << fmt_double(cfg.delta_threshold) << '\n'
      << "drop_columns="
      << join(cfg.drop_columns, [](const std::string& s) { return s; }) << '\n'
      << "epsilon=" << join(cfg.epsilon, fmt_double) << '\n'
      << "eval_cadence=" << cfg.eval_cadence << '\n'
      << "gamma=" << fmt_double(cfg.gamma) << '\n'
      << "label_column=" << cfg.label_column << '\n'
      << "learning_rate=" << fmt_double(cfg.learning_rate) << '\n'
      << "local_epochs=" << cfg.local_epochs << '\n'
      << "model_shapes="
      << join(cfg.model_shapes, [](int v) { return std::to_string(v); })
      << '\n'
      << "num_cohorts=" << cfg.num_cohorts << '\n'
      << "optimizer=" << cfg.optimizer << '\n'
      << "rho=" << join(cfg.rho, fmt_double) << '\n'
      << "round_cap=" << cfg.round_cap << '\n'
      << "sample_fraction=" << fmt_double(cfg.sample_fraction) << '\n'
      << "seed_init=" << cfg.seed_init << '\n'
      << "seed_partition=" << cfg.seed_partition << '\n'
      << "seed_train=" << cfg.seed_train << '\n'
      << "sensitivity=" << fmt_double(cfg.sensitivity) << '\n'
      << "sigma=" << fmt_double(cfg.sigma) << '\n'
      << "sigma_schedule=" << join(cfg.sigma_schedule, fmt_double) << '\n'
      << "synth_counts="
      << join(cfg.synth_counts,
              [](int64_t v) { return std::to_string(v); })
      << '\n'
      << "synth_separation=" << fmt_double(cfg.synth_separation) << '\n'
      << "test_fraction=" << fmt_double(cfg.test_fraction) << '\n'
      << "timing_enabled=" << (cfg.timing_enabled ? "true" : "false") << '\n';
  return out.str();
}

uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical_config_text(cfg);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return buf;
}

}  // namespace cohortfl
