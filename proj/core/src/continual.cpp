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

#include "cohortfl/continual.h"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace cohortfl {

namespace {

std::vector<double> to_vec(const ParamVector& v) {
  return {v.data(), v.data() + v.size()};
}

ParamVector from_vec(const std::vector<double>& v) {
  ParamVector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace

RehearsalSchedule RehearsalSchedule::make(double rho, int t_c, int t_max) {
  if (rho < 0.0 || rho >= 1.0) {
    throw std::invalid_argument("rehearsal rho must be in [0, 1)");
  }
  if (t_c <= 0 || t_max <= 0) {
    throw std::invalid_argument("rehearsal schedule needs positive horizons");
  }
  RehearsalSchedule s;
  s.rho = rho;
  s.t_c = t_c;
  s.t_max = t_max;
  s.dense_end = static_cast<int>(std::ceil((1.0 - rho) * t_c));
  s.remaining_rehearsals = static_cast<int>(std::floor(rho * t_c));
  const int span = t_max - s.dense_end;
  const int pulses = std::max(1, s.remaining_rehearsals);
  // The pinned spread formula; a degenerate horizon collapses to every round.
  s.interval = std::max(1, span / pulses);
  return s;
}

bool RehearsalSchedule::should_run(int t) const {
  if (t < dense_end) return true;
  if (t >= t_max || remaining_rehearsals <= 0) return false;
  return (t - dense_end) % interval == 0;
}

bool RehearsalSchedule::consume(int t) {
  if (t < dense_end) return true;
  if (should_run(t)) {
    --remaining_rehearsals;
    return true;
  }
  return false;
}

nlohmann::json RehearsalSchedule::to_json() const {
  return nlohmann::json{{"rho", rho},
                        {"t_c", t_c},
                        {"t_max", t_max},
                        {"dense_end", dense_end},
                        {"interval", interval},
                        {"remaining_rehearsals", remaining_rehearsals}};
}

RehearsalSchedule RehearsalSchedule::from_json(const nlohmann::json& j) {
  RehearsalSchedule s;
  s.rho = j.at("rho").get<double>();
  s.t_c = j.at("t_c").get<int>();
  s.t_max = j.at("t_max").get<int>();
  s.dense_end = j.at("dense_end").get<int>();
  s.interval = j.at("interval").get<int>();
  s.remaining_rehearsals = j.at("remaining_rehearsals").get<int>();
  return s;
}

SIState SIState::make(int num_cohorts, int param_count, double gamma,
                      double xi) {
  if (xi <= 0.0) {
    throw std::invalid_argument("SI damping xi must be positive");
  }
  SIState si;
  si.gamma = gamma;
  si.xi = xi;
  si.cohorts.resize(num_cohorts);
  for (auto& c : si.cohorts) {
    c.w = ParamVector::Zero(param_count);
    c.task_start = ParamVector::Zero(param_count);
  }
  return si;
}

void si_accumulate(SIState& si, int cohort, const ParamVector& cohort_delta,
                   const ParamVector& global_change) {
  auto& c = si.cohorts.at(cohort);
  if (c.consolidated) {
    throw std::logic_error("si_accumulate after consolidation");
  }
  c.w.array() += cohort_delta.array() * global_change.array();
}

void si_consolidate(SIState& si, int cohort, const ParamVector& final_params) {
  auto& c = si.cohorts.at(cohort);
  if (c.consolidated) {
    throw std::logic_error("si_consolidate called twice");
  }
  c.anchor = final_params;
  const ParamVector path = final_params - c.task_start;
  // Importance cannot be negative; the noisy delta proxy makes raw w signed.
  c.omega = c.w.cwiseMax(0.0).array() /
            (path.array().square() + si.xi);
  c.consolidated = true;
}

void si_withdraw(SIState& si, int cohort, const ParamVector& current_params) {
  auto& c = si.cohorts.at(cohort);
  if (!c.consolidated) {
    throw std::logic_error("si_withdraw on unconsolidated cohort");
  }
  c.consolidated = false;
  c.omega.resize(0);
  c.anchor.resize(0);
  c.w.setZero();
  c.task_start = current_params;
}

double si_loss(const SIState& si, const std::vector<int>& exhausted_cohorts,
               const ParamVector& params) {
  double loss = 0.0;
  for (int u : exhausted_cohorts) {
    const auto& c = si.cohorts.at(u);
    if (!c.consolidated) {
      throw std::logic_error("si_loss: cohort not consolidated");
    }
    loss += (c.omega.array() * (c.anchor - params).array().square()).sum();
  }
  return loss;
}

ParamVector si_gradient(const SIState& si,
                        const std::vector<int>& exhausted_cohorts,
                        const ParamVector& params) {
  ParamVector g = ParamVector::Zero(params.size());
  for (int u : exhausted_cohorts) {
    const auto& c = si.cohorts.at(u);
    if (!c.consolidated) {
      throw std::logic_error("si_gradient: cohort not consolidated");
    }
    g.array() -= 2.0 * c.omega.array() * (c.anchor - params).array();
  }
  return g;
}

std::vector<int> consolidated_cohorts(const SIState& si) {
  std::vector<int> out;
  for (size_t u = 0; u < si.cohorts.size(); ++u) {
    if (si.cohorts[u].consolidated) out.push_back(static_cast<int>(u));
  }
  return out;
}

nlohmann::json SIState::to_json() const {
  nlohmann::json jc = nlohmann::json::array();
  for (const auto& c : cohorts) {
    nlohmann::json e{{"w", to_vec(c.w)},
                     {"task_start", to_vec(c.task_start)},
                     {"consolidated", c.consolidated}};
    if (c.consolidated) {
      e["omega"] = to_vec(c.omega);
      e["anchor"] = to_vec(c.anchor);
    }
    jc.push_back(std::move(e));
  }
  return nlohmann::json{{"gamma", gamma}, {"xi", xi}, {"cohorts", jc}};
}

SIState SIState::from_json(const nlohmann::json& j) {
  SIState si;
  si.gamma = j.at("gamma").get<double>();
  si.xi = j.at("xi").get<double>();
  for (const auto& e : j.at("cohorts")) {
    Cohort c;
    c.w = from_vec(e.at("w").get<std::vector<double>>());
    c.task_start = from_vec(e.at("task_start").get<std::vector<double>>());
    c.consolidated = e.at("consolidated").get<bool>();
    if (c.consolidated) {
      c.omega = from_vec(e.at("omega").get<std::vector<double>>());
      c.anchor = from_vec(e.at("anchor").get<std::vector<double>>());
    }
    si.cohorts.push_back(std::move(c));
  }
  return si;
}

}  // namespace cohortfl
