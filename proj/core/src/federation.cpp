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

#include "cohortfl/federation.h"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "cohortfl/metrics.h"

namespace cohortfl {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "nonprivate") return Algorithm::kNonprivate;
  if (name == "dp") return Algorithm::kDp;
  if (name == "dp-r") return Algorithm::kDpR;
  if (name == "dp-si") return Algorithm::kDpSi;
  throw std::invalid_argument("unknown algorithm: " + name);
}

std::string algorithm_to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kNonprivate: return "nonprivate";
    case Algorithm::kDp: return "dp";
    case Algorithm::kDpR: return "dp-r";
    case Algorithm::kDpSi: return "dp-si";
  }
  throw std::logic_error("unreachable");
}

ClientUpdate dp_client_update(const LayerShapes& shapes,
                              const ParamVector& global,
                              const Eigen::MatrixXd& features,
                              const std::vector<int>& labels,
                              const LocalTrainConfig& cfg, Rng& rng) {
  if (features.rows() == 0) {
    throw std::invalid_argument("dp_client_update: empty shard");
  }
  if (cfg.epochs < 0 || cfg.batch_size < 1) {
    throw std::invalid_argument("dp_client_update: bad E/B");
  }
  ParamVector w = global;
  AdagradState opt_state(static_cast<int>(global.size()), cfg.learning_rate,
                         cfg.adagrad_stability);
  const int n = static_cast<int>(features.rows());
  std::vector<size_t> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd bx(b, features.cols());
      std::vector<int> by(b);
      for (int i = 0; i < b; ++i) {
        bx.row(i) = features.row(static_cast<Eigen::Index>(order[start + i]));
        by[i] = labels[order[start + i]];
      }
      auto [grad, loss] = backward(shapes, w, bx, by);
      (void)loss;
      if (cfg.optimizer == Optimizer::kAdagrad) {
        adagrad_step(w, opt_state, grad);
      } else {
        sgd_step(w, cfg.learning_rate, grad);
      }
    }
  }
  ClientUpdate up;
  up.delta = w - global;
  up.norm = vec_l2_norm(up.delta);
  return up;
}

ParamVector dp_cohort_round(CohortRuntime& cohort, const ParamVector& global,
                            const RoundContext& ctx) {
  const int dim = static_cast<int>(global.size());
  ParamVector zero = ParamVector::Zero(dim);

  if (ctx.privacy_enabled) {
    if (cohort.relax_allowance > 0) {
      --cohort.relax_allowance;  // grant round: threshold check suspended
    } else if (cohort.ledger.exhausted()) {
      return zero;
    } else if (cohort.ledger.next_round_exceeds_threshold(
                   ctx.sigma_override)) {
      // Budget refusal: ledger untouched, the cohort sits out from here on.
      cohort.ledger.mark_exhausted();
      return zero;
    }
  }

  Rng sampler = make_stream(ctx.root_seed, StreamKind::kClientSampling,
                            ctx.round, cohort.cohort_id);
  const auto picks =
      sampler.sample_without_replacement(cohort.shards.size(), cohort.m);

  ParamVector sum = ParamVector::Zero(dim);
  for (size_t pick : picks) {
    const ClientShard& shard = cohort.shards[pick];
    auto [x, y] = shard.materialize(*ctx.train);
    Rng client_rng = make_stream(ctx.root_seed, StreamKind::kMinibatch,
                                 ctx.round, cohort.cohort_id, shard.client_id);
    ClientUpdate up =
        dp_client_update(*ctx.shapes, global, x, y, ctx.local, client_rng);
    ++cohort.client_queries;
    if (ctx.privacy_enabled) {
      sum += clip_update(up.delta, ctx.spec.sensitivity);
    } else {
      sum += up.delta;
    }
  }

  if (ctx.privacy_enabled) {
    NoiseSpec spec = ctx.spec;
    if (ctx.sigma_override) spec.sigma = *ctx.sigma_override;
    Rng noise_rng = make_stream(ctx.root_seed, StreamKind::kDpNoise, ctx.round,
                                cohort.cohort_id);
    sum += gaussian_noise(dim, spec, noise_rng);
    cohort.ledger.accumulate_round(ctx.sigma_override);
  }
  return sum / static_cast<double>(cohort.m);
}

namespace {

void append_metrics_row(FederationState& state, Algorithm algo,
                        const RoundContext& ctx, int64_t wall_ms) {
  MetricsRow row;
  row.round = state.round;
  if (algo != Algorithm::kNonprivate) {
    for (const auto& c : state.cohorts) {
      row.cohort_deltas.push_back(c.ledger.delta_spent());
    }
  }
  for (const auto& c : state.cohorts) {
    row.exhausted.push_back(c.ledger.exhausted());
  }
  const Eigen::MatrixXd probs =
      forward(*ctx.shapes, state.global_params, ctx.train->rows);
  row.train_loss = xent_loss(probs, ctx.train->labels);
  int64_t correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, arg)) arg = c;
    }
    if (static_cast<int>(arg) == ctx.train->labels[i]) ++correct;
  }
  row.train_acc = double(correct) / double(probs.rows());

  if (ctx.eval_this_round && ctx.test != nullptr) {
    const auto preds = predict(*ctx.shapes, state.global_params, ctx.test->rows);
    const auto rep = f1_report(confusion(preds, ctx.test->labels, kNumClasses));
    row.test_micro_f1 = rep.micro;
    row.test_macro_f1 = rep.macro;
    row.test_weighted_f1 = rep.weighted;
  }
  row.wall_ms = wall_ms;
  state.history.push_back(std::move(row));
}

}  // namespace

void server_round(FederationState& state, Algorithm algo,
                  const RoundContext& ctx,
                  std::vector<RehearsalSchedule>* schedules, SIState* si) {
  const auto t0 = std::chrono::steady_clock::now();
  const int num_cohorts = static_cast<int>(state.cohorts.size());
  if (num_cohorts == 0) {
    throw std::invalid_argument("server_round: no cohorts");
  }
  const int dim = static_cast<int>(state.global_params.size());

  std::vector<bool> was_exhausted(num_cohorts);
  for (int c = 0; c < num_cohorts; ++c) {
    was_exhausted[c] = state.cohorts[c].ledger.exhausted();
  }

  // Collect cohort deltas in fixed cohort order (the deterministic
  // reduction order; cohorts could run concurrently).
  std::vector<ParamVector> deltas(num_cohorts, ParamVector::Zero(dim));
  for (int c = 0; c < num_cohorts; ++c) {
    CohortRuntime& cohort = state.cohorts[c];
    if (algo == Algorithm::kDpR && cohort.relax_allowance == 0) {
      if (!(*schedules)[c].consume(ctx.round)) {
        continue;  // skip round: no queries, ledger untouched
      }
    }
    deltas[c] = dp_cohort_round(cohort, state.global_params, ctx);
  }

  if (algo == Algorithm::kDpSi) {
    // A refusal this round ends that cohort's task; consolidate against the
    // parameters the cohort last saw (pre-update).
    bool new_boundary = false;
    for (int c = 0; c < num_cohorts; ++c) {
      if (!was_exhausted[c] && state.cohorts[c].ledger.exhausted() &&
          !si->cohorts[c].consolidated) {
        si_consolidate(*si, c, state.global_params);
        new_boundary = true;
      }
    }
    if (new_boundary) {
      // A consolidation is a task boundary for everyone still training: the
      // continuing cohorts' path segments restart here (their running w does
      // not; only the path normalizer in omega is segment-local).
      for (auto& sc : si->cohorts) {
        if (!sc.consolidated) sc.task_start = state.global_params;
      }
    }
    int j = 0;
    for (const auto& cohort : state.cohorts) {
      if (cohort.ledger.exhausted()) ++j;
    }
    const int divisor = std::max(1, num_cohorts - j);
    ParamVector u = ParamVector::Zero(dim);
    for (const auto& d : deltas) u += d;
    u /= static_cast<double>(divisor);

    const ParamVector before = state.global_params;
    const auto springs = consolidated_cohorts(*si);
    if (springs.empty() || si->gamma == 0.0) {
      // Plain branch: identical expression shape to the baseline update so
      // that gamma = 0 (and the pre-exhaustion phase) reproduces it bitwise.
      state.global_params += u;
    } else {
      // Backward-Euler (proximal) application of the quadratic SI penalty:
      // argmin_theta 0.5||theta - (before + u)||^2 + gamma L_SI(theta).
      // Unconditionally stable in gamma * Omega, unlike the explicit step.
      ParamVector numer = before + u;
      ParamVector denom = ParamVector::Ones(dim);
      for (int s : springs) {
        const auto& cs = si->cohorts[s];
        numer.array() += 2.0 * si->gamma * cs.omega.array() * cs.anchor.array();
        denom.array() += 2.0 * si->gamma * cs.omega.array();
      }
      state.global_params = numer.array() / denom.array();
    }
    const ParamVector change = state.global_params - before;
    for (int c = 0; c < num_cohorts; ++c) {
      if (!state.cohorts[c].ledger.exhausted() &&
          !si->cohorts[c].consolidated) {
        si_accumulate(*si, c, deltas[c], change);
      }
    }
  } else {
    ParamVector u = ParamVector::Zero(dim);
    for (const auto& d : deltas) u += d;
    u /= static_cast<double>(num_cohorts);
    state.global_params += u;
  }

  int64_t wall_ms = 0;
  if (ctx.timing_enabled) {
    wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
  }
  append_metrics_row(state, algo, ctx, wall_ms);
  ++state.round;
}

bool all_exhausted(const FederationState& state) {
  for (const auto& c : state.cohorts) {
    if (!c.ledger.exhausted()) return false;
  }
  return !state.cohorts.empty();
}

}  // namespace cohortfl
