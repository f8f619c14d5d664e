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

#ifndef COHORTFL_PRIVACY_H_
#define COHORTFL_PRIVACY_H_

#include <cstdint>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <vector>

#include "cohortfl/nn.h"
#include "cohortfl/rng.h"

namespace cohortfl {

struct NoiseSpec {
  double sensitivity = 1.0;  // clip bound S > 0
  double sigma = 1.0;        // noise multiplier >= 0; 0 only for non-private modes
};

// Projects onto the L2 ball of radius S: delta / max(1, ||delta|| / S).
ParamVector clip_update(const ParamVector& delta, double S);

// I.i.d. per-coordinate N(0, (S*sigma)^2).
ParamVector gaussian_noise(int dim, const NoiseSpec& spec, Rng& rng);

// Log moment of the privacy loss of the subsampled Gaussian mechanism at
// integer order lambda: the larger of the two likelihood-ratio orderings,
// evaluated by adaptive quadrature (absolute tolerance 1e-12 on the
// peak-normalized integrand; the raw moment overflows doubles at small sigma
// and large lambda, so integration runs in shifted log space).
// Throws std::runtime_error if the quadrature fails to converge.
double log_moment(double q, double sigma, int lambda);

// Background closed-form Gaussian-mechanism bound delta >= (4/5)
// exp(-(sigma*eps)^2 / 2). Reference only; budget decisions use the
// moments accountant.
double gm_reference_delta(double sigma, double epsilon);

constexpr int kLambdaMax = 32;

// Per-cohort moments accountant over a fixed lambda grid 1..32. Composition
// is additive in the log moments. A round normally composes the cohort's
// (q, sigma); a per-round sigma override is accepted so that a noise schedule
// can be accounted. Cumulative moments are kept exact under resume by storing
// only per-sigma round counts and recomputing count * alpha_1 sums.
class CohortLedger {
 public:
  // q here is the charged sampling fraction (the caller decides any charge
  // margin); the moment formula itself is canonical in q.
  CohortLedger(double epsilon_target, double delta_threshold, double q,
               double sigma);

  // Adds one round of composition at sigma (or the default when not given).
  // Throws std::logic_error when exhausted.
  void accumulate_round(std::optional<double> sigma_override = std::nullopt);

  // True if composing one more round (at the given sigma) would push delta
  // past the threshold.
  bool next_round_exceeds_threshold(
      std::optional<double> sigma_override = std::nullopt) const;

  double epsilon_target() const { return epsilon_target_; }
  double delta_threshold() const { return delta_threshold_; }
  double q() const { return q_; }
  double sigma() const { return sigma_; }
  int rounds_composed() const { return rounds_composed_; }
  bool exhausted() const { return exhausted_; }
  void mark_exhausted() { exhausted_ = true; }
  // The only sanctioned reversal: an explicit relaxation grant.
  void relax() { exhausted_ = false; }

  // Nonnegative, nondecreasing per lambda over composition.
  const std::vector<double>& cumulative_log_moments() const {
    return cumulative_;
  }
  double delta_spent() const;  // delta at epsilon_target for current rounds

  nlohmann::json to_json() const;
  static CohortLedger from_json(const nlohmann::json& j);

 private:
  const std::vector<double>& moments_for(double sigma) const;
  void recompute_cumulative();
  double delta_of(const std::vector<double>& cum) const;

  double epsilon_target_, delta_threshold_, q_, sigma_;
  // sigma -> alpha_1(lambda) grid; warmed for the default sigma. Ordered so
  // the cumulative summation order is deterministic across runs and resumes.
  mutable std::map<double, std::vector<double>> single_round_;
  std::map<double, int> rounds_by_sigma_;
  std::vector<double> cumulative_;
  int rounds_composed_ = 0;
  bool exhausted_ = false;
};

// min over the lambda grid of exp(cumulative alpha(lambda) - lambda*epsilon),
// capped at 1. Evaluated in log space.
double delta_for_epsilon(const CohortLedger& ledger, double epsilon);

// Smallest T such that composing T rounds of (q, sigma) pushes delta past Q
// at budget epsilon; the cohort trains for T-1 full rounds. The ledger charge
// applies charge_margin to q (q_charged = min(1, charge_margin * q)).
// Throws std::runtime_error if T would exceed round_cap.
int rounds_to_exhaustion(double q, double sigma, double epsilon, double Q,
                         double charge_margin = 2.5, int round_cap = 1000000);

}  // namespace cohortfl

#endif  // COHORTFL_PRIVACY_H_
