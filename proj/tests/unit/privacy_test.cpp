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

#include <cmath>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "cohortfl/privacy.h"
#include "cohortfl/rng.h"

using namespace cohortfl;

namespace {

// Independent oracle for the integrator: the exact binomial expansion of
// E_{nu1}[(nu1/nu0)^lambda] for the subsampled Gaussian,
//   log sum_{k=0}^{n} C(n,k) (1-q)^{n-k} q^k exp(k(k-1)/(2 sigma^2)),
// with n = lambda + 1. Evaluated in log space via log-sum-exp.
double binom_log_moment(double q, double sigma, int lambda) {
  const int n = lambda + 1;
  std::vector<double> terms;
  for (int k = 0; k <= n; ++k) {
    if (q >= 1.0 && k < n) continue;  // (1-q)^(n-k) vanishes
    double lt = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                std::lgamma(n - k + 1.0);
    if (q < 1.0) lt += (n - k) * std::log1p(-q);
    if (k > 0) lt += k * std::log(q);
    lt += k * (k - 1) / (2.0 * sigma * sigma);
    terms.push_back(lt);
  }
  double m = terms.front();
  for (double t : terms) m = std::max(m, t);
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - m);
  return m + std::log(sum);
}

}  // namespace

TEST_SUITE_BEGIN("privacy");

TEST_CASE("clip_update projects onto the L2 ball") {
  ParamVector small(2);
  small << 0.3, 0.4;  // norm 0.5
  CHECK(clip_update(small, 1.0) == small);

  ParamVector big(2);
  big << 1.2, 1.6;  // norm 2
  const ParamVector clipped = clip_update(big, 1.0);
  CHECK(vec_l2_norm(clipped) == doctest::Approx(1.0).epsilon(1e-15));
  // Direction preserved: clipped is a positive multiple of the input.
  CHECK(clipped[0] / big[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(clipped[1] / big[1] == doctest::Approx(0.5).epsilon(1e-15));

  const ParamVector zero = ParamVector::Zero(3);
  CHECK(clip_update(zero, 1.0) == zero);
  CHECK_THROWS_AS(clip_update(zero, 0.0), std::invalid_argument);
}

TEST_CASE("clipping is idempotent") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    ParamVector v(8);
    for (int i = 0; i < 8; ++i) v[i] = 3.0 * rng.normal();
    const ParamVector once = clip_update(v, 1.0);
    const ParamVector twice = clip_update(once, 1.0);
    CHECK((once - twice).lpNorm<Eigen::Infinity>() <= 1e-14);
  }
}

TEST_CASE("gaussian_noise basics") {
  Rng rng(3);
  const NoiseSpec quiet{1.0, 0.0};
  CHECK(gaussian_noise(5, quiet, rng).norm() == 0.0);

  Rng a(9), b(9);
  const NoiseSpec spec{1.0, 1.0};
  CHECK(gaussian_noise(16, spec, a) == gaussian_noise(16, spec, b));

  CHECK_THROWS_AS(gaussian_noise(0, spec, rng), std::invalid_argument);
}

TEST_CASE("gaussian_noise matches its moments") {
  Rng rng(17);
  const NoiseSpec spec{2.0, 0.5};  // per-coordinate std S*sigma = 1
  const ParamVector v = gaussian_noise(1000000, spec, rng);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("log_moment agrees with the q=1 closed form") {
  for (double sigma : {0.5, 1.0, 2.0}) {
    for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
      const double closed = lambda * (lambda + 1.0) / (2.0 * sigma * sigma);
      CHECK(std::abs(log_moment(1.0, sigma, lambda) - closed) <= 1e-9);
    }
  }
}

TEST_CASE("log_moment vanishes as q approaches zero") {
  for (int lambda : {1, 4, 16, 32}) {
    CHECK(log_moment(1e-9, 1.0, lambda) < 1e-6);
    CHECK(log_moment(1e-9, 1.0, lambda) >= -1e-9);
  }
}

TEST_CASE("log_moment is monotone in lambda and in q") {
  double prev = 0.0;
  for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
    const double a = log_moment(0.05, 1.0, lambda);
    CHECK(a >= prev);
    prev = a;
  }
  for (int lambda : {1, 2, 8, 32}) {
    CHECK(log_moment(0.10, 1.0, lambda) >= log_moment(0.05, 1.0, lambda));
  }
}

TEST_CASE("log_moment matches the binomial closed form") {
  // Spot values freeze the oracle itself (computed independently with
  // arbitrary-precision cross-checks).
  CHECK(binom_log_moment(0.05, 1.0, 1) ==
        doctest::Approx(0.004286504370418817).epsilon(1e-12));
  CHECK(binom_log_moment(0.05, 1.0, 8) ==
        doctest::Approx(9.09859978896047).epsilon(1e-12));
  CHECK(binom_log_moment(0.05, 1.0, 32) ==
        doctest::Approx(429.1408349727262).epsilon(1e-12));
  CHECK(binom_log_moment(0.125, 1.0, 16) ==
        doctest::Approx(100.64950718326833).epsilon(1e-12));
  CHECK(binom_log_moment(0.5, 2.0, 32) ==
        doctest::Approx(109.13722837163732).epsilon(1e-12));
  CHECK(binom_log_moment(0.01, 0.5, 4) ==
        doctest::Approx(16.97420488587387).epsilon(1e-12));
  CHECK(binom_log_moment(1.0, 1.0, 2) == doctest::Approx(3.0).epsilon(1e-12));

  for (double q : {0.01, 0.05, 0.125, 0.5}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
        const double numeric = log_moment(q, sigma, lambda);
        const double closed = binom_log_moment(q, sigma, lambda);
        // The implementation takes the max of the two likelihood-ratio
        // orderings; the binomial form is the dominant one on this grid.
        CHECK(std::abs(numeric - closed) <= 1e-9);
      }
    }
  }
}

TEST_CASE("log_moment rejects out-of-range parameters") {
  CHECK_THROWS_AS(log_moment(0.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(log_moment(1.5, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(log_moment(0.5, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(log_moment(0.5, 1.0, 0), std::invalid_argument);
}

TEST_CASE("fresh ledger composes from zero") {
  const CohortLedger ledger(6.0, 1e-5, 0.125, 1.0);
  CHECK(ledger.rounds_composed() == 0);
  for (double a : ledger.cumulative_log_moments()) CHECK(a == 0.0);
  // With all moments zero, delta = min_lambda exp(-lambda * eps)
  // = exp(-32 * 6) = exp(-192).
  CHECK(ledger.delta_spent() ==
        doctest::Approx(4.125337404615185e-84).epsilon(1e-12));
  CHECK(ledger.delta_spent() == std::exp(-192.0));
}

TEST_CASE("composition is exactly additive") {
  const double q = 0.125, sigma = 1.0;
  CohortLedger one(6.0, 1e-5, q, sigma);
  one.accumulate_round();
  const std::vector<double> alpha1 = one.cumulative_log_moments();
  for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
    CHECK(alpha1[lambda - 1] ==
          doctest::Approx(log_moment(q, sigma, lambda)).epsilon(1e-12));
  }

  CohortLedger many(6.0, 1e-5, q, sigma);
  for (int t = 0; t < 7; ++t) many.accumulate_round();
  CHECK(many.rounds_composed() == 7);
  for (int i = 0; i < kLambdaMax; ++i) {
    // Bitwise: the ledger stores round counts and multiplies once.
    CHECK(many.cumulative_log_moments()[i] == 7.0 * alpha1[i]);
  }
}

TEST_CASE("per-sigma schedule accounting is order independent") {
  CohortLedger a(6.0, 1e-5, 0.125, 1.0);
  for (int t = 0; t < 3; ++t) a.accumulate_round();
  for (int t = 0; t < 2; ++t) a.accumulate_round(2.0);

  CohortLedger b(6.0, 1e-5, 0.125, 1.0);
  for (int t = 0; t < 2; ++t) b.accumulate_round(2.0);
  for (int t = 0; t < 3; ++t) b.accumulate_round();

  CHECK(a.rounds_composed() == 5);
  CHECK(a.cumulative_log_moments() == b.cumulative_log_moments());
  CHECK(a.delta_spent() == b.delta_spent());

  // The schedule composition sits between the all-tight and all-loose runs.
  CohortLedger tight(6.0, 1e-5, 0.125, 1.0);
  CohortLedger loose(6.0, 1e-5, 0.125, 2.0);
  for (int t = 0; t < 5; ++t) {
    tight.accumulate_round();
    loose.accumulate_round();
  }
  CHECK(a.delta_spent() <= tight.delta_spent());
  CHECK(a.delta_spent() >= loose.delta_spent());
}

TEST_CASE("delta monotonicities") {
  CohortLedger ledger(6.0, 1e-5, 0.125, 1.0);
  double prev = ledger.delta_spent();
  for (int t = 0; t < 15; ++t) {
    ledger.accumulate_round();
    const double d = ledger.delta_spent();
    CHECK(d >= prev);
    prev = d;
  }
  CHECK(delta_for_epsilon(ledger, 4.0) >= delta_for_epsilon(ledger, 6.0));
  CHECK(delta_for_epsilon(ledger, 6.0) >= delta_for_epsilon(ledger, 8.0));
  CHECK(delta_for_epsilon(ledger, 6.0) == ledger.delta_spent());
  CHECK_THROWS_AS(delta_for_epsilon(ledger, 0.0), std::invalid_argument);
}

TEST_CASE("larger q dominates per lambda") {
  CohortLedger lo(6.0, 1e-5, 0.05, 1.0);
  CohortLedger hi(6.0, 1e-5, 0.10, 1.0);
  for (int t = 0; t < 10; ++t) {
    lo.accumulate_round();
    hi.accumulate_round();
  }
  for (int i = 0; i < kLambdaMax; ++i) {
    CHECK(hi.cumulative_log_moments()[i] >= lo.cumulative_log_moments()[i]);
  }
  CHECK(hi.delta_spent() >= lo.delta_spent());
}

TEST_CASE("delta is capped at one") {
  CohortLedger ledger(0.01, 0.5, 0.5, 0.5);
  for (int t = 0; t < 30; ++t) {
    ledger.accumulate_round();
    CHECK(ledger.delta_spent() <= 1.0);
  }
  CHECK(ledger.delta_spent() == 1.0);
}

TEST_CASE("exhaustion blocks composition until relaxed") {
  CohortLedger ledger(6.0, 1e-5, 0.125, 1.0);
  ledger.accumulate_round();
  ledger.mark_exhausted();
  CHECK(ledger.exhausted());
  CHECK_THROWS_AS(ledger.accumulate_round(), std::logic_error);
  CHECK(ledger.rounds_composed() == 1);
  ledger.relax();
  CHECK_FALSE(ledger.exhausted());
  ledger.accumulate_round();
  CHECK(ledger.rounds_composed() == 2);
}

TEST_CASE("threshold refusal matches the planner") {
  // Charged fraction 0.125 = 2.5 * 0.05: composing while the ledger allows
  // must execute exactly rounds_to_exhaustion - 1 rounds.
  const int T = rounds_to_exhaustion(0.05, 1.0, 6.0, 1e-5);
  CohortLedger ledger(6.0, 1e-5, 0.125, 1.0);
  while (!ledger.next_round_exceeds_threshold()) {
    ledger.accumulate_round();
    CHECK(ledger.delta_spent() <= 1e-5);
  }
  CHECK(ledger.rounds_composed() == T - 1);
}

TEST_CASE("ledger serialization round-trips") {
  CohortLedger ledger(8.0, 1e-5, 0.125, 1.0);
  for (int t = 0; t < 4; ++t) ledger.accumulate_round();
  ledger.accumulate_round(0.75);
  ledger.mark_exhausted();

  const nlohmann::json j = ledger.to_json();
  const CohortLedger back = CohortLedger::from_json(j);
  CHECK(back.epsilon_target() == 8.0);
  CHECK(back.delta_threshold() == 1e-5);
  CHECK(back.q() == 0.125);
  CHECK(back.sigma() == 1.0);
  CHECK(back.rounds_composed() == 5);
  CHECK(back.exhausted());
  CHECK(back.cumulative_log_moments() == ledger.cumulative_log_moments());
  CHECK(back.delta_spent() == ledger.delta_spent());
  CHECK(back.to_json() == j);
}

TEST_CASE("rounds_to_exhaustion reproduces the pinned counts") {
  // eps = 6 anchor: drop lands near round 23 in the reference narrative.
  const int t6 = rounds_to_exhaustion(0.05, 1.0, 6.0, 1e-5);
  CHECK(t6 == 22);
  CHECK(t6 >= 20);
  CHECK(t6 <= 26);

  const int t8 = rounds_to_exhaustion(0.05, 1.0, 8.0, 1e-5);
  CHECK(t8 == 44);
  CHECK(t8 > t6);

  // Duration anchors at eps = 8: within 1.5x of 728 and 10.
  const int slow = rounds_to_exhaustion(0.015, 1.0, 8.0, 1e-5);
  CHECK(slow == 697);
  CHECK(slow >= 486);
  CHECK(slow <= 1092);
  const int fast = rounds_to_exhaustion(0.10, 1.0, 8.0, 1e-5);
  CHECK(fast == 11);
  CHECK(fast >= 7);
  CHECK(fast <= 15);

  // Strict monotone decrease in q at both budget levels.
  const std::vector<double> qs = {0.015, 0.03, 0.05, 0.075, 0.10};
  const std::vector<int> expect6 = {362, 74, 22, 9, 5};
  const std::vector<int> expect8 = {697, 142, 44, 19, 11};
  for (size_t i = 0; i < qs.size(); ++i) {
    CHECK(rounds_to_exhaustion(qs[i], 1.0, 6.0, 1e-5) == expect6[i]);
    CHECK(rounds_to_exhaustion(qs[i], 1.0, 8.0, 1e-5) == expect8[i]);
    if (i > 0) {
      CHECK(expect6[i] < expect6[i - 1]);
      CHECK(expect8[i] < expect8[i - 1]);
    }
  }

  // Defaulted charge margin equals the explicit one.
  CHECK(rounds_to_exhaustion(0.05, 1.0, 6.0, 1e-5, 2.5) == t6);
  // A budget that outlives the cap is an error, not a silent clamp.
  CHECK_THROWS_AS(rounds_to_exhaustion(1e-6, 1.0, 6.0, 1e-5, 2.5, 10),
                  std::runtime_error);
}

TEST_CASE("reference Gaussian-mechanism bound") {
  CHECK(gm_reference_delta(1.0, 2.0) ==
        doctest::Approx(0.8 * std::exp(-2.0)).epsilon(1e-15));
  CHECK(gm_reference_delta(2.0, 3.0) ==
        doctest::Approx(0.8 * std::exp(-18.0)).epsilon(1e-15));
}

TEST_CASE("ledger constructor validates its parameters") {
  CHECK_THROWS_AS(CohortLedger(0.0, 1e-5, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CohortLedger(6.0, 0.0, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CohortLedger(6.0, 1e-5, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CohortLedger(6.0, 1e-5, 0.1, 0.0), std::invalid_argument);
}

TEST_SUITE_END();
