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

#include "cohortfl/privacy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cohortfl {

namespace {

// log((1-q) + q * exp(u)) without overflow.
double log_ratio(double q, double u) {
  if (q >= 1.0) return u;
  const double a = std::log1p(-q);       // log(1-q)
  const double b = std::log(q) + u;      // log(q e^u)
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct LogIntegrand {
  double q, sigma, k;  // integrand: N(0,sigma^2)(z) * r(z)^k

  double operator()(double z) const {
    const double u = (2.0 * z - 1.0) / (2.0 * sigma * sigma);
    return -0.5 * z * z / (sigma * sigma) -
           std::log(sigma * std::sqrt(2.0 * std::numbers::pi_v<double>)) +
           k * log_ratio(q, u);
  }
};

struct Quadrature {
  double shift;  // peak log value subtracted before exponentiation
  int depth_limit = 48;
  int evals = 0;

  double f(const LogIntegrand& li, double z) {
    ++evals;
    return std::exp(li(z) - shift);
  }

  double simpson(double fa, double fm, double fb, double h) {
    return h / 6.0 * (fa + 4.0 * fm + fb);
  }

  double adapt(const LogIntegrand& li, double a, double b, double fa,
               double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double fl = f(li, 0.5 * (a + m));
    const double fr = f(li, 0.5 * (m + b));
    const double left = simpson(fa, fl, fm, m - a);
    const double right = simpson(fm, fr, fb, b - m);
    const double err = left + right - whole;
    if (std::abs(err) <= 15.0 * tol || depth >= depth_limit) {
      if (depth >= depth_limit && std::abs(err) > 15.0 * tol) {
        throw std::runtime_error("log_moment: quadrature did not converge");
      }
      return left + right + err / 15.0;
    }
    return adapt(li, a, m, fa, fl, fm, left, 0.5 * tol, depth + 1) +
           adapt(li, m, b, fm, fr, fb, right, 0.5 * tol, depth + 1);
  }

  double integrate(const LogIntegrand& li, double a, double b, double tol) {
    const double fa = f(li, a), fb = f(li, b), fm = f(li, 0.5 * (a + b));
    return adapt(li, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0);
  }
};

// log E_{z ~ N(0, sigma^2)}[ r(z)^k ], r = (1-q) + q exp((2z-1)/(2 sigma^2)).
double log_expectation(double q, double sigma, double k) {
  const LogIntegrand li{q, sigma, k};

  // Peak scan. The mode lies between the Gaussian center and z ~ k (where
  // the tilted term dominates); scan a generous bracket.
  const double lo = -10.0 * sigma - std::abs(k) - 2.0;
  const double hi = 10.0 * sigma + std::abs(k) + 2.0;
  const int kScan = 4096;
  double peak = -std::numeric_limits<double>::infinity();
  double peak_z = 0.0;
  for (int i = 0; i <= kScan; ++i) {
    const double z = lo + (hi - lo) * i / kScan;
    const double v = li(z);
    if (v > peak) {
      peak = v;
      peak_z = z;
    }
  }

  // Clip the domain where the shifted integrand is below ~1e-20.
  const double cutoff = peak - 46.0;
  double a = peak_z, b = peak_z;
  const double step = (hi - lo) / kScan;
  while (a > lo && li(a) > cutoff) a -= step;
  while (b < hi && li(b) > cutoff) b += step;

  Quadrature qd{peak};
  const double integral = qd.integrate(li, a, b, 1e-12);
  if (!(integral > 0.0) || !std::isfinite(integral)) {
    throw std::runtime_error(
        "log_moment: quadrature failed at q=" + std::to_string(q) +
        " sigma=" + std::to_string(sigma) + " k=" + std::to_string(k));
  }
  return peak + std::log(integral);
}

}  // namespace

ParamVector clip_update(const ParamVector& delta, double S) {
  if (S <= 0.0) {
    throw std::invalid_argument("clip_update: S must be positive");
  }
  const double norm = delta.norm();
  return delta / std::max(1.0, norm / S);
}

ParamVector gaussian_noise(int dim, const NoiseSpec& spec, Rng& rng) {
  if (dim <= 0) {
    throw std::invalid_argument("gaussian_noise: dim must be positive");
  }
  const double scale = spec.sensitivity * spec.sigma;
  ParamVector v(dim);
  for (int i = 0; i < dim; ++i) {
    v[i] = scale * rng.normal();
  }
  return v;
}

double log_moment(double q, double sigma, int lambda) {
  if (!(q > 0.0 && q <= 1.0) || !(sigma > 0.0) || lambda < 1) {
    throw std::invalid_argument("log_moment: parameter out of range");
  }
  // The two orderings of the privacy loss: expectation of (nu1/nu0)^lambda
  // under nu1 (tilt k = lambda + 1 under nu0) and of (nu0/nu1)^lambda under
  // nu0 (tilt k = -lambda).
  const double a1 = log_expectation(q, sigma, double(lambda) + 1.0);
  const double a2 = log_expectation(q, sigma, -double(lambda));
  // Moments are nonnegative; quadrature may land epsilon-negative at q -> 0.
  return std::max(0.0, std::max(a1, a2));
}

double gm_reference_delta(double sigma, double epsilon) {
  const double se = sigma * epsilon;
  return 0.8 * std::exp(-0.5 * se * se);
}

CohortLedger::CohortLedger(double epsilon_target, double delta_threshold,
                           double q, double sigma)
    : epsilon_target_(epsilon_target),
      delta_threshold_(delta_threshold),
      q_(q),
      sigma_(sigma),
      cumulative_(kLambdaMax, 0.0) {
  if (!(epsilon_target > 0.0)) {
    throw std::invalid_argument("CohortLedger: epsilon must be positive");
  }
  if (!(delta_threshold > 0.0 && delta_threshold < 1.0)) {
    throw std::invalid_argument("CohortLedger: Q must be in (0,1)");
  }
  moments_for(sigma_);  // validates q/sigma, warms the cache
}

const std::vector<double>& CohortLedger::moments_for(double sigma) const {
  auto it = single_round_.find(sigma);
  if (it == single_round_.end()) {
    std::vector<double> alpha(kLambdaMax);
    for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
      alpha[lambda - 1] = log_moment(q_, sigma, lambda);
    }
    it = single_round_.emplace(sigma, std::move(alpha)).first;
  }
  return it->second;
}

void CohortLedger::recompute_cumulative() {
  // Exact additivity: T rounds of identical composition contribute exactly
  // T * alpha_1 per sigma, so the sums are reproducible after resume.
  std::fill(cumulative_.begin(), cumulative_.end(), 0.0);
  for (const auto& [sigma, rounds] : rounds_by_sigma_) {
    const auto& alpha = moments_for(sigma);
    for (int i = 0; i < kLambdaMax; ++i) {
      cumulative_[i] += rounds * alpha[i];
    }
  }
}

void CohortLedger::accumulate_round(std::optional<double> sigma_override) {
  if (exhausted_) {
    throw std::logic_error("accumulate_round on exhausted ledger");
  }
  ++rounds_by_sigma_[sigma_override.value_or(sigma_)];
  ++rounds_composed_;
  recompute_cumulative();
}

double CohortLedger::delta_of(const std::vector<double>& cum) const {
  double best = std::numeric_limits<double>::infinity();
  for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
    best = std::min(best, cum[lambda - 1] - lambda * epsilon_target_);
  }
  return std::exp(std::min(0.0, best));
}

double CohortLedger::delta_spent() const { return delta_of(cumulative_); }

bool CohortLedger::next_round_exceeds_threshold(
    std::optional<double> sigma_override) const {
  const auto& alpha = moments_for(sigma_override.value_or(sigma_));
  std::vector<double> next = cumulative_;
  for (int i = 0; i < kLambdaMax; ++i) {
    next[i] += alpha[i];
  }
  return delta_of(next) > delta_threshold_;
}

nlohmann::json CohortLedger::to_json() const {
  nlohmann::json composed = nlohmann::json::array();
  for (const auto& [sigma, rounds] : rounds_by_sigma_) {
    composed.push_back({sigma, rounds});
  }
  return nlohmann::json{{"epsilon_target", epsilon_target_},
                        {"delta_threshold", delta_threshold_},
                        {"q", q_},
                        {"sigma", sigma_},
                        {"rounds_by_sigma", composed},
                        {"exhausted", exhausted_}};
}

CohortLedger CohortLedger::from_json(const nlohmann::json& j) {
  CohortLedger ledger(j.at("epsilon_target").get<double>(),
                      j.at("delta_threshold").get<double>(),
                      j.at("q").get<double>(), j.at("sigma").get<double>());
  for (const auto& entry : j.at("rounds_by_sigma")) {
    const double sigma = entry.at(0).get<double>();
    const int rounds = entry.at(1).get<int>();
    ledger.rounds_by_sigma_[sigma] = rounds;
    ledger.rounds_composed_ += rounds;
  }
  ledger.exhausted_ = j.at("exhausted").get<bool>();
  ledger.recompute_cumulative();
  return ledger;
}

double delta_for_epsilon(const CohortLedger& ledger, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("delta_for_epsilon: epsilon must be positive");
  }
  const auto& cum = ledger.cumulative_log_moments();
  double best = std::numeric_limits<double>::infinity();
  for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
    best = std::min(best, cum[lambda - 1] - lambda * epsilon);
  }
  return std::exp(std::min(0.0, best));
}

int rounds_to_exhaustion(double q, double sigma, double epsilon, double Q,
                         double charge_margin, int round_cap) {
  const double q_charged = std::min(1.0, charge_margin * q);
  std::vector<double> alpha1(kLambdaMax);
  for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
    alpha1[lambda - 1] = log_moment(q_charged, sigma, lambda);
  }
  for (int rounds = 1; rounds <= round_cap; ++rounds) {
    double best = std::numeric_limits<double>::infinity();
    for (int lambda = 1; lambda <= kLambdaMax; ++lambda) {
      best = std::min(best, rounds * alpha1[lambda - 1] - lambda * epsilon);
    }
    if (std::exp(std::min(0.0, best)) > Q) {
      return rounds;
    }
  }
  throw std::runtime_error(
      "rounds_to_exhaustion: budget outlives the round cap (" +
      std::to_string(round_cap) + ") at q=" + std::to_string(q) +
      " sigma=" + std::to_string(sigma) + " eps=" + std::to_string(epsilon));
}

}  // namespace cohortfl
