// Copyright 2026 The ldpaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LDPAUDIT_ESTIMATION_H_
#define LDPAUDIT_ESTIMATION_H_

#include <cstdint>
#include <optional>
#include <string>

namespace ldpaudit {

enum class EstimatorMode {
  kEfficient,
  kSymmetricBaseline,
};

std::string to_string(EstimatorMode mode);
EstimatorMode estimator_mode_from_string(const std::string& name);

// P[Binomial(trials, p) >= successes]. Exact, computed by summing the
// shorter tail of the pmf with compensated summation; the binomial
// coefficients are carried in log space so trials up to 10^6 stay stable.
double binomial_upper_tail(std::uint64_t trials, double p,
                           std::uint64_t successes);

// Exact one-sided Clopper-Pearson lower confidence bound: the p solving
// BinomialUpperTail(trials, p, successes) = alpha, found by bisection on
// the exact tail. successes = 0 returns 0 by convention; successes = trials
// lands on alpha^(1/trials).
double clopper_pearson_lower(std::uint64_t successes, std::uint64_t trials,
                             double alpha);

// Exact one-sided upper bound: the p solving
// P[Binomial(trials, p) <= successes] = alpha. successes = trials returns 1.
double clopper_pearson_upper(std::uint64_t successes, std::uint64_t trials,
                             double alpha);

// The reduced-form privacy-loss estimator
//   max(0, ln((k - 1)(p_lower - delta) / (1 - p_lower))),
// clamped to 0 whenever the log argument is <= 1. The (k - 1) factor is the
// prior odds of a uniform draw from k candidates.
double epsilon_emp(double p_lower, std::uint64_t k, double delta);

// Largest value epsilon_emp can reach at this (k, trials, alpha, delta):
// the estimate when every trial succeeds. Finite because the lower
// confidence bound stays strictly below 1 at finite sample sizes.
double ceiling(std::uint64_t k, std::uint64_t trials, double alpha,
               double delta);

// Two-proportion baseline estimator:
//   max(0, ln((TP_lower - delta) / FP_upper))
// with TP_lower the exact lower bound on the true-positive rate and
// FP_upper the exact upper bound on the false-positive rate.
double symmetric_baseline_estimate(std::uint64_t tp_successes,
                                   std::uint64_t tp_trials,
                                   std::uint64_t fp_successes,
                                   std::uint64_t fp_trials, double alpha,
                                   double delta);

// Ceiling of the symmetric estimator: all TP trials succeed, no FP events.
double symmetric_ceiling(std::uint64_t trials, double alpha, double delta);

struct EstimateSummary {
  std::uint64_t tp_count = 0;
  std::uint64_t trials = 0;
  double p_lower = 0.0;
  double epsilon_emp = 0.0;
  double ceiling = 0.0;
  std::uint64_t k = 2;
  double alpha_conf = 0.005;
  double delta = 0.0;
  EstimatorMode mode = EstimatorMode::kEfficient;
  // Present only for the symmetric baseline.
  std::optional<std::uint64_t> fp_count;

  void validate() const;
  bool operator==(const EstimateSummary&) const = default;
};

}  // namespace ldpaudit

#endif  // LDPAUDIT_ESTIMATION_H_
