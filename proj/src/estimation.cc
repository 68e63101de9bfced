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

#include "ldpaudit/estimation.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ldpaudit/core.h"

namespace ldpaudit {
namespace {

// Evaluates P[Binomial(n, p) >= s] exactly by summing the shorter tail of
// the pmf. The log binomial coefficients depend only on (n, s), so they are
// computed once (by the recurrence ln C(n,k+1) = ln C(n,k) + ln(n-k) -
// ln(k+1)) and reused across every bisection iteration. Terms are
// probabilities, so the linear-space accumulation cannot overflow; Kahan
// compensation keeps the sum good to ~1e-15 absolute.
class BinomialTailEvaluator {
 public:
  BinomialTailEvaluator(std::uint64_t n, std::uint64_t s) : n_(n), s_(s) {
    const std::uint64_t upper_len = n - s + 1;  // terms in [s, n]
    const std::uint64_t lower_len = s;          // terms in [0, s-1]
    complement_ = upper_len > lower_len;
    from_ = complement_ ? 0 : s;
    to_ = complement_ ? s - 1 : n;
    log_coeffs_.reserve(static_cast<std::size_t>(to_ - from_ + 1));
    double log_coeff = 0.0;  // ln C(n, 0)
    for (std::uint64_t k = 0; k < from_; ++k) {
      log_coeff += std::log(static_cast<double>(n - k)) -
                   std::log(static_cast<double>(k + 1));
    }
    for (std::uint64_t k = from_; k <= to_; ++k) {
      log_coeffs_.push_back(log_coeff);
      log_coeff += std::log(static_cast<double>(n - k)) -
                   std::log(static_cast<double>(k + 1));
    }
  }

  double upper_tail(double p) const {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < log_coeffs_.size(); ++i) {
      const std::uint64_t k = from_ + i;
      const double log_term = log_coeffs_[i] +
                              static_cast<double>(k) * log_p +
                              static_cast<double>(n_ - k) * log_q;
      const double y = std::exp(log_term) - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    return complement_ ? 1.0 - sum : sum;
  }

 private:
  std::uint64_t n_;
  std::uint64_t s_;
  std::uint64_t from_ = 0;
  std::uint64_t to_ = 0;
  bool complement_ = false;
  std::vector<double> log_coeffs_;
};

void check_counts(std::uint64_t successes, std::uint64_t trials,
                  double alpha) {
  if (trials < 1) {
    throw std::domain_error("confidence bound: trials must be >= 1");
  }
  if (successes > trials) {
    throw std::domain_error("confidence bound: successes exceed trials");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("confidence bound: alpha must lie in (0, 1)");
  }
}

}  // namespace

std::string to_string(EstimatorMode mode) {
  return mode == EstimatorMode::kEfficient ? "efficient"
                                           : "symmetric-baseline";
}

EstimatorMode estimator_mode_from_string(const std::string& name) {
  if (name == "efficient") return EstimatorMode::kEfficient;
  if (name == "symmetric-baseline" || name == "symmetric") {
    return EstimatorMode::kSymmetricBaseline;
  }
  throw ConfigError("unknown estimator mode: " + name);
}

double binomial_upper_tail(std::uint64_t trials, double p,
                           std::uint64_t successes) {
  if (trials < 1) throw std::domain_error("binomial_upper_tail: trials < 1");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error("binomial_upper_tail: p outside [0, 1]");
  }
  if (successes == 0) return 1.0;
  if (successes > trials) return 0.0;
  return BinomialTailEvaluator(trials, successes).upper_tail(p);
}

double clopper_pearson_lower(std::uint64_t successes, std::uint64_t trials,
                             double alpha) {
  check_counts(successes, trials, alpha);
  if (successes == 0) return 0.0;
  // The upper tail is continuous and strictly increasing in p on (0, 1) for
  // 1 <= s <= n, so bisection pins the root to a few ulps.
  const BinomialTailEvaluator tail(trials, successes);
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-18; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (tail.upper_tail(mid) < alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double clopper_pearson_upper(std::uint64_t successes, std::uint64_t trials,
                             double alpha) {
  check_counts(successes, trials, alpha);
  if (successes == trials) return 1.0;
  // P[X <= s | p] = 1 - upper_tail(p, s + 1) is strictly decreasing in p.
  const BinomialTailEvaluator tail(trials, successes + 1);
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-18; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double lower_tail = 1.0 - tail.upper_tail(mid);
    if (lower_tail > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double epsilon_emp(double p_lower, std::uint64_t k, double delta) {
  if (!(p_lower >= 0.0 && p_lower < 1.0)) {
    throw std::domain_error("epsilon_emp: p_lower must lie in [0, 1)");
  }
  if (k < 2) throw std::domain_error("epsilon_emp: k must be >= 2");
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::domain_error("epsilon_emp: delta must lie in [0, 1)");
  }
  const double numerator = static_cast<double>(k - 1) * (p_lower - delta);
  if (numerator <= 0.0) return 0.0;
  const double ratio = numerator / (1.0 - p_lower);
  if (ratio <= 1.0) return 0.0;
  return std::log(ratio);
}

double ceiling(std::uint64_t k, std::uint64_t trials, double alpha,
               double delta) {
  return epsilon_emp(clopper_pearson_lower(trials, trials, alpha), k, delta);
}

double symmetric_baseline_estimate(std::uint64_t tp_successes,
                                   std::uint64_t tp_trials,
                                   std::uint64_t fp_successes,
                                   std::uint64_t fp_trials, double alpha,
                                   double delta) {
  const double tp_lower =
      clopper_pearson_lower(tp_successes, tp_trials, alpha);
  const double fp_upper =
      clopper_pearson_upper(fp_successes, fp_trials, alpha);
  const double numerator = tp_lower - delta;
  if (numerator <= 0.0) return 0.0;
  const double ratio = numerator / fp_upper;
  if (ratio <= 1.0) return 0.0;
  return std::log(ratio);
}

double symmetric_ceiling(std::uint64_t trials, double alpha, double delta) {
  return symmetric_baseline_estimate(trials, trials, 0, trials, alpha, delta);
}

void EstimateSummary::validate() const {
  if (trials == 0) throw ConfigError("estimate summary: zero trials");
  const double rate =
      static_cast<double>(tp_count) / static_cast<double>(trials);
  if (p_lower > rate + 1e-12) {
    throw ConfigError("estimate summary: p_lower exceeds the observed rate");
  }
  if (epsilon_emp > ceiling + 1e-9) {
    throw ConfigError("estimate summary: epsilon_emp exceeds the ceiling");
  }
}

}  // namespace ldpaudit
