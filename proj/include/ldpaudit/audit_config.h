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

#ifndef LDPAUDIT_AUDIT_CONFIG_H_
#define LDPAUDIT_AUDIT_CONFIG_H_

#include <cstdint>
#include <optional>

#include "ldpaudit/adversaries.h"
#include "ldpaudit/estimation.h"
#include "ldpaudit/mechanisms.h"

namespace ldpaudit {

// Full specification of one audit: everything a trial needs, so a rerun
// with the same config and base_seed reproduces byte-identical results.
struct AuditConfig {
  std::uint64_t k = 2;
  std::uint64_t trials = 10000;
  // One-sided confidence level. The default 0.005 is the 99% two-sided
  // convention; with k = 2, T = 10^4, delta = 0 it puts the all-success
  // ceiling at 7.5427.
  double alpha_conf = 0.005;
  double delta = 0.0;
  double lambda = -10000.0;
  std::uint64_t base_seed = 42;
  MechanismSpec mechanism;
  AdversarySpec adversary;
  EstimatorMode estimator_mode = EstimatorMode::kEfficient;

  // Execution knobs. Results are identical for any worker count.
  unsigned workers = 0;  // 0 = available parallelism
  std::uint64_t trial_log_cap = 100000;
  // Max tolerated failed trials before the audit aborts. Unset: 0 for local
  // adversaries, 0.5% of T for the remote judge.
  std::optional<std::uint64_t> failure_budget;

  void validate(std::size_t corpus_size) const;
  std::uint64_t resolved_failure_budget() const;
};

}  // namespace ldpaudit

#endif  // LDPAUDIT_AUDIT_CONFIG_H_
