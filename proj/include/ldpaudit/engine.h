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

#ifndef LDPAUDIT_ENGINE_H_
#define LDPAUDIT_ENGINE_H_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldpaudit/adversaries.h"
#include "ldpaudit/audit_config.h"
#include "ldpaudit/core.h"
#include "ldpaudit/estimation.h"
#include "ldpaudit/mechanisms.h"
#include "ldpaudit/sampling.h"

namespace ldpaudit {

// Orchestration of the full audit loop: sample a candidate set, draw the
// target, privatize it, attack, aggregate successes, estimate. Trials are
// mutually independent through per-trial substreams, so they run on any
// number of workers with identical results.

struct AuditAssets {
  const Corpus* corpus = nullptr;
  std::shared_ptr<const EmbeddingTable> embeddings;
  std::shared_ptr<const DistanceCache> distances;
  // Where the table came from (a path, or "synthetic(dim=..,seed=..)").
  std::string embeddings_source;

  void validate() const;
};

// Builds the assets an audit needs from a corpus and a table (the distance
// cache is derived from the table).
AuditAssets make_assets(const Corpus& corpus,
                        std::shared_ptr<const EmbeddingTable> table);

struct TrialOutcome {
  std::uint64_t trial_index = 0;
  std::vector<RecordId> candidate_ids;
  std::size_t target_position = 0;
  TextRecord output_record;
  std::size_t guess_position = 0;
  bool success = false;
  std::uint64_t seed_used = 0;
};

struct TrialFailure {
  std::uint64_t trial_index = 0;
  std::string message;
};

struct AuditResult {
  EstimateSummary summary;
  // Outcomes of trials [0, min(T, trial_log_cap)); empty when the cap is 0.
  std::vector<TrialOutcome> trial_log;
  double wall_time_s = 0.0;
  AuditConfig config_echo;
  std::uint64_t mechanism_queries = 0;
  std::vector<TrialFailure> failures;
  std::string corpus_path;
  std::string embeddings_desc;
};

// Executes a single trial. Deterministic function of (config, assets,
// trial_index); consumes no randomness outside the trial's own substreams.
// `mechanism_queries` is incremented once per mechanism invocation.
TrialOutcome run_trial(const AuditConfig& config, const AuditAssets& assets,
                       const Mechanism& mechanism, const Adversary& adversary,
                       std::uint64_t trial_index,
                       std::uint64_t* mechanism_queries = nullptr);

// Runs T trials (possibly concurrently), aggregates the success count, and
// estimates epsilon_emp via the reduced-form estimator. Failed trials are
// excluded from both TP and T; if they exceed the failure budget the audit
// throws TrialBudgetError.
AuditResult run_audit(const AuditConfig& config, const AuditAssets& assets);
AuditResult run_audit(const AuditConfig& config, const AuditAssets& assets,
                      const Mechanism& mechanism, const Adversary& adversary);

// The two-proportion baseline: per trial, a candidate pair (v1, v2) with a
// TP experiment (privatize v1, check attribution to v1) and an FP
// experiment (privatize v2, check attribution to v1). Twice the mechanism
// queries of the efficient loop.
AuditResult run_symmetric_audit(const AuditConfig& config,
                                const AuditAssets& assets);
AuditResult run_symmetric_audit(const AuditConfig& config,
                                const AuditAssets& assets,
                                const Mechanism& mechanism,
                                const Adversary& adversary);

struct SweepCell {
  double epsilon_nominal = 0.0;
  std::optional<AuditResult> result;
  std::string error;  // non-empty when the cell failed
};

// One audit per grid value, the base seed offset by the grid index. Cell
// failures are isolated; the sweep continues and flags them.
std::vector<SweepCell> run_sweep(const AuditConfig& base_config,
                                 std::span<const double> epsilon_grid,
                                 const AuditAssets& assets);

}  // namespace ldpaudit

#endif  // LDPAUDIT_ENGINE_H_
