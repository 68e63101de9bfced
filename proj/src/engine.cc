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

#include "ldpaudit/engine.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace ldpaudit {
namespace {

// Engine-internal substream codes for the symmetric baseline's second
// experiment; codes 0..3 are the public per-trial substreams.
constexpr std::uint64_t kFpMechanismCode = 4;
constexpr std::uint64_t kFpAdversaryCode = 5;

unsigned resolve_workers(const AuditConfig& config) {
  unsigned workers =
      config.workers != 0 ? config.workers : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  if (config.adversary.kind == AdversaryKind::kRemoteJudge &&
      config.adversary.endpoint.has_value()) {
    const int cap = std::max(1, config.adversary.endpoint->max_in_flight);
    workers = std::min<unsigned>(workers, static_cast<unsigned>(cap));
  }
  return workers;
}

// Static contiguous partition of [0, n) over `workers` threads. Each trial's
// outcome is a pure function of its index, so the partition does not affect
// results.
template <typename Body>
void parallel_trials(std::uint64_t n, unsigned workers, const Body& body) {
  if (workers <= 1 || n < 2) {
    body(0, 0, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t begin = n * w / workers;
    const std::uint64_t end = n * (w + 1) / workers;
    threads.emplace_back([&body, w, begin, end] { body(w, begin, end); });
  }
  for (auto& t : threads) t.join();
}

struct WorkerTally {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t queries = 0;
  std::vector<TrialFailure> failures;
};

struct TrialRunContext {
  const AuditConfig* config;
  const AuditAssets* assets;
  const Mechanism* mechanism;
  const Adversary* adversary;
  const VectorNoiseMechanism* vector_mechanism;  // non-null if applicable
};

TrialOutcome execute_trial(const TrialRunContext& ctx,
                           std::uint64_t trial_index,
                           std::uint64_t* mechanism_queries) {
  const AuditConfig& config = *ctx.config;
  RngStream sampling_rng =
      derive_trial_rng(config.base_seed, trial_index, Substream::kSampling);
  RngStream target_rng =
      derive_trial_rng(config.base_seed, trial_index, Substream::kTarget);
  RngStream mechanism_rng =
      derive_trial_rng(config.base_seed, trial_index, Substream::kMechanism);
  RngStream adversary_rng =
      derive_trial_rng(config.base_seed, trial_index, Substream::kAdversary);

  TrialOutcome outcome;
  outcome.trial_index = trial_index;
  outcome.seed_used = config.base_seed;

  CandidateSet candidates =
      sample_candidate_set(*ctx.assets->corpus, config.k, config.lambda,
                           *ctx.assets->distances, sampling_rng, target_rng);
  outcome.candidate_ids = candidates.members;
  outcome.target_position = candidates.target_position;
  const TextRecord& target =
      ctx.assets->corpus->record(candidates.members[candidates.target_position]);

  TrialView view;
  view.candidates = &candidates;
  view.corpus = ctx.assets->corpus;

  VectorLatents latents;
  std::vector<std::vector<double>> candidate_latents;
  if (ctx.vector_mechanism != nullptr &&
      ctx.adversary->kind() == AdversaryKind::kInternalEmbedding) {
    auto [record, lat] =
        ctx.vector_mechanism->perturb_with_latents(target, mechanism_rng);
    if (mechanism_queries != nullptr) ++*mechanism_queries;
    outcome.output_record = std::move(record);
    latents = std::move(lat);
    candidate_latents.reserve(candidates.members.size());
    for (RecordId id : candidates.members) {
      candidate_latents.push_back(
          ctx.vector_mechanism->clipped_embedding(ctx.assets->corpus->record(id)));
    }
    view.latents = &latents;
    view.candidate_latents = &candidate_latents;
  } else {
    outcome.output_record = ctx.mechanism->perturb(target, mechanism_rng);
    if (mechanism_queries != nullptr) ++*mechanism_queries;
  }
  view.output = &outcome.output_record;

  outcome.guess_position = ctx.adversary->predict(view, adversary_rng);
  outcome.success = outcome.guess_position == candidates.target_position;
  return outcome;
}

AuditResult finalize_audit(const AuditConfig& config, const AuditAssets& assets,
                           std::uint64_t tp,
                           std::optional<std::uint64_t> fp,
                           std::uint64_t queries,
                           std::vector<TrialFailure> failures,
                           std::vector<TrialOutcome> trial_log,
                           double wall_time_s) {
  std::sort(failures.begin(), failures.end(),
            [](const TrialFailure& a, const TrialFailure& b) {
              return a.trial_index < b.trial_index;
            });
  const std::uint64_t budget = config.resolved_failure_budget();
  if (failures.size() > budget) {
    throw TrialBudgetError(
        "audit aborted: " + std::to_string(failures.size()) +
            " failed trials exceed the budget of " + std::to_string(budget) +
            " (first: trial " + std::to_string(failures.front().trial_index) +
            ": " + failures.front().message + ")",
        failures.size(), budget);
  }
  const std::uint64_t effective_trials = config.trials - failures.size();
  if (effective_trials == 0) {
    throw TrialBudgetError("audit aborted: no usable trials", failures.size(),
                           budget);
  }

  AuditResult result;
  result.config_echo = config;
  result.trial_log = std::move(trial_log);
  result.mechanism_queries = queries;
  result.failures = std::move(failures);
  result.wall_time_s = wall_time_s;
  result.corpus_path = assets.corpus->source_path;

  EstimateSummary& summary = result.summary;
  summary.tp_count = tp;
  summary.trials = effective_trials;
  summary.k = config.k;
  summary.alpha_conf = config.alpha_conf;
  summary.delta = config.delta;
  if (fp.has_value()) {
    summary.mode = EstimatorMode::kSymmetricBaseline;
    summary.fp_count = fp;
    summary.p_lower =
        clopper_pearson_lower(tp, effective_trials, config.alpha_conf);
    summary.epsilon_emp = symmetric_baseline_estimate(
        tp, effective_trials, *fp, effective_trials, config.alpha_conf,
        config.delta);
    summary.ceiling =
        symmetric_ceiling(effective_trials, config.alpha_conf, config.delta);
  } else {
    summary.mode = EstimatorMode::kEfficient;
    summary.p_lower =
        clopper_pearson_lower(tp, effective_trials, config.alpha_conf);
    summary.epsilon_emp = epsilon_emp(summary.p_lower, config.k, config.delta);
    summary.ceiling =
        ceiling(config.k, effective_trials, config.alpha_conf, config.delta);
  }
  summary.validate();
  return result;
}

}  // namespace

void AuditConfig::validate(std::size_t corpus_size) const {
  if (k < 2) throw ConfigError("audit config: k must be >= 2");
  if (k > corpus_size) {
    throw ConfigError("audit config: k exceeds the corpus size");
  }
  if (trials < 1) throw ConfigError("audit config: trials must be >= 1");
  if (!(alpha_conf > 0.0 && alpha_conf <= 0.5)) {
    throw ConfigError("audit config: alpha_conf must lie in (0, 0.5]");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw ConfigError("audit config: delta must lie in [0, 1)");
  }
  if (!std::isfinite(lambda)) {
    throw ConfigError("audit config: lambda must be finite");
  }
  mechanism.validate();
  adversary.validate();
  if (adversary.kind == AdversaryKind::kInternalEmbedding &&
      mechanism.kind != MechanismKind::kVectorNoise) {
    throw ConfigError(
        "audit config: the internal_embedding attack requires the "
        "vector_noise mechanism");
  }
  if (estimator_mode == EstimatorMode::kSymmetricBaseline && k != 2) {
    throw ConfigError("audit config: the symmetric baseline requires k = 2");
  }
}

std::uint64_t AuditConfig::resolved_failure_budget() const {
  if (failure_budget.has_value()) return *failure_budget;
  if (adversary.kind == AdversaryKind::kRemoteJudge) {
    return static_cast<std::uint64_t>(0.005 * static_cast<double>(trials));
  }
  return 0;
}

void AuditAssets::validate() const {
  if (corpus == nullptr) throw ConfigError("audit assets: corpus missing");
  if (distances == nullptr) {
    throw ConfigError("audit assets: distance cache missing");
  }
  corpus->validate(embeddings.get());
}

AuditAssets make_assets(const Corpus& corpus,
                        std::shared_ptr<const EmbeddingTable> table) {
  if (table == nullptr) {
    throw ConfigError("make_assets: embedding table required");
  }
  table->validate();
  corpus.validate(table.get());
  AuditAssets assets;
  assets.corpus = &corpus;
  assets.embeddings = table;
  assets.distances = std::make_shared<DistanceCache>(corpus, *table);
  return assets;
}

TrialOutcome run_trial(const AuditConfig& config, const AuditAssets& assets,
                       const Mechanism& mechanism, const Adversary& adversary,
                       std::uint64_t trial_index,
                       std::uint64_t* mechanism_queries) {
  TrialRunContext ctx{&config, &assets, &mechanism, &adversary,
                      dynamic_cast<const VectorNoiseMechanism*>(&mechanism)};
  return execute_trial(ctx, trial_index, mechanism_queries);
}

AuditResult run_audit(const AuditConfig& config, const AuditAssets& assets) {
  const auto mechanism =
      make_mechanism(config.mechanism, *assets.corpus, assets.embeddings);
  const auto adversary = make_adversary(config.adversary, assets.embeddings);
  return run_audit(config, assets, *mechanism, *adversary);
}

AuditResult run_audit(const AuditConfig& config, const AuditAssets& assets,
                      const Mechanism& mechanism, const Adversary& adversary) {
  assets.validate();
  config.validate(assets.corpus->size());
  const auto start = std::chrono::steady_clock::now();

  TrialRunContext ctx{&config, &assets, &mechanism, &adversary,
                      dynamic_cast<const VectorNoiseMechanism*>(&mechanism)};
  const unsigned workers = resolve_workers(config);
  const std::uint64_t log_size =
      std::min<std::uint64_t>(config.trials, config.trial_log_cap);
  std::vector<TrialOutcome> trial_log(static_cast<std::size_t>(log_size));
  std::vector<WorkerTally> tallies(workers);

  parallel_trials(
      config.trials, workers,
      [&](unsigned worker, std::uint64_t begin, std::uint64_t end) {
        WorkerTally& tally = tallies[worker];
        for (std::uint64_t i = begin; i < end; ++i) {
          try {
            TrialOutcome outcome = execute_trial(ctx, i, &tally.queries);
            if (outcome.success) ++tally.tp;
            if (i < log_size) {
              trial_log[static_cast<std::size_t>(i)] = std::move(outcome);
            }
          } catch (const std::exception& e) {
            tally.failures.push_back({i, e.what()});
          }
        }
      });

  std::uint64_t tp = 0;
  std::uint64_t queries = 0;
  std::vector<TrialFailure> failures;
  for (WorkerTally& tally : tallies) {
    tp += tally.tp;
    queries += tally.queries;
    failures.insert(failures.end(), tally.failures.begin(),
                    tally.failures.end());
  }
  const double wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  AuditResult result =
      finalize_audit(config, assets, tp, std::nullopt, queries,
                     std::move(failures), std::move(trial_log), wall_time_s);
  result.embeddings_desc = assets.embeddings_source;
  return result;
}

AuditResult run_symmetric_audit(const AuditConfig& config,
                                const AuditAssets& assets) {
  const auto mechanism =
      make_mechanism(config.mechanism, *assets.corpus, assets.embeddings);
  const auto adversary = make_adversary(config.adversary, assets.embeddings);
  return run_symmetric_audit(config, assets, *mechanism, *adversary);
}

AuditResult run_symmetric_audit(const AuditConfig& config,
                                const AuditAssets& assets,
                                const Mechanism& mechanism,
                                const Adversary& adversary) {
  assets.validate();
  config.validate(assets.corpus->size());
  if (config.estimator_mode != EstimatorMode::kSymmetricBaseline) {
    throw ConfigError(
        "run_symmetric_audit: estimator_mode must be symmetric-baseline");
  }
  const auto start = std::chrono::steady_clock::now();

  const unsigned workers = resolve_workers(config);
  const std::uint64_t log_size =
      std::min<std::uint64_t>(config.trials, config.trial_log_cap);
  std::vector<TrialOutcome> trial_log(static_cast<std::size_t>(log_size));
  std::vector<WorkerTally> tallies(workers);
  const Corpus& corpus = *assets.corpus;

  parallel_trials(
      config.trials, workers,
      [&](unsigned worker, std::uint64_t begin, std::uint64_t end) {
        WorkerTally& tally = tallies[worker];
        for (std::uint64_t i = begin; i < end; ++i) {
          try {
            RngStream sampling_rng =
                derive_trial_rng(config.base_seed, i, Substream::kSampling);
            RngStream target_rng =
                derive_trial_rng(config.base_seed, i, Substream::kTarget);
            CandidateSet pair = sample_candidate_set(
                corpus, 2, config.lambda, *assets.distances, sampling_rng,
                target_rng);
            // Roles are fixed by sample order: v1 is the TP hypothesis.
            pair.target_position = 0;
            TrialView view;
            view.candidates = &pair;
            view.corpus = &corpus;

            // TP experiment: privatize v1, check attribution to v1.
            RngStream tp_mech_rng =
                derive_trial_rng(config.base_seed, i, Substream::kMechanism);
            RngStream tp_adv_rng =
                derive_trial_rng(config.base_seed, i, Substream::kAdversary);
            TrialOutcome outcome;
            outcome.trial_index = i;
            outcome.seed_used = config.base_seed;
            outcome.candidate_ids = pair.members;
            outcome.target_position = 0;
            outcome.output_record =
                mechanism.perturb(corpus.record(pair.members[0]), tp_mech_rng);
            ++tally.queries;
            view.output = &outcome.output_record;
            outcome.guess_position = adversary.predict(view, tp_adv_rng);
            outcome.success = outcome.guess_position == 0;
            if (outcome.success) ++tally.tp;

            // FP experiment: privatize v2, count attribution to v1.
            RngStream fp_mech_rng = derive_stream(
                config.base_seed, i * kSubstreamStride + kFpMechanismCode);
            RngStream fp_adv_rng = derive_stream(
                config.base_seed, i * kSubstreamStride + kFpAdversaryCode);
            const TextRecord fp_output =
                mechanism.perturb(corpus.record(pair.members[1]), fp_mech_rng);
            ++tally.queries;
            view.output = &fp_output;
            if (adversary.predict(view, fp_adv_rng) == 0) ++tally.fp;

            if (i < log_size) {
              trial_log[static_cast<std::size_t>(i)] = std::move(outcome);
            }
          } catch (const std::exception& e) {
            tally.failures.push_back({i, e.what()});
          }
        }
      });

  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t queries = 0;
  std::vector<TrialFailure> failures;
  for (WorkerTally& tally : tallies) {
    tp += tally.tp;
    fp += tally.fp;
    queries += tally.queries;
    failures.insert(failures.end(), tally.failures.begin(),
                    tally.failures.end());
  }
  const double wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  AuditResult result =
      finalize_audit(config, assets, tp, fp, queries, std::move(failures),
                     std::move(trial_log), wall_time_s);
  result.embeddings_desc = assets.embeddings_source;
  return result;
}

std::vector<SweepCell> run_sweep(const AuditConfig& base_config,
                                 std::span<const double> epsilon_grid,
                                 const AuditAssets& assets) {
  if (epsilon_grid.empty()) {
    throw ConfigError("run_sweep: empty epsilon grid");
  }
  for (double eps : epsilon_grid) {
    if (!(eps > 0.0)) {
      throw ConfigError("run_sweep: epsilon grid must be positive");
    }
  }
  std::vector<SweepCell> cells;
  cells.reserve(epsilon_grid.size());
  for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
    SweepCell cell;
    cell.epsilon_nominal = epsilon_grid[i];
    AuditConfig config = base_config;
    config.mechanism.epsilon = epsilon_grid[i];
    config.base_seed = base_config.base_seed + i;
    try {
      cell.result = config.estimator_mode == EstimatorMode::kSymmetricBaseline
                        ? run_symmetric_audit(config, assets)
                        : run_audit(config, assets);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace ldpaudit
