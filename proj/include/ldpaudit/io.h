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

#ifndef LDPAUDIT_IO_H_
#define LDPAUDIT_IO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ldpaudit/audit_config.h"
#include "ldpaudit/core.h"
#include "ldpaudit/engine.h"

namespace ldpaudit {

inline constexpr const char* kResultSchemaVersion = "1.0";
inline constexpr const char* kToolVersion = "0.1.0";
// Magic bytes of the binary embedding format.
inline constexpr const char kEmbeddingMagic[9] = "TEDAEMB1";

enum class CorpusFormat { kJsonl, kPlainText };

// jsonl: one object per line with required `text`, optional `id` and
// pre-tokenized `tokens`. plain_text: one record per line, whitespace
// tokenized against a vocabulary built on first pass. Ids are assigned
// densely in file order when absent; explicit ids must form a permutation
// of [0, N). Malformed lines are rejected with their line number.
Corpus load_corpus(const std::string& path, CorpusFormat format);

// Binary format, all little-endian: magic "TEDAEMB1", two u64 (vocab size V,
// dimension D), then V*D float32 values row-major.
EmbeddingTable load_embeddings_binary(const std::string& path);
void write_embeddings_binary(const EmbeddingTable& table,
                             const std::string& path);

// CSV alternative with header `token,v0,...,v{D-1}`.
EmbeddingTable load_embeddings_csv(const std::string& path);

// Dispatches on the ".csv" extension, binary otherwise.
EmbeddingTable load_embeddings(const std::string& path);

// Reproducible random unit vectors for corpora without real embeddings.
EmbeddingTable synthetic_embeddings(std::size_t vocab_size, std::size_t dim,
                                    std::uint64_t seed);

// Everything a result file stores besides the volatile environment block.
struct ResultFileData {
  std::string schema_version;
  EstimateSummary summary;
  std::uint64_t mechanism_queries = 0;
  std::uint64_t failed_trials = 0;
  double epsilon_nominal = 0.0;
  std::string mechanism;
  std::string adversary;
  double lambda = 0.0;
  std::uint64_t base_seed = 0;
  std::string trial_log_ref;
};

// One-line JSON document per result; only the `environment` member
// (timestamp, wall time, workers) varies between identical runs. A non-empty
// `trial_log_ref` is recorded as the result's trial-log reference.
void write_result(const AuditResult& result, const std::string& path,
                  const std::string& trial_log_ref = "");
ResultFileData read_result(const std::string& path);

// Retained trial outcomes as JSON lines (candidate ids, target, output
// tokens, guess, success), one line per trial.
void write_trial_log(const AuditResult& result, const std::string& path);

// Appends one result line per successful cell.
void write_sweep_results(const std::vector<SweepCell>& cells,
                         const std::string& path);

// Plot-ready CSV: epsilon_nominal, epsilon_emp, p_lower, tp, trials, k,
// lambda, alpha, delta, mechanism, adversary, ceiling, one row per
// successful cell; epsilon_emp and ceiling carry 4 decimals. When
// `mean_tokens` is positive an eps_sentence column (mean_tokens * epsilon,
// the basic-composition sentence budget) is appended.
void write_sweep_csv(const std::vector<SweepCell>& cells,
                     const std::string& path, std::uint64_t mean_tokens = 0);

// Config echo used inside result files and by the CLI's resolved-config
// print-out.
std::string config_to_json_string(const AuditConfig& config);

}  // namespace ldpaudit

#endif  // LDPAUDIT_IO_H_
