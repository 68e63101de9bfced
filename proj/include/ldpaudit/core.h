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

#ifndef LDPAUDIT_CORE_H_
#define LDPAUDIT_CORE_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ldpaudit {

using TokenId = std::uint32_t;
using RecordId = std::uint64_t;

// Invalid configuration, flag combination, or constraint violation.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input file. Loaders reject rather than repair.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unusable remote-judge reply; keeps the raw response for diagnosis.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::string raw_response)
      : std::runtime_error(message), raw_response_(std::move(raw_response)) {}
  const std::string& raw_response() const { return raw_response_; }

 private:
  std::string raw_response_;
};

// Raised by run_audit when failed trials exceed the configured budget.
// The CLI maps this to exit code 3.
class TrialBudgetError : public std::runtime_error {
 public:
  TrialBudgetError(const std::string& message, std::uint64_t failed,
                   std::uint64_t budget)
      : std::runtime_error(message), failed_(failed), budget_(budget) {}
  std::uint64_t failed_trials() const { return failed_; }
  std::uint64_t budget() const { return budget_; }

 private:
  std::uint64_t failed_;
  std::uint64_t budget_;
};

// One text record. `tokens` is the canonical representation; `raw_text`
// is carried only for display and the remote-judge adversary.
struct TextRecord {
  RecordId id = 0;
  std::vector<TokenId> tokens;
  std::string raw_text;
};

// Vocabulary-indexed fixed-dimension real vectors (row-major float32).
struct EmbeddingTable {
  std::size_t dim = 0;
  std::size_t vocab_size = 0;
  std::vector<float> vectors;
  // Optional token strings; empty or exactly vocab_size entries.
  std::vector<std::string> vocab;

  std::span<const float> row(TokenId token) const;
  // Checks dim >= 2, shape consistency, and that every entry is finite.
  void validate() const;
};

// Immutable input dataset. Record ids are dense: records[i].id == i.
struct Corpus {
  std::vector<TextRecord> records;
  std::string source_path;
  // Token strings when the corpus was tokenized at load time; may be empty.
  std::vector<std::string> vocab;

  std::size_t size() const { return records.size(); }
  const TextRecord& record(RecordId id) const;
  // Enforces non-emptiness, dense ids, non-empty token sequences, and
  // (when a table is given) token ids within the table's vocabulary.
  void validate(const EmbeddingTable* table = nullptr) const;
};

// ln sum_i exp(values[i]), computed with max subtraction so it stays finite
// for inputs up to roughly +-1e6. Values may be -inf; an all -inf input
// yields -inf. Empty input is an error.
double log_sum_exp(std::span<const double> values);

// Mean of the record's token vectors; the empty record embeds as the zero
// vector.
std::vector<double> sentence_embedding(const TextRecord& record,
                                       const EmbeddingTable& table);

// 1 - cos(a, b), in [0, 2]. If either vector has zero norm the distance is
// defined as 1 so comparisons stay total.
double cosine_distance(std::span<const double> a, std::span<const double> b);
double cosine_distance(std::span<const float> a, std::span<const float> b);

double l2_distance(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

}  // namespace ldpaudit

#endif  // LDPAUDIT_CORE_H_
