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

#include "ldpaudit/core.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ldpaudit {

std::span<const float> EmbeddingTable::row(TokenId token) const {
  if (token >= vocab_size) {
    throw std::domain_error("embedding table: token id " +
                            std::to_string(token) + " outside vocabulary of " +
                            std::to_string(vocab_size));
  }
  return std::span<const float>(vectors.data() +
                                    static_cast<std::size_t>(token) * dim,
                                dim);
}

void EmbeddingTable::validate() const {
  if (dim < 2) throw ConfigError("embedding table: dim must be >= 2");
  if (vocab_size == 0) throw ConfigError("embedding table: empty vocabulary");
  if (vectors.size() != vocab_size * dim) {
    throw ConfigError("embedding table: vector storage does not match shape");
  }
  if (!vocab.empty() && vocab.size() != vocab_size) {
    throw ConfigError("embedding table: vocab strings do not match shape");
  }
  for (float v : vectors) {
    if (!std::isfinite(v)) {
      throw ConfigError("embedding table: non-finite entry");
    }
  }
}

const TextRecord& Corpus::record(RecordId id) const {
  if (id >= records.size()) {
    throw std::domain_error("corpus: record id " + std::to_string(id) +
                            " out of range [0, " +
                            std::to_string(records.size()) + ")");
  }
  return records[static_cast<std::size_t>(id)];
}

void Corpus::validate(const EmbeddingTable* table) const {
  if (records.empty()) throw ConfigError("corpus: empty");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const TextRecord& rec = records[i];
    if (rec.id != i) {
      throw ConfigError("corpus: record ids must be dense in [0, N); found " +
                        std::to_string(rec.id) + " at position " +
                        std::to_string(i));
    }
    if (rec.tokens.empty()) {
      throw ConfigError("corpus: record " + std::to_string(i) +
                        " has no tokens");
    }
    if (table != nullptr) {
      for (TokenId t : rec.tokens) {
        if (t >= table->vocab_size) {
          throw ConfigError(
              "corpus: record " + std::to_string(i) + " token id " +
              std::to_string(t) + " exceeds embedding vocabulary " +
              std::to_string(table->vocab_size));
        }
      }
    }
  }
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("log_sum_exp: empty input");
  }
  const double max_value = *std::max_element(values.begin(), values.end());
  if (max_value == -std::numeric_limits<double>::infinity()) {
    return -std::numeric_limits<double>::infinity();
  }
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

std::vector<double> sentence_embedding(const TextRecord& record,
                                       const EmbeddingTable& table) {
  std::vector<double> mean(table.dim, 0.0);
  if (record.tokens.empty()) return mean;
  for (TokenId t : record.tokens) {
    const auto row = table.row(t);
    for (std::size_t d = 0; d < table.dim; ++d) mean[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(record.tokens.size());
  for (double& v : mean) v *= inv;
  return mean;
}

namespace {

template <typename T>
double cosine_distance_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw std::domain_error("cosine_distance: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
  cosine = std::clamp(cosine, -1.0, 1.0);
  return 1.0 - cosine;
}

}  // namespace

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  return cosine_distance_impl(a, b);
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  return cosine_distance_impl(a, b);
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::domain_error("l2_distance: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace ldpaudit
