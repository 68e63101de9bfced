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

#include "ldpaudit/sampling.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ldpaudit {

DistanceCache::DistanceCache(const Corpus& corpus, const EmbeddingTable& table,
                             std::size_t materialize_limit)
    : n_(corpus.size()), dim_(table.dim) {
  if (n_ == 0) throw ConfigError("distance cache: empty corpus");
  embeddings_.resize(n_ * dim_);
  for (std::size_t i = 0; i < n_; ++i) {
    const std::vector<double> emb = sentence_embedding(corpus.records[i], table);
    std::copy(emb.begin(), emb.end(), embeddings_.begin() + i * dim_);
  }
  materialized_ = n_ <= materialize_limit;
  if (materialized_) {
    matrix_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double d = compute_distance(i, j);
        matrix_[i * n_ + j] = d;
        matrix_[j * n_ + i] = d;
      }
    }
  }
  // Per-anchor normalizers cost one row each; O(N) memory either way.
  log_normalizers_.resize(n_);
  std::vector<double> row;
  for (std::size_t a = 0; a < n_; ++a) {
    copy_row(a, row);
    for (double& d : row) d = -d;
    log_normalizers_[a] = log_sum_exp(row);
  }
}

DistanceCache::DistanceCache(std::vector<double> matrix, std::size_t n)
    : n_(n), dim_(0), materialized_(true), matrix_(std::move(matrix)) {
  if (n_ == 0 || matrix_.size() != n_ * n_) {
    throw ConfigError("distance cache: matrix shape mismatch");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (matrix_[i * n_ + i] != 0.0) {
      throw ConfigError("distance cache: diagonal must be zero");
    }
    for (std::size_t j = 0; j < n_; ++j) {
      const double d = matrix_[i * n_ + j];
      if (!(d >= 0.0 && d <= 2.0)) {
        throw ConfigError("distance cache: entries must lie in [0, 2]");
      }
      if (d != matrix_[j * n_ + i]) {
        throw ConfigError("distance cache: matrix must be symmetric");
      }
    }
  }
  log_normalizers_.resize(n_);
  std::vector<double> row;
  for (std::size_t a = 0; a < n_; ++a) {
    copy_row(a, row);
    for (double& d : row) d = -d;
    log_normalizers_[a] = log_sum_exp(row);
  }
}

double DistanceCache::compute_distance(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  const std::span<const double> a(embeddings_.data() + i * dim_, dim_);
  const std::span<const double> b(embeddings_.data() + j * dim_, dim_);
  return cosine_distance(a, b);
}

double DistanceCache::distance(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) {
    throw std::domain_error("distance cache: record index out of range");
  }
  if (materialized_) return matrix_[i * n_ + j];
  return compute_distance(i, j);
}

double DistanceCache::log_normalizer(std::size_t anchor) const {
  if (anchor >= n_) {
    throw std::domain_error("distance cache: anchor out of range");
  }
  return log_normalizers_[anchor];
}

void DistanceCache::copy_row(std::size_t anchor,
                             std::vector<double>& out) const {
  if (anchor >= n_) {
    throw std::domain_error("distance cache: anchor out of range");
  }
  out.resize(n_);
  if (materialized_ && !matrix_.empty()) {
    std::copy(matrix_.begin() + anchor * n_, matrix_.begin() + (anchor + 1) * n_,
              out.begin());
    return;
  }
  for (std::size_t j = 0; j < n_; ++j) out[j] = compute_distance(anchor, j);
}

void CandidateSet::validate(std::size_t corpus_size) const {
  if (members.size() < 2) {
    throw ConfigError("candidate set: needs at least two members");
  }
  if (target_position >= members.size()) {
    throw ConfigError("candidate set: target position out of range");
  }
  std::vector<RecordId> sorted = members;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("candidate set: duplicate members");
  }
  for (RecordId id : members) {
    if (id >= corpus_size) {
      throw ConfigError("candidate set: member outside corpus");
    }
  }
}

double pairwise_transition_logprob(std::size_t candidate, std::size_t anchor,
                                   const DistanceCache& cache) {
  return -cache.distance(candidate, anchor) - cache.log_normalizer(anchor);
}

double joint_loglik(std::size_t candidate, std::span<const RecordId> selected,
                    const DistanceCache& cache) {
  double sum = 0.0;
  for (RecordId anchor : selected) {
    sum += pairwise_transition_logprob(candidate,
                                       static_cast<std::size_t>(anchor), cache);
  }
  return sum;
}

std::vector<double> transition_policy(std::span<const RecordId> selected,
                                      double lambda, const DistanceCache& cache,
                                      std::vector<RecordId>* pool) {
  const std::size_t n = cache.size();
  std::vector<bool> taken(n, false);
  for (RecordId id : selected) taken[static_cast<std::size_t>(id)] = true;
  pool->clear();
  pool->reserve(n - selected.size());
  for (std::size_t x = 0; x < n; ++x) {
    if (!taken[x]) pool->push_back(static_cast<RecordId>(x));
  }
  if (pool->empty()) {
    throw ConfigError("transition policy: empty remaining pool");
  }
  std::vector<double> scores(pool->size());
  for (std::size_t i = 0; i < pool->size(); ++i) {
    scores[i] =
        lambda * joint_loglik(static_cast<std::size_t>((*pool)[i]), selected,
                              cache);
  }
  const double max_score = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - max_score);
    total += s;
  }
  for (double& s : scores) s /= total;
  return scores;
}

CandidateSet sample_candidate_set(const Corpus& corpus, std::uint64_t k,
                                  double lambda, const DistanceCache& cache,
                                  RngStream& sampling_rng,
                                  RngStream& target_rng) {
  const std::size_t n = corpus.size();
  if (k < 2) throw ConfigError("sample_candidate_set: k must be >= 2");
  if (k > n) {
    throw ConfigError("sample_candidate_set: k exceeds the corpus size");
  }
  CandidateSet set;
  set.members.reserve(k);
  set.members.push_back(sampling_rng.next_below(n));
  std::vector<RecordId> pool;
  for (std::uint64_t t = 1; t < k; ++t) {
    const std::vector<double> probs =
        transition_policy(set.members, lambda, cache, &pool);
    const double u = sampling_rng.next_double();
    double cum = 0.0;
    std::size_t chosen = probs.size() - 1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) {
        chosen = i;
        break;
      }
    }
    set.members.push_back(pool[chosen]);
  }
  set.target_position = static_cast<std::size_t>(target_rng.next_below(k));
  return set;
}

}  // namespace ldpaudit
