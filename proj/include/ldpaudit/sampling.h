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

#ifndef LDPAUDIT_SAMPLING_H_
#define LDPAUDIT_SAMPLING_H_

#include <cstdint>
#include <span>
#include <vector>

#include "ldpaudit/core.h"
#include "ldpaudit/rng.h"

namespace ldpaudit {

// Candidate-set construction: a sequential Boltzmann policy over pairwise
// transition scores whose temperature lambda interpolates between
// more-diverse (lambda < 0), uniform (lambda = 0), and more-similar
// (lambda > 0) candidate sets.

// Pairwise cosine distances between record sentence embeddings, plus the
// per-anchor log normalizers ln sum_x exp(-d(x, anchor)). The full N x N
// matrix is materialized up to `materialize_limit` records; above that,
// rows are recomputed from the embeddings on demand and only O(N) state is
// kept.
class DistanceCache {
 public:
  static constexpr std::size_t kDefaultMaterializeLimit = 20000;

  DistanceCache(const Corpus& corpus, const EmbeddingTable& table,
                std::size_t materialize_limit = kDefaultMaterializeLimit);

  // Explicit row-major N x N matrix; must be symmetric with a zero diagonal
  // and entries in [0, 2].
  DistanceCache(std::vector<double> matrix, std::size_t n);

  std::size_t size() const { return n_; }
  double distance(std::size_t i, std::size_t j) const;
  // ln sum over all records x of exp(-d(x, anchor)).
  double log_normalizer(std::size_t anchor) const;
  // Copies d(anchor, .) into out (resized to N).
  void copy_row(std::size_t anchor, std::vector<double>& out) const;

 private:
  double compute_distance(std::size_t i, std::size_t j) const;

  std::size_t n_;
  std::size_t dim_;
  bool materialized_;
  std::vector<double> embeddings_;  // row-major N x dim sentence embeddings
  std::vector<double> matrix_;      // N x N when materialized
  std::vector<double> log_normalizers_;
};

// Ordered candidate set S = {v_1, ..., v_k} plus the index of the true
// input within it.
struct CandidateSet {
  std::vector<RecordId> members;
  std::size_t target_position = 0;

  void validate(std::size_t corpus_size) const;
};

// ln P(candidate | anchor) = -d(candidate, anchor) - ln Z(anchor), the
// transition probability normalized over the whole corpus.
double pairwise_transition_logprob(std::size_t candidate, std::size_t anchor,
                                   const DistanceCache& cache);

// Joint transition score: sum of pairwise log probabilities over the
// already-selected prefix.
double joint_loglik(std::size_t candidate, std::span<const RecordId> selected,
                    const DistanceCache& cache);

// The selection policy over the remaining pool: probabilities proportional
// to exp(lambda * joint_loglik), max-subtracted before exponentiation so
// |lambda| up to 1e4 stays finite. `pool` receives the candidate ids
// (ascending) the probabilities refer to. Ties in the score share weight;
// no deterministic tie-break is imposed.
std::vector<double> transition_policy(std::span<const RecordId> selected,
                                      double lambda, const DistanceCache& cache,
                                      std::vector<RecordId>* pool);

// Draws v_1 uniformly, then each v_t from the Boltzmann policy over the
// remaining records; the target position is drawn uniformly over [0, k)
// from the separate target stream.
CandidateSet sample_candidate_set(const Corpus& corpus, std::uint64_t k,
                                  double lambda, const DistanceCache& cache,
                                  RngStream& sampling_rng,
                                  RngStream& target_rng);

}  // namespace ldpaudit

#endif  // LDPAUDIT_SAMPLING_H_
