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

#ifndef LDPAUDIT_ADVERSARIES_H_
#define LDPAUDIT_ADVERSARIES_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ldpaudit/core.h"
#include "ldpaudit/mechanisms.h"
#include "ldpaudit/rng.h"
#include "ldpaudit/sampling.h"

namespace ldpaudit {

// Distinguishability attacks: map a privatized output and a candidate set
// to a predicted source position. Ties are always broken toward the lowest
// candidate position.

enum class AdversaryKind {
  kEmbeddingNn,
  kSurfaceOverlap,
  kRemoteJudge,
  kInternalEmbedding,
  // Exact MAP attribution for value-level mechanisms: guess the candidate
  // whose record id equals the output's, else guess uniformly at random.
  kValueMap,
};

std::string to_string(AdversaryKind kind);
AdversaryKind adversary_kind_from_string(const std::string& name);

struct RemoteJudgeConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_env_var = "LDPAUDIT_API_KEY";
  double timeout_s = 30.0;
  int max_retries = 2;
  // Upper bound on concurrent trials when this adversary drives an audit.
  int max_in_flight = 8;
};

struct AdversarySpec {
  AdversaryKind kind = AdversaryKind::kEmbeddingNn;
  std::optional<RemoteJudgeConfig> endpoint;

  void validate() const;
};

// arg min over candidates of the cosine distance between mean-of-token
// embeddings. An empty output embeds as the zero vector (distance 1 to
// everything), which lands on position 0 by the tie rule.
std::size_t attack_embedding(const TextRecord& output,
                             const CandidateSet& candidates,
                             const Corpus& corpus, const EmbeddingTable& table);

// arg max of Jaccard similarity between token-id sets. An empty output has
// similarity 0 against every candidate and yields position 0.
std::size_t attack_surface(const TextRecord& output,
                           const CandidateSet& candidates,
                           const Corpus& corpus);

// Nearest candidate latent (L2) to the noised latent. Only meaningful for
// mechanisms that expose their pre-decode state.
std::size_t attack_internal_embedding(
    std::span<const double> clean_latent, std::span<const double> noised_latent,
    const std::vector<std::vector<double>>& candidate_latents);

// The judge prompt, rendered with the privatized text and the numbered
// candidates.
std::string render_judge_prompt(const std::string& output_text,
                                const std::vector<std::string>& candidates);

// First match of `answer: [[N]]` with N in [1, K]; returns N - 1. Throws
// ParseError (with the raw content attached) on no match or out-of-range N.
std::size_t parse_judge_answer(const std::string& content, std::size_t k);

// One chat-completion round trip: POST {base_url}/chat/completions with the
// rendered prompt as a single user message at temperature 0, then parse the
// first choice's content. The API key is read from the configured
// environment variable and never logged.
std::size_t attack_remote_judge(const TextRecord& output,
                                const CandidateSet& candidates,
                                const Corpus& corpus,
                                const RemoteJudgeConfig& config);

// Everything a trial exposes to an adversary.
struct TrialView {
  const TextRecord* output = nullptr;
  const CandidateSet* candidates = nullptr;
  const Corpus* corpus = nullptr;
  // Set only when the mechanism exposes pre-decode latents.
  const VectorLatents* latents = nullptr;
  const std::vector<std::vector<double>>* candidate_latents = nullptr;
};

class Adversary {
 public:
  virtual ~Adversary() = default;
  virtual std::size_t predict(const TrialView& view, RngStream& rng) const = 0;
  virtual AdversaryKind kind() const = 0;
};

std::unique_ptr<Adversary> make_adversary(
    const AdversarySpec& spec, std::shared_ptr<const EmbeddingTable> table);

}  // namespace ldpaudit

#endif  // LDPAUDIT_ADVERSARIES_H_
