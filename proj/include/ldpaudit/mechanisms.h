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

#ifndef LDPAUDIT_MECHANISMS_H_
#define LDPAUDIT_MECHANISMS_H_

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ldpaudit/core.h"
#include "ldpaudit/rng.h"

namespace ldpaudit {

// Desk-scale LDP mechanisms with analytically known guarantees. Each family
// keeps the structure of a class of production text rewriters: generalized
// randomized response over a finite value domain, exponential-mechanism
// token rewriting with per-token budgets, and clipped-embedding vector noise
// with nearest-neighbor decoding. The audit couples to them only through
// Mechanism::perturb, so heavier rewriters can be slotted in later.

enum class MechanismKind {
  kGrr,
  kTokenEm,
  kVectorNoise,
  // Passthrough reference point: infinitely distinguishable by construction.
  kIdentity,
};

enum class Granularity { kValue, kToken, kSentence };

enum class NoiseFamily { kLaplaceVector, kGaussian };

std::string to_string(MechanismKind kind);
MechanismKind mechanism_kind_from_string(const std::string& name);
std::string to_string(Granularity granularity);
std::string to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& name);
Granularity granularity_for(MechanismKind kind);

struct GrrParams {
  std::uint64_t domain_size = 2;
};

struct TokenEmParams {
  // Calibration diameter: must dominate the max pairwise cosine distance
  // over any candidate pool (cosine distance is bounded by 2).
  double sensitivity = 2.0;
  // Per-token pool size (nearest tokens by cosine distance, input
  // included); 0 means the full vocabulary.
  std::uint64_t candidate_pool = 0;
};

struct VectorNoiseParams {
  double clip_norm = 1.0;
  NoiseFamily noise_family = NoiseFamily::kLaplaceVector;
  // Failure probability of the Gaussian guarantee; unused for Laplace.
  double delta_mech = 1e-5;
};

struct MechanismSpec {
  MechanismKind kind = MechanismKind::kGrr;
  // Nominal privacy budget. Token-level for kTokenEm, sentence-level for
  // kVectorNoise, value-level for kGrr. Ignored by kIdentity.
  double epsilon = 1.0;
  Granularity granularity = Granularity::kValue;
  std::variant<std::monostate, GrrParams, TokenEmParams, VectorNoiseParams>
      params;

  static MechanismSpec grr(double epsilon, GrrParams p);
  static MechanismSpec token_em(double epsilon, TokenEmParams p);
  static MechanismSpec vector_noise(double epsilon, VectorNoiseParams p);
  static MechanismSpec identity();

  void validate() const;
};

// Keeps `value` with probability e^eps / (e^eps + g - 1), otherwise emits a
// uniform draw over the other g - 1 elements. Pure eps-LDP, exactly.
std::uint64_t grr_perturb(std::uint64_t value, const GrrParams& params,
                          double epsilon, RngStream& rng);

// Rewrites each token independently: replacement w is drawn from the
// token's candidate pool with probability proportional to
// exp(-eps * d(t, w) / (2 * sensitivity)), d = cosine distance in the
// table. Output length equals input length; an empty input consumes no
// randomness.
TextRecord em_token_rewrite(const TextRecord& input,
                            const EmbeddingTable& table,
                            const TokenEmParams& params,
                            double epsilon_per_token, RngStream& rng);

// Basic composition: a sentence of n tokens rewritten at eps per token
// consumes a total budget of n * eps.
double sentence_budget(double epsilon_per_token, std::uint64_t token_count);

// Projects v onto the L2 ball of radius clip_norm; vectors already inside
// are returned unchanged.
std::vector<double> clip_to_l2_ball(std::vector<double> v, double clip_norm);

// Laplace scale calibrated to the L1 sensitivity 2 * C * sqrt(dim) of the
// clipped embedding (pure eps-LDP).
double laplace_vector_scale(double clip_norm, std::size_t dim,
                            double epsilon);

// Classical Gaussian mechanism: sigma = sqrt(2 ln(1.25/delta)) * 2C / eps.
// This is the looser classical calibration, not the analytic one.
double gaussian_sigma(double clip_norm, double delta_mech, double epsilon);

// Expected L2 norm of the noise vector. Laplace uses the RMS closed form
// sqrt(2 * dim) * scale; Gaussian uses the exact chi-distribution mean.
double expected_noise_norm(const VectorNoiseParams& params, std::size_t dim,
                           double epsilon);

// clip_norm / expected_noise_norm. Monotonically increasing in epsilon and
// exactly linear for the Laplace family.
double snr(const VectorNoiseParams& params, std::size_t dim, double epsilon);

// Pre-decode state of one vector-mechanism invocation.
struct VectorLatents {
  std::vector<double> clean_clipped;
  std::vector<double> noised;
};

class Mechanism {
 public:
  virtual ~Mechanism() = default;
  virtual TextRecord perturb(const TextRecord& input, RngStream& rng) const = 0;
  virtual MechanismKind kind() const = 0;
};

class GrrMechanism : public Mechanism {
 public:
  // The value domain is the corpus record-id space, so domain_size must
  // equal the corpus size: inputs are record ids and outputs must decode
  // back to records.
  GrrMechanism(GrrParams params, double epsilon, const Corpus& corpus);
  TextRecord perturb(const TextRecord& input, RngStream& rng) const override;
  MechanismKind kind() const override { return MechanismKind::kGrr; }

 private:
  GrrParams params_;
  double epsilon_;
  const Corpus& corpus_;
};

class TokenEmMechanism : public Mechanism {
 public:
  TokenEmMechanism(TokenEmParams params, double epsilon,
                   std::shared_ptr<const EmbeddingTable> table,
                   const std::vector<std::string>* render_vocab = nullptr);
  TextRecord perturb(const TextRecord& input, RngStream& rng) const override;
  MechanismKind kind() const override { return MechanismKind::kTokenEm; }

 private:
  TokenEmParams params_;
  double epsilon_;
  std::shared_ptr<const EmbeddingTable> table_;
  const std::vector<std::string>* render_vocab_;
};

class VectorNoiseMechanism : public Mechanism {
 public:
  VectorNoiseMechanism(VectorNoiseParams params, double epsilon,
                       std::shared_ptr<const EmbeddingTable> table,
                       const Corpus& corpus);

  TextRecord perturb(const TextRecord& input, RngStream& rng) const override;
  // Same draw sequence as perturb, additionally returning the pre-decode
  // latents for the internal-embedding attack.
  std::pair<TextRecord, VectorLatents> perturb_with_latents(
      const TextRecord& input, RngStream& rng) const;
  // The mechanism's embedding map: clipped mean of token vectors.
  std::vector<double> clipped_embedding(const TextRecord& record) const;

  MechanismKind kind() const override { return MechanismKind::kVectorNoise; }

 private:
  VectorNoiseParams params_;
  double epsilon_;
  std::shared_ptr<const EmbeddingTable> table_;
  const Corpus& corpus_;
  // Clipped sentence embeddings of every corpus record, for decoding.
  std::vector<std::vector<double>> corpus_latents_;
};

class IdentityMechanism : public Mechanism {
 public:
  TextRecord perturb(const TextRecord& input, RngStream& rng) const override;
  MechanismKind kind() const override { return MechanismKind::kIdentity; }
};

std::unique_ptr<Mechanism> make_mechanism(
    const MechanismSpec& spec, const Corpus& corpus,
    std::shared_ptr<const EmbeddingTable> table);

}  // namespace ldpaudit

#endif  // LDPAUDIT_MECHANISMS_H_
