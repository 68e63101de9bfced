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

#include "ldpaudit/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ldpaudit {
namespace {

// Draws an index from unnormalized log weights: max-subtract, exponentiate,
// inverse-CDF with a single uniform.
std::size_t draw_from_log_weights(const std::vector<double>& log_weights,
                                  RngStream& rng) {
  const double max_w =
      *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> weights(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    weights[i] = std::exp(log_weights[i] - max_w);
    total += weights[i];
  }
  const double u = rng.next_double() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return i;
  }
  return weights.size() - 1;
}

std::string render_tokens(const std::vector<TokenId>& tokens,
                          const std::vector<std::string>& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= vocab.size()) return {};
    if (i > 0) out += ' ';
    out += vocab[tokens[i]];
  }
  return out;
}

}  // namespace

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kGrr:
      return "grr";
    case MechanismKind::kTokenEm:
      return "token_em";
    case MechanismKind::kVectorNoise:
      return "vector_noise";
    case MechanismKind::kIdentity:
      return "identity";
  }
  return "unknown";
}

MechanismKind mechanism_kind_from_string(const std::string& name) {
  if (name == "grr") return MechanismKind::kGrr;
  if (name == "token_em") return MechanismKind::kTokenEm;
  if (name == "vector_noise") return MechanismKind::kVectorNoise;
  if (name == "identity") return MechanismKind::kIdentity;
  throw ConfigError("unknown mechanism kind: " + name);
}

std::string to_string(Granularity granularity) {
  switch (granularity) {
    case Granularity::kValue:
      return "value";
    case Granularity::kToken:
      return "token";
    case Granularity::kSentence:
      return "sentence";
  }
  return "unknown";
}

std::string to_string(NoiseFamily family) {
  return family == NoiseFamily::kLaplaceVector ? "laplace_vector" : "gaussian";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  if (name == "laplace_vector" || name == "laplace") {
    return NoiseFamily::kLaplaceVector;
  }
  if (name == "gaussian") return NoiseFamily::kGaussian;
  throw ConfigError("unknown noise family: " + name);
}

Granularity granularity_for(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kGrr:
      return Granularity::kValue;
    case MechanismKind::kTokenEm:
      return Granularity::kToken;
    case MechanismKind::kVectorNoise:
    case MechanismKind::kIdentity:
      return Granularity::kSentence;
  }
  return Granularity::kValue;
}

MechanismSpec MechanismSpec::grr(double epsilon, GrrParams p) {
  return {MechanismKind::kGrr, epsilon, Granularity::kValue, p};
}

MechanismSpec MechanismSpec::token_em(double epsilon, TokenEmParams p) {
  return {MechanismKind::kTokenEm, epsilon, Granularity::kToken, p};
}

MechanismSpec MechanismSpec::vector_noise(double epsilon,
                                          VectorNoiseParams p) {
  return {MechanismKind::kVectorNoise, epsilon, Granularity::kSentence, p};
}

MechanismSpec MechanismSpec::identity() {
  return {MechanismKind::kIdentity,
          std::numeric_limits<double>::infinity(), Granularity::kSentence,
          std::monostate{}};
}

void MechanismSpec::validate() const {
  if (granularity != granularity_for(kind)) {
    throw ConfigError("mechanism spec: granularity does not match kind " +
                      to_string(kind));
  }
  switch (kind) {
    case MechanismKind::kGrr: {
      const auto* p = std::get_if<GrrParams>(&params);
      if (p == nullptr) throw ConfigError("mechanism spec: grr params missing");
      if (p->domain_size < 2) {
        throw ConfigError("mechanism spec: grr domain size must be >= 2");
      }
      if (!(epsilon >= 0.0)) {
        throw ConfigError("mechanism spec: grr epsilon must be >= 0");
      }
      break;
    }
    case MechanismKind::kTokenEm: {
      const auto* p = std::get_if<TokenEmParams>(&params);
      if (p == nullptr) {
        throw ConfigError("mechanism spec: token_em params missing");
      }
      if (!(p->sensitivity > 0.0)) {
        throw ConfigError("mechanism spec: token_em sensitivity must be > 0");
      }
      if (!(epsilon >= 0.0)) {
        throw ConfigError("mechanism spec: token_em epsilon must be >= 0");
      }
      break;
    }
    case MechanismKind::kVectorNoise: {
      const auto* p = std::get_if<VectorNoiseParams>(&params);
      if (p == nullptr) {
        throw ConfigError("mechanism spec: vector_noise params missing");
      }
      if (!(p->clip_norm > 0.0) || !std::isfinite(p->clip_norm)) {
        throw ConfigError(
            "mechanism spec: clip norm must be positive and finite");
      }
      if (p->noise_family == NoiseFamily::kGaussian &&
          !(p->delta_mech > 0.0 && p->delta_mech < 1.0)) {
        throw ConfigError(
            "mechanism spec: gaussian noise requires delta_mech in (0, 1)");
      }
      if (!(epsilon > 0.0)) {
        throw ConfigError("mechanism spec: vector_noise epsilon must be > 0");
      }
      break;
    }
    case MechanismKind::kIdentity:
      break;
  }
}

std::uint64_t grr_perturb(std::uint64_t value, const GrrParams& params,
                          double epsilon, RngStream& rng) {
  if (params.domain_size < 2) {
    throw ConfigError("grr_perturb: domain size must be >= 2");
  }
  if (value >= params.domain_size) {
    throw std::domain_error("grr_perturb: value outside domain");
  }
  if (!(epsilon >= 0.0)) {
    throw std::domain_error("grr_perturb: epsilon must be >= 0");
  }
  // keep_p = e^eps / (e^eps + g - 1), written so it stays finite for any eps.
  const double keep_p =
      1.0 / (1.0 + static_cast<double>(params.domain_size - 1) *
                       std::exp(-epsilon));
  if (rng.next_double() < keep_p) return value;
  const std::uint64_t other = rng.next_below(params.domain_size - 1);
  return other >= value ? other + 1 : other;
}

TextRecord em_token_rewrite(const TextRecord& input,
                            const EmbeddingTable& table,
                            const TokenEmParams& params,
                            double epsilon_per_token, RngStream& rng) {
  if (!(params.sensitivity > 0.0)) {
    throw ConfigError("em_token_rewrite: sensitivity must be > 0");
  }
  if (!(epsilon_per_token >= 0.0)) {
    throw std::domain_error("em_token_rewrite: epsilon must be >= 0");
  }
  TextRecord output;
  output.id = input.id;
  if (input.tokens.empty()) return output;
  output.tokens.reserve(input.tokens.size());

  const std::size_t vocab = table.vocab_size;
  const bool full_pool =
      params.candidate_pool == 0 || params.candidate_pool >= vocab;
  // Cosine distance is bounded by 2, so sensitivity >= 2 always dominates
  // the pool diameter; tighter values are verified against the actual pool.
  if (params.sensitivity < 2.0 && full_pool) {
    if (vocab > 2048) {
      throw ConfigError(
          "em_token_rewrite: sensitivity below the cosine diameter bound 2 "
          "needs a bounded candidate pool on large vocabularies");
    }
    for (std::size_t i = 0; i < vocab; ++i) {
      for (std::size_t j = i + 1; j < vocab; ++j) {
        if (cosine_distance(table.row(static_cast<TokenId>(i)),
                            table.row(static_cast<TokenId>(j))) >
            params.sensitivity) {
          throw ConfigError(
              "em_token_rewrite: vocabulary diameter exceeds sensitivity");
        }
      }
    }
  }
  std::vector<double> distances(vocab);
  std::vector<TokenId> pool;
  std::vector<double> log_weights;

  for (TokenId t : input.tokens) {
    const auto t_row = table.row(t);
    for (std::size_t w = 0; w < vocab; ++w) {
      distances[w] = cosine_distance(t_row, table.row(static_cast<TokenId>(w)));
    }
    pool.clear();
    if (full_pool) {
      pool.resize(vocab);
      std::iota(pool.begin(), pool.end(), TokenId{0});
    } else {
      // c nearest tokens by (distance, token id); the input token is at
      // distance 0 so it is always in its own pool.
      std::vector<TokenId> order(vocab);
      std::iota(order.begin(), order.end(), TokenId{0});
      const std::size_t c = static_cast<std::size_t>(params.candidate_pool);
      std::partial_sort(order.begin(), order.begin() + c, order.end(),
                        [&](TokenId a, TokenId b) {
                          if (distances[a] != distances[b]) {
                            return distances[a] < distances[b];
                          }
                          return a < b;
                        });
      pool.assign(order.begin(), order.begin() + c);
      std::sort(pool.begin(), pool.end());
      if (params.sensitivity < 2.0) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
          for (std::size_t j = i + 1; j < pool.size(); ++j) {
            if (cosine_distance(table.row(pool[i]), table.row(pool[j])) >
                params.sensitivity) {
              throw ConfigError(
                  "em_token_rewrite: candidate pool diameter exceeds "
                  "sensitivity");
            }
          }
        }
      }
    }
    log_weights.clear();
    log_weights.reserve(pool.size());
    for (TokenId w : pool) {
      log_weights.push_back(-epsilon_per_token * distances[w] /
                            (2.0 * params.sensitivity));
    }
    output.tokens.push_back(pool[draw_from_log_weights(log_weights, rng)]);
  }
  if (!table.vocab.empty()) {
    output.raw_text = render_tokens(output.tokens, table.vocab);
  }
  return output;
}

double sentence_budget(double epsilon_per_token, std::uint64_t token_count) {
  if (!(epsilon_per_token >= 0.0)) {
    throw std::domain_error("sentence_budget: epsilon must be >= 0");
  }
  return epsilon_per_token * static_cast<double>(token_count);
}

std::vector<double> clip_to_l2_ball(std::vector<double> v, double clip_norm) {
  const double norm = l2_norm(v);
  if (norm <= clip_norm || norm == 0.0) return v;
  const double scale = clip_norm / norm;
  for (double& x : v) x *= scale;
  return v;
}

double laplace_vector_scale(double clip_norm, std::size_t dim,
                            double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::domain_error("laplace_vector_scale: epsilon must be > 0");
  }
  return 2.0 * clip_norm * std::sqrt(static_cast<double>(dim)) / epsilon;
}

double gaussian_sigma(double clip_norm, double delta_mech, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::domain_error("gaussian_sigma: epsilon must be > 0");
  }
  if (!(delta_mech > 0.0 && delta_mech < 1.0)) {
    throw std::domain_error("gaussian_sigma: delta must lie in (0, 1)");
  }
  return std::sqrt(2.0 * std::log(1.25 / delta_mech)) * 2.0 * clip_norm /
         epsilon;
}

double expected_noise_norm(const VectorNoiseParams& params, std::size_t dim,
                           double epsilon) {
  const double d = static_cast<double>(dim);
  if (params.noise_family == NoiseFamily::kLaplaceVector) {
    const double scale = laplace_vector_scale(params.clip_norm, dim, epsilon);
    return scale * std::sqrt(2.0 * d);
  }
  const double sigma =
      gaussian_sigma(params.clip_norm, params.delta_mech, epsilon);
  // Mean of the chi distribution with d degrees of freedom.
  return sigma * std::sqrt(2.0) *
         std::exp(std::lgamma((d + 1.0) / 2.0) - std::lgamma(d / 2.0));
}

double snr(const VectorNoiseParams& params, std::size_t dim, double epsilon) {
  if (!(epsilon > 0.0)) throw std::domain_error("snr: epsilon must be > 0");
  if (dim < 2) throw std::domain_error("snr: dim must be >= 2");
  return params.clip_norm / expected_noise_norm(params, dim, epsilon);
}

GrrMechanism::GrrMechanism(GrrParams params, double epsilon,
                           const Corpus& corpus)
    : params_(params), epsilon_(epsilon), corpus_(corpus) {
  if (params_.domain_size != corpus.size()) {
    throw ConfigError(
        "grr mechanism: domain size must equal the corpus size (" +
        std::to_string(corpus.size()) + "); record ids are the value domain");
  }
}

TextRecord GrrMechanism::perturb(const TextRecord& input,
                                 RngStream& rng) const {
  const std::uint64_t out = grr_perturb(input.id, params_, epsilon_, rng);
  return corpus_.record(out);
}

TokenEmMechanism::TokenEmMechanism(TokenEmParams params, double epsilon,
                                   std::shared_ptr<const EmbeddingTable> table,
                                   const std::vector<std::string>* render_vocab)
    : params_(params),
      epsilon_(epsilon),
      table_(std::move(table)),
      render_vocab_(render_vocab) {
  if (table_ == nullptr) {
    throw ConfigError("token_em mechanism: embedding table required");
  }
}

TextRecord TokenEmMechanism::perturb(const TextRecord& input,
                                     RngStream& rng) const {
  TextRecord out = em_token_rewrite(input, *table_, params_, epsilon_, rng);
  if (out.raw_text.empty() && render_vocab_ != nullptr &&
      !render_vocab_->empty()) {
    out.raw_text = render_tokens(out.tokens, *render_vocab_);
  }
  return out;
}

VectorNoiseMechanism::VectorNoiseMechanism(
    VectorNoiseParams params, double epsilon,
    std::shared_ptr<const EmbeddingTable> table, const Corpus& corpus)
    : params_(params),
      epsilon_(epsilon),
      table_(std::move(table)),
      corpus_(corpus) {
  if (table_ == nullptr) {
    throw ConfigError("vector_noise mechanism: embedding table required");
  }
  if (!(epsilon_ > 0.0)) {
    throw ConfigError("vector_noise mechanism: epsilon must be > 0");
  }
  corpus_latents_.reserve(corpus.size());
  for (const TextRecord& rec : corpus.records) {
    corpus_latents_.push_back(clipped_embedding(rec));
  }
}

std::vector<double> VectorNoiseMechanism::clipped_embedding(
    const TextRecord& record) const {
  return clip_to_l2_ball(sentence_embedding(record, *table_),
                         params_.clip_norm);
}

std::pair<TextRecord, VectorLatents> VectorNoiseMechanism::perturb_with_latents(
    const TextRecord& input, RngStream& rng) const {
  if (input.tokens.empty()) {
    throw std::domain_error("vector_noise mechanism: empty input");
  }
  VectorLatents latents;
  latents.clean_clipped = clipped_embedding(input);
  latents.noised = latents.clean_clipped;
  const std::size_t dim = table_->dim;
  if (params_.noise_family == NoiseFamily::kLaplaceVector) {
    const double scale =
        laplace_vector_scale(params_.clip_norm, dim, epsilon_);
    for (double& x : latents.noised) x += rng.next_laplace(scale);
  } else {
    const double sigma =
        gaussian_sigma(params_.clip_norm, params_.delta_mech, epsilon_);
    for (double& x : latents.noised) x += sigma * rng.next_gaussian();
  }
  // Decode: nearest corpus record in L2 over clipped embeddings, lowest id
  // on ties. This is post-processing and does not affect the guarantee.
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < corpus_latents_.size(); ++i) {
    const double dist = l2_distance(corpus_latents_[i], latents.noised);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return {corpus_.records[best], std::move(latents)};
}

TextRecord VectorNoiseMechanism::perturb(const TextRecord& input,
                                         RngStream& rng) const {
  return perturb_with_latents(input, rng).first;
}

TextRecord IdentityMechanism::perturb(const TextRecord& input,
                                      RngStream& rng) const {
  (void)rng;
  return input;
}

std::unique_ptr<Mechanism> make_mechanism(
    const MechanismSpec& spec, const Corpus& corpus,
    std::shared_ptr<const EmbeddingTable> table) {
  spec.validate();
  switch (spec.kind) {
    case MechanismKind::kGrr:
      return std::make_unique<GrrMechanism>(std::get<GrrParams>(spec.params),
                                            spec.epsilon, corpus);
    case MechanismKind::kTokenEm:
      return std::make_unique<TokenEmMechanism>(
          std::get<TokenEmParams>(spec.params), spec.epsilon, std::move(table),
          corpus.vocab.empty() ? nullptr : &corpus.vocab);
    case MechanismKind::kVectorNoise:
      return std::make_unique<VectorNoiseMechanism>(
          std::get<VectorNoiseParams>(spec.params), spec.epsilon,
          std::move(table), corpus);
    case MechanismKind::kIdentity:
      return std::make_unique<IdentityMechanism>();
  }
  throw ConfigError("make_mechanism: unknown kind");
}

}  // namespace ldpaudit
