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

#ifndef LDPAUDIT_RNG_H_
#define LDPAUDIT_RNG_H_

#include <array>
#include <cstdint>

namespace ldpaudit {

// The independent sources of randomness inside one trial.
enum class Substream : std::uint64_t {
  kSampling = 0,
  kTarget = 1,
  kMechanism = 2,
  kAdversary = 3,
};

// Stream ids are laid out as trial_index * kSubstreamStride + code. Codes
// 0..3 are the public substreams above; higher codes are reserved for
// engine-internal experiments that need extra independent draws per trial.
inline constexpr std::uint64_t kSubstreamStride = 8;

// Counter-based pseudo-random stream built on Philox4x32-10
// (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3", SC 2011).
//
// A stream is a pure function of (seed, stream_id): the 64-bit seed is the
// Philox key and the stream id occupies the upper counter words, so every
// (seed, stream_id) pair indexes a disjoint slice of one keyed permutation.
// Identical inputs reproduce identical draw sequences with no shared state,
// which is what lets audit trials run on any number of workers.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double next_double();
  // Uniform on the open interval (0, 1); safe as input to log/inverse CDFs.
  double next_open01();
  // Uniform on [0, bound); unbiased via rejection. bound must be >= 1.
  std::uint64_t next_below(std::uint64_t bound);

  // Standard normal via Box-Muller (pairs are cached).
  double next_gaussian();
  // Laplace(0, scale) via inverse CDF; one uniform per draw.
  double next_laplace(double scale);

  // One 10-round Philox4x32 block; exposed so the generator can be checked
  // against the published test vectors.
  static std::array<std::uint32_t, 4> philox4x32_10(
      std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_index_;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_;
  double gaussian_spare_ = 0.0;
  bool has_gaussian_spare_ = false;
};

// The per-trial substream contract: a deterministic, injective map from
// (base_seed, trial_index, substream) to a stream, so removing or reordering
// trials never perturbs any other trial's draws.
RngStream derive_trial_rng(std::uint64_t base_seed, std::uint64_t trial_index,
                           Substream substream);

// Low-level access for fixed infrastructure streams (synthetic embeddings,
// engine-internal substream codes).
RngStream derive_stream(std::uint64_t base_seed, std::uint64_t stream_id);

}  // namespace ldpaudit

#endif  // LDPAUDIT_RNG_H_
