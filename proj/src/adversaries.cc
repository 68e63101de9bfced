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

#include "ldpaudit/adversaries.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <regex>

#include "httplib.h"
#include "json.hpp"

namespace ldpaudit {
namespace {

std::vector<TokenId> token_set(const std::vector<TokenId>& tokens) {
  std::vector<TokenId> set = tokens;
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  return set;
}

double jaccard(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Splits "http(s)://host[:port]" from an optional path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("remote judge: base_url must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

}  // namespace

std::string to_string(AdversaryKind kind) {
  switch (kind) {
    case AdversaryKind::kEmbeddingNn:
      return "embedding_nn";
    case AdversaryKind::kSurfaceOverlap:
      return "surface_overlap";
    case AdversaryKind::kRemoteJudge:
      return "remote_judge";
    case AdversaryKind::kInternalEmbedding:
      return "internal_embedding";
    case AdversaryKind::kValueMap:
      return "value_map";
  }
  return "unknown";
}

AdversaryKind adversary_kind_from_string(const std::string& name) {
  if (name == "embedding_nn" || name == "embedding") {
    return AdversaryKind::kEmbeddingNn;
  }
  if (name == "surface_overlap" || name == "surface") {
    return AdversaryKind::kSurfaceOverlap;
  }
  if (name == "remote_judge" || name == "judge") {
    return AdversaryKind::kRemoteJudge;
  }
  if (name == "internal_embedding" || name == "internal") {
    return AdversaryKind::kInternalEmbedding;
  }
  if (name == "value_map") return AdversaryKind::kValueMap;
  throw ConfigError("unknown adversary kind: " + name);
}

void AdversarySpec::validate() const {
  if (kind == AdversaryKind::kRemoteJudge) {
    if (!endpoint.has_value() || endpoint->base_url.empty()) {
      throw ConfigError("remote judge adversary requires an endpoint");
    }
    if (!(endpoint->timeout_s > 0.0)) {
      throw ConfigError("remote judge: timeout must be > 0");
    }
  }
}

std::size_t attack_embedding(const TextRecord& output,
                             const CandidateSet& candidates,
                             const Corpus& corpus,
                             const EmbeddingTable& table) {
  const std::vector<double> out_emb = sentence_embedding(output, table);
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t pos = 0; pos < candidates.members.size(); ++pos) {
    const std::vector<double> cand_emb =
        sentence_embedding(corpus.record(candidates.members[pos]), table);
    const double dist = cosine_distance(out_emb, cand_emb);
    if (dist < best_dist) {
      best_dist = dist;
      best = pos;
    }
  }
  return best;
}

std::size_t attack_surface(const TextRecord& output,
                           const CandidateSet& candidates,
                           const Corpus& corpus) {
  const std::vector<TokenId> out_set = token_set(output.tokens);
  std::size_t best = 0;
  double best_sim = -1.0;
  for (std::size_t pos = 0; pos < candidates.members.size(); ++pos) {
    const std::vector<TokenId> cand_set =
        token_set(corpus.record(candidates.members[pos]).tokens);
    const double sim = jaccard(out_set, cand_set);
    if (sim > best_sim) {
      best_sim = sim;
      best = pos;
    }
  }
  return best;
}

std::size_t attack_internal_embedding(
    std::span<const double> clean_latent, std::span<const double> noised_latent,
    const std::vector<std::vector<double>>& candidate_latents) {
  if (clean_latent.size() != noised_latent.size()) {
    throw std::domain_error("attack_internal_embedding: dimension mismatch");
  }
  if (candidate_latents.empty()) {
    throw std::domain_error("attack_internal_embedding: no candidates");
  }
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t pos = 0; pos < candidate_latents.size(); ++pos) {
    if (candidate_latents[pos].size() != noised_latent.size()) {
      throw std::domain_error("attack_internal_embedding: dimension mismatch");
    }
    const double dist = l2_distance(candidate_latents[pos], noised_latent);
    if (dist < best_dist) {
      best_dist = dist;
      best = pos;
    }
  }
  return best;
}

std::string render_judge_prompt(const std::string& output_text,
                                const std::vector<std::string>& candidates) {
  std::string prompt =
      "You are given a rewritten text Y and several candidate original "
      "texts. Your task is to identify which candidate is the most likely "
      "original text that was rewritten to produce Y.\n\n"
      "Output format.\n"
      "Answer with exactly the following format on a single line: "
      "answer: [[N]], where N is in {1,...,K}. Do not include analysis or "
      "any additional text.\n\n"
      "Rewritten text Y:\n";
  prompt += output_text;
  prompt += "\n\nCandidate original texts:\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    prompt += std::to_string(i + 1);
    prompt += ". ";
    prompt += candidates[i];
    prompt += '\n';
  }
  prompt += "\nWhich candidate is most likely the original?";
  return prompt;
}

std::size_t parse_judge_answer(const std::string& content, std::size_t k) {
  static const std::regex kAnswerPattern(R"(answer:\s*\[\[([0-9]+)\]\])",
                                         std::regex::icase);
  std::smatch match;
  if (!std::regex_search(content, match, kAnswerPattern)) {
    throw ParseError("remote judge: no `answer: [[N]]` in response", content);
  }
  unsigned long long n = 0;
  try {
    n = std::stoull(match[1].str());
  } catch (const std::exception&) {
    throw ParseError("remote judge: unparseable candidate number", content);
  }
  if (n < 1 || n > k) {
    throw ParseError("remote judge: candidate number " + std::to_string(n) +
                         " outside [1, " + std::to_string(k) + "]",
                     content);
  }
  return static_cast<std::size_t>(n - 1);
}

std::size_t attack_remote_judge(const TextRecord& output,
                                const CandidateSet& candidates,
                                const Corpus& corpus,
                                const RemoteJudgeConfig& config) {
  std::vector<std::string> candidate_texts;
  candidate_texts.reserve(candidates.members.size());
  for (RecordId id : candidates.members) {
    const TextRecord& rec = corpus.record(id);
    if (rec.raw_text.empty()) {
      throw std::runtime_error(
          "remote judge: candidate record lacks raw text");
    }
    candidate_texts.push_back(rec.raw_text);
  }
  const std::string prompt =
      render_judge_prompt(output.raw_text, candidate_texts);

  nlohmann::json body = {
      {"model", config.model_name},
      {"messages",
       nlohmann::json::array(
           {nlohmann::json{{"role", "user"}, {"content", prompt}}})},
      {"temperature", 0.0},
  };

  auto [host, prefix] = split_base_url(config.base_url);
  httplib::Client client(host);
  const auto timeout_sec = static_cast<time_t>(config.timeout_s);
  const auto timeout_usec = static_cast<time_t>(
      (config.timeout_s - static_cast<double>(timeout_sec)) * 1e6);
  client.set_connection_timeout(timeout_sec, timeout_usec);
  client.set_read_timeout(timeout_sec, timeout_usec);

  httplib::Headers headers;
  if (!config.api_key_env_var.empty()) {
    if (const char* key = std::getenv(config.api_key_env_var.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("remote judge: bad JSON reply: ") + e.what(),
                       res->body);
    }
    if (!reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message")) {
      throw ParseError("remote judge: reply has no choices", res->body);
    }
    const std::string content =
        reply["choices"][0]["message"].value("content", std::string());
    return parse_judge_answer(content, candidates.members.size());
  }
  throw std::runtime_error("remote judge: request failed after " +
                           std::to_string(config.max_retries + 1) +
                           " attempts (" + last_error + ")");
}

namespace {

class EmbeddingNnAdversary : public Adversary {
 public:
  explicit EmbeddingNnAdversary(std::shared_ptr<const EmbeddingTable> table)
      : table_(std::move(table)) {
    if (table_ == nullptr) {
      throw ConfigError("embedding_nn adversary requires an embedding table");
    }
  }
  std::size_t predict(const TrialView& view, RngStream&) const override {
    return attack_embedding(*view.output, *view.candidates, *view.corpus,
                            *table_);
  }
  AdversaryKind kind() const override { return AdversaryKind::kEmbeddingNn; }

 private:
  std::shared_ptr<const EmbeddingTable> table_;
};

class SurfaceOverlapAdversary : public Adversary {
 public:
  std::size_t predict(const TrialView& view, RngStream&) const override {
    return attack_surface(*view.output, *view.candidates, *view.corpus);
  }
  AdversaryKind kind() const override {
    return AdversaryKind::kSurfaceOverlap;
  }
};

class InternalEmbeddingAdversary : public Adversary {
 public:
  std::size_t predict(const TrialView& view, RngStream&) const override {
    if (view.latents == nullptr || view.candidate_latents == nullptr) {
      throw std::runtime_error(
          "internal_embedding attack needs a mechanism that exposes latents");
    }
    return attack_internal_embedding(view.latents->clean_clipped,
                                     view.latents->noised,
                                     *view.candidate_latents);
  }
  AdversaryKind kind() const override {
    return AdversaryKind::kInternalEmbedding;
  }
};

class ValueMapAdversary : public Adversary {
 public:
  std::size_t predict(const TrialView& view, RngStream& rng) const override {
    const auto& members = view.candidates->members;
    for (std::size_t pos = 0; pos < members.size(); ++pos) {
      if (members[pos] == view.output->id) return pos;
    }
    // Output matches no candidate: all posteriors are equal, guess uniformly.
    return static_cast<std::size_t>(rng.next_below(members.size()));
  }
  AdversaryKind kind() const override { return AdversaryKind::kValueMap; }
};

class RemoteJudgeAdversary : public Adversary {
 public:
  explicit RemoteJudgeAdversary(RemoteJudgeConfig config)
      : config_(std::move(config)) {}
  std::size_t predict(const TrialView& view, RngStream&) const override {
    return attack_remote_judge(*view.output, *view.candidates, *view.corpus,
                               config_);
  }
  AdversaryKind kind() const override { return AdversaryKind::kRemoteJudge; }

 private:
  RemoteJudgeConfig config_;
};

}  // namespace

std::unique_ptr<Adversary> make_adversary(
    const AdversarySpec& spec, std::shared_ptr<const EmbeddingTable> table) {
  spec.validate();
  switch (spec.kind) {
    case AdversaryKind::kEmbeddingNn:
      return std::make_unique<EmbeddingNnAdversary>(std::move(table));
    case AdversaryKind::kSurfaceOverlap:
      return std::make_unique<SurfaceOverlapAdversary>();
    case AdversaryKind::kRemoteJudge:
      return std::make_unique<RemoteJudgeAdversary>(*spec.endpoint);
    case AdversaryKind::kInternalEmbedding:
      return std::make_unique<InternalEmbeddingAdversary>();
    case AdversaryKind::kValueMap:
      return std::make_unique<ValueMapAdversary>();
  }
  throw ConfigError("make_adversary: unknown kind");
}

}  // namespace ldpaudit
