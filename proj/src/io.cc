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

#include "ldpaudit/io.h"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "ldpaudit/rng.h"

namespace ldpaudit {
namespace {

using nlohmann::json;

// Stream id of the synthetic-embedding generator; any fixed value works as
// long as audits never reuse it (trial streams always carry codes 0..7 in
// the low bits of small ids, so a high constant is safe).
constexpr std::uint64_t kSyntheticEmbeddingStream = 0xE3BEDD1E5ull;

std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream stream(line);
  std::string word;
  while (stream >> word) words.push_back(word);
  return words;
}

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void write_u64_le(std::uint64_t v, std::ofstream& out) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<float>(bits);
}

void write_f32_le(float v, std::ofstream& out) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

json summary_to_json(const EstimateSummary& s) {
  json j = {
      {"tp", s.tp_count},       {"trials", s.trials},
      {"p_lower", s.p_lower},   {"epsilon_emp", s.epsilon_emp},
      {"ceiling", s.ceiling},   {"k", s.k},
      {"alpha_conf", s.alpha_conf}, {"delta", s.delta},
      {"mode", to_string(s.mode)},
  };
  if (s.fp_count.has_value()) j["fp"] = *s.fp_count;
  return j;
}

EstimateSummary summary_from_json(const json& j) {
  EstimateSummary s;
  s.tp_count = j.at("tp").get<std::uint64_t>();
  s.trials = j.at("trials").get<std::uint64_t>();
  s.p_lower = j.at("p_lower").get<double>();
  s.epsilon_emp = j.at("epsilon_emp").get<double>();
  s.ceiling = j.at("ceiling").get<double>();
  s.k = j.at("k").get<std::uint64_t>();
  s.alpha_conf = j.at("alpha_conf").get<double>();
  s.delta = j.at("delta").get<double>();
  s.mode = estimator_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("fp")) s.fp_count = j["fp"].get<std::uint64_t>();
  return s;
}

json config_to_json(const AuditConfig& config) {
  json mech = {
      {"kind", to_string(config.mechanism.kind)},
      {"granularity", to_string(config.mechanism.granularity)},
  };
  if (std::isfinite(config.mechanism.epsilon)) {
    mech["epsilon"] = config.mechanism.epsilon;
  }
  if (const auto* p = std::get_if<GrrParams>(&config.mechanism.params)) {
    mech["domain_size"] = p->domain_size;
  } else if (const auto* p =
                 std::get_if<TokenEmParams>(&config.mechanism.params)) {
    mech["sensitivity"] = p->sensitivity;
    mech["candidate_pool"] = p->candidate_pool;
  } else if (const auto* p =
                 std::get_if<VectorNoiseParams>(&config.mechanism.params)) {
    mech["clip_norm"] = p->clip_norm;
    mech["noise_family"] = to_string(p->noise_family);
    if (p->noise_family == NoiseFamily::kGaussian) {
      mech["delta_mech"] = p->delta_mech;
    }
  }
  json adv = {{"kind", to_string(config.adversary.kind)}};
  if (config.adversary.endpoint.has_value()) {
    const RemoteJudgeConfig& ep = *config.adversary.endpoint;
    adv["endpoint"] = {
        {"base_url", ep.base_url},       {"model_name", ep.model_name},
        {"api_key_env_var", ep.api_key_env_var},
        {"timeout_s", ep.timeout_s},     {"max_retries", ep.max_retries},
        {"max_in_flight", ep.max_in_flight},
    };
  }
  return json{
      {"k", config.k},
      {"trials", config.trials},
      {"alpha_conf", config.alpha_conf},
      {"delta", config.delta},
      {"lambda", config.lambda},
      {"base_seed", config.base_seed},
      {"estimator", to_string(config.estimator_mode)},
      {"workers", config.workers},
      {"trial_log_cap", config.trial_log_cap},
      {"mechanism", mech},
      {"adversary", adv},
  };
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

json result_to_json(const AuditResult& result,
                    const std::string& trial_log_ref = "") {
  return json{
      {"trial_log",
       trial_log_ref.empty() ? json() : json(trial_log_ref)},
      {"schema_version", kResultSchemaVersion},
      {"summary", summary_to_json(result.summary)},
      {"config", config_to_json(result.config_echo)},
      {"epsilon_nominal", std::isfinite(result.config_echo.mechanism.epsilon)
                              ? json(result.config_echo.mechanism.epsilon)
                              : json()},
      {"mechanism_queries", result.mechanism_queries},
      {"failed_trials", result.failures.size()},
      {"corpus", result.corpus_path},
      {"embeddings", result.embeddings_desc},
      {"environment",
       {{"tool_version", kToolVersion},
        {"timestamp", timestamp_utc()},
        {"wall_time_s", result.wall_time_s},
        {"workers", result.config_echo.workers}}},
  };
}

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

Corpus load_corpus(const std::string& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open corpus file: " + path);
  Corpus corpus;
  corpus.source_path = path;
  std::string line;
  std::size_t line_number = 0;

  if (format == CorpusFormat::kPlainText) {
    std::map<std::string, TokenId> vocab_index;
    while (std::getline(in, line)) {
      ++line_number;
      const std::vector<std::string> words = split_whitespace(line);
      if (words.empty()) {
        throw LoadError(path + ": line " + std::to_string(line_number) +
                        ": empty record");
      }
      TextRecord rec;
      rec.id = corpus.records.size();
      rec.raw_text = line;
      for (const std::string& w : words) {
        auto [it, inserted] = vocab_index.try_emplace(
            w, static_cast<TokenId>(corpus.vocab.size()));
        if (inserted) corpus.vocab.push_back(w);
        rec.tokens.push_back(it->second);
      }
      corpus.records.push_back(std::move(rec));
    }
    if (corpus.records.empty()) throw LoadError(path + ": empty corpus");
    return corpus;
  }

  // jsonl
  struct Parsed {
    std::optional<std::uint64_t> id;
    std::string text;
    std::optional<std::vector<TokenId>> tokens;
  };
  std::vector<Parsed> parsed;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      throw LoadError(path + ": line " + std::to_string(line_number) +
                      ": empty record");
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError(path + ": line " + std::to_string(line_number) + ": " +
                      e.what());
    }
    Parsed p;
    if (!j.contains("text") || !j["text"].is_string()) {
      throw LoadError(path + ": line " + std::to_string(line_number) +
                      ": missing required `text` field");
    }
    p.text = j["text"].get<std::string>();
    if (j.contains("id")) {
      if (!j["id"].is_number_unsigned()) {
        throw LoadError(path + ": line " + std::to_string(line_number) +
                        ": `id` must be a non-negative integer");
      }
      p.id = j["id"].get<std::uint64_t>();
    }
    if (j.contains("tokens")) {
      if (!j["tokens"].is_array()) {
        throw LoadError(path + ": line " + std::to_string(line_number) +
                        ": `tokens` must be an array");
      }
      std::vector<TokenId> toks;
      for (const auto& t : j["tokens"]) {
        if (!t.is_number_unsigned()) {
          throw LoadError(path + ": line " + std::to_string(line_number) +
                          ": token ids must be non-negative integers");
        }
        toks.push_back(t.get<TokenId>());
      }
      p.tokens = std::move(toks);
    }
    parsed.push_back(std::move(p));
  }
  if (parsed.empty()) throw LoadError(path + ": empty corpus");

  const bool has_ids = parsed.front().id.has_value();
  const bool has_tokens = parsed.front().tokens.has_value();
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (parsed[i].id.has_value() != has_ids) {
      throw LoadError(path + ": line " + std::to_string(i + 1) +
                      ": explicit ids must be present on all records or none");
    }
    if (parsed[i].tokens.has_value() != has_tokens) {
      throw LoadError(path + ": line " + std::to_string(i + 1) +
                      ": pre-tokenized ids must be present on all records or "
                      "none");
    }
  }

  corpus.records.resize(parsed.size());
  std::vector<bool> seen(parsed.size(), false);
  std::map<std::string, TokenId> vocab_index;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    Parsed& p = parsed[i];
    const std::uint64_t id = has_ids ? *p.id : i;
    if (id >= parsed.size()) {
      throw LoadError(path + ": line " + std::to_string(i + 1) + ": id " +
                      std::to_string(id) + " not dense in [0, " +
                      std::to_string(parsed.size()) + ")");
    }
    if (seen[static_cast<std::size_t>(id)]) {
      throw LoadError(path + ": line " + std::to_string(i + 1) +
                      ": duplicate id " + std::to_string(id));
    }
    seen[static_cast<std::size_t>(id)] = true;
    TextRecord rec;
    rec.id = id;
    rec.raw_text = p.text;
    if (has_tokens) {
      rec.tokens = std::move(*p.tokens);
    } else {
      const std::vector<std::string> words = split_whitespace(p.text);
      if (words.empty()) {
        throw LoadError(path + ": line " + std::to_string(i + 1) +
                        ": `text` has no tokens");
      }
      for (const std::string& w : words) {
        auto [it, inserted] = vocab_index.try_emplace(
            w, static_cast<TokenId>(corpus.vocab.size()));
        if (inserted) corpus.vocab.push_back(w);
        rec.tokens.push_back(it->second);
      }
    }
    if (rec.tokens.empty()) {
      throw LoadError(path + ": line " + std::to_string(i + 1) +
                      ": record has no tokens");
    }
    corpus.records[static_cast<std::size_t>(id)] = std::move(rec);
  }
  return corpus;
}

EmbeddingTable load_embeddings_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open embedding file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 24) {
    throw LoadError(path + ": truncated header (" +
                    std::to_string(bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kEmbeddingMagic, 8) != 0) {
    throw LoadError(path + ": bad magic bytes");
  }
  EmbeddingTable table;
  table.vocab_size = read_u64_le(bytes.data() + 8);
  table.dim = read_u64_le(bytes.data() + 16);
  const std::uint64_t expected =
      24 + table.vocab_size * table.dim * 4;
  if (bytes.size() != expected) {
    throw LoadError(path + ": expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  table.vectors.resize(table.vocab_size * table.dim);
  for (std::size_t i = 0; i < table.vectors.size(); ++i) {
    table.vectors[i] = read_f32_le(bytes.data() + 24 + i * 4);
  }
  try {
    table.validate();
  } catch (const ConfigError& e) {
    throw LoadError(path + ": " + e.what());
  }
  return table;
}

void write_embeddings_binary(const EmbeddingTable& table,
                             const std::string& path) {
  table.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write embedding file: " + path);
  out.write(kEmbeddingMagic, 8);
  write_u64_le(table.vocab_size, out);
  write_u64_le(table.dim, out);
  for (float v : table.vectors) write_f32_le(v, out);
  if (!out) throw LoadError("write failed: " + path);
}

EmbeddingTable load_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path + ": empty file");
  // Header: token,v0,...,v{D-1}
  std::vector<std::string> header;
  {
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header[0] != "token") {
    throw LoadError(path + ": expected header token,v0,...,v{D-1}");
  }
  EmbeddingTable table;
  table.dim = header.size() - 1;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ',')) {
      throw LoadError(path + ": line " + std::to_string(line_number) +
                      ": missing token column");
    }
    table.vocab.push_back(cell);
    std::size_t values = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        table.vectors.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw LoadError(path + ": line " + std::to_string(line_number) +
                        ": bad float `" + cell + "`");
      }
      ++values;
    }
    if (values != table.dim) {
      throw LoadError(path + ": line " + std::to_string(line_number) +
                      ": expected " + std::to_string(table.dim) +
                      " values, found " + std::to_string(values));
    }
  }
  table.vocab_size = table.vocab.size();
  try {
    table.validate();
  } catch (const ConfigError& e) {
    throw LoadError(path + ": " + e.what());
  }
  return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
    return load_embeddings_csv(path);
  }
  return load_embeddings_binary(path);
}

EmbeddingTable synthetic_embeddings(std::size_t vocab_size, std::size_t dim,
                                    std::uint64_t seed) {
  if (dim < 2) throw ConfigError("synthetic embeddings: dim must be >= 2");
  if (vocab_size == 0) {
    throw ConfigError("synthetic embeddings: empty vocabulary");
  }
  EmbeddingTable table;
  table.dim = dim;
  table.vocab_size = vocab_size;
  table.vectors.resize(vocab_size * dim);
  RngStream rng = derive_stream(seed, kSyntheticEmbeddingStream);
  for (std::size_t v = 0; v < vocab_size; ++v) {
    double norm_sq = 0.0;
    std::vector<double> row(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      row[d] = rng.next_gaussian();
      norm_sq += row[d] * row[d];
    }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (std::size_t d = 0; d < dim; ++d) {
      table.vectors[v * dim + d] = static_cast<float>(row[d] * inv_norm);
    }
  }
  return table;
}

void write_result(const AuditResult& result, const std::string& path,
                  const std::string& trial_log_ref) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write result file: " + path);
  out << result_to_json(result, trial_log_ref).dump() << '\n';
  if (!out) throw LoadError("write failed: " + path);
}

void write_trial_log(const AuditResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write trial log: " + path);
  for (const TrialOutcome& outcome : result.trial_log) {
    out << json{{"trial", outcome.trial_index},
                {"candidates", outcome.candidate_ids},
                {"target_position", outcome.target_position},
                {"output_id", outcome.output_record.id},
                {"output_tokens", outcome.output_record.tokens},
                {"guess_position", outcome.guess_position},
                {"success", outcome.success},
                {"seed", outcome.seed_used}}
               .dump()
        << '\n';
  }
  if (!out) throw LoadError("write failed: " + path);
}

ResultFileData read_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open result file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path + ": empty result file");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw LoadError(path + ": " + e.what());
  }
  ResultFileData data;
  data.schema_version = j.at("schema_version").get<std::string>();
  data.summary = summary_from_json(j.at("summary"));
  data.mechanism_queries = j.at("mechanism_queries").get<std::uint64_t>();
  data.failed_trials = j.at("failed_trials").get<std::uint64_t>();
  data.epsilon_nominal = j.at("epsilon_nominal").is_null()
                             ? std::numeric_limits<double>::infinity()
                             : j.at("epsilon_nominal").get<double>();
  data.mechanism = j.at("config").at("mechanism").at("kind").get<std::string>();
  data.adversary = j.at("config").at("adversary").at("kind").get<std::string>();
  data.lambda = j.at("config").at("lambda").get<double>();
  data.base_seed = j.at("config").at("base_seed").get<std::uint64_t>();
  if (j.contains("trial_log") && !j["trial_log"].is_null()) {
    data.trial_log_ref = j["trial_log"].get<std::string>();
  }
  return data;
}

void write_sweep_results(const std::vector<SweepCell>& cells,
                         const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write result file: " + path);
  for (const SweepCell& cell : cells) {
    if (cell.result.has_value()) {
      out << result_to_json(*cell.result).dump() << '\n';
    } else {
      out << json{{"schema_version", kResultSchemaVersion},
                  {"epsilon_nominal", cell.epsilon_nominal},
                  {"error", cell.error}}
                 .dump()
          << '\n';
    }
  }
  if (!out) throw LoadError("write failed: " + path);
}

void write_sweep_csv(const std::vector<SweepCell>& cells,
                     const std::string& path, std::uint64_t mean_tokens) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write sweep csv: " + path);
  out << "epsilon_nominal,epsilon_emp,p_lower,tp,trials,k,lambda,alpha,delta,"
         "mechanism,adversary,ceiling";
  if (mean_tokens > 0) out << ",eps_sentence";
  out << '\n';
  for (const SweepCell& cell : cells) {
    if (!cell.result.has_value()) continue;
    const AuditResult& r = *cell.result;
    const EstimateSummary& s = r.summary;
    out << format_double("%.10g", cell.epsilon_nominal) << ','
        << format_double("%.4f", s.epsilon_emp) << ','
        << format_double("%.6f", s.p_lower) << ',' << s.tp_count << ','
        << s.trials << ',' << s.k << ','
        << format_double("%.10g", r.config_echo.lambda) << ','
        << format_double("%.10g", s.alpha_conf) << ','
        << format_double("%.10g", s.delta) << ','
        << to_string(r.config_echo.mechanism.kind) << ','
        << to_string(r.config_echo.adversary.kind) << ','
        << format_double("%.4f", s.ceiling);
    if (mean_tokens > 0) {
      out << ','
          << format_double("%.4f",
                           sentence_budget(cell.epsilon_nominal, mean_tokens));
    }
    out << '\n';
  }
  if (!out) throw LoadError("write failed: " + path);
}

std::string config_to_json_string(const AuditConfig& config) {
  return config_to_json(config).dump();
}

}  // namespace ldpaudit
