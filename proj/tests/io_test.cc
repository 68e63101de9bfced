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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "json.hpp"

#include "ldpaudit/engine.h"
#include "ldpaudit/io.h"
#include "test_util.h"

using namespace ldpaudit;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("ldpaudit_io_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << content;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

AuditResult tiny_audit(std::uint64_t seed) {
  static const Corpus corpus = testutil::single_token_corpus(2);
  static const AuditAssets assets = make_assets(
      corpus,
      std::make_shared<const EmbeddingTable>(testutil::planar_table({0.0, 1.3})));
  AuditConfig config;
  config.k = 2;
  config.trials = 500;
  config.lambda = 0.0;
  config.base_seed = seed;
  config.mechanism = MechanismSpec::grr(1.0, GrrParams{2});
  config.adversary.kind = AdversaryKind::kValueMap;
  config.trial_log_cap = 0;
  return run_audit(config, assets);
}

}  // namespace

TEST_CASE("plain text corpora load with dense ids and a built vocabulary") {
  TempDir dir;
  const std::string path = dir.file("toy.txt");
  write_text(path, "alpha beta gamma\nbeta delta\nalpha alpha\n");
  const Corpus corpus = load_corpus(path, CorpusFormat::kPlainText);
  REQUIRE(corpus.size() == 3);
  CHECK(corpus.records[0].id == 0);
  CHECK(corpus.records[2].id == 2);
  CHECK(corpus.vocab ==
        std::vector<std::string>{"alpha", "beta", "gamma", "delta"});
  CHECK(corpus.records[0].tokens == std::vector<TokenId>{0, 1, 2});
  CHECK(corpus.records[1].tokens == std::vector<TokenId>{1, 3});
  CHECK(corpus.records[2].tokens == std::vector<TokenId>{0, 0});
  CHECK(corpus.records[1].raw_text == "beta delta");
  CHECK_NOTHROW(corpus.validate());
}

TEST_CASE("plain text loader rejects empty lines with their number") {
  TempDir dir;
  const std::string path = dir.file("bad.txt");
  write_text(path, "one two\n\nthree\n");
  try {
    load_corpus(path, CorpusFormat::kPlainText);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("jsonl loader round trips text, ids, and tokens") {
  TempDir dir;
  const std::string path = dir.file("corpus.jsonl");
  write_text(path,
             R"({"id": 1, "text": "b b", "tokens": [5, 5]})"
             "\n"
             R"({"id": 0, "text": "a", "tokens": [4]})"
             "\n");
  const Corpus corpus = load_corpus(path, CorpusFormat::kJsonl);
  REQUIRE(corpus.size() == 2);
  CHECK(corpus.records[0].raw_text == "a");
  CHECK(corpus.records[0].tokens == std::vector<TokenId>{4});
  CHECK(corpus.records[1].tokens == std::vector<TokenId>{5, 5});
}

TEST_CASE("jsonl loader tokenizes text when tokens are absent") {
  TempDir dir;
  const std::string path = dir.file("corpus.jsonl");
  write_text(path,
             R"({"text": "red green"})"
             "\n"
             R"({"text": "green blue"})"
             "\n");
  const Corpus corpus = load_corpus(path, CorpusFormat::kJsonl);
  CHECK(corpus.vocab == std::vector<std::string>{"red", "green", "blue"});
  CHECK(corpus.records[1].tokens == std::vector<TokenId>{1, 2});
}

TEST_CASE("jsonl loader errors carry line numbers") {
  TempDir dir;
  const std::string path = dir.file("corpus.jsonl");

  SUBCASE("missing text") {
    write_text(path, R"({"text": "ok"})"
                     "\n"
                     R"({"id": 1})"
                     "\n");
    try {
      load_corpus(path, CorpusFormat::kJsonl);
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      const std::string message = e.what();
      CHECK(message.find("line 2") != std::string::npos);
      CHECK(message.find("text") != std::string::npos);
    }
  }

  SUBCASE("duplicate ids") {
    write_text(path, R"({"id": 0, "text": "x"})"
                     "\n"
                     R"({"id": 0, "text": "y"})"
                     "\n");
    CHECK_THROWS_AS(load_corpus(path, CorpusFormat::kJsonl), LoadError);
  }

  SUBCASE("non-dense ids") {
    write_text(path, R"({"id": 0, "text": "x"})"
                     "\n"
                     R"({"id": 7, "text": "y"})"
                     "\n");
    CHECK_THROWS_AS(load_corpus(path, CorpusFormat::kJsonl), LoadError);
  }

  SUBCASE("malformed json") {
    write_text(path, "{not json\n");
    try {
      load_corpus(path, CorpusFormat::kJsonl);
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
  }
}

TEST_CASE("corpus validation catches vocabulary overflow against a table") {
  TempDir dir;
  const std::string path = dir.file("corpus.jsonl");
  write_text(path, R"({"text": "a", "tokens": [9]})"
                   "\n");
  const Corpus corpus = load_corpus(path, CorpusFormat::kJsonl);
  const auto table = std::make_shared<const EmbeddingTable>(
      testutil::orthogonal_table(4, 4));
  CHECK_THROWS_AS(make_assets(corpus, table), ConfigError);
}

TEST_CASE("binary embedding files round trip exactly") {
  TempDir dir;
  const std::string path = dir.file("emb.bin");
  EmbeddingTable table;
  table.dim = 3;
  table.vocab_size = 2;
  table.vectors = {0.25f, -1.5f, 3.75f, 0.0f, 42.0f, -0.125f};
  write_embeddings_binary(table, path);
  CHECK(std::filesystem::file_size(path) == 8 + 16 + 24);
  const EmbeddingTable loaded = load_embeddings_binary(path);
  CHECK(loaded.dim == 3);
  CHECK(loaded.vocab_size == 2);
  CHECK(loaded.vectors == table.vectors);
}

TEST_CASE("binary loader rejects bad magic and truncation") {
  TempDir dir;
  const std::string path = dir.file("emb.bin");
  EmbeddingTable table = testutil::orthogonal_table(2, 3);
  write_embeddings_binary(table, path);

  SUBCASE("truncated payload names both byte counts") {
    std::string bytes = read_text(path);
    bytes.resize(bytes.size() - 5);
    write_text(path, bytes);
    try {
      load_embeddings_binary(path);
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      const std::string message = e.what();
      CHECK(message.find("48") != std::string::npos);  // expected
      CHECK(message.find("43") != std::string::npos);  // actual
    }
  }

  SUBCASE("magic mismatch") {
    std::string bytes = read_text(path);
    bytes[0] = 'X';
    write_text(path, bytes);
    CHECK_THROWS_AS(load_embeddings_binary(path), LoadError);
  }

  SUBCASE("non-finite entries are rejected") {
    std::string bytes = read_text(path);
    // Overwrite the first float with +inf (little-endian 0x7f800000).
    bytes[24] = '\x00';
    bytes[25] = '\x00';
    bytes[26] = '\x80';
    bytes[27] = '\x7f';
    write_text(path, bytes);
    CHECK_THROWS_AS(load_embeddings_binary(path), LoadError);
  }
}

TEST_CASE("csv and binary encodings agree") {
  TempDir dir;
  const std::string bin_path = dir.file("emb.bin");
  const std::string csv_path = dir.file("emb.csv");
  EmbeddingTable table;
  table.dim = 2;
  table.vocab_size = 3;
  table.vectors = {0.5f, -0.25f, 1.0f, 2.0f, -3.5f, 0.125f};
  table.vocab = {"aa", "bb", "cc"};
  write_embeddings_binary(table, bin_path);

  std::string csv = "token,v0,v1\n";
  for (std::size_t v = 0; v < 3; ++v) {
    char row[96];
    std::snprintf(row, sizeof(row), "%s,%.9g,%.9g\n", table.vocab[v].c_str(),
                  table.vectors[v * 2], table.vectors[v * 2 + 1]);
    csv += row;
  }
  write_text(csv_path, csv);

  const EmbeddingTable from_bin = load_embeddings(bin_path);
  const EmbeddingTable from_csv = load_embeddings(csv_path);
  REQUIRE(from_csv.vocab_size == from_bin.vocab_size);
  REQUIRE(from_csv.dim == from_bin.dim);
  for (std::size_t i = 0; i < from_bin.vectors.size(); ++i) {
    CHECK(from_csv.vectors[i] == from_bin.vectors[i]);
  }
  CHECK(from_csv.vocab == table.vocab);
}

TEST_CASE("csv loader rejects a bad header or ragged rows") {
  TempDir dir;
  const std::string path = dir.file("emb.csv");
  write_text(path, "word,v0,v1\n a,1,2\n");
  CHECK_THROWS_AS(load_embeddings_csv(path), LoadError);
  write_text(path, "token,v0,v1\na,1\n");
  CHECK_THROWS_AS(load_embeddings_csv(path), LoadError);
}

TEST_CASE("synthetic embeddings are reproducible unit vectors") {
  const EmbeddingTable a = synthetic_embeddings(8, 16, 42);
  const EmbeddingTable b = synthetic_embeddings(8, 16, 42);
  const EmbeddingTable c = synthetic_embeddings(8, 16, 43);
  CHECK(a.vectors == b.vectors);
  CHECK(a.vectors != c.vectors);
  for (std::size_t v = 0; v < 8; ++v) {
    double norm_sq = 0.0;
    for (std::size_t d = 0; d < 16; ++d) {
      norm_sq += static_cast<double>(a.vectors[v * 16 + d]) *
                 static_cast<double>(a.vectors[v * 16 + d]);
    }
    CHECK(std::sqrt(norm_sq) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("result files round trip the summary") {
  TempDir dir;
  const std::string path = dir.file("result.jsonl");
  const AuditResult result = tiny_audit(61);
  write_result(result, path);
  const ResultFileData data = read_result(path);
  CHECK(data.schema_version == kResultSchemaVersion);
  CHECK(data.summary == result.summary);
  CHECK(data.mechanism_queries == result.mechanism_queries);
  CHECK(data.mechanism == "grr");
  CHECK(data.adversary == "value_map");
  CHECK(data.base_seed == 61);
}

TEST_CASE("identical runs write byte-identical files modulo environment") {
  TempDir dir;
  const std::string path_a = dir.file("a.jsonl");
  const std::string path_b = dir.file("b.jsonl");
  write_result(tiny_audit(62), path_a);
  write_result(tiny_audit(62), path_b);
  nlohmann::json a = nlohmann::json::parse(read_text(path_a));
  nlohmann::json b = nlohmann::json::parse(read_text(path_b));
  a.erase("environment");
  b.erase("environment");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("sweep csv has the pinned header and formatting") {
  TempDir dir;
  const std::string path = dir.file("sweep.csv");
  std::vector<SweepCell> cells;
  for (double eps : {0.5, 1.0, 2.0, 4.0}) {
    SweepCell cell;
    cell.epsilon_nominal = eps;
    AuditResult result = tiny_audit(63);
    result.config_echo.mechanism.epsilon = eps;
    cell.result = std::move(result);
    cells.push_back(std::move(cell));
  }
  write_sweep_csv(cells, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "epsilon_nominal,epsilon_emp,p_lower,tp,trials,k,lambda,alpha,delta,"
        "mechanism,adversary,ceiling");
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  // epsilon_emp carries four decimals; the ceiling column is constant.
  const std::regex row_pattern(
      R"(^[0-9.]+,[0-9]+\.[0-9]{4},.*,([0-9]+\.[0-9]{4})$)");
  std::string first_ceiling;
  for (const std::string& row : rows) {
    std::smatch match;
    REQUIRE(std::regex_match(row, match, row_pattern));
    if (first_ceiling.empty()) {
      first_ceiling = match[1];
    } else {
      CHECK(match[1] == first_ceiling);
    }
  }
}

TEST_CASE("sweep csv appends the sentence-budget column when asked") {
  TempDir dir;
  const std::string path = dir.file("sweep.csv");
  SweepCell cell;
  cell.epsilon_nominal = 0.5;
  cell.result = tiny_audit(64);
  write_sweep_csv({cell}, path, /*mean_tokens=*/12);
  const std::string text = read_text(path);
  CHECK(text.find(",eps_sentence") != std::string::npos);
  CHECK(text.find(",6.0000") != std::string::npos);
}

TEST_CASE("failed sweep cells are flagged in the jsonl output") {
  TempDir dir;
  const std::string path = dir.file("sweep.jsonl");
  SweepCell ok;
  ok.epsilon_nominal = 1.0;
  ok.result = tiny_audit(65);
  SweepCell failed;
  failed.epsilon_nominal = 2.0;
  failed.error = "budget exceeded";
  write_sweep_results({ok, failed}, path);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(nlohmann::json::parse(line).contains("summary"));
  std::getline(in, line);
  const nlohmann::json second = nlohmann::json::parse(line);
  CHECK(second.at("error").get<std::string>() == "budget exceeded");
}

TEST_CASE("trial logs round trip through their own file") {
  TempDir dir;
  const std::string log_path = dir.file("trials.jsonl");
  const std::string result_path = dir.file("result.jsonl");
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = make_assets(
      corpus, std::make_shared<const EmbeddingTable>(
                  testutil::planar_table({0.0, 1.3})));
  AuditConfig config;
  config.k = 2;
  config.trials = 50;
  config.lambda = 0.0;
  config.base_seed = 66;
  config.mechanism = MechanismSpec::grr(1.0, GrrParams{2});
  config.adversary.kind = AdversaryKind::kValueMap;
  config.trial_log_cap = 50;
  const AuditResult result = run_audit(config, assets);
  write_trial_log(result, log_path);
  write_result(result, result_path, log_path);

  std::ifstream in(log_path);
  std::string line;
  std::size_t rows = 0;
  std::uint64_t successes = 0;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("trial").get<std::uint64_t>() == rows);
    CHECK(j.at("candidates").size() == 2);
    successes += j.at("success").get<bool>() ? 1 : 0;
    ++rows;
  }
  CHECK(rows == 50);
  CHECK(successes == result.summary.tp_count);
  CHECK(read_result(result_path).trial_log_ref == log_path);
}
