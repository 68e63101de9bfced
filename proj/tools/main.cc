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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ldpaudit/engine.h"
#include "ldpaudit/estimation.h"
#include "ldpaudit/io.h"
#include "ldpaudit/mechanisms.h"

namespace {

using namespace ldpaudit;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct AuditFlags {
  std::string mechanism;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  std::string dataset;
  std::string format = "auto";
  std::string embeddings;
  std::uint64_t embed_dim = 32;
  std::uint64_t k = 2;
  std::uint64_t trials = 10000;
  double lambda = -10000.0;
  double alpha = 0.005;
  double delta = 0.0;
  std::string attack = "embedding";
  std::uint64_t seed = 42;
  std::string estimator = "efficient";
  unsigned workers = 0;
  std::uint64_t trial_log_cap = 100000;
  std::int64_t failure_budget = -1;
  std::string out;
  // grr
  std::uint64_t g = 2;
  // token_em
  double sensitivity = 2.0;
  std::uint64_t pool = 0;
  // vector_noise
  double clip = 1.0;
  std::string noise = "laplace_vector";
  double delta_mech = 1e-5;
  std::string trial_log;
  // remote judge
  std::string judge_url;
  std::string judge_model = "judge";
  std::string judge_key_env = "LDPAUDIT_API_KEY";
  double judge_timeout = 30.0;
  int judge_retries = 2;
  int judge_parallel = 8;
};

void add_audit_options(CLI::App* cmd, AuditFlags* flags) {
  cmd->add_option("--mechanism", flags->mechanism,
                  "Mechanism: grr, token_em, vector_noise, identity");
  cmd->add_option("--dataset", flags->dataset, "Corpus file");
  cmd->add_option("--format", flags->format,
                  "Corpus format: auto, jsonl, plain")
      ->capture_default_str();
  cmd->add_option("--epsilon", flags->epsilon,
                  "Nominal privacy budget (required except for identity)");
  cmd->add_option("--embeddings", flags->embeddings,
                  "Embedding table (binary or .csv); omit for synthetic "
                  "unit vectors");
  cmd->add_option("--embed-dim", flags->embed_dim,
                  "Dimension of synthetic embeddings")
      ->capture_default_str();
  cmd->add_option("--k", flags->k, "Candidate set size")
      ->capture_default_str();
  cmd->add_option("--trials", flags->trials, "Monte Carlo trial count")
      ->capture_default_str();
  cmd->add_option("--lambda", flags->lambda,
                  "Candidate sampling temperature: negative = more-diverse "
                  "(default -10000), 0 = uniform, positive = more-similar")
      ->capture_default_str();
  cmd->add_option("--alpha", flags->alpha,
                  "One-sided confidence level. Default 0.005 (the 99% "
                  "two-sided convention); with k=2, T=10000, delta=0 the "
                  "all-success ceiling lands at 7.5427")
      ->capture_default_str();
  cmd->add_option("--delta", flags->delta, "Privacy slack of the estimator")
      ->capture_default_str();
  cmd->add_option("--attack", flags->attack,
                  "Adversary: embedding, surface, value_map, internal, judge")
      ->capture_default_str();
  cmd->add_option("--seed", flags->seed, "Base seed")->capture_default_str();
  cmd->add_option("--estimator", flags->estimator,
                  "efficient (aggregated successes, T mechanism queries) or "
                  "symmetric (TP/FP baseline, 2T queries)")
      ->capture_default_str();
  cmd->add_option("--workers", flags->workers,
                  "Worker threads (0 = available parallelism)")
      ->capture_default_str();
  cmd->add_option("--trial-log-cap", flags->trial_log_cap,
                  "Max retained trial-log rows")
      ->capture_default_str();
  cmd->add_option("--trial-log", flags->trial_log,
                  "Write retained per-trial outcomes to this file");
  cmd->add_option("--failure-budget", flags->failure_budget,
                  "Max tolerated failed trials (-1 = 0, or 0.5% of T for "
                  "the remote judge)")
      ->capture_default_str();
  cmd->add_option("--g", flags->g,
                  "GRR domain size; must equal the corpus size")
      ->capture_default_str();
  cmd->add_option("--sensitivity", flags->sensitivity,
                  "token_em calibration diameter")
      ->capture_default_str();
  cmd->add_option("--pool", flags->pool,
                  "token_em per-token candidate pool (0 = full vocabulary)")
      ->capture_default_str();
  cmd->add_option("--clip", flags->clip, "vector_noise L2 clip norm")
      ->capture_default_str();
  cmd->add_option("--noise", flags->noise,
                  "vector_noise family: laplace_vector or gaussian")
      ->capture_default_str();
  cmd->add_option("--delta-mech", flags->delta_mech,
                  "vector_noise gaussian delta")
      ->capture_default_str();
  cmd->add_option("--judge-url", flags->judge_url,
                  "Remote judge base URL (chat-completion API)");
  cmd->add_option("--judge-model", flags->judge_model, "Remote judge model")
      ->capture_default_str();
  cmd->add_option("--judge-key-env", flags->judge_key_env,
                  "Environment variable holding the judge API key")
      ->capture_default_str();
  cmd->add_option("--judge-timeout", flags->judge_timeout,
                  "Judge request timeout in seconds")
      ->capture_default_str();
  cmd->add_option("--judge-retries", flags->judge_retries,
                  "Judge retry count")
      ->capture_default_str();
  cmd->add_option("--judge-parallel", flags->judge_parallel,
                  "Max in-flight judge requests")
      ->capture_default_str();
}

CorpusFormat resolve_format(const std::string& format,
                            const std::string& path) {
  if (format == "jsonl") return CorpusFormat::kJsonl;
  if (format == "plain" || format == "plain_text") {
    return CorpusFormat::kPlainText;
  }
  if (format == "auto") {
    if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0) {
      return CorpusFormat::kJsonl;
    }
    return CorpusFormat::kPlainText;
  }
  throw ConfigError("unknown corpus format: " + format);
}

MechanismSpec mechanism_from_flags(const AuditFlags& flags) {
  if (flags.mechanism.empty()) {
    throw ConfigError("--mechanism is required (grr, token_em, vector_noise, "
                      "identity)");
  }
  const MechanismKind kind = mechanism_kind_from_string(flags.mechanism);
  if (kind != MechanismKind::kIdentity && std::isnan(flags.epsilon)) {
    throw ConfigError("--epsilon is required for mechanism " +
                      flags.mechanism);
  }
  switch (kind) {
    case MechanismKind::kGrr:
      return MechanismSpec::grr(flags.epsilon, GrrParams{flags.g});
    case MechanismKind::kTokenEm:
      return MechanismSpec::token_em(
          flags.epsilon, TokenEmParams{flags.sensitivity, flags.pool});
    case MechanismKind::kVectorNoise:
      return MechanismSpec::vector_noise(
          flags.epsilon,
          VectorNoiseParams{flags.clip, noise_family_from_string(flags.noise),
                            flags.delta_mech});
    case MechanismKind::kIdentity:
      return MechanismSpec::identity();
  }
  throw ConfigError("unknown mechanism: " + flags.mechanism);
}

AdversarySpec adversary_from_flags(const AuditFlags& flags) {
  AdversarySpec spec;
  spec.kind = adversary_kind_from_string(flags.attack);
  if (spec.kind == AdversaryKind::kRemoteJudge) {
    if (flags.judge_url.empty()) {
      throw ConfigError("--judge-url is required for the judge attack");
    }
    RemoteJudgeConfig endpoint;
    endpoint.base_url = flags.judge_url;
    endpoint.model_name = flags.judge_model;
    endpoint.api_key_env_var = flags.judge_key_env;
    endpoint.timeout_s = flags.judge_timeout;
    endpoint.max_retries = flags.judge_retries;
    endpoint.max_in_flight = flags.judge_parallel;
    spec.endpoint = endpoint;
  }
  return spec;
}

AuditConfig config_from_flags(const AuditFlags& flags) {
  AuditConfig config;
  config.k = flags.k;
  config.trials = flags.trials;
  config.alpha_conf = flags.alpha;
  config.delta = flags.delta;
  config.lambda = flags.lambda;
  config.base_seed = flags.seed;
  config.mechanism = mechanism_from_flags(flags);
  config.adversary = adversary_from_flags(flags);
  config.estimator_mode = estimator_mode_from_string(flags.estimator);
  config.workers = flags.workers;
  config.trial_log_cap = flags.trial_log_cap;
  if (flags.failure_budget >= 0) {
    config.failure_budget = static_cast<std::uint64_t>(flags.failure_budget);
  }
  return config;
}

struct LoadedAssets {
  Corpus corpus;
  AuditAssets assets;
};

std::unique_ptr<LoadedAssets> load_assets(const AuditFlags& flags) {
  if (flags.dataset.empty()) throw ConfigError("--dataset is required");
  auto loaded = std::make_unique<LoadedAssets>();
  loaded->corpus =
      load_corpus(flags.dataset, resolve_format(flags.format, flags.dataset));
  std::shared_ptr<const EmbeddingTable> table;
  std::string source;
  if (!flags.embeddings.empty()) {
    table = std::make_shared<const EmbeddingTable>(
        load_embeddings(flags.embeddings));
    source = flags.embeddings;
  } else {
    std::size_t vocab_size = loaded->corpus.vocab.size();
    if (vocab_size == 0) {
      TokenId max_token = 0;
      for (const TextRecord& rec : loaded->corpus.records) {
        for (TokenId t : rec.tokens) max_token = std::max(max_token, t);
      }
      vocab_size = static_cast<std::size_t>(max_token) + 1;
    }
    EmbeddingTable synth =
        synthetic_embeddings(vocab_size, flags.embed_dim, flags.seed);
    if (!loaded->corpus.vocab.empty()) synth.vocab = loaded->corpus.vocab;
    table = std::make_shared<const EmbeddingTable>(std::move(synth));
    source = "synthetic(dim=" + std::to_string(flags.embed_dim) +
             ",seed=" + std::to_string(flags.seed) + ")";
  }
  loaded->assets = make_assets(loaded->corpus, table);
  loaded->assets.embeddings_source = source;
  return loaded;
}

void print_summary_line(const AuditResult& result) {
  const double nominal = result.config_echo.mechanism.epsilon;
  std::printf("eps_nominal=%g eps_emp=%.4f p_lower=%.6f ceiling=%.4f\n",
              nominal, result.summary.epsilon_emp, result.summary.p_lower,
              result.summary.ceiling);
}

// Loads the file behind --config (if any) before CLI11 parses argv, so
// explicit flags win on conflict. Keys mirror the long flag names.
void merge_config_file(const std::string& path, AuditFlags* flags,
                       std::string* epsilons) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "mechanism") flags->mechanism = value.get<std::string>();
    else if (key == "epsilon") flags->epsilon = value.get<double>();
    else if (key == "dataset") flags->dataset = value.get<std::string>();
    else if (key == "format") flags->format = value.get<std::string>();
    else if (key == "embeddings") flags->embeddings = value.get<std::string>();
    else if (key == "embed-dim") flags->embed_dim = value.get<std::uint64_t>();
    else if (key == "k") flags->k = value.get<std::uint64_t>();
    else if (key == "trials") flags->trials = value.get<std::uint64_t>();
    else if (key == "lambda") flags->lambda = value.get<double>();
    else if (key == "alpha") flags->alpha = value.get<double>();
    else if (key == "delta") flags->delta = value.get<double>();
    else if (key == "attack") flags->attack = value.get<std::string>();
    else if (key == "seed") flags->seed = value.get<std::uint64_t>();
    else if (key == "estimator") flags->estimator = value.get<std::string>();
    else if (key == "workers") flags->workers = value.get<unsigned>();
    else if (key == "trial-log-cap")
      flags->trial_log_cap = value.get<std::uint64_t>();
    else if (key == "trial-log") flags->trial_log = value.get<std::string>();
    else if (key == "failure-budget")
      flags->failure_budget = value.get<std::int64_t>();
    else if (key == "out") flags->out = value.get<std::string>();
    else if (key == "g") flags->g = value.get<std::uint64_t>();
    else if (key == "sensitivity") flags->sensitivity = value.get<double>();
    else if (key == "pool") flags->pool = value.get<std::uint64_t>();
    else if (key == "clip") flags->clip = value.get<double>();
    else if (key == "noise") flags->noise = value.get<std::string>();
    else if (key == "delta-mech") flags->delta_mech = value.get<double>();
    else if (key == "judge-url") flags->judge_url = value.get<std::string>();
    else if (key == "judge-model")
      flags->judge_model = value.get<std::string>();
    else if (key == "judge-key-env")
      flags->judge_key_env = value.get<std::string>();
    else if (key == "judge-timeout")
      flags->judge_timeout = value.get<double>();
    else if (key == "judge-retries") flags->judge_retries = value.get<int>();
    else if (key == "judge-parallel")
      flags->judge_parallel = value.get<int>();
    else if (key == "epsilons" && epsilons != nullptr)
      *epsilons = value.get<std::string>();
    else if (key == "epsilons")
      ;  // sweep-only key, ignored by audit
    else
      throw ConfigError("config file: unknown key `" + key + "`");
  }
}

std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

std::vector<double> parse_epsilon_list(const std::string& list) {
  std::vector<double> grid;
  std::size_t pos = 0;
  while (pos < list.size()) {
    const std::size_t comma = list.find(',', pos);
    const std::string item = list.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) {
      try {
        grid.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("bad epsilon value: " + item);
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (grid.empty()) throw ConfigError("--epsilons is empty");
  return grid;
}

int cmd_audit(const AuditFlags& flags) {
  AuditConfig config = config_from_flags(flags);
  auto loaded = load_assets(flags);
  config.validate(loaded->corpus.size());
  std::cout << "config: " << config_to_json_string(config) << "\n";
  std::cout << "dataset: " << flags.dataset << " (" << loaded->corpus.size()
            << " records), embeddings: " << loaded->assets.embeddings_source
            << "\n";

  AuditResult result =
      config.estimator_mode == EstimatorMode::kSymmetricBaseline
          ? run_symmetric_audit(config, loaded->assets)
          : run_audit(config, loaded->assets);

  const std::string out_path =
      flags.out.empty() ? "audit_result.jsonl" : flags.out;
  if (!flags.trial_log.empty()) write_trial_log(result, flags.trial_log);
  write_result(result, out_path, flags.trial_log);
  std::cout << "result: " << out_path
            << " (mechanism_queries=" << result.mechanism_queries
            << ", failed_trials=" << result.failures.size() << ")\n";
  print_summary_line(result);
  return kExitOk;
}

int cmd_sweep(const AuditFlags& flags, const std::string& epsilons,
              bool convert_sentence, std::uint64_t mean_tokens) {
  if (epsilons.empty()) throw ConfigError("--epsilons is required");
  const std::vector<double> grid = parse_epsilon_list(epsilons);
  AuditFlags cell_flags = flags;
  cell_flags.epsilon = grid.front();  // placeholder; run_sweep sets each cell
  AuditConfig config = config_from_flags(cell_flags);
  auto loaded = load_assets(flags);
  config.validate(loaded->corpus.size());
  std::cout << "config: " << config_to_json_string(config) << "\n";
  if (convert_sentence && mean_tokens == 0) {
    std::cerr << "warning: --convert-sentence with --mean-tokens 0 yields a "
                 "zero sentence budget\n";
  }

  const std::vector<SweepCell> cells = run_sweep(config, grid, loaded->assets);

  const std::string out_base =
      flags.out.empty() ? std::string("sweep_results") : flags.out;
  const std::string jsonl_path = out_base + ".jsonl";
  const std::string csv_path = out_base + ".csv";
  write_sweep_results(cells, jsonl_path);
  write_sweep_csv(cells, csv_path, convert_sentence ? mean_tokens : 0);

  std::printf("%12s %10s %10s %10s %8s\n", "eps_nominal", "eps_emp",
              "p_lower", "ceiling", "status");
  std::size_t succeeded = 0;
  for (const SweepCell& cell : cells) {
    if (cell.result.has_value()) {
      ++succeeded;
      const EstimateSummary& s = cell.result->summary;
      std::printf("%12g %10.4f %10.6f %10.4f %8s", cell.epsilon_nominal,
                  s.epsilon_emp, s.p_lower, s.ceiling, "ok");
      if (convert_sentence) {
        std::printf("  eps_sentence=%.4f",
                    sentence_budget(cell.epsilon_nominal, mean_tokens));
      }
      std::printf("\n");
    } else {
      std::printf("%12g %10s %10s %10s %8s  %s\n", cell.epsilon_nominal, "-",
                  "-", "-", "FAILED", cell.error.c_str());
    }
  }
  std::cout << "wrote " << jsonl_path << " and " << csv_path << "\n";
  return succeeded > 0 ? kExitOk : kExitRuntime;
}

int cmd_ceiling(std::uint64_t k, std::uint64_t trials, double alpha,
                double delta) {
  const double value = ceiling(k, trials, alpha, delta);
  std::printf("k=%llu trials=%llu alpha=%g delta=%g ceiling=%.4f\n",
              static_cast<unsigned long long>(k),
              static_cast<unsigned long long>(trials), alpha, delta, value);
  return kExitOk;
}

int cmd_snr(double clip, const std::string& epsilons, const std::string& noise,
            std::uint64_t dim, double delta_mech, const std::string& out) {
  if (!(clip > 0.0)) throw ConfigError("--clip must be > 0");
  const std::vector<double> grid = parse_epsilon_list(epsilons);
  VectorNoiseParams params{clip, noise_family_from_string(noise), delta_mech};

  std::string csv = "epsilon,clip_norm,expected_noise_norm,snr\n";
  std::printf("%12s %12s %22s %12s\n", "epsilon", "clip_norm",
              "expected_noise_norm", "snr");
  for (double eps : grid) {
    if (!(eps > 0.0)) throw ConfigError("snr: epsilons must be positive");
    const double noise_norm = expected_noise_norm(params, dim, eps);
    const double ratio = snr(params, dim, eps);
    std::printf("%12g %12g %22.6f %12.6f\n", eps, clip, noise_norm, ratio);
    char row[160];
    std::snprintf(row, sizeof(row), "%.10g,%.10g,%.10g,%.10g\n", eps, clip,
                  noise_norm, ratio);
    csv += row;
  }
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + out);
    f << csv;
  }
  return kExitOk;
}

int cmd_convert(double epsilon_token, std::uint64_t mean_tokens) {
  if (!(epsilon_token >= 0.0)) {
    throw ConfigError("--epsilon-token must be >= 0");
  }
  if (mean_tokens == 0) {
    std::cerr << "warning: zero mean tokens yields a zero sentence budget\n";
  }
  std::printf("eps_sentence=%.4f\n",
              sentence_budget(epsilon_token, mean_tokens));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ldpaudit: empirical privacy-loss calibration for local-DP text "
      "rewriting mechanisms via candidate distinguishability attacks"};
  app.require_subcommand(1);

  AuditFlags audit_flags;
  std::string audit_config_path;
  CLI::App* audit = app.add_subcommand(
      "audit", "Run one distinguishability audit and estimate eps_emp");
  add_audit_options(audit, &audit_flags);
  audit->add_option("--out", audit_flags.out,
                    "Result file (default audit_result.jsonl)");
  audit->add_option("--config", audit_config_path,
                    "JSON config file mirroring the flags; flags win");

  AuditFlags sweep_flags;
  std::string sweep_config_path;
  std::string sweep_epsilons;
  bool convert_sentence = false;
  std::uint64_t sweep_mean_tokens = 0;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Audit a grid of nominal epsilon values; emit a CSV");
  add_audit_options(sweep, &sweep_flags);
  sweep->get_option("--epsilon")
      ->description("Ignored by sweep; use --epsilons");
  sweep->add_option("--epsilons", sweep_epsilons,
                    "Comma-separated nominal epsilon grid");
  sweep->add_flag("--convert-sentence", convert_sentence,
                  "Append an eps_sentence column via basic composition");
  sweep->add_option("--mean-tokens", sweep_mean_tokens,
                    "Mean sentence token count for --convert-sentence");
  sweep->add_option("--out", sweep_flags.out,
                    "Output basename (default sweep_results)");
  sweep->add_option("--config", sweep_config_path,
                    "JSON config file mirroring the flags; flags win");

  std::uint64_t ceiling_k = 2;
  std::uint64_t ceiling_trials = 10000;
  double ceiling_alpha = 0.005;
  double ceiling_delta = 0.0;
  CLI::App* ceiling_cmd = app.add_subcommand(
      "ceiling", "Print the finite-sample ceiling of eps_emp");
  ceiling_cmd->add_option("--k", ceiling_k, "Candidate set size")
      ->capture_default_str();
  ceiling_cmd->add_option("--trials", ceiling_trials, "Trial count")
      ->capture_default_str();
  ceiling_cmd
      ->add_option("--alpha", ceiling_alpha,
                   "One-sided confidence level (default 0.005, the 99% "
                   "two-sided convention that puts the k=2, T=10^4 ceiling "
                   "at 7.5427)")
      ->capture_default_str();
  ceiling_cmd->add_option("--delta", ceiling_delta, "Privacy slack")
      ->capture_default_str();

  double snr_clip = 1.0;
  std::string snr_epsilons;
  std::string snr_noise = "laplace_vector";
  std::uint64_t snr_dim = 32;
  double snr_delta_mech = 1e-5;
  std::string snr_out;
  CLI::App* snr_cmd = app.add_subcommand(
      "snr", "Signal-to-noise table for the vector-noise mechanism");
  snr_cmd->add_option("--clip", snr_clip, "L2 clip norm")
      ->capture_default_str();
  snr_cmd->add_option("--epsilons", snr_epsilons, "Comma-separated grid")
      ->required();
  snr_cmd->add_option("--noise", snr_noise, "laplace_vector or gaussian")
      ->capture_default_str();
  snr_cmd->add_option("--dim", snr_dim, "Embedding dimension")
      ->capture_default_str();
  snr_cmd->add_option("--delta-mech", snr_delta_mech, "Gaussian delta")
      ->capture_default_str();
  snr_cmd->add_option("--out", snr_out, "Optional CSV path");

  double convert_eps_token = 0.0;
  std::uint64_t convert_mean_tokens = 0;
  CLI::App* convert_cmd = app.add_subcommand(
      "convert", "Token-level to sentence-level budget via basic composition");
  convert_cmd
      ->add_option("--epsilon-token", convert_eps_token, "Per-token budget")
      ->required();
  convert_cmd
      ->add_option("--mean-tokens", convert_mean_tokens,
                   "Mean sentence token count")
      ->required();

  // The config file (if any) seeds the flag values; argv then overrides.
  try {
    const std::string config_path = find_config_path(argc, argv);
    if (!config_path.empty()) {
      merge_config_file(config_path, &audit_flags, nullptr);
      merge_config_file(config_path, &sweep_flags, &sweep_epsilons);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (audit->parsed()) return cmd_audit(audit_flags);
    if (sweep->parsed()) {
      return cmd_sweep(sweep_flags, sweep_epsilons, convert_sentence,
                       sweep_mean_tokens);
    }
    if (ceiling_cmd->parsed()) {
      return cmd_ceiling(ceiling_k, ceiling_trials, ceiling_alpha,
                         ceiling_delta);
    }
    if (snr_cmd->parsed()) {
      return cmd_snr(snr_clip, snr_epsilons, snr_noise, snr_dim,
                     snr_delta_mech, snr_out);
    }
    if (convert_cmd->parsed()) {
      return cmd_convert(convert_eps_token, convert_mean_tokens);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
