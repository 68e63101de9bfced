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

#include <atomic>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "ldpaudit/engine.h"
#include "ldpaudit/io.h"
#include "test_util.h"

using namespace ldpaudit;

namespace {

AuditAssets planar_assets(const Corpus& corpus,
                          const std::vector<double>& angles) {
  return make_assets(corpus, std::make_shared<const EmbeddingTable>(
                                 testutil::planar_table(angles)));
}

AuditConfig grr_config(double epsilon, std::uint64_t trials,
                       std::uint64_t seed, std::uint64_t g = 2) {
  AuditConfig config;
  config.k = 2;
  config.trials = trials;
  config.lambda = 0.0;
  config.base_seed = seed;
  config.mechanism = MechanismSpec::grr(epsilon, GrrParams{g});
  config.adversary.kind = AdversaryKind::kValueMap;
  config.trial_log_cap = 0;
  return config;
}

// Emits a fixed corpus record regardless of the input.
class ConstantMechanism : public Mechanism {
 public:
  explicit ConstantMechanism(const Corpus& corpus) : corpus_(corpus) {}
  TextRecord perturb(const TextRecord&, RngStream&) const override {
    return corpus_.records[0];
  }
  MechanismKind kind() const override { return MechanismKind::kIdentity; }

 private:
  const Corpus& corpus_;
};

// Sees the truth through the identity mechanism's output id and succeeds
// with a fixed probability, for binomial calibration checks.
class KnownRateAdversary : public Adversary {
 public:
  explicit KnownRateAdversary(double success_rate) : rate_(success_rate) {}
  std::size_t predict(const TrialView& view, RngStream& rng) const override {
    const auto& members = view.candidates->members;
    std::size_t truth = 0;
    for (std::size_t pos = 0; pos < members.size(); ++pos) {
      if (members[pos] == view.output->id) truth = pos;
    }
    if (rng.next_double() < rate_) return truth;
    const std::size_t offset = 1 + rng.next_below(members.size() - 1);
    return (truth + offset) % members.size();
  }
  AdversaryKind kind() const override { return AdversaryKind::kValueMap; }

 private:
  double rate_;
};

// Fails every trial whose privatized output is a specific record.
class FaultyAdversary : public Adversary {
 public:
  explicit FaultyAdversary(RecordId poison) : poison_(poison) {}
  std::size_t predict(const TrialView& view, RngStream&) const override {
    if (view.output->id == poison_) {
      throw std::runtime_error("poisoned record");
    }
    const auto& members = view.candidates->members;
    for (std::size_t pos = 0; pos < members.size(); ++pos) {
      if (members[pos] == view.output->id) return pos;
    }
    return 0;
  }
  AdversaryKind kind() const override { return AdversaryKind::kValueMap; }

 private:
  RecordId poison_;
};

}  // namespace

TEST_CASE("identity mechanism with the surface attack always succeeds") {
  const Corpus corpus = testutil::single_token_corpus(4);
  const AuditAssets assets = planar_assets(corpus, {0.1, 0.9, 1.7, 2.9});
  AuditConfig config;
  config.k = 2;
  config.trials = 200;
  config.lambda = 0.0;
  config.base_seed = 5;
  config.mechanism = MechanismSpec::identity();
  config.adversary.kind = AdversaryKind::kSurfaceOverlap;
  config.trial_log_cap = 200;
  const AuditResult result = run_audit(config, assets);
  CHECK(result.summary.tp_count == 200);
  for (const TrialOutcome& outcome : result.trial_log) {
    CHECK(outcome.success);
  }
}

TEST_CASE("a constant mechanism conveys no information") {
  const Corpus corpus = testutil::single_token_corpus(4);
  const AuditAssets assets = planar_assets(corpus, {0.1, 0.9, 1.7, 2.9});
  AuditConfig config;
  config.k = 2;
  config.trials = 10000;
  config.lambda = 0.0;
  config.base_seed = 6;
  config.mechanism = MechanismSpec::identity();  // overridden by injection
  config.adversary.kind = AdversaryKind::kSurfaceOverlap;
  config.trial_log_cap = 0;
  const ConstantMechanism mechanism(corpus);
  const auto adversary = make_adversary(config.adversary, assets.embeddings);
  const AuditResult result = run_audit(config, assets, mechanism, *adversary);
  // Deterministic attack on a constant output: success iff the target draw
  // hits the guessed position, so the rate is 1/k up to binomial noise.
  const double rate = static_cast<double>(result.summary.tp_count) /
                      static_cast<double>(result.summary.trials);
  CHECK(std::fabs(rate - 0.5) < 0.015);
  CHECK(result.summary.epsilon_emp == 0.0);
}

TEST_CASE("run_trial replays identically") {
  const Corpus corpus = testutil::single_token_corpus(6);
  const AuditAssets assets =
      planar_assets(corpus, testutil::outlier_angles());
  AuditConfig config = grr_config(1.0, 100, 7, 6);
  config.lambda = -10000.0;
  const auto mechanism =
      make_mechanism(config.mechanism, corpus, assets.embeddings);
  const auto adversary = make_adversary(config.adversary, assets.embeddings);
  for (std::uint64_t trial : {0ull, 17ull, 99ull}) {
    const TrialOutcome a =
        run_trial(config, assets, *mechanism, *adversary, trial);
    const TrialOutcome b =
        run_trial(config, assets, *mechanism, *adversary, trial);
    CHECK(a.candidate_ids == b.candidate_ids);
    CHECK(a.target_position == b.target_position);
    CHECK(a.output_record.id == b.output_record.id);
    CHECK(a.output_record.tokens == b.output_record.tokens);
    CHECK(a.guess_position == b.guess_position);
    CHECK(a.success == b.success);
  }
}

TEST_CASE("grr audit matches the analytic MAP success rate") {
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = planar_assets(corpus, {0.0, 1.3});
  const AuditResult result =
      run_audit(grr_config(1.0, 100000, 11), assets);
  const double rate = static_cast<double>(result.summary.tp_count) /
                      static_cast<double>(result.summary.trials);
  const double map_rate = std::exp(1.0) / (1.0 + std::exp(1.0));  // 0.7311
  CHECK(std::fabs(rate - (map_rate)) < 0.004);
  CHECK(result.summary.epsilon_emp >= 0.93);
  CHECK(result.summary.epsilon_emp <= 1.0);
  CHECK(result.mechanism_queries == 100000);
}

TEST_CASE("an all-success audit lands on the 7.54 ceiling") {
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = planar_assets(corpus, {0.0, 1.3});
  AuditConfig config;
  config.k = 2;
  config.trials = 10000;
  config.lambda = 0.0;
  config.base_seed = 12;
  config.mechanism = MechanismSpec::identity();
  config.adversary.kind = AdversaryKind::kValueMap;
  config.trial_log_cap = 0;
  const AuditResult result = run_audit(config, assets);
  CHECK(result.summary.tp_count == 10000);
  CHECK(result.summary.epsilon_emp == doctest::Approx(7.5427).epsilon(1e-4));
  CHECK(result.summary.epsilon_emp == result.summary.ceiling);
}

TEST_CASE("results are identical across worker counts") {
  const Corpus corpus = testutil::single_token_corpus(6);
  const AuditAssets assets =
      planar_assets(corpus, testutil::outlier_angles());
  AuditConfig config = grr_config(0.8, 20000, 13, 6);
  config.lambda = -10000.0;
  config.trial_log_cap = 100;

  config.workers = 1;
  const AuditResult serial = run_audit(config, assets);
  config.workers = 8;
  const AuditResult parallel = run_audit(config, assets);

  CHECK(serial.summary == parallel.summary);
  CHECK(serial.mechanism_queries == parallel.mechanism_queries);
  REQUIRE(serial.trial_log.size() == parallel.trial_log.size());
  for (std::size_t i = 0; i < serial.trial_log.size(); ++i) {
    CHECK(serial.trial_log[i].candidate_ids ==
          parallel.trial_log[i].candidate_ids);
    CHECK(serial.trial_log[i].success == parallel.trial_log[i].success);
  }
}

TEST_CASE("trials draw from isolated substreams") {
  const Corpus corpus = testutil::single_token_corpus(6);
  const AuditAssets assets =
      planar_assets(corpus, testutil::outlier_angles());
  AuditConfig config = grr_config(1.0, 50, 14, 6);
  config.trial_log_cap = 50;
  const AuditResult audit = run_audit(config, assets);

  const auto mechanism =
      make_mechanism(config.mechanism, corpus, assets.embeddings);
  const auto adversary = make_adversary(config.adversary, assets.embeddings);
  // Each trial recomputed in isolation matches its slot in the full run, so
  // no trial consumes randomness across a trial boundary.
  std::uint64_t tp = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const TrialOutcome solo =
        run_trial(config, assets, *mechanism, *adversary, i);
    CHECK(solo.candidate_ids == audit.trial_log[i].candidate_ids);
    CHECK(solo.guess_position == audit.trial_log[i].guess_position);
    CHECK(solo.success == audit.trial_log[i].success);
    tp += solo.success ? 1 : 0;
  }
  CHECK(tp == audit.summary.tp_count);
}

TEST_CASE("epsilon_emp never exceeds the ceiling") {
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = planar_assets(corpus, {0.0, 1.3});
  for (double eps : {0.25, 1.0, 4.0, 50.0}) {
    const AuditResult result =
        run_audit(grr_config(eps, 2000, 15), assets);
    CHECK(result.summary.epsilon_emp <= result.summary.ceiling);
  }
}

TEST_CASE("symmetric baseline agrees with the efficient estimator") {
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = planar_assets(corpus, {0.0, 1.3});
  for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
    AuditConfig config = grr_config(2.0, 10000, seed);
    const AuditResult efficient = run_audit(config, assets);
    config.estimator_mode = EstimatorMode::kSymmetricBaseline;
    const AuditResult symmetric = run_symmetric_audit(config, assets);
    CHECK(std::fabs(efficient.summary.epsilon_emp -
                    symmetric.summary.epsilon_emp) <= 0.1);
    CHECK(efficient.mechanism_queries == 10000);
    CHECK(symmetric.mechanism_queries == 20000);
    CHECK(symmetric.summary.fp_count.has_value());
  }
}

TEST_CASE("symmetric baseline requires k = 2 and clamps no-information") {
  const Corpus corpus = testutil::single_token_corpus(4);
  const AuditAssets assets = planar_assets(corpus, {0.1, 0.9, 1.7, 2.9});
  AuditConfig config = grr_config(1.0, 100, 24, 4);
  config.estimator_mode = EstimatorMode::kSymmetricBaseline;
  config.k = 4;
  CHECK_THROWS_AS(run_symmetric_audit(config, assets), ConfigError);

  config.k = 2;
  const ConstantMechanism mechanism(corpus);
  AuditConfig surf = config;
  surf.adversary.kind = AdversaryKind::kSurfaceOverlap;
  surf.trials = 2000;
  const auto adversary = make_adversary(surf.adversary, assets.embeddings);
  const AuditResult result =
      run_symmetric_audit(surf, assets, mechanism, *adversary);
  CHECK(result.summary.epsilon_emp == 0.0);
}

TEST_CASE("sweeps are monotone for grr and preserve single-point audits") {
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = planar_assets(corpus, {0.0, 1.3});
  AuditConfig base = grr_config(0.5, 10000, 31);

  const std::vector<double> grid = {0.5, 1.0, 2.0, 4.0};
  const std::vector<SweepCell> cells = run_sweep(base, grid, assets);
  REQUIRE(cells.size() == 4);
  double prev = -1.0;
  for (const SweepCell& cell : cells) {
    REQUIRE(cell.result.has_value());
    CHECK(cell.result->summary.epsilon_emp > prev);
    prev = cell.result->summary.epsilon_emp;
  }

  const std::vector<double> single = {1.0};
  const std::vector<SweepCell> one = run_sweep(base, single, assets);
  AuditConfig solo = base;
  solo.mechanism.epsilon = 1.0;
  const AuditResult direct = run_audit(solo, assets);
  CHECK(one[0].result->summary == direct.summary);

  CHECK_THROWS_AS(run_sweep(base, std::vector<double>{}, assets), ConfigError);
  CHECK_THROWS_AS(run_sweep(base, std::vector<double>{-1.0}, assets),
                  ConfigError);
}

TEST_CASE("identity sweeps sit at the ceiling in every cell") {
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = planar_assets(corpus, {0.0, 1.3});
  AuditConfig base;
  base.k = 2;
  base.trials = 2000;
  base.lambda = 0.0;
  base.base_seed = 32;
  base.mechanism = MechanismSpec::identity();
  base.adversary.kind = AdversaryKind::kValueMap;
  base.trial_log_cap = 0;
  const std::vector<double> grid = {1.0, 10.0};
  for (const SweepCell& cell : run_sweep(base, grid, assets)) {
    REQUIRE(cell.result.has_value());
    CHECK(cell.result->summary.epsilon_emp ==
          doctest::Approx(cell.result->summary.ceiling));
  }
}

TEST_CASE("observed TP counts are binomially calibrated") {
  const Corpus corpus = testutil::single_token_corpus(4);
  const AuditAssets assets = planar_assets(corpus, {0.1, 0.9, 1.7, 2.9});
  const double p = 0.3;
  const KnownRateAdversary adversary(p);
  const IdentityMechanism mechanism;

  constexpr int kAudits = 100;
  constexpr std::uint64_t kTrials = 400;
  std::vector<std::uint64_t> tp_counts;
  for (int a = 0; a < kAudits; ++a) {
    AuditConfig config;
    config.k = 4;
    config.trials = kTrials;
    config.lambda = 0.0;
    config.base_seed = 40000 + a;
    config.mechanism = MechanismSpec::identity();
    config.adversary.kind = AdversaryKind::kValueMap;
    config.trial_log_cap = 0;
    tp_counts.push_back(
        run_audit(config, assets, mechanism, adversary).summary.tp_count);
  }

  // Pearson chi-square against Binomial(400, 0.3), binned into eight
  // near-equal-probability bins from the long-double pmf oracle.
  std::vector<long double> pmf(kTrials + 1);
  for (std::uint64_t t = 0; t <= kTrials; ++t) {
    pmf[t] = testutil::binomial_upper_tail_oracle(kTrials, p, t) -
             testutil::binomial_upper_tail_oracle(kTrials, p, t + 1);
  }
  constexpr int kBins = 8;
  std::vector<std::uint64_t> edges;  // bin b covers [edges[b-1]+1, edges[b]]
  long double cum = 0.0L;
  for (std::uint64_t t = 0; t <= kTrials && edges.size() + 1 < kBins; ++t) {
    cum += pmf[t];
    if (cum >= static_cast<long double>(edges.size() + 1) / kBins) {
      edges.push_back(t);
    }
  }
  edges.push_back(kTrials);
  std::vector<double> expected(kBins, 0.0);
  std::vector<int> observed(kBins, 0);
  for (int b = 0; b < kBins; ++b) {
    const std::uint64_t lo = b == 0 ? 0 : edges[b - 1] + 1;
    for (std::uint64_t t = lo; t <= edges[b]; ++t) {
      expected[b] += static_cast<double>(pmf[t]) * kAudits;
    }
  }
  for (std::uint64_t tp : tp_counts) {
    int b = 0;
    while (tp > edges[b]) ++b;
    ++observed[b];
  }
  double stat = 0.0;
  for (int b = 0; b < kBins; ++b) {
    REQUIRE(expected[b] > 4.0);
    stat += (observed[b] - expected[b]) * (observed[b] - expected[b]) /
            expected[b];
  }
  CHECK(stat < testutil::chi_square_99(kBins - 1));
}

TEST_CASE("the lower bound is sound across repeated audits") {
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = planar_assets(corpus, {0.0, 1.3});
  int exceed = 0;
  for (int a = 0; a < 200; ++a) {
    const AuditResult result =
        run_audit(grr_config(1.0, 1000, 70000 + 31 * a), assets);
    if (result.summary.epsilon_emp > 1.0) ++exceed;
  }
  // One-sided alpha = 0.005: expect about one exceedance in 200 audits.
  CHECK(exceed <= 1);
}

TEST_CASE("failed trials abort or shrink the sample per the budget") {
  const Corpus corpus = testutil::single_token_corpus(4);
  const AuditAssets assets = planar_assets(corpus, {0.1, 0.9, 1.7, 2.9});
  AuditConfig config;
  config.k = 2;
  config.trials = 400;
  config.lambda = 0.0;
  config.base_seed = 51;
  config.mechanism = MechanismSpec::identity();
  config.adversary.kind = AdversaryKind::kValueMap;
  config.trial_log_cap = 0;
  const IdentityMechanism mechanism;
  const FaultyAdversary adversary(/*poison=*/2);

  // Default budget is zero: the poisoned trials abort the audit.
  CHECK_THROWS_AS(run_audit(config, assets, mechanism, adversary),
                  TrialBudgetError);

  config.failure_budget = config.trials;
  const AuditResult result = run_audit(config, assets, mechanism, adversary);
  CHECK(!result.failures.empty());
  CHECK(result.summary.trials == config.trials - result.failures.size());
  // Roughly a quarter of targets hit the poisoned record.
  CHECK(std::fabs(static_cast<double>(result.failures.size()) / 400.0 - (0.25)) < 0.08);
  for (std::size_t i = 1; i < result.failures.size(); ++i) {
    CHECK(result.failures[i - 1].trial_index <
          result.failures[i].trial_index);
  }
}

TEST_CASE("internal embedding attack requires the vector mechanism") {
  const Corpus corpus = testutil::single_token_corpus(4);
  const AuditAssets assets = planar_assets(corpus, {0.1, 0.9, 1.7, 2.9});
  AuditConfig config = grr_config(1.0, 10, 52, 4);
  config.adversary.kind = AdversaryKind::kInternalEmbedding;
  CHECK_THROWS_AS(run_audit(config, assets), ConfigError);

  config.mechanism = MechanismSpec::vector_noise(
      5.0, VectorNoiseParams{1.0, NoiseFamily::kLaplaceVector, 1e-5});
  config.trials = 500;
  const AuditResult result = run_audit(config, assets);
  CHECK(result.summary.trials == 500);
}

TEST_CASE("high-epsilon vector audits distinguish; low-epsilon ones do not") {
  const Corpus corpus = testutil::single_token_corpus(4);
  const AuditAssets assets = planar_assets(corpus, {0.1, 0.9, 1.7, 2.9});
  AuditConfig config;
  config.k = 2;
  config.trials = 3000;
  config.lambda = 0.0;
  config.base_seed = 53;
  config.adversary.kind = AdversaryKind::kInternalEmbedding;
  config.trial_log_cap = 0;

  config.mechanism = MechanismSpec::vector_noise(
      1e6, VectorNoiseParams{1.0, NoiseFamily::kLaplaceVector, 1e-5});
  const AuditResult sharp = run_audit(config, assets);
  CHECK(static_cast<double>(sharp.summary.tp_count) / 3000.0 > 0.999);

  config.mechanism = MechanismSpec::vector_noise(
      0.01, VectorNoiseParams{1.0, NoiseFamily::kLaplaceVector, 1e-5});
  const AuditResult blunt = run_audit(config, assets);
  CHECK(blunt.summary.epsilon_emp == 0.0);
}

TEST_CASE("sweep isolates a failing cell and continues") {
  // A mock judge that answers normally except during the second cell's
  // request window, where it returns unparseable text. Cells run
  // sequentially at one request per trial, so requests [T, 2T) all belong
  // to the second cell.
  constexpr std::uint64_t kTrials = 10;
  httplib::Server server;
  std::atomic<int> request_index{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&,
                                          httplib::Response& res) {
    const int index = request_index++;
    const bool poisoned = index >= static_cast<int>(kTrials) &&
                          index < static_cast<int>(2 * kTrials);
    nlohmann::json reply = {
        {"choices",
         {{{"message",
            {{"role", "assistant"},
             {"content", poisoned ? "no verdict" : "answer: [[1]]"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const Corpus corpus = testutil::single_token_corpus(4);
  const AuditAssets assets = planar_assets(corpus, {0.1, 0.9, 1.7, 2.9});
  AuditConfig base;
  base.k = 2;
  base.trials = kTrials;
  base.lambda = 0.0;
  base.base_seed = 54;
  base.workers = 1;
  base.mechanism = MechanismSpec::grr(1.0, GrrParams{4});
  base.adversary.kind = AdversaryKind::kRemoteJudge;
  RemoteJudgeConfig endpoint;
  endpoint.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  endpoint.model_name = "mock";
  endpoint.timeout_s = 5.0;
  endpoint.max_retries = 0;
  base.adversary.endpoint = endpoint;
  base.trial_log_cap = 0;

  const std::vector<double> grid = {1.0, 2.0, 3.0};
  const std::vector<SweepCell> cells = run_sweep(base, grid, assets);
  server.stop();
  server_thread.join();

  REQUIRE(cells.size() == 3);
  CHECK(cells[0].result.has_value());
  CHECK(!cells[1].result.has_value());
  CHECK(!cells[1].error.empty());
  CHECK(cells[2].result.has_value());
}

TEST_CASE("sweeps honor the symmetric estimator mode") {
  const Corpus corpus = testutil::single_token_corpus(2);
  const AuditAssets assets = planar_assets(corpus, {0.0, 1.3});
  AuditConfig base = grr_config(1.0, 2000, 55);
  base.estimator_mode = EstimatorMode::kSymmetricBaseline;
  const std::vector<double> grid = {1.0};
  const std::vector<SweepCell> cells = run_sweep(base, grid, assets);
  REQUIRE(cells[0].result.has_value());
  CHECK(cells[0].result->summary.mode == EstimatorMode::kSymmetricBaseline);
  CHECK(cells[0].result->summary.fp_count.has_value());
  CHECK(cells[0].result->mechanism_queries == 4000);
  const AuditResult direct = run_symmetric_audit(base, assets);
  CHECK(cells[0].result->summary == direct.summary);
}
