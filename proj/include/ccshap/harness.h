/*
 * Copyright 2026 The ccshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Configuration and the four pipeline commands behind the CLI: ingest,
// train, audit, verify.

#ifndef CCSHAP_HARNESS_H_
#define CCSHAP_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "ccshap/audit.h"
#include "ccshap/remote.h"
#include "ccshap/report.h"
#include "ccshap/shapley.h"
#include "ccshap/toy_model.h"
#include "json.hpp"

namespace ccshap::harness {

// Only environment source of the remote bearer token.
inline constexpr const char* kAuthTokenEnv = "CCSHAP_AUTH_TOKEN";

struct InputSource {
  std::string path;
  std::string format = "auto";     // auto, mbox, eml_dir, jsonl, csv
  std::string origin = "unlabeled";  // phishing, ham, unlabeled

  bool operator==(const InputSource&) const = default;
};

enum class BackendKind { kToy, kRemote };

struct ToyBackendConfig {
  std::string checkpoint;  // empty: <output_dir>/model.ckpt
  size_t k_explain = 5;
  double copy_weight = 2.0;
  // Explanation likelihood := classification probability.
  bool self_consistent = false;

  bool operator==(const ToyBackendConfig&) const = default;
};

struct TrainConfig {
  std::string objective = "bce";  // bce, contrastive, dpo
  double learning_rate = 0.1;
  int epochs = 100;
  size_t batch_size = 16;
  double margin = 1.0;  // triplet margin
  double beta = 0.1;    // preference temperature
  size_t dim = toy::LinearTextModel::kDefaultDim;
  uint64_t hash_seed = 0;
  std::string reference_checkpoint;  // preference reference; empty: zero model

  bool operator==(const TrainConfig&) const = default;
};

struct AuditConfig {
  std::vector<InputSource> inputs;
  std::string corpus_dir = "corpus";
  size_t balance_per_class = 0;  // 0: size of the smaller class
  double train_fraction = 0.9;
  double min_stopword_ratio = 0.02;

  BackendKind backend = BackendKind::kToy;
  ToyBackendConfig toy;
  remote::RemoteEndpoint remote;  // auth_token is never serialized
  TrainConfig training;

  std::string estimator = "mc";  // mc, exact
  size_t n_samples = 2000;
  size_t exact_limit = shapley::kDefaultExactLimit;
  uint64_t seed = 0;
  size_t max_tokens = 256;
  size_t k_top = 10;
  size_t per_class_eval_count = 20;
  std::string eval_corpus;  // empty: <corpus_dir>/val.jsonl
  std::string output_dir = "out";
  std::string prompt_template = std::string(corpus::kDefaultTemplate);
  bool attribute_template = false;
  int threads = 1;  // permutation workers per email
  int jobs = 1;     // emails in flight
  std::string cache_path;  // empty: in-memory cache for remote backends, none for toy

  bool operator==(const AuditConfig&) const = default;
};

nlohmann::ordered_json ConfigToJson(const AuditConfig& config);
// Missing keys keep their defaults; unknown keys are config errors.
AuditConfig ConfigFromJson(const nlohmann::ordered_json& json);
void SaveConfig(const std::filesystem::path& path, const AuditConfig& config);
AuditConfig LoadConfig(const std::filesystem::path& path);

// Throws a config error on any out-of-range field.
void ValidateConfig(const AuditConfig& config);

// Hex digest of the serialized config minus output_dir, threads, jobs and
// cache_path.
std::string ConfigDigest(const AuditConfig& config);

audit::AuditOptions MakeAuditOptions(const AuditConfig& config);
std::filesystem::path CheckpointPath(const AuditConfig& config);
std::filesystem::path EvalCorpusPath(const AuditConfig& config);

// Backend described by the config; remote backends read the bearer token
// from kAuthTokenEnv.
std::unique_ptr<scoring::Backend> MakeBackend(const AuditConfig& config);

struct IngestResult {
  corpus::Split split;
  corpus::SkipReport skipped;
  size_t per_class = 0;
};

// load -> clean -> dedup -> balance -> split; writes train.jsonl,
// val.jsonl and skipped.jsonl under corpus_dir and prints
// "phishing=K ham=K".
IngestResult RunIngest(const AuditConfig& config, std::ostream& out);

// Trains the configured objective on <corpus_dir>/train.jsonl (validating
// on val.jsonl); writes the checkpoint and <output_dir>/metrics.csv.
toy::TrainResult RunTrain(const AuditConfig& config, std::ostream& out);

// Evaluation subset: per_class_eval_count records per class (fewer if the
// class is smaller), seeded, in corpus order. With `ids`, exactly those
// records in corpus order; an unknown id is a config error.
std::vector<audit::AuditItem> SelectForAudit(const corpus::Corpus& corpus,
                                             const AuditConfig& config,
                                             const std::vector<std::string>& ids);

struct AuditRun {
  std::vector<audit::CcShapReport> reports;
  std::vector<audit::AuditFailure> failures;
  audit::Summary summary;
};

// Audits the selection against `backend`; writes reports.jsonl,
// reports.txt and summary.csv under output_dir and prints the summary
// table. Throws the first failure if no email could be audited.
AuditRun RunAudit(const AuditConfig& config, const scoring::Backend& backend,
                  const std::vector<std::string>& ids, std::ostream& out,
                  std::ostream& log);

// Oracle fixtures: scorers with known exact Shapley values over 6-12
// players.
struct Fixture {
  std::string name;
  size_t n_players = 0;
  shapley::CoalitionScorer scorer;
  std::shared_ptr<const void> state;  // keeps captured objects alive
};

// constant, additive, symmetric_pair, planted_dummy, toy_model.
std::vector<Fixture> StandardFixtures();

struct FixtureResult {
  std::string name;
  size_t n_players = 0;
  double max_abs_deviation = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  size_t n_samples = 2000;
  uint64_t seed = 0;
  double tolerance = 0.02;
  int threads = 1;
};

// Exact vs Monte Carlo on every fixture; prints one row per fixture.
std::vector<FixtureResult> RunVerify(const VerifyOptions& options, std::ostream& out);

}  // namespace ccshap::harness

#endif  // CCSHAP_HARNESS_H_
