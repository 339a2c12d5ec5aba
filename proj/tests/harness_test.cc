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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "ccshap/error.h"
#include "ccshap/harness.h"
#include "ccshap/report.h"
#include "ccshap/text_util.h"
#include "test_util.h"

namespace ccshap::harness {
namespace {

using ccshap::testing::DataDir;
using ccshap::testing::TempDir;
namespace fs = std::filesystem;

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult Cli(const TempDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string command = "cd '" + dir.path().string() + "' && '" CCSHAP_CLI_PATH "' " + args +
                              " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(command.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ReadFileOrThrow(out), ReadFileOrThrow(err)};
}

std::string Data(const std::string& name) { return (DataDir() / name).string(); }

size_t Lines(const std::string& text) { return static_cast<size_t>(std::count(text.begin(), text.end(), '\n')); }

// Writes the separable corpus as a ready-made train/val split.
void WriteSeparableSplit(const TempDir& dir, size_t train_per_class, size_t val_per_class) {
  fs::create_directories(dir / "corpus");
  corpus::WriteCorpusJsonl(dir / "corpus" / "train.jsonl", toy::MakeSeparableCorpus(train_per_class, 1));
  corpus::WriteCorpusJsonl(dir / "corpus" / "val.jsonl", toy::MakeSeparableCorpus(val_per_class, 2));
}

TEST(Config, RoundTrip) {
  TempDir dir("config");
  AuditConfig c;
  c.inputs = {{"a.mbox", "mbox", "phishing"}, {"b.csv", "csv", "unlabeled"}};
  c.backend = BackendKind::kRemote;
  c.remote.base_url = "http://localhost:9000/api";
  c.remote.model_name = "m";
  c.remote.max_in_flight = 7;
  c.training.objective = "dpo";
  c.training.beta = 0.25;
  c.estimator = "exact";
  c.seed = 77;
  c.attribute_template = true;
  c.jobs = 3;
  SaveConfig(dir / "c.json", c);
  EXPECT_EQ(LoadConfig(dir / "c.json"), c);
}

TEST(Config, TokenIsNeverSerialized) {
  AuditConfig c;
  c.remote.auth_token = "s3cret";
  EXPECT_EQ(ConfigToJson(c).dump().find("s3cret"), std::string::npos);
}

TEST(Config, UnknownKeyIsAnError) {
  auto json = ConfigToJson(AuditConfig());
  json["n_sampels"] = 10;
  try {
    ConfigFromJson(json);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("n_sampels"), std::string::npos);
  }
}

TEST(Config, ValidationRejectsBadRanges) {
  AuditConfig c;
  c.estimator = "bogus";
  EXPECT_THROW(ValidateConfig(c), Error);
  c = AuditConfig();
  c.train_fraction = 1.0;
  EXPECT_THROW(ValidateConfig(c), Error);
  c = AuditConfig();
  c.n_samples = 0;
  EXPECT_THROW(ValidateConfig(c), Error);
  EXPECT_NO_THROW(ValidateConfig(AuditConfig()));
}

TEST(Config, DigestIgnoresExecutionKnobs) {
  AuditConfig a;
  AuditConfig b = a;
  b.output_dir = "elsewhere";
  b.threads = 8;
  b.jobs = 4;
  b.cache_path = "x.bin";
  EXPECT_EQ(ConfigDigest(a), ConfigDigest(b));
  b.seed = 1;
  EXPECT_NE(ConfigDigest(a), ConfigDigest(b));
}

TEST(Selection, SeededPerClassInCorpusOrder) {
  const corpus::Corpus c = toy::MakeSeparableCorpus(30, 5);
  AuditConfig config;
  config.per_class_eval_count = 5;
  const auto items = SelectForAudit(c, config, {});
  ASSERT_EQ(items.size(), 10u);
  size_t phishing = 0;
  for (const auto& item : items) phishing += item.email.label == Label::kPhishing;
  EXPECT_EQ(phishing, 5u);
  const auto again = SelectForAudit(c, config, {});
  for (size_t i = 0; i < items.size(); ++i) EXPECT_EQ(items[i].email_id, again[i].email_id);
  config.seed = 9;
  const auto other = SelectForAudit(c, config, {});
  bool differs = false;
  for (size_t i = 0; i < items.size(); ++i) differs = differs || items[i].email_id != other[i].email_id;
  EXPECT_TRUE(differs);
  EXPECT_EQ(SelectForAudit(c, config, {items[3].email_id}).size(), 1u);
  EXPECT_THROW(SelectForAudit(c, config, {"ffffffffffffffff"}), Error);
}

TEST(Verify, FixturesPassAndFailAsExpected) {
  std::ostringstream out;
  for (const auto& r : RunVerify({}, out)) EXPECT_TRUE(r.pass) << r.name << " " << r.max_abs_deviation;
  VerifyOptions one;
  one.n_samples = 1;
  size_t failed = 0;
  for (const auto& r : RunVerify(one, out)) failed += !r.pass;
  EXPECT_GT(failed, 0u);
}

TEST(Cli, IngestCountsAndIsReproducible) {
  TempDir dir("ingest");
  const std::string args = "ingest --phishing '" + Data("phishing.mbox") + "' --ham '" +
                           Data("ham.mbox") + "' --train-fraction 0.5";
  const CliResult first = Cli(dir, args);
  ASSERT_EQ(first.exit_code, 0) << first.err;
  EXPECT_EQ(first.out, "phishing=4 ham=4\ntrain=4 val=4 skipped=1 duplicates=0\n");
  const std::string train = ReadFileOrThrow(dir / "corpus" / "train.jsonl");
  const std::string val = ReadFileOrThrow(dir / "corpus" / "val.jsonl");
  EXPECT_EQ(Lines(train), 4u);
  EXPECT_EQ(Lines(ReadFileOrThrow(dir / "corpus" / "skipped.jsonl")), 1u);
  ASSERT_EQ(Cli(dir, args).exit_code, 0);
  EXPECT_EQ(ReadFileOrThrow(dir / "corpus" / "train.jsonl"), train);
  EXPECT_EQ(ReadFileOrThrow(dir / "corpus" / "val.jsonl"), val);
}

TEST(Cli, IngestMissingPathFails) {
  TempDir dir("ingest");
  const CliResult r = Cli(dir, "ingest --phishing '" + Data("nope.mbox") + ":mbox'");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("nope.mbox"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir("usage");
  EXPECT_EQ(Cli(dir, "frobnicate").exit_code, 1);
  EXPECT_EQ(Cli(dir, "verify --n-samples notanumber").exit_code, 1);
  EXPECT_EQ(Cli(dir, "--help").exit_code, 0);
}

TEST(Cli, TrainBceOnSeparableCorpus) {
  TempDir dir("train");
  WriteSeparableSplit(dir, 60, 20);
  const CliResult r = Cli(dir, "train --objective bce --epochs 100");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string metrics = ReadFileOrThrow(dir / "out" / "metrics.csv");
  EXPECT_EQ(metrics.rfind("epoch,train_loss,val_loss,train_acc,val_acc\n", 0), 0u);
  EXPECT_EQ(Lines(metrics), 102u);
  const std::string last = metrics.substr(metrics.rfind('\n', metrics.size() - 2) + 1);
  EXPECT_GE(std::stod(last.substr(last.rfind(',') + 1)), 0.95) << last;
  EXPECT_TRUE(fs::exists(dir / "out" / "model.ckpt"));
}

TEST(Cli, TrainDpoStartsAtLn2) {
  TempDir dir("train");
  WriteSeparableSplit(dir, 20, 10);
  const CliResult r = Cli(dir, "train --objective dpo --epochs 3");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string metrics = ReadFileOrThrow(dir / "out" / "metrics.csv");
  EXPECT_NE(metrics.find("\n0,0.693147,0.693147,"), std::string::npos) << metrics;
}

TEST(Cli, UnknownObjectiveExitsOne) {
  TempDir dir("train");
  WriteSeparableSplit(dir, 5, 5);
  const CliResult r = Cli(dir, "train --objective sgd");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("bce, contrastive, dpo"), std::string::npos) << r.err;
}

TEST(Cli, AuditWritesArtifactsDeterministically) {
  TempDir dir("audit");
  WriteSeparableSplit(dir, 40, 25);
  ASSERT_EQ(Cli(dir, "train --epochs 30").exit_code, 0);
  const std::string args = "audit --per-class 20 --n-samples 64 --jobs 4";
  const CliResult r = Cli(dir, args);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string jsonl = ReadFileOrThrow(dir / "out" / "reports.jsonl");
  EXPECT_EQ(Lines(jsonl), 40u);
  EXPECT_EQ(Lines(ReadFileOrThrow(dir / "out" / "summary.csv")), 3u);
  EXPECT_NE(r.out.find("phishing=20 ham=20 failed=0"), std::string::npos) << r.out;
  EXPECT_NE(ReadFileOrThrow(dir / "out" / "reports.txt").find("[CC-SHAP]"), std::string::npos);

  const std::string csv = ReadFileOrThrow(dir / "out" / "summary.csv");
  const size_t row = csv.find('\n') + 1;
  const std::string model = csv.substr(row, csv.find(',', row) - row);
  const auto reports = audit::ReadReportsJsonl(dir / "out" / "reports.jsonl");
  EXPECT_EQ(audit::SummaryCsv({audit::Aggregate(reports, model)}), csv);
  ASSERT_EQ(Cli(dir, "audit --per-class 20 --n-samples 64 --jobs 1").exit_code, 0);
  EXPECT_EQ(ReadFileOrThrow(dir / "out" / "reports.jsonl"), jsonl);
}

TEST(Cli, SelfConsistentAuditScoresOne) {
  TempDir dir("audit");
  WriteSeparableSplit(dir, 30, 20);
  ASSERT_EQ(Cli(dir, "train --epochs 20").exit_code, 0);
  const CliResult r = Cli(dir, "audit --self-consistent --per-class 5 --n-samples 32");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("1.0000 \xC2\xB1 0.0000 | 1.0000 \xC2\xB1 0.0000"), std::string::npos) << r.out;
}

TEST(Cli, RemoteWithoutServerExitsThree) {
  TempDir dir("audit");
  WriteSeparableSplit(dir, 5, 5);
  const CliResult r = Cli(dir,
                          "audit --backend remote --base-url http://127.0.0.1:1 --model-name m "
                          "--max-retries 0 --per-class 1 --n-samples 2");
  EXPECT_EQ(r.exit_code, 3) << r.err;
}

TEST(Cli, VerifyExitCodes) {
  TempDir dir("verify");
  const CliResult ok = Cli(dir, "verify");
  EXPECT_EQ(ok.exit_code, 0) << ok.out;
  EXPECT_NE(ok.out.find("planted_dummy"), std::string::npos);
  const CliResult bad = Cli(dir, "verify --n-samples 1");
  EXPECT_EQ(bad.exit_code, 4) << bad.out;
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(Cli, WriteConfigThenReuse) {
  TempDir dir("config");
  WriteSeparableSplit(dir, 5, 5);
  ASSERT_EQ(Cli(dir, "train --write-config cfg.json --seed 5 --epochs 2").exit_code, 0);
  const AuditConfig c = LoadConfig(dir / "cfg.json");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.training.epochs, 2);
  const std::string metrics = ReadFileOrThrow(dir / "out" / "metrics.csv");
  fs::remove(dir / "out" / "metrics.csv");
  ASSERT_EQ(Cli(dir, "train --config cfg.json").exit_code, 0);
  EXPECT_EQ(ReadFileOrThrow(dir / "out" / "metrics.csv"), metrics);
}

}  // namespace
}  // namespace ccshap::harness
