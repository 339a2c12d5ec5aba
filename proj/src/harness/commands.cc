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

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "ccshap/error.h"
#include "ccshap/harness.h"
#include "ccshap/hashing.h"
#include "ccshap/score_cache.h"
#include "ccshap/text_util.h"

namespace ccshap::harness {
namespace {

namespace fs = std::filesystem;

corpus::Origin ParseOrigin(const std::string& origin) {
  if (origin == "phishing") return corpus::Origin::kPhishingSource;
  if (origin == "ham") return corpus::Origin::kHamSource;
  return corpus::Origin::kUnlabeled;
}

void EnsureDirectory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorKind::kConfig, "cannot create directory " + dir.string() + ": " + ec.message());
  }
}

// Owns the inner backend of a self-consistent wrapper.
class OwningSelfConsistent : public audit::SelfConsistentBackend {
 public:
  explicit OwningSelfConsistent(std::unique_ptr<scoring::Backend> inner)
      : audit::SelfConsistentBackend(*inner), inner_(std::move(inner)) {}

 private:
  std::unique_ptr<scoring::Backend> inner_;
};

toy::TrainingConfig MakeTrainingConfig(const AuditConfig& c) {
  toy::TrainingConfig t;
  t.learning_rate = c.training.learning_rate;
  t.epochs = c.training.epochs;
  t.batch_size = c.training.batch_size;
  t.seed = c.seed;
  t.dim = c.training.dim;
  t.hash_seed = c.training.hash_seed;
  t.tokenizer.max_tokens = c.max_tokens;
  t.prompt_template = c.prompt_template;
  return t;
}

std::string Percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * fraction);
  return buf;
}

}  // namespace

std::unique_ptr<scoring::Backend> MakeBackend(const AuditConfig& c) {
  std::unique_ptr<scoring::Backend> backend;
  if (c.backend == BackendKind::kRemote) {
    remote::RemoteEndpoint endpoint = c.remote;
    if (const char* token = std::getenv(kAuthTokenEnv); token != nullptr && *token != '\0') {
      endpoint.auth_token = token;
    }
    backend = std::make_unique<remote::RemoteBackend>(std::move(endpoint));
  } else {
    backend = std::make_unique<toy::ToyBackend>(toy::LinearTextModel::Load(CheckpointPath(c)),
                                                c.toy.k_explain, c.toy.copy_weight);
  }
  if (c.toy.self_consistent) {
    return std::make_unique<OwningSelfConsistent>(std::move(backend));
  }
  return backend;
}

IngestResult RunIngest(const AuditConfig& c, std::ostream& out) {
  if (c.inputs.empty()) throw Error(ErrorKind::kConfig, "ingest needs at least one input");
  std::vector<corpus::RawEmail> raw;
  IngestResult result;
  for (const auto& in : c.inputs) {
    std::optional<corpus::Format> format =
        in.format == "auto" ? corpus::DetectFormat(in.path) : corpus::ParseFormat(in.format);
    if (!format) {
      if (!fs::exists(in.path)) {
        throw Error(ErrorKind::kIngestion, in.path + ": no such file or directory");
      }
      throw Error(ErrorKind::kConfig, in.path + ": cannot infer the corpus format; set it explicitly");
    }
    corpus::LoadResult loaded = corpus::LoadCorpus(in.path, *format, ParseOrigin(in.origin));
    raw.insert(raw.end(), std::make_move_iterator(loaded.emails.begin()),
               std::make_move_iterator(loaded.emails.end()));
    result.skipped.insert(result.skipped.end(), loaded.skipped.begin(), loaded.skipped.end());
  }
  corpus::CleanOptions options;
  options.min_stopword_ratio = c.min_stopword_ratio;
  corpus::CleanResult cleaned = corpus::CleanAll(raw, options, c.threads);
  result.skipped.insert(result.skipped.end(), cleaned.skipped.begin(), cleaned.skipped.end());
  const corpus::Corpus deduped(corpus::Deduplicate(cleaned.emails));
  result.per_class = c.balance_per_class;
  if (result.per_class == 0) {
    result.per_class =
        std::min(deduped.count(Label::kPhishing), deduped.count(Label::kLegitimate));
  }
  const corpus::Corpus balanced = corpus::Balance(deduped, result.per_class, c.seed);
  result.split = corpus::SplitCorpus(balanced, c.train_fraction, c.seed);

  const fs::path dir = c.corpus_dir;
  EnsureDirectory(dir);
  corpus::WriteCorpusJsonl(dir / "train.jsonl", result.split.train);
  corpus::WriteCorpusJsonl(dir / "val.jsonl", result.split.validation);
  corpus::WriteSkipReport(dir / "skipped.jsonl", result.skipped);
  out << "phishing=" << balanced.count(Label::kPhishing)
      << " ham=" << balanced.count(Label::kLegitimate) << "\n";
  out << "train=" << result.split.train.size() << " val=" << result.split.validation.size()
      << " skipped=" << result.skipped.size() << " duplicates="
      << cleaned.emails.size() - deduped.size() << "\n";
  return result;
}

toy::TrainResult RunTrain(const AuditConfig& c, std::ostream& out) {
  const fs::path dir = c.corpus_dir;
  const corpus::Corpus train = corpus::ReadCorpusJsonl(dir / "train.jsonl");
  const corpus::Corpus validation = corpus::ReadCorpusJsonl(dir / "val.jsonl");
  const toy::TrainingConfig t = MakeTrainingConfig(c);
  toy::TrainResult result;
  if (c.training.objective == "bce") {
    result = toy::TrainBce(train, validation, t);
  } else if (c.training.objective == "contrastive") {
    result = toy::TrainContrastive(train, validation, c.training.margin, t);
  } else if (c.training.objective == "dpo") {
    const toy::LinearTextModel reference =
        c.training.reference_checkpoint.empty()
            ? toy::LinearTextModel(t.dim, t.hash_seed)
            : toy::LinearTextModel::Load(c.training.reference_checkpoint);
    result = toy::TrainDpo(toy::MakePreferencePairs(train, t),
                           toy::MakePreferencePairs(validation, t), c.training.beta, reference, t);
  } else {
    throw Error(ErrorKind::kConfig, "unknown objective \"" + c.training.objective +
                                        "\"; valid values: bce, contrastive, dpo");
  }
  const fs::path checkpoint = CheckpointPath(c);
  if (checkpoint.has_parent_path()) EnsureDirectory(checkpoint.parent_path());
  EnsureDirectory(c.output_dir);
  result.model.Save(checkpoint);
  const fs::path metrics = fs::path(c.output_dir) / "metrics.csv";
  WriteFileOrThrow(metrics, toy::MetricsCsv(result.metrics));
  const toy::EpochMetrics& last = result.metrics.back();
  out << "objective=" << c.training.objective << " epochs=" << last.epoch
      << " train_acc=" << Percent(last.train_acc) << " val_acc=" << Percent(last.val_acc) << "\n";
  out << "checkpoint=" << checkpoint.string() << " metrics=" << metrics.string() << "\n";
  return result;
}

std::vector<audit::AuditItem> SelectForAudit(const corpus::Corpus& corpus,
                                             const AuditConfig& c,
                                             const std::vector<std::string>& ids) {
  const auto& records = corpus.records();
  std::vector<size_t> chosen;
  if (!ids.empty()) {
    std::set<std::string> wanted(ids.begin(), ids.end());
    for (size_t i = 0; i < records.size(); ++i) {
      if (wanted.erase(audit::EmailId(records[i]))) chosen.push_back(i);
    }
    if (!wanted.empty()) {
      throw Error(ErrorKind::kConfig, "unknown email id " + *wanted.begin() +
                                          " (ids are the 16-hex content hashes)");
    }
  } else {
    for (Label label : kAllLabels) {
      std::vector<size_t> pool;
      for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].label == label) pool.push_back(i);
      }
      Rng rng(DeriveSeed(c.seed, label == Label::kPhishing ? 21 : 22));
      const size_t take = std::min(c.per_class_eval_count, pool.size());
      for (size_t k = 0; k < take; ++k) {
        std::swap(pool[k], pool[k + rng.Below(pool.size() - k)]);
      }
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(chosen.begin(), chosen.end());
  }
  std::vector<audit::AuditItem> items;
  for (size_t i : chosen) items.push_back({audit::EmailId(records[i]), records[i]});
  return items;
}

AuditRun RunAudit(const AuditConfig& c, const scoring::Backend& backend,
                  const std::vector<std::string>& ids, std::ostream& out, std::ostream& log) {
  const corpus::Corpus eval = corpus::ReadCorpusJsonl(EvalCorpusPath(c));
  const std::vector<audit::AuditItem> items = SelectForAudit(eval, c, ids);
  if (items.empty()) throw Error(ErrorKind::kData, "nothing to audit: the evaluation corpus is empty");
  for (Label label : kAllLabels) {
    size_t n = 0;
    for (const auto& item : items) n += item.email.label == label;
    if (ids.empty() && n < c.per_class_eval_count) {
      log << "warning: only " << n << " " << audit::ClassName(label)
          << " emails available (requested " << c.per_class_eval_count << ")\n";
    }
  }

  std::unique_ptr<scoring::ScoreCache> cache;
  if (!c.cache_path.empty()) {
    cache = std::make_unique<scoring::ScoreCache>(c.cache_path);
  } else if (c.backend == BackendKind::kRemote) {
    cache = std::make_unique<scoring::ScoreCache>();
  }
  const audit::AuditOptions options = MakeAuditOptions(c);
  const std::vector<audit::AuditOutcome> outcomes =
      audit::AuditBatch(items, backend, options, c.jobs, cache.get());

  AuditRun run;
  std::string jsonl;
  std::string text;
  for (const auto& outcome : outcomes) {
    if (const auto* report = std::get_if<audit::CcShapReport>(&outcome)) {
      jsonl += audit::ReportJsonLine(*report) + "\n";
      if (!text.empty()) text += "\n";
      text += audit::FormatTextReport(*report);
      run.reports.push_back(*report);
    } else {
      const auto& failure = std::get<audit::AuditFailure>(outcome);
      log << "audit failed: " << failure.message << "\n";
      run.failures.push_back(failure);
    }
  }
  if (run.reports.empty()) {
    const auto& first = run.failures.front();
    throw Error(first.kind, "no email could be audited (" + std::to_string(run.failures.size()) +
                                " failures); first: " + first.message);
  }
  run.summary = audit::Aggregate(run.reports, backend.id(), run.failures.size());

  const fs::path dir = c.output_dir;
  EnsureDirectory(dir);
  WriteFileOrThrow(dir / "reports.jsonl", jsonl);
  WriteFileOrThrow(dir / "reports.txt", text);
  WriteFileOrThrow(dir / "summary.csv", audit::SummaryCsv({run.summary}));
  out << audit::SummaryTable({run.summary});
  return run;
}

}  // namespace ccshap::harness
