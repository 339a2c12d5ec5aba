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

// ccshap: ingest | train | audit | verify
//
// Settings come from an optional JSON config (--config); any flag given on
// the command line overrides the file. The remote bearer token is read
// from CCSHAP_AUTH_TOKEN only.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccshap/error.h"
#include "ccshap/harness.h"
#include "ccshap/text_util.h"

namespace {

using ccshap::Error;
using ccshap::ErrorKind;
using ccshap::harness::AuditConfig;

// Command-line values; unset optionals leave the config untouched.
struct Flags {
  std::string config_path;
  std::string write_config;
  std::vector<std::string> phishing;
  std::vector<std::string> ham;
  std::vector<std::string> inputs;
  std::optional<std::string> corpus_dir, output_dir, eval_corpus, backend, checkpoint,
      base_url, model_name, explanation_prompt, estimator, objective, prompt_template,
      cache_path, reference;
  std::optional<size_t> n_samples, exact_limit, max_tokens, k_top, per_class, balance,
      batch_size, k_explain;
  std::optional<uint64_t> seed;
  std::optional<double> train_fraction, timeout, lr, margin, beta, copy_weight;
  std::optional<int> max_retries, max_in_flight, epochs, threads, jobs;
  bool attribute_template = false;
  bool self_consistent = false;
  std::vector<std::string> ids;
  std::string ids_file;
  double tolerance = 0.02;
};

template <typename T>
void Override(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

// "path[:format]" for --phishing/--ham, "path[:format[:origin]]" for --input.
ccshap::harness::InputSource ParseInput(const std::string& spec, const std::string& origin) {
  ccshap::harness::InputSource in;
  in.origin = origin;
  std::vector<std::string> parts;
  size_t start = 0;
  for (size_t colon = spec.find(':'); colon != std::string::npos; colon = spec.find(':', start)) {
    parts.push_back(spec.substr(start, colon - start));
    start = colon + 1;
  }
  parts.push_back(spec.substr(start));
  in.path = parts[0];
  if (parts.size() > 1 && !parts[1].empty()) in.format = parts[1];
  if (parts.size() > 2 && !parts[2].empty()) in.origin = parts[2];
  if (parts.size() > 3) throw Error(ErrorKind::kConfig, "bad input spec \"" + spec + "\"");
  return in;
}

AuditConfig Resolve(const Flags& f) {
  AuditConfig c = f.config_path.empty() ? AuditConfig{} : ccshap::harness::LoadConfig(f.config_path);
  if (!f.phishing.empty() || !f.ham.empty() || !f.inputs.empty()) {
    c.inputs.clear();
    for (const auto& p : f.phishing) c.inputs.push_back(ParseInput(p, "phishing"));
    for (const auto& p : f.ham) c.inputs.push_back(ParseInput(p, "ham"));
    for (const auto& p : f.inputs) c.inputs.push_back(ParseInput(p, "unlabeled"));
  }
  Override(f.corpus_dir, c.corpus_dir);
  Override(f.output_dir, c.output_dir);
  Override(f.eval_corpus, c.eval_corpus);
  if (f.backend) {
    if (*f.backend == "toy") {
      c.backend = ccshap::harness::BackendKind::kToy;
    } else if (*f.backend == "remote") {
      c.backend = ccshap::harness::BackendKind::kRemote;
    }
  }
  Override(f.checkpoint, c.toy.checkpoint);
  Override(f.k_explain, c.toy.k_explain);
  Override(f.copy_weight, c.toy.copy_weight);
  if (f.self_consistent) c.toy.self_consistent = true;
  Override(f.base_url, c.remote.base_url);
  Override(f.model_name, c.remote.model_name);
  Override(f.timeout, c.remote.timeout_seconds);
  Override(f.max_retries, c.remote.max_retries);
  Override(f.max_in_flight, c.remote.max_in_flight);
  Override(f.explanation_prompt, c.remote.explanation_prompt);
  Override(f.objective, c.training.objective);
  Override(f.lr, c.training.learning_rate);
  Override(f.epochs, c.training.epochs);
  Override(f.batch_size, c.training.batch_size);
  Override(f.margin, c.training.margin);
  Override(f.beta, c.training.beta);
  Override(f.reference, c.training.reference_checkpoint);
  Override(f.estimator, c.estimator);
  Override(f.n_samples, c.n_samples);
  Override(f.exact_limit, c.exact_limit);
  Override(f.seed, c.seed);
  Override(f.max_tokens, c.max_tokens);
  Override(f.k_top, c.k_top);
  Override(f.per_class, c.per_class_eval_count);
  Override(f.balance, c.balance_per_class);
  Override(f.train_fraction, c.train_fraction);
  Override(f.prompt_template, c.prompt_template);
  if (f.attribute_template) c.attribute_template = true;
  Override(f.threads, c.threads);
  Override(f.jobs, c.jobs);
  Override(f.cache_path, c.cache_path);
  ccshap::harness::ValidateConfig(c);
  if (!f.write_config.empty()) ccshap::harness::SaveConfig(f.write_config, c);
  return c;
}

void AddSharedFlags(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--write-config", f.write_config, "Write the resolved config to this file");
  app.add_option("--corpus-dir", f.corpus_dir, "Canonical corpus directory");
  app.add_option("--output-dir", f.output_dir, "Artifact directory");
  app.add_option("--seed", f.seed, "Global seed");
  app.add_option("--max-tokens", f.max_tokens, "Token budget per email");
  app.add_option("--prompt-template", f.prompt_template, "Input template with {sender} {subject} {body}");
  app.add_option("--threads", f.threads, "Worker threads");
}

void AddAuditFlags(CLI::App& app, Flags& f) {
  app.add_option("--backend", f.backend, "toy or remote")->check(CLI::IsMember({"toy", "remote"}));
  app.add_option("--checkpoint", f.checkpoint, "Toy model checkpoint");
  app.add_option("--k-explain", f.k_explain, "Tokens cited by toy explanations");
  app.add_option("--copy-weight", f.copy_weight, "Toy explanation copy weight");
  app.add_flag("--self-consistent", f.self_consistent,
               "Score explanations with the classifier itself");
  app.add_option("--base-url", f.base_url, "Remote server, http://host:port");
  app.add_option("--model-name", f.model_name, "Remote model name");
  app.add_option("--timeout", f.timeout, "Remote timeout in seconds");
  app.add_option("--max-retries", f.max_retries, "Remote retries per request");
  app.add_option("--max-in-flight", f.max_in_flight, "Concurrent remote requests");
  app.add_option("--explanation-prompt", f.explanation_prompt, "Remote explanation instruction");
  app.add_option("--estimator", f.estimator, "mc or exact")->check(CLI::IsMember({"mc", "exact"}));
  app.add_option("--n-samples", f.n_samples, "Permutations per Shapley estimate");
  app.add_option("--exact-limit", f.exact_limit, "Largest player count for exact Shapley");
  app.add_option("--k-top", f.k_top, "Tokens per top-token table");
  app.add_option("--per-class", f.per_class, "Emails audited per class");
  app.add_option("--eval-corpus", f.eval_corpus, "Corpus JSONL to audit");
  app.add_flag("--attribute-template", f.attribute_template, "Attribute template tokens too");
  app.add_option("--jobs", f.jobs, "Emails audited concurrently");
  app.add_option("--cache", f.cache_path, "Persistent score cache file");
  app.add_option("--ids", f.ids, "Email ids to audit instead of a seeded sample");
  app.add_option("--ids-file", f.ids_file, "File with one email id per line")
      ->check(CLI::ExistingFile);
}

int Run(int argc, char** argv) {
  CLI::App app{"Consistency audit of classifier explanations (CC-SHAP)"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* ingest = app.add_subcommand("ingest", "Load, clean, dedup, balance and split corpora");
  AddSharedFlags(*ingest, f);
  ingest->add_option("--phishing", f.phishing, "Phishing source, path[:format]");
  ingest->add_option("--ham", f.ham, "Legitimate source, path[:format]");
  ingest->add_option("--input", f.inputs, "Labeled source, path[:format[:origin]]");
  ingest->add_option("--balance", f.balance, "Records per class (0: smaller class)");
  ingest->add_option("--train-fraction", f.train_fraction, "Share of each class for training");

  CLI::App* train = app.add_subcommand("train", "Train the toy classifier");
  AddSharedFlags(*train, f);
  train->add_option("--objective", f.objective, "bce, contrastive or dpo");
  train->add_option("--checkpoint", f.checkpoint, "Checkpoint to write");
  train->add_option("--epochs", f.epochs, "Training epochs");
  train->add_option("--lr", f.lr, "Learning rate");
  train->add_option("--batch-size", f.batch_size, "Mini-batch size (0: full batch)");
  train->add_option("--margin", f.margin, "Triplet margin");
  train->add_option("--beta", f.beta, "Preference temperature");
  train->add_option("--reference", f.reference, "Reference checkpoint for dpo");

  CLI::App* audit = app.add_subcommand("audit", "Audit emails and write reports");
  AddSharedFlags(*audit, f);
  AddAuditFlags(*audit, f);

  CLI::App* verify = app.add_subcommand("verify", "Check Monte Carlo Shapley against exact values");
  verify->add_option("--n-samples", f.n_samples, "Permutations per estimate");
  verify->add_option("--seed", f.seed, "Sampling seed");
  verify->add_option("--tolerance", f.tolerance, "Largest allowed absolute deviation");
  verify->add_option("--threads", f.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*verify) {
      ccshap::harness::VerifyOptions options;
      options.n_samples = f.n_samples.value_or(options.n_samples);
      options.seed = f.seed.value_or(options.seed);
      options.tolerance = f.tolerance;
      options.threads = f.threads.value_or(options.threads);
      if (options.n_samples == 0) throw Error(ErrorKind::kConfig, "n_samples must be positive");
      std::vector<std::string> failing;
      for (const auto& r : ccshap::harness::RunVerify(options, std::cout)) {
        if (!r.pass) failing.push_back(r.name);
      }
      if (!failing.empty()) {
        throw Error(ErrorKind::kVerification,
                    "tolerance exceeded by: " + ccshap::Join(failing, ", "));
      }
      return 0;
    }
    const AuditConfig config = Resolve(f);
    if (*ingest) {
      ccshap::harness::RunIngest(config, std::cout);
    } else if (*train) {
      ccshap::harness::RunTrain(config, std::cout);
    } else if (*audit) {
      std::vector<std::string> ids = f.ids;
      if (!f.ids_file.empty()) {
        const std::string text = ccshap::ReadFileOrThrow(f.ids_file);
        size_t start = 0;
        while (start < text.size()) {
          size_t end = text.find('\n', start);
          if (end == std::string::npos) end = text.size();
          const auto id = ccshap::TrimWhitespace(std::string_view(text).substr(start, end - start));
          if (!id.empty()) ids.emplace_back(id);
          start = end + 1;
        }
      }
      const auto backend = ccshap::harness::MakeBackend(config);
      const auto run = ccshap::harness::RunAudit(config, *backend, ids, std::cout, std::cerr);
      std::cout << "reports=" << run.reports.size() << " failed=" << run.failures.size()
                << " output=" << config.output_dir << "\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "ccshap: " << ccshap::ErrorKindName(e.kind()) << ": " << e.what() << "\n";
    return ccshap::ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "ccshap: internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) { return Run(argc, argv); }
