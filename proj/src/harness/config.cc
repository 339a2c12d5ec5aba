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

#include <cstdlib>
#include <set>

#include "ccshap/error.h"
#include "ccshap/harness.h"
#include "ccshap/hashing.h"
#include "ccshap/text_util.h"

namespace ccshap::harness {
namespace {

using nlohmann::ordered_json;

// Reads json[key] into *field when present; rejects keys not in `known`.
class Reader {
 public:
  Reader(const ordered_json& json, std::string scope) : json_(json), scope_(std::move(scope)) {
    if (!json_.is_object()) {
      throw Error(ErrorKind::kConfig, scope_ + " must be a JSON object");
    }
  }

  template <typename T>
  void Get(const std::string& key, T* field) {
    known_.insert(key);
    if (!json_.contains(key)) return;
    try {
      *field = json_.at(key).get<T>();
    } catch (const ordered_json::exception&) {
      throw Error(ErrorKind::kConfig,
                  "config field " + scope_ + key + " has the wrong type: " + json_.at(key).dump());
    }
  }

  const ordered_json* Child(const std::string& key) {
    known_.insert(key);
    return json_.contains(key) ? &json_.at(key) : nullptr;
  }

  void RejectUnknown() const {
    for (const auto& item : json_.items()) {
      if (!known_.count(item.key())) {
        throw Error(ErrorKind::kConfig, "unknown config field " + scope_ + item.key());
      }
    }
  }

 private:
  const ordered_json& json_;
  std::string scope_;
  std::set<std::string> known_;
};

std::string BackendName(BackendKind kind) { return kind == BackendKind::kToy ? "toy" : "remote"; }

}  // namespace

ordered_json ConfigToJson(const AuditConfig& c) {
  ordered_json inputs = ordered_json::array();
  for (const auto& in : c.inputs) {
    inputs.push_back({{"path", in.path}, {"format", in.format}, {"origin", in.origin}});
  }
  ordered_json out;
  out["inputs"] = inputs;
  out["corpus_dir"] = c.corpus_dir;
  out["balance_per_class"] = c.balance_per_class;
  out["train_fraction"] = c.train_fraction;
  out["min_stopword_ratio"] = c.min_stopword_ratio;
  out["backend"] = BackendName(c.backend);
  out["toy"] = {{"checkpoint", c.toy.checkpoint},
                {"k_explain", c.toy.k_explain},
                {"copy_weight", c.toy.copy_weight},
                {"self_consistent", c.toy.self_consistent}};
  out["remote"] = {{"base_url", c.remote.base_url},
                   {"model_name", c.remote.model_name},
                   {"timeout_seconds", c.remote.timeout_seconds},
                   {"max_retries", c.remote.max_retries},
                   {"max_in_flight", c.remote.max_in_flight},
                   {"backoff_base_ms", c.remote.backoff_base.count()},
                   {"backoff_factor", c.remote.backoff_factor},
                   {"explanation_prompt", c.remote.explanation_prompt}};
  out["training"] = {{"objective", c.training.objective},
                     {"learning_rate", c.training.learning_rate},
                     {"epochs", c.training.epochs},
                     {"batch_size", c.training.batch_size},
                     {"margin", c.training.margin},
                     {"beta", c.training.beta},
                     {"dim", c.training.dim},
                     {"hash_seed", c.training.hash_seed},
                     {"reference_checkpoint", c.training.reference_checkpoint}};
  out["estimator"] = c.estimator;
  out["n_samples"] = c.n_samples;
  out["exact_limit"] = c.exact_limit;
  out["seed"] = c.seed;
  out["max_tokens"] = c.max_tokens;
  out["k_top"] = c.k_top;
  out["per_class_eval_count"] = c.per_class_eval_count;
  out["eval_corpus"] = c.eval_corpus;
  out["output_dir"] = c.output_dir;
  out["prompt_template"] = c.prompt_template;
  out["attribute_template"] = c.attribute_template;
  out["threads"] = c.threads;
  out["jobs"] = c.jobs;
  out["cache_path"] = c.cache_path;
  return out;
}

AuditConfig ConfigFromJson(const ordered_json& json) {
  AuditConfig c;
  Reader top(json, "");
  if (const auto* inputs = top.Child("inputs")) {
    if (!inputs->is_array()) throw Error(ErrorKind::kConfig, "config field inputs must be a list");
    for (const auto& item : *inputs) {
      InputSource in;
      Reader r(item, "inputs[].");
      r.Get("path", &in.path);
      r.Get("format", &in.format);
      r.Get("origin", &in.origin);
      r.RejectUnknown();
      c.inputs.push_back(std::move(in));
    }
  }
  top.Get("corpus_dir", &c.corpus_dir);
  top.Get("balance_per_class", &c.balance_per_class);
  top.Get("train_fraction", &c.train_fraction);
  top.Get("min_stopword_ratio", &c.min_stopword_ratio);
  std::string backend = BackendName(c.backend);
  top.Get("backend", &backend);
  if (backend == "toy") {
    c.backend = BackendKind::kToy;
  } else if (backend == "remote") {
    c.backend = BackendKind::kRemote;
  } else {
    throw Error(ErrorKind::kConfig, "unknown backend \"" + backend + "\"; valid values: toy, remote");
  }
  if (const auto* toy = top.Child("toy")) {
    Reader r(*toy, "toy.");
    r.Get("checkpoint", &c.toy.checkpoint);
    r.Get("k_explain", &c.toy.k_explain);
    r.Get("copy_weight", &c.toy.copy_weight);
    r.Get("self_consistent", &c.toy.self_consistent);
    r.RejectUnknown();
  }
  if (const auto* remote = top.Child("remote")) {
    Reader r(*remote, "remote.");
    r.Get("base_url", &c.remote.base_url);
    r.Get("model_name", &c.remote.model_name);
    r.Get("timeout_seconds", &c.remote.timeout_seconds);
    r.Get("max_retries", &c.remote.max_retries);
    r.Get("max_in_flight", &c.remote.max_in_flight);
    int64_t backoff_ms = c.remote.backoff_base.count();
    r.Get("backoff_base_ms", &backoff_ms);
    c.remote.backoff_base = std::chrono::milliseconds(backoff_ms);
    r.Get("backoff_factor", &c.remote.backoff_factor);
    r.Get("explanation_prompt", &c.remote.explanation_prompt);
    r.RejectUnknown();
  }
  if (const auto* training = top.Child("training")) {
    Reader r(*training, "training.");
    r.Get("objective", &c.training.objective);
    r.Get("learning_rate", &c.training.learning_rate);
    r.Get("epochs", &c.training.epochs);
    r.Get("batch_size", &c.training.batch_size);
    r.Get("margin", &c.training.margin);
    r.Get("beta", &c.training.beta);
    r.Get("dim", &c.training.dim);
    r.Get("hash_seed", &c.training.hash_seed);
    r.Get("reference_checkpoint", &c.training.reference_checkpoint);
    r.RejectUnknown();
  }
  top.Get("estimator", &c.estimator);
  top.Get("n_samples", &c.n_samples);
  top.Get("exact_limit", &c.exact_limit);
  top.Get("seed", &c.seed);
  top.Get("max_tokens", &c.max_tokens);
  top.Get("k_top", &c.k_top);
  top.Get("per_class_eval_count", &c.per_class_eval_count);
  top.Get("eval_corpus", &c.eval_corpus);
  top.Get("output_dir", &c.output_dir);
  top.Get("prompt_template", &c.prompt_template);
  top.Get("attribute_template", &c.attribute_template);
  top.Get("threads", &c.threads);
  top.Get("jobs", &c.jobs);
  top.Get("cache_path", &c.cache_path);
  top.RejectUnknown();
  return c;
}

void SaveConfig(const std::filesystem::path& path, const AuditConfig& config) {
  WriteFileOrThrow(path, ConfigToJson(config).dump(2) + "\n");
}

AuditConfig LoadConfig(const std::filesystem::path& path) {
  const std::string text = ReadFileOrThrow(path);
  ordered_json json;
  try {
    json = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return ConfigFromJson(json);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void ValidateConfig(const AuditConfig& c) {
  auto fail = [](const std::string& message) { throw Error(ErrorKind::kConfig, message); };
  for (const auto& in : c.inputs) {
    if (in.format != "auto" && !corpus::ParseFormat(in.format)) {
      fail("unknown input format \"" + in.format + "\"; valid values: auto, mbox, eml_dir, jsonl, csv");
    }
    if (in.origin != "phishing" && in.origin != "ham" && in.origin != "unlabeled") {
      fail("unknown input origin \"" + in.origin + "\"; valid values: phishing, ham, unlabeled");
    }
  }
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) fail("train_fraction must be in (0, 1)");
  if (c.min_stopword_ratio < 0.0 || c.min_stopword_ratio > 1.0) {
    fail("min_stopword_ratio must be in [0, 1]");
  }
  if (c.estimator != "mc" && c.estimator != "exact") {
    fail("unknown estimator \"" + c.estimator + "\"; valid values: mc, exact");
  }
  if (c.n_samples == 0) fail("n_samples must be positive");
  if (c.exact_limit == 0) fail("exact_limit must be positive");
  if (c.max_tokens == 0) fail("max_tokens must be positive");
  if (c.k_top == 0) fail("k_top must be positive");
  if (c.per_class_eval_count == 0) fail("per_class_eval_count must be positive");
  if (c.threads < 1) fail("threads must be positive");
  if (c.jobs < 1) fail("jobs must be positive");
  if (c.toy.k_explain == 0) fail("toy.k_explain must be positive");
  if (c.toy.copy_weight < 0.0) fail("toy.copy_weight must be non-negative");
  const auto& t = c.training;
  if (t.objective != "bce" && t.objective != "contrastive" && t.objective != "dpo") {
    fail("unknown objective \"" + t.objective + "\"; valid values: bce, contrastive, dpo");
  }
  if (!(t.learning_rate > 0.0)) fail("training.learning_rate must be positive");
  if (t.epochs < 1) fail("training.epochs must be positive");
  if (!(t.margin > 0.0)) fail("training.margin must be positive");
  if (!(t.beta > 0.0)) fail("training.beta must be positive");
  if (t.dim == 0) fail("training.dim must be positive");
  if (c.backend == BackendKind::kRemote) c.remote.Validate();
}

std::string ConfigDigest(const AuditConfig& config) {
  ordered_json json = ConfigToJson(config);
  for (const char* key : {"output_dir", "threads", "jobs", "cache_path"}) json.erase(key);
  return HexDigest(HashBytes(json.dump()));
}

audit::AuditOptions MakeAuditOptions(const AuditConfig& c) {
  audit::AuditOptions o;
  o.estimator = c.estimator == "exact" ? audit::Estimator::kExact : audit::Estimator::kMonteCarlo;
  o.n_samples = c.n_samples;
  o.exact_limit = c.exact_limit;
  o.seed = c.seed;
  o.k_top = c.k_top;
  o.max_tokens = c.max_tokens;
  o.attribute_template = c.attribute_template;
  o.prompt_template = c.prompt_template;
  o.threads = c.threads;
  o.max_in_flight = c.backend == BackendKind::kRemote ? c.remote.max_in_flight : 0;
  o.config_digest = ConfigDigest(c);
  return o;
}

std::filesystem::path CheckpointPath(const AuditConfig& c) {
  if (!c.toy.checkpoint.empty()) return c.toy.checkpoint;
  return std::filesystem::path(c.output_dir) / "model.ckpt";
}

std::filesystem::path EvalCorpusPath(const AuditConfig& c) {
  if (!c.eval_corpus.empty()) return c.eval_corpus;
  return std::filesystem::path(c.corpus_dir) / "val.jsonl";
}

}  // namespace ccshap::harness
