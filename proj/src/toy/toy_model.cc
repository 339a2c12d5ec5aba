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

#include "ccshap/toy_model.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>

#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "ccshap/text_util.h"

namespace ccshap::toy {
namespace {

constexpr std::string_view kCheckpointMagic = "CCSHAPLM";
constexpr uint32_t kCheckpointVersion = 1;

double LogSigmoid(double x) {
  // log(1 / (1 + e^-x)), stable for large |x|.
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void AppendU32(uint32_t v, std::string& out) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void AppendU64(uint64_t v, std::string& out) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t ReadU64(std::string_view data, size_t offset) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(data[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace

LinearTextModel::LinearTextModel(size_t dim, uint64_t hash_seed)
    : weights_(dim, 0.0), hash_seed_(hash_seed) {
  if (dim == 0) throw Error(ErrorKind::kConfig, "model dimension must be positive");
}

uint32_t LinearTextModel::Bucket(int32_t token_id) const {
  const uint64_t h = Mix64(static_cast<uint64_t>(static_cast<uint32_t>(token_id)) ^
                           Mix64(hash_seed_));
  return static_cast<uint32_t>(h % weights_.size());
}

Features LinearTextModel::Featurize(const TokenSequence& sequence) const {
  std::map<uint32_t, double> acc;
  if (sequence.size() == 0) return {};
  const double scale = 1.0 / std::sqrt(static_cast<double>(sequence.size()));
  for (size_t j = 0; j < sequence.size(); ++j) {
    if (sequence.ids[j] == sequence.pad_id) continue;
    acc[Bucket(sequence.ids[j])] += scale;
  }
  return Features(acc.begin(), acc.end());
}

double LinearTextModel::PositionContribution(const TokenSequence& sequence, size_t j) const {
  if (sequence.ids[j] == sequence.pad_id) return 0.0;
  return weights_[Bucket(sequence.ids[j])] /
         std::sqrt(static_cast<double>(sequence.size()));
}

double LinearTextModel::Logit(const TokenSequence& sequence) const {
  double z = bias_;
  for (size_t j = 0; j < sequence.size(); ++j) z += PositionContribution(sequence, j);
  return z;
}

double LinearTextModel::Probability(const TokenSequence& sequence, Label label) const {
  const double z = Logit(sequence);
  return Sigmoid(label == Label::kPhishing ? z : -z);
}

Label LinearTextModel::Predict(const TokenSequence& sequence) const {
  return Logit(sequence) >= 0.0 ? Label::kPhishing : Label::kLegitimate;
}

uint64_t LinearTextModel::Fingerprint() const {
  Fnv1a64 hash;
  hash.Update(static_cast<uint64_t>(weights_.size())).Update(hash_seed_);
  for (double w : weights_) hash.Update(std::bit_cast<uint64_t>(w));
  hash.Update(std::bit_cast<uint64_t>(bias_));
  return hash.digest();
}

void LinearTextModel::Save(const std::filesystem::path& path) const {
  std::string out(kCheckpointMagic);
  AppendU32(kCheckpointVersion, out);
  AppendU64(weights_.size(), out);
  AppendU64(hash_seed_, out);
  out.reserve(out.size() + 8 * (weights_.size() + 1));
  for (double w : weights_) AppendU64(std::bit_cast<uint64_t>(w), out);
  AppendU64(std::bit_cast<uint64_t>(bias_), out);
  WriteFileOrThrow(path, out);
}

LinearTextModel LinearTextModel::Load(const std::filesystem::path& path) {
  const std::string data = ReadFileOrThrow(path);
  constexpr size_t kHeader = 8 + 4 + 8 + 8;
  if (data.size() < kHeader || data.compare(0, 8, kCheckpointMagic) != 0) {
    throw Error(ErrorKind::kData, path.string() + " is not a model checkpoint");
  }
  uint32_t version = 0;
  for (int i = 0; i < 4; ++i) {
    version |= static_cast<uint32_t>(static_cast<unsigned char>(data[8 + i])) << (8 * i);
  }
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kData, path.string() + ": unsupported checkpoint version " +
                                      std::to_string(version));
  }
  const uint64_t dim = ReadU64(data, 12);
  const uint64_t hash_seed = ReadU64(data, 20);
  if (dim == 0 || data.size() != kHeader + 8 * (dim + 1)) {
    throw Error(ErrorKind::kData, path.string() + ": truncated checkpoint");
  }
  LinearTextModel model(dim, hash_seed);
  for (uint64_t i = 0; i < dim; ++i) {
    model.weights_[i] = std::bit_cast<double>(ReadU64(data, kHeader + 8 * i));
  }
  model.bias_ = std::bit_cast<double>(ReadU64(data, kHeader + 8 * dim));
  return model;
}

scoring::ExplanationTarget GenerateExplanation(const LinearTextModel& model,
                                               const TokenSequence& sequence,
                                               std::span<const int> players, size_t k) {
  struct Candidate {
    std::string surface;
    double strength;
    int position;
  };
  std::vector<Candidate> candidates;
  for (int p : players) {
    const double strength = std::abs(model.PositionContribution(sequence, p));
    if (strength == 0.0) continue;
    const std::string& surface = sequence.surface[p];
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](const Candidate& c) { return c.surface == surface; });
    if (it == candidates.end()) {
      candidates.push_back({surface, strength, p});
    } else if (strength > it->strength) {
      it->strength = strength;
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.strength != b.strength) return a.strength > b.strength;
                     return a.position < b.position;
                   });
  if (candidates.size() > k) candidates.resize(k);

  scoring::ExplanationTarget target;
  target.label = model.Predict(sequence);
  for (const Candidate& c : candidates) target.tokens.push_back(c.surface);
  target.text = "Classified as " + std::string(LabelName(target.label));
  if (target.tokens.empty()) {
    target.text += "; no individual token stood out.";
  } else {
    target.text += " because of: " + Join(target.tokens, ", ");
  }
  target.prompt = "toy:top-k-contributions";
  return target;
}

ToyBackend::ToyBackend(LinearTextModel model, size_t k_explain, double copy_weight)
    : model_(std::move(model)), k_explain_(k_explain), copy_weight_(copy_weight) {
  if (k_explain_ == 0) throw Error(ErrorKind::kConfig, "explanation size k must be >= 1");
  id_ = "toy:" + HexDigest(model_.Fingerprint());
  char buf[64];
  std::snprintf(buf, sizeof(buf), ":k%zu:c%.17g", k_explain_, copy_weight_);
  id_ += buf;
}

std::string ToyBackend::id() const { return id_; }

double ToyBackend::LabelProbability(const TokenSequence& masked, Label label) const {
  return model_.Probability(masked, label);
}

std::vector<double> ToyBackend::ExplanationLogprobs(
    const TokenSequence& masked, const scoring::ExplanationTarget& target) const {
  const double sign = target.label == Label::kPhishing ? 1.0 : -1.0;
  const double decision = sign * model_.Logit(masked);
  std::vector<double> out;
  out.reserve(target.tokens.size());
  for (const std::string& token : target.tokens) {
    bool visible = false;
    for (size_t j = 0; j < masked.size() && !visible; ++j) {
      visible = masked.ids[j] != masked.pad_id && masked.surface[j] == token;
    }
    out.push_back(LogSigmoid(decision + (visible ? copy_weight_ : -copy_weight_)));
  }
  return out;
}

scoring::ExplanationTarget ToyBackend::Explain(const TokenSequence& full,
                                               std::span<const int> players,
                                               Label predicted) const {
  scoring::ExplanationTarget target = GenerateExplanation(model_, full, players, k_explain_);
  target.label = predicted;
  return target;
}

std::string MetricsCsv(const std::vector<EpochMetrics>& metrics) {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc\n";
  char buf[160];
  for (const EpochMetrics& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f\n", m.epoch, m.train_loss,
                  m.val_loss, m.train_acc, m.val_acc);
    out += buf;
  }
  return out;
}

corpus::Corpus MakeSeparableCorpus(size_t per_class, uint64_t seed) {
  static constexpr std::array<std::string_view, 48> kVocabulary = {
      "account", "meeting",  "the",     "please",  "review",  "report",  "attached",
      "your",    "team",     "update",  "schedule", "call",   "we",      "to",
      "for",     "and",      "of",      "with",    "today",   "project", "office",
      "thanks",  "send",     "details", "access",  "number",  "price",   "bank",
      "click",   "here",     "link",    "week",    "contract", "energy", "market",
      "online",  "security", "service", "notice",  "confirm", "request", "payment",
      "is",      "this",     "our",     "in",      "on",      "information"};
  static constexpr std::array<std::string_view, 8> kSenders = {
      "alice@example.com", "bob@example.org",   "carol@example.net", "dave@example.com",
      "erin@example.org",  "frank@example.net", "grace@example.com", "heidi@example.org"};
  Rng rng(seed);
  auto words = [&](size_t count) {
    std::vector<std::string> out;
    for (size_t i = 0; i < count; ++i) {
      out.emplace_back(kVocabulary[rng.Below(kVocabulary.size())]);
    }
    return out;
  };
  std::vector<corpus::CleanEmail> records;
  for (size_t i = 0; i < 2 * per_class; ++i) {
    corpus::CleanEmail email;
    email.label = i % 2 == 0 ? Label::kPhishing : Label::kLegitimate;
    email.sender = std::string(kSenders[rng.Below(kSenders.size())]);
    email.subject = Join(words(2 + rng.Below(3)), " ");
    std::vector<std::string> body = words(8 + rng.Below(10));
    if (email.label == Label::kPhishing) {
      body.insert(body.begin() + static_cast<std::ptrdiff_t>(rng.Below(body.size() + 1)),
                  "urgent-verify");
    }
    email.body = Join(body, " ");
    email.content_hash = corpus::ContentHash(email.sender, email.subject, email.body);
    records.push_back(std::move(email));
  }
  return corpus::Corpus(std::move(records));
}

}  // namespace ccshap::toy
