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

// Desk-scale stand-in for a fine-tuned classifier: a logistic model over
// hashed token features, three trainers (cross-entropy, triplet margin,
// preference optimization), a template explanation generator, and a
// scoring backend wrapping all of it.

#ifndef CCSHAP_TOY_MODEL_H_
#define CCSHAP_TOY_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccshap/corpus.h"
#include "ccshap/label.h"
#include "ccshap/scoring.h"

namespace ccshap::toy {

using scoring::TokenSequence;

// Sparse feature vector: (bucket, value) pairs, buckets ascending and
// unique.
using Features = std::vector<std::pair<uint32_t, double>>;

// logit(x) = bias + sum over visible positions j of w[bucket(t_j)] / sqrt(n),
// n = sequence length including padded positions. Padded positions
// contribute nothing, so the model is additive over positions in logit
// space. P(PHISHING | x) = logistic(logit).
class LinearTextModel {
 public:
  static constexpr size_t kDefaultDim = size_t{1} << 16;

  explicit LinearTextModel(size_t dim = kDefaultDim, uint64_t hash_seed = 0);

  size_t dim() const { return weights_.size(); }
  uint64_t hash_seed() const { return hash_seed_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> mutable_weights() { return weights_; }
  double bias() const { return bias_; }
  void set_bias(double bias) { bias_ = bias; }

  uint32_t Bucket(int32_t token_id) const;
  Features Featurize(const TokenSequence& sequence) const;

  // Logit contribution of position j; zero if padded.
  double PositionContribution(const TokenSequence& sequence, size_t j) const;
  double Logit(const TokenSequence& sequence) const;
  double Probability(const TokenSequence& sequence, Label label) const;
  Label Predict(const TokenSequence& sequence) const;

  // Digest of weights, bias and hashing parameters.
  uint64_t Fingerprint() const;

  // Binary checkpoint, little-endian: magic "CCSHAPLM", u32 version, u64 dim,
  // u64 hash_seed, dim x f64 weights, f64 bias.
  void Save(const std::filesystem::path& path) const;
  static LinearTextModel Load(const std::filesystem::path& path);

  bool operator==(const LinearTextModel&) const = default;

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
  uint64_t hash_seed_ = 0;
};

struct TrainingConfig {
  double learning_rate = 0.1;
  int epochs = 100;
  // Mini-batch size; 0 means full-batch gradient descent.
  size_t batch_size = 16;
  uint64_t seed = 0;
  size_t dim = LinearTextModel::kDefaultDim;
  uint64_t hash_seed = 0;
  scoring::TokenizerOptions tokenizer;
  std::string prompt_template = std::string(corpus::kDefaultTemplate);
};

// One row of the metrics CSV. Epoch 0 describes the model before any
// update.
struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  LinearTextModel model;
  std::vector<EpochMetrics> metrics;
};

// Tokenized model input for an email (template rendered, all tokens kept).
TokenSequence EncodeEmail(const corpus::CleanEmail& email, const TrainingConfig& config);

// Mean binary cross-entropy by gradient descent.
TrainResult TrainBce(const corpus::Corpus& train, const corpus::Corpus& validation,
                     const TrainingConfig& config);

struct Triplet {
  TokenSequence anchor;
  TokenSequence positive;  // same label as anchor
  TokenSequence negative;  // opposite label
  Label anchor_label = Label::kPhishing;
};

// One triplet per anchor: positive and negative drawn uniformly from the
// anchor's class (excluding itself) and the other class.
std::vector<Triplet> MineTriplets(const corpus::Corpus& corpus,
                                  const TrainingConfig& config, uint64_t seed);

// Scalar embedding e(x) = logit(x) - bias, Euclidean distance |e(a) - e(b)|.
double TripletLoss(const LinearTextModel& model, const Triplet& triplet, double margin);

// Minimizes mean max(0, d(a,p) - d(a,n) + margin). The result model's bias
// and orientation are then set so that its logit separates the class
// centroids of the training anchors; accuracy columns use that rule.
TrainResult TrainContrastive(const std::vector<Triplet>& train,
                             const std::vector<Triplet>& validation, double margin,
                             const TrainingConfig& config);

// Re-mines triplets from the corpora at every epoch (seeded by epoch).
TrainResult TrainContrastive(const corpus::Corpus& train, const corpus::Corpus& validation,
                             double margin, const TrainingConfig& config);

struct PreferencePair {
  TokenSequence input;
  Label preferred;
  Label rejected;
};

// (input, true label, wrong label) for every record.
std::vector<PreferencePair> MakePreferencePairs(const corpus::Corpus& corpus,
                                                const TrainingConfig& config);

// -log sigmoid(beta * [(log pi(w|x) - log ref(w|x)) - (log pi(l|x) - log ref(l|x))])
double DpoLoss(const LinearTextModel& policy, const LinearTextModel& reference,
               const PreferencePair& pair, double beta);

// The policy starts as a copy of `reference`, which stays frozen.
TrainResult TrainDpo(const std::vector<PreferencePair>& train,
                     const std::vector<PreferencePair>& validation, double beta,
                     const LinearTextModel& reference, const TrainingConfig& config);

// "Classified as {LABEL} because of: tok1, tok2, ..." citing the k player
// tokens with the largest |contribution|, strongest first (ties by
// position, each surface once, zero-contribution tokens never cited).
scoring::ExplanationTarget GenerateExplanation(const LinearTextModel& model,
                                               const TokenSequence& sequence,
                                               std::span<const int> players, size_t k);

// Scoring backend over a trained model. The explanation likelihood of each
// cited token t is logistic(s * logit(x) + g(t, x)) where s is +1 for a
// PHISHING explanation and -1 otherwise, and g is +copy_weight when t is
// visible in x and -copy_weight when it is masked.
class ToyBackend : public scoring::Backend {
 public:
  ToyBackend(LinearTextModel model, size_t k_explain = 5, double copy_weight = 2.0);

  std::string id() const override;
  double LabelProbability(const TokenSequence& masked, Label label) const override;
  std::vector<double> ExplanationLogprobs(
      const TokenSequence& masked, const scoring::ExplanationTarget& target) const override;
  scoring::ExplanationTarget Explain(const TokenSequence& full, std::span<const int> players,
                                     Label predicted) const override;

  const LinearTextModel& model() const { return model_; }

 private:
  LinearTextModel model_;
  size_t k_explain_;
  double copy_weight_;
  std::string id_;
};

// Writes epoch,train_loss,val_loss,train_acc,val_acc rows.
std::string MetricsCsv(const std::vector<EpochMetrics>& metrics);

// Synthetic, linearly separable corpus: every phishing email contains the
// token "urgent-verify", no legitimate email does; the rest of the text is
// drawn from a vocabulary shared by both classes.
corpus::Corpus MakeSeparableCorpus(size_t per_class, uint64_t seed);

}  // namespace ccshap::toy

#endif  // CCSHAP_TOY_MODEL_H_
