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
#include <cmath>
#include <functional>
#include <numeric>

#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "ccshap/toy_model.h"

namespace ccshap::toy {
namespace {

double Softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double LogSigmoid(double x) { return -Softplus(-x); }

double Dot(const LinearTextModel& model, const Features& features) {
  const auto w = model.weights();
  double z = 0.0;
  for (const auto& [bucket, value] : features) z += w[bucket] * value;
  return z;
}

struct Example {
  Features features;
  Label label;
};

std::vector<Example> EncodeCorpus(const corpus::Corpus& corpus, const LinearTextModel& model,
                                  const TrainingConfig& config) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (const corpus::CleanEmail& email : corpus.records()) {
    out.push_back({model.Featurize(EncodeEmail(email, config)), email.label});
  }
  return out;
}

// Sparse gradient accumulator. Summation follows example order.
class Gradient {
 public:
  explicit Gradient(size_t dim) : dense_(dim, 0.0), touched_flag_(dim, false) {}

  void Add(const Features& features, double scale) {
    for (const auto& [bucket, value] : features) {
      if (!touched_flag_[bucket]) {
        touched_flag_[bucket] = true;
        touched_.push_back(bucket);
      }
      dense_[bucket] += scale * value;
    }
  }
  void AddBias(double g) { bias_ += g; }

  // w -= step * g, then reset.
  void Apply(LinearTextModel& model, double step, bool update_bias = true) {
    auto w = model.mutable_weights();
    for (uint32_t b : touched_) {
      w[b] -= step * dense_[b];
      dense_[b] = 0.0;
      touched_flag_[b] = false;
    }
    touched_.clear();
    if (update_bias) model.set_bias(model.bias() - step * bias_);
    bias_ = 0.0;
  }

 private:
  std::vector<double> dense_;
  std::vector<bool> touched_flag_;
  std::vector<uint32_t> touched_;
  double bias_ = 0.0;
};

// Batches for one epoch: full batch, or a seeded shuffle cut into
// batch_size pieces.
std::vector<std::vector<size_t>> MakeBatches(size_t count, const TrainingConfig& config,
                                             int epoch) {
  std::vector<size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<size_t>> batches;
  if (config.batch_size == 0 || config.batch_size >= count) {
    batches.push_back(std::move(order));
    return batches;
  }
  Rng rng(DeriveSeed(config.seed, 0xba7c0000ULL + static_cast<uint64_t>(epoch)));
  rng.Shuffle(std::span<size_t>(order));
  for (size_t i = 0; i < count; i += config.batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(count, i + config.batch_size)));
  }
  return batches;
}

void CheckFinite(double loss, int epoch, const char* objective) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::kTraining,
                std::string(objective) + " training diverged at epoch " +
                    std::to_string(epoch) + " (loss is not finite); lower the learning rate");
  }
}

void ValidateConfig(const TrainingConfig& config) {
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw Error(ErrorKind::kConfig, "learning rate must be positive");
  }
  if (config.epochs < 0) throw Error(ErrorKind::kConfig, "epochs must be >= 0");
}

double BceLoss(double logit, Label label) {
  return label == Label::kPhishing ? Softplus(-logit) : Softplus(logit);
}

struct LossAcc {
  double loss = 0.0;
  double acc = 0.0;
};

LossAcc EvaluateBce(const LinearTextModel& model, const std::vector<Example>& data) {
  LossAcc out;
  if (data.empty()) return out;
  for (const Example& ex : data) {
    const double z = Dot(model, ex.features) + model.bias();
    out.loss += BceLoss(z, ex.label);
    const Label predicted = z >= 0.0 ? Label::kPhishing : Label::kLegitimate;
    out.acc += predicted == ex.label ? 1.0 : 0.0;
  }
  out.loss /= static_cast<double>(data.size());
  out.acc /= static_cast<double>(data.size());
  return out;
}

// ---- contrastive ----------------------------------------------------------

struct IndexTriplet {
  size_t anchor, positive, negative;
};

struct Pool {
  std::vector<Features> features;
  std::vector<Label> labels;
};

double Embed(const LinearTextModel& model, const Features& f) { return Dot(model, f); }

double HingeTriplet(const LinearTextModel& model, const Pool& pool, const IndexTriplet& t,
                    double margin) {
  const double ea = Embed(model, pool.features[t.anchor]);
  const double ep = Embed(model, pool.features[t.positive]);
  const double en = Embed(model, pool.features[t.negative]);
  return std::max(0.0, std::abs(ea - ep) - std::abs(ea - en) + margin);
}

double MeanHinge(const LinearTextModel& model, const Pool& pool,
                 const std::vector<IndexTriplet>& triplets, double margin) {
  if (triplets.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : triplets) sum += HingeTriplet(model, pool, t, margin);
  return sum / static_cast<double>(triplets.size());
}

double Sign(double x) { return x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0; }

// Threshold at the midpoint of the class centroids; returns (orientation,
// bias) such that orientation * e(x) + bias > 0 predicts PHISHING.
std::pair<double, double> CentroidRule(const LinearTextModel& model, const Pool& pool) {
  double sum_p = 0.0, sum_l = 0.0;
  size_t n_p = 0, n_l = 0;
  for (size_t i = 0; i < pool.features.size(); ++i) {
    const double e = Embed(model, pool.features[i]);
    if (pool.labels[i] == Label::kPhishing) {
      sum_p += e;
      ++n_p;
    } else {
      sum_l += e;
      ++n_l;
    }
  }
  const double mu_p = n_p ? sum_p / static_cast<double>(n_p) : 0.0;
  const double mu_l = n_l ? sum_l / static_cast<double>(n_l) : 0.0;
  const double orientation = mu_p >= mu_l ? 1.0 : -1.0;
  return {orientation, -orientation * (mu_p + mu_l) / 2.0};
}

double CentroidAccuracy(const LinearTextModel& model, const Pool& pool,
                        std::pair<double, double> rule) {
  if (pool.features.empty()) return 0.0;
  double correct = 0.0;
  for (size_t i = 0; i < pool.features.size(); ++i) {
    const double score = rule.first * Embed(model, pool.features[i]) + rule.second;
    const Label predicted = score >= 0.0 ? Label::kPhishing : Label::kLegitimate;
    correct += predicted == pool.labels[i] ? 1.0 : 0.0;
  }
  return correct / static_cast<double>(pool.features.size());
}

std::vector<IndexTriplet> MineIndices(const std::vector<Label>& labels, uint64_t seed) {
  std::vector<size_t> by_class[2];
  for (size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i] == Label::kPhishing ? 0 : 1].push_back(i);
  }
  Rng rng(seed);
  std::vector<IndexTriplet> out;
  for (size_t i = 0; i < labels.size(); ++i) {
    const auto& same = by_class[labels[i] == Label::kPhishing ? 0 : 1];
    const auto& other = by_class[labels[i] == Label::kPhishing ? 1 : 0];
    if (same.size() < 2 || other.empty()) continue;
    size_t positive;
    do {
      positive = same[rng.Below(same.size())];
    } while (positive == i);
    out.push_back({i, positive, other[rng.Below(other.size())]});
  }
  return out;
}

TrainResult ContrastiveCore(const Pool& train_pool,
                            const std::function<std::vector<IndexTriplet>(int)>& mine,
                            const Pool& val_pool, const std::vector<IndexTriplet>& val_triplets,
                            double margin, const TrainingConfig& config) {
  ValidateConfig(config);
  if (margin < 0.0) throw Error(ErrorKind::kConfig, "triplet margin must be >= 0");
  LinearTextModel model(config.dim, config.hash_seed);
  {
    // Seeded N(0, 0.01^2) initialization.
    Rng rng(DeriveSeed(config.seed, 0xc0417a57ULL));
    for (double& w : model.mutable_weights()) w = 0.01 * rng.Normal();
  }
  TrainResult result{model, {}};
  auto record = [&](int epoch, const std::vector<IndexTriplet>& train_triplets) {
    const auto rule = CentroidRule(model, train_pool);
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = MeanHinge(model, train_pool, train_triplets, margin);
    m.val_loss = MeanHinge(model, val_pool, val_triplets, margin);
    m.train_acc = CentroidAccuracy(model, train_pool, rule);
    m.val_acc = CentroidAccuracy(model, val_pool, rule);
    CheckFinite(m.train_loss, epoch, "contrastive");
    result.metrics.push_back(m);
  };
  std::vector<IndexTriplet> triplets = mine(0);
  record(0, triplets);
  Gradient grad(model.dim());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    triplets = mine(epoch);
    for (const auto& batch : MakeBatches(triplets.size(), config, epoch)) {
      for (size_t idx : batch) {
        const IndexTriplet& t = triplets[idx];
        const Features& fa = train_pool.features[t.anchor];
        const Features& fp = train_pool.features[t.positive];
        const Features& fn = train_pool.features[t.negative];
        const double ea = Embed(model, fa), ep = Embed(model, fp), en = Embed(model, fn);
        if (std::abs(ea - ep) - std::abs(ea - en) + margin <= 0.0) continue;
        const double sp = Sign(ea - ep);
        const double sn = Sign(ea - en);
        // d/dw |ea - ep| = sp (fa - fp); d/dw |ea - en| = sn (fa - fn)
        grad.Add(fa, sp - sn);
        grad.Add(fp, -sp);
        grad.Add(fn, sn);
      }
      grad.Apply(model, config.learning_rate / static_cast<double>(batch.size()),
                 /*update_bias=*/false);
    }
    record(epoch, triplets);
  }
  const auto rule = CentroidRule(model, train_pool);
  if (rule.first < 0) {
    for (double& w : model.mutable_weights()) w = -w;
  }
  model.set_bias(rule.second);
  result.model = std::move(model);
  return result;
}

}  // namespace

TokenSequence EncodeEmail(const corpus::CleanEmail& email, const TrainingConfig& config) {
  return scoring::TokenizeSegments(corpus::RenderSegments(email, config.prompt_template),
                                   config.tokenizer, /*attribute_template=*/true)
      .sequence;
}

TrainResult TrainBce(const corpus::Corpus& train, const corpus::Corpus& validation,
                     const TrainingConfig& config) {
  ValidateConfig(config);
  if (train.empty() || validation.empty()) {
    throw Error(ErrorKind::kData, "cross-entropy training needs nonempty train and validation sets");
  }
  LinearTextModel model(config.dim, config.hash_seed);
  const std::vector<Example> train_set = EncodeCorpus(train, model, config);
  const std::vector<Example> val_set = EncodeCorpus(validation, model, config);

  TrainResult result{model, {}};
  auto record = [&](int epoch) {
    const LossAcc tr = EvaluateBce(model, train_set);
    const LossAcc va = EvaluateBce(model, val_set);
    CheckFinite(tr.loss, epoch, "cross-entropy");
    result.metrics.push_back({epoch, tr.loss, va.loss, tr.acc, va.acc});
  };
  record(0);
  Gradient grad(model.dim());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (const auto& batch : MakeBatches(train_set.size(), config, epoch)) {
      for (size_t idx : batch) {
        const Example& ex = train_set[idx];
        const double z = Dot(model, ex.features) + model.bias();
        const double y = ex.label == Label::kPhishing ? 1.0 : 0.0;
        const double residual = Sigmoid(z) - y;  // dLoss/dz
        grad.Add(ex.features, residual);
        grad.AddBias(residual);
      }
      grad.Apply(model, config.learning_rate / static_cast<double>(batch.size()));
    }
    record(epoch);
  }
  result.model = std::move(model);
  return result;
}

std::vector<Triplet> MineTriplets(const corpus::Corpus& corpus, const TrainingConfig& config,
                                  uint64_t seed) {
  std::vector<Label> labels;
  std::vector<TokenSequence> sequences;
  for (const auto& email : corpus.records()) {
    labels.push_back(email.label);
    sequences.push_back(EncodeEmail(email, config));
  }
  std::vector<Triplet> out;
  for (const IndexTriplet& t : MineIndices(labels, seed)) {
    out.push_back({sequences[t.anchor], sequences[t.positive], sequences[t.negative],
                   labels[t.anchor]});
  }
  return out;
}

double TripletLoss(const LinearTextModel& model, const Triplet& triplet, double margin) {
  const double ea = model.Logit(triplet.anchor) - model.bias();
  const double ep = model.Logit(triplet.positive) - model.bias();
  const double en = model.Logit(triplet.negative) - model.bias();
  return std::max(0.0, std::abs(ea - ep) - std::abs(ea - en) + margin);
}

TrainResult TrainContrastive(const std::vector<Triplet>& train,
                             const std::vector<Triplet>& validation, double margin,
                             const TrainingConfig& config) {
  if (train.empty()) throw Error(ErrorKind::kData, "contrastive training needs triplets");
  const LinearTextModel hasher(config.dim, config.hash_seed);
  auto build = [&](const std::vector<Triplet>& triplets, Pool& pool,
                   std::vector<IndexTriplet>& index) {
    for (const Triplet& t : triplets) {
      const size_t base = pool.features.size();
      pool.features.push_back(hasher.Featurize(t.anchor));
      pool.features.push_back(hasher.Featurize(t.positive));
      pool.features.push_back(hasher.Featurize(t.negative));
      pool.labels.push_back(t.anchor_label);
      pool.labels.push_back(t.anchor_label);
      pool.labels.push_back(Opposite(t.anchor_label));
      index.push_back({base, base + 1, base + 2});
    }
  };
  Pool train_pool, val_pool;
  std::vector<IndexTriplet> train_index, val_index;
  build(train, train_pool, train_index);
  build(validation, val_pool, val_index);
  return ContrastiveCore(
      train_pool, [&](int) { return train_index; }, val_pool, val_index, margin, config);
}

TrainResult TrainContrastive(const corpus::Corpus& train, const corpus::Corpus& validation,
                             double margin, const TrainingConfig& config) {
  if (train.empty() || validation.empty()) {
    throw Error(ErrorKind::kData, "contrastive training needs nonempty train and validation sets");
  }
  const LinearTextModel hasher(config.dim, config.hash_seed);
  auto pool_of = [&](const corpus::Corpus& c) {
    Pool pool;
    for (const auto& email : c.records()) {
      pool.features.push_back(hasher.Featurize(EncodeEmail(email, config)));
      pool.labels.push_back(email.label);
    }
    return pool;
  };
  const Pool train_pool = pool_of(train);
  const Pool val_pool = pool_of(validation);
  const auto val_triplets = MineIndices(val_pool.labels, DeriveSeed(config.seed, 0x7a1ULL));
  return ContrastiveCore(
      train_pool,
      [&](int epoch) {
        return MineIndices(train_pool.labels,
                           DeriveSeed(config.seed, 0x3e0000ULL + static_cast<uint64_t>(epoch)));
      },
      val_pool, val_triplets, margin, config);
}

std::vector<PreferencePair> MakePreferencePairs(const corpus::Corpus& corpus,
                                                const TrainingConfig& config) {
  std::vector<PreferencePair> out;
  for (const auto& email : corpus.records()) {
    out.push_back({EncodeEmail(email, config), email.label, Opposite(email.label)});
  }
  return out;
}

namespace {

double LabelLogprob(double logit, Label label) {
  return LogSigmoid(label == Label::kPhishing ? logit : -logit);
}

// d log pi(label | x) / d logit
double LabelLogprobGrad(double logit, Label label) {
  return label == Label::kPhishing ? Sigmoid(-logit) : -Sigmoid(logit);
}

double DpoMargin(double logit, double ref_logit, const PreferencePair& pair, double beta) {
  return beta * ((LabelLogprob(logit, pair.preferred) - LabelLogprob(ref_logit, pair.preferred)) -
                 (LabelLogprob(logit, pair.rejected) - LabelLogprob(ref_logit, pair.rejected)));
}

}  // namespace

double DpoLoss(const LinearTextModel& policy, const LinearTextModel& reference,
               const PreferencePair& pair, double beta) {
  return -LogSigmoid(DpoMargin(policy.Logit(pair.input), reference.Logit(pair.input), pair, beta));
}

TrainResult TrainDpo(const std::vector<PreferencePair>& train,
                     const std::vector<PreferencePair>& validation, double beta,
                     const LinearTextModel& reference, const TrainingConfig& config) {
  ValidateConfig(config);
  if (!(beta > 0.0)) throw Error(ErrorKind::kConfig, "DPO beta must be positive");
  if (train.empty()) throw Error(ErrorKind::kData, "DPO training needs preference pairs");
  for (const auto& pair : train) {
    if (pair.preferred == pair.rejected) {
      throw Error(ErrorKind::kData, "preference pair with identical preferred and rejected label");
    }
  }
  struct Encoded {
    Features features;
    double ref_logit;
  };
  auto encode = [&](const std::vector<PreferencePair>& pairs) {
    std::vector<Encoded> out;
    for (const auto& p : pairs) out.push_back({reference.Featurize(p.input), reference.Logit(p.input)});
    return out;
  };
  const auto train_enc = encode(train);
  const auto val_enc = encode(validation);

  LinearTextModel policy = reference;
  TrainResult result{policy, {}};
  auto evaluate = [&](const std::vector<PreferencePair>& pairs, const std::vector<Encoded>& enc) {
    LossAcc out;
    if (pairs.empty()) return out;
    for (size_t i = 0; i < pairs.size(); ++i) {
      const double z = Dot(policy, enc[i].features) + policy.bias();
      out.loss += -LogSigmoid(DpoMargin(z, enc[i].ref_logit, pairs[i], beta));
      const Label predicted = z >= 0.0 ? Label::kPhishing : Label::kLegitimate;
      out.acc += predicted == pairs[i].preferred ? 1.0 : 0.0;
    }
    out.loss /= static_cast<double>(pairs.size());
    out.acc /= static_cast<double>(pairs.size());
    return out;
  };
  auto record = [&](int epoch) {
    const LossAcc tr = evaluate(train, train_enc);
    const LossAcc va = evaluate(validation, val_enc);
    CheckFinite(tr.loss, epoch, "DPO");
    result.metrics.push_back({epoch, tr.loss, va.loss, tr.acc, va.acc});
  };
  record(0);
  Gradient grad(policy.dim());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (const auto& batch : MakeBatches(train.size(), config, epoch)) {
      for (size_t idx : batch) {
        const PreferencePair& pair = train[idx];
        const double z = Dot(policy, train_enc[idx].features) + policy.bias();
        const double u = DpoMargin(z, train_enc[idx].ref_logit, pair, beta);
        // L = -log sigmoid(u); dL/du = -sigmoid(-u)
        const double du_dz =
            beta * (LabelLogprobGrad(z, pair.preferred) - LabelLogprobGrad(z, pair.rejected));
        const double g = -Sigmoid(-u) * du_dz;
        grad.Add(train_enc[idx].features, g);
        grad.AddBias(g);
      }
      grad.Apply(policy, config.learning_rate / static_cast<double>(batch.size()));
    }
    record(epoch);
  }
  result.model = std::move(policy);
  return result;
}

}  // namespace ccshap::toy
