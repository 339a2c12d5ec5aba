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

#include <cmath>
#include <fstream>

#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "ccshap/toy_model.h"
#include "test_util.h"

namespace ccshap::toy {
namespace {

using ccshap::testing::TempDir;

const double kLn2 = std::log(2.0);

TrainingConfig Config(int epochs, uint64_t seed = 0) {
  TrainingConfig c;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(LinearTextModel, AdditiveInLogitSpace) {
  LinearTextModel model(1 << 10, 3);
  Rng rng(1);
  for (double& w : model.mutable_weights()) w = rng.Normal();
  model.set_bias(0.3);
  const TokenSequence s = scoring::Tokenize("alpha beta gamma delta");
  double logit = model.bias();
  for (size_t j = 0; j < s.size(); ++j) logit += model.PositionContribution(s, j);
  EXPECT_NEAR(model.Logit(s), logit, 1e-12);
  EXPECT_NEAR(model.Probability(s, Label::kPhishing), Sigmoid(logit), 1e-12);
  EXPECT_NEAR(model.Probability(s, Label::kPhishing) + model.Probability(s, Label::kLegitimate), 1.0,
              1e-12);
  const TokenSequence hidden = scoring::ApplyMask(s, ccshap::testing::ToMask({true, false, true, true}));
  EXPECT_EQ(model.PositionContribution(hidden, 1), 0.0);
  EXPECT_NEAR(model.Logit(hidden), logit - model.PositionContribution(s, 1), 1e-12);
}

TEST(Bce, LearnsTheSeparableCorpus) {
  const corpus::Corpus train = MakeSeparableCorpus(60, 1);
  const corpus::Corpus val = MakeSeparableCorpus(20, 2);
  const TrainResult r = TrainBce(train, val, Config(50));
  ASSERT_EQ(r.metrics.size(), 51u);
  EXPECT_EQ(r.metrics.front().epoch, 0);
  bool reached = false;
  for (const auto& m : r.metrics) reached = reached || m.val_acc == 1.0;
  EXPECT_TRUE(reached);
  EXPECT_GE(r.metrics.back().val_acc, 0.9);
}

TEST(Bce, UntrainedModelIsAtChance) {
  const corpus::Corpus data = MakeSeparableCorpus(200, 4);
  const TrainResult r = TrainBce(data, data, Config(0));
  ASSERT_EQ(r.metrics.size(), 1u);
  EXPECT_NEAR(r.metrics[0].train_loss, kLn2, 0.01);
  EXPECT_NEAR(r.metrics[0].val_acc, 0.5, 0.15);
}

TEST(Bce, FirstEpochReducesLoss) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const corpus::Corpus data = MakeSeparableCorpus(30, seed);
    const TrainResult r = TrainBce(data, data, Config(1, seed));
    EXPECT_LT(r.metrics[1].train_loss, r.metrics[0].train_loss) << seed;
  }
}

TEST(Bce, FullBatchLossNeverIncreases) {
  const corpus::Corpus data = MakeSeparableCorpus(30, 8);
  TrainingConfig c = Config(40);
  c.batch_size = 0;
  const TrainResult r = TrainBce(data, data, c);
  for (size_t i = 1; i < r.metrics.size(); ++i) {
    EXPECT_LE(r.metrics[i].train_loss, r.metrics[i - 1].train_loss + 1e-12) << i;
  }
}

TEST(Bce, EmptyCorpusIsADataError) {
  try {
    TrainBce(corpus::Corpus(), corpus::Corpus(), Config(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
}

TEST(Contrastive, TripletLossDefinition) {
  LinearTextModel model(1 << 8, 0);
  Rng rng(2);
  for (double& w : model.mutable_weights()) w = rng.Normal();
  model.set_bias(5.0);  // the embedding ignores the bias
  Triplet t{scoring::Tokenize("one two"), scoring::Tokenize("three"), scoring::Tokenize("four five six"),
            Label::kPhishing};
  const double ea = model.Logit(t.anchor) - 5.0;
  const double ep = model.Logit(t.positive) - 5.0;
  const double en = model.Logit(t.negative) - 5.0;
  for (double margin : {0.0, 0.5, 3.0}) {
    const double expected = std::max(0.0, std::abs(ea - ep) - std::abs(ea - en) + margin);
    EXPECT_NEAR(TripletLoss(model, t, margin), expected, 1e-12);
    EXPECT_GE(TripletLoss(model, t, margin), 0.0);
  }
  // Margin zero and equal distances: no loss.
  Triplet tie{t.anchor, t.positive, t.positive, Label::kPhishing};
  EXPECT_EQ(TripletLoss(model, tie, 0.0), 0.0);
}

TEST(Contrastive, SeparatesClasses) {
  const corpus::Corpus train = MakeSeparableCorpus(60, 5);
  const corpus::Corpus val = MakeSeparableCorpus(30, 6);
  const TrainResult r = TrainContrastive(train, val, 1.0, Config(40));
  const std::vector<Triplet> triplets = MineTriplets(val, Config(0), 99);
  ASSERT_EQ(triplets.size(), 60u);
  size_t ordered = 0;
  const double b = r.model.bias();
  for (const Triplet& t : triplets) {
    const double ea = r.model.Logit(t.anchor) - b;
    ordered += std::abs(ea - (r.model.Logit(t.positive) - b)) <
               std::abs(ea - (r.model.Logit(t.negative) - b));
  }
  EXPECT_GE(static_cast<double>(ordered) / triplets.size(), 0.95);
  EXPECT_GE(r.metrics.back().val_acc, 0.95);
  for (const auto& m : r.metrics) EXPECT_GE(m.train_loss, 0.0);
}

TEST(Contrastive, MinedTripletsHaveTheRightLabels) {
  const corpus::Corpus data = MakeSeparableCorpus(10, 3);
  for (const Triplet& t : MineTriplets(data, Config(0), 4)) {
    const bool anchor_marked =
        std::count(t.anchor.surface.begin(), t.anchor.surface.end(), "urgent-verify") > 0;
    const bool pos_marked =
        std::count(t.positive.surface.begin(), t.positive.surface.end(), "urgent-verify") > 0;
    const bool neg_marked =
        std::count(t.negative.surface.begin(), t.negative.surface.end(), "urgent-verify") > 0;
    EXPECT_EQ(anchor_marked, t.anchor_label == Label::kPhishing);
    EXPECT_EQ(pos_marked, anchor_marked);
    EXPECT_NE(neg_marked, anchor_marked);
    EXPECT_NE(t.anchor, t.positive);
  }
}

TEST(Dpo, IdenticalPolicyAndReferenceGiveLn2) {
  LinearTextModel reference(1 << 8, 0);
  Rng rng(7);
  for (double& w : reference.mutable_weights()) w = rng.Normal();
  const PreferencePair pair{scoring::Tokenize("verify your account"), Label::kPhishing,
                            Label::kLegitimate};
  for (double beta : {0.01, 0.1, 1.0, 10.0}) {
    EXPECT_NEAR(DpoLoss(reference, reference, pair, beta), kLn2, 1e-12);
  }
}

TEST(Dpo, MatchesDefinitionAndSmallBetaLimit) {
  LinearTextModel policy(1 << 8, 0);
  LinearTextModel reference(1 << 8, 0);
  Rng rng(8);
  for (double& w : policy.mutable_weights()) w = rng.Normal();
  for (double& w : reference.mutable_weights()) w = rng.Normal();
  policy.set_bias(0.4);
  const PreferencePair pair{scoring::Tokenize("invoice attached for review"), Label::kLegitimate,
                            Label::kPhishing};
  const double delta = (std::log(policy.Probability(pair.input, pair.preferred)) -
                        std::log(reference.Probability(pair.input, pair.preferred))) -
                       (std::log(policy.Probability(pair.input, pair.rejected)) -
                        std::log(reference.Probability(pair.input, pair.rejected)));
  for (double beta : {0.05, 0.5, 2.0}) {
    EXPECT_NEAR(DpoLoss(policy, reference, pair, beta), std::log1p(std::exp(-beta * delta)), 1e-12);
  }
  // -log sigmoid(beta d) = ln 2 - beta d / 2 + O(beta^2).
  const double beta = 1e-6;
  EXPECT_NEAR((kLn2 - DpoLoss(policy, reference, pair, beta)) / beta, delta / 2.0, 1e-4);
}

TEST(Dpo, TrainingPrefersTheTrueLabel) {
  const TrainingConfig c = Config(30);
  const auto train = MakePreferencePairs(MakeSeparableCorpus(40, 9), c);
  const auto val = MakePreferencePairs(MakeSeparableCorpus(20, 10), c);
  const LinearTextModel reference(c.dim, c.hash_seed);
  const TrainResult r = TrainDpo(train, val, 0.1, reference, c);
  EXPECT_NEAR(r.metrics[0].train_loss, kLn2, 1e-12);
  EXPECT_LT(r.metrics.back().train_loss, r.metrics[0].train_loss);
  double preferred = 0.0;
  double rejected = 0.0;
  for (const auto& p : val) {
    preferred += r.model.Probability(p.input, p.preferred) / static_cast<double>(val.size());
    rejected += r.model.Probability(p.input, p.rejected) / static_cast<double>(val.size());
  }
  EXPECT_GT(preferred, rejected);
}

TEST(Explanation, CitesTheStrongestTokens) {
  const corpus::Corpus data = MakeSeparableCorpus(40, 12);
  const TrainResult r = TrainBce(data, data, Config(40));
  const TokenSequence s = scoring::Tokenize("urgent-verify your bank account please confirm");
  std::vector<int> players = {0, 1, 2, 3, 4, 5};
  const auto five = GenerateExplanation(r.model, s, players, 5);
  ASSERT_FALSE(five.tokens.empty());
  EXPECT_EQ(five.tokens[0], "urgent-verify");
  EXPECT_EQ(five.label, Label::kPhishing);
  EXPECT_EQ(five.text.rfind("Classified as PHISHING because of: urgent-verify", 0), 0u) << five.text;
  const auto one = GenerateExplanation(r.model, s, players, 1);
  EXPECT_EQ(one.tokens, (std::vector<std::string>{"urgent-verify"}));
  // Only players may be cited.
  const std::vector<int> without = {1, 2, 3};
  for (const auto& t : GenerateExplanation(r.model, s, without, 5).tokens) {
    EXPECT_NE(t, "urgent-verify");
  }
}

TEST(ToyBackend, ExplanationLikelihoodFollowsCopyAndDecision) {
  const corpus::Corpus data = MakeSeparableCorpus(30, 13);
  const ToyBackend backend(TrainBce(data, data, Config(20)).model, 3, 2.0);
  const TokenSequence s = scoring::Tokenize("urgent-verify the account");
  const scoring::ExplanationTarget t{Label::kPhishing, "x", {"urgent-verify", "missing"}, "p"};
  const std::vector<double> lp = backend.ExplanationLogprobs(s, t);
  const double logit = backend.model().Logit(s);
  ASSERT_EQ(lp.size(), 2u);
  EXPECT_NEAR(lp[0], std::log(Sigmoid(logit + 2.0)), 1e-12);
  EXPECT_NEAR(lp[1], std::log(Sigmoid(logit - 2.0)), 1e-12);
  const TokenSequence masked = scoring::ApplyMask(s, ccshap::testing::ToMask({false, true, true}));
  EXPECT_NEAR(backend.ExplanationLogprobs(masked, t)[0],
              std::log(Sigmoid(backend.model().Logit(masked) - 2.0)), 1e-12);
  EXPECT_NE(backend.id(), ToyBackend(backend.model(), 4, 2.0).id());
}

TEST(Checkpoint, RoundTripsBitExact) {
  TempDir dir("ckpt");
  const corpus::Corpus data = MakeSeparableCorpus(20, 14);
  const TrainResult r = TrainBce(data, data, Config(5));
  r.model.Save(dir / "m.ckpt");
  const LinearTextModel loaded = LinearTextModel::Load(dir / "m.ckpt");
  EXPECT_EQ(loaded, r.model);
  EXPECT_EQ(loaded.Fingerprint(), r.model.Fingerprint());
}

TEST(Checkpoint, RejectsCorruptFiles) {
  TempDir dir("ckpt");
  std::ofstream(dir / "bad.ckpt") << "CCSHAPLM but truncated";
  EXPECT_THROW(LinearTextModel::Load(dir / "bad.ckpt"), Error);
  EXPECT_THROW(LinearTextModel::Load(dir / "missing.ckpt"), Error);
}

TEST(Training, DeterministicForASeed) {
  const corpus::Corpus data = MakeSeparableCorpus(25, 15);
  const TrainResult a = TrainBce(data, data, Config(10, 3));
  const TrainResult b = TrainBce(data, data, Config(10, 3));
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(MetricsCsv(a.metrics), MetricsCsv(b.metrics));
  EXPECT_NE(TrainBce(data, data, Config(10, 4)).model, a.model);
}

TEST(Training, MetricsCsvLayout) {
  const std::vector<EpochMetrics> rows = {{0, kLn2, kLn2, 0.5, 0.5}, {1, 0.25, 0.5, 1.0, 0.75}};
  EXPECT_EQ(MetricsCsv(rows),
            "epoch,train_loss,val_loss,train_acc,val_acc\n"
            "0,0.693147,0.693147,0.500000,0.500000\n"
            "1,0.250000,0.500000,1.000000,0.750000\n");
}

TEST(SeparableCorpus, MarkerOnlyInPhishing) {
  const corpus::Corpus c = MakeSeparableCorpus(15, 16);
  EXPECT_EQ(c.count(Label::kPhishing), 15u);
  EXPECT_EQ(c.count(Label::kLegitimate), 15u);
  for (const auto& e : c.records()) {
    EXPECT_EQ(e.body.find("urgent-verify") != std::string::npos, e.label == Label::kPhishing);
  }
}

}  // namespace
}  // namespace ccshap::toy
