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
#include <map>

#include "ccshap/audit.h"
#include "ccshap/error.h"
#include "ccshap/report.h"
#include "ccshap/toy_model.h"
#include "test_util.h"

namespace ccshap::audit {
namespace {

using ccshap::testing::FunctionBackend;
using ccshap::testing::PermutationOracle;
using ccshap::testing::ToMask;
using ccshap::testing::Visible;
using scoring::ExplanationTarget;
using scoring::TokenSequence;

NormalizedShap N(std::vector<double> v) { return shapley::NormalizeContributions(v); }

corpus::CleanEmail Email(const std::string& body, Label label = Label::kPhishing) {
  return {"alice", "", body, label, corpus::ContentHash("alice", "", body)};
}

AuditOptions ExactOptions() {
  AuditOptions o;
  o.estimator = Estimator::kExact;
  o.prompt_template = "{sender}{subject}{body}";
  return o;
}

// Weighted sums of visible-token indicators pushed through a logistic.
double WeightedVisible(const TokenSequence& s, const std::map<std::string, double>& w, double bias) {
  double x = bias;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!Visible(s, i)) continue;
    const auto it = w.find(s.surface[i]);
    if (it != w.end()) x += it->second;
  }
  return 1.0 / (1.0 + std::exp(-x));
}

const std::map<std::string, double> kClassWeights = {
    {"verify", 1.2}, {"account", 0.4}, {"now", 0.3}, {"bank", 0.8}, {"urgent", 1.0}, {"alice", -0.2}};
const std::map<std::string, double> kExplWeights = {
    {"verify", 0.9}, {"account", -0.3}, {"bank", 1.1}, {"urgent", 0.2}, {"alice", 0.1}};

FunctionBackend PipelineBackend() {
  return FunctionBackend(
      "pipeline",
      [](const TokenSequence& s, Label label) {
        const double p = WeightedVisible(s, kClassWeights, -1.0);
        return label == Label::kPhishing ? p : 1.0 - p;
      },
      [](const TokenSequence& s, const ExplanationTarget&) {
        return std::vector<double>{std::log(WeightedVisible(s, kExplWeights, -0.5))};
      });
}

TEST(CcShapScore, Anchors) {
  EXPECT_NEAR(CcShapScore(N({0.5, 0.3, 0.2}), N({0.5, 0.3, 0.2})).value, 1.0, 1e-12);
  EXPECT_NEAR(CcShapScore(N({1, 0}), N({0, 1})).value, 0.0, 1e-12);
  EXPECT_NEAR(CcShapScore(N({0.4, -0.6}), N({-0.4, 0.6})).value, -1.0, 1e-12);
}

TEST(CcShapScore, SymmetricAndScaleInvariant) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(2 + rng.Below(10));
    std::vector<double> b(a.size());
    for (double& x : a) x = rng.Normal();
    for (double& x : b) x = rng.Normal();
    const double ab = CcShapScore(N(a), N(b)).value;
    EXPECT_NEAR(ab, CcShapScore(N(b), N(a)).value, 1e-12);
    std::vector<double> scaled = a;
    for (double& x : scaled) x *= 37.5;
    EXPECT_NEAR(ab, CcShapScore(N(scaled), N(b)).value, 1e-12);
    // Independent cosine of the L1-normalized vectors.
    EXPECT_NEAR(ab, ccshap::testing::Cosine(ccshap::testing::L1(a), ccshap::testing::L1(b)), 1e-12);
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(CcShapScore, LengthMismatchNamesBothLengths) {
  try {
    CcShapScore(N({1, 2, 3}), N({1, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(CcShapScore, DegenerateIsZero) {
  const ConsistencyScore s = CcShapScore(N({0, 0, 0}), N({1, 2, 3}));
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.value, 0.0);
}

TEST(AuditEmail, MatchesPermutationOracle) {
  const FunctionBackend backend = PipelineBackend();
  const corpus::CleanEmail email = Email("verify account now bank urgent");
  const CcShapReport r = AuditEmail(email, EmailId(email), backend, ExactOptions());
  ASSERT_EQ(r.tokens, (std::vector<std::string>{"alice", "verify", "account", "now", "bank", "urgent"}));
  EXPECT_EQ(r.predicted_label, Label::kPhishing);

  const TokenSequence full = scoring::Tokenize("alice verify account now bank urgent");
  const auto pred = PermutationOracle(6, [&](const std::vector<bool>& s) {
    return WeightedVisible(scoring::ApplyMask(full, ToMask(s)), kClassWeights, -1.0);
  });
  const auto expl = PermutationOracle(6, [&](const std::vector<bool>& s) {
    return WeightedVisible(scoring::ApplyMask(full, ToMask(s)), kExplWeights, -0.5);
  });
  for (size_t j = 0; j < 6; ++j) {
    EXPECT_NEAR(r.pred_raw.values[j], pred[j], 1e-12) << j;
    EXPECT_NEAR(r.expl_raw.values[j], expl[j], 1e-12) << j;
  }
  const double expected = ccshap::testing::Cosine(ccshap::testing::L1(pred), ccshap::testing::L1(expl));
  EXPECT_NEAR(r.cc_shap, expected, 1e-9);
  EXPECT_TRUE(r.degeneracy_note.empty());
  EXPECT_EQ(r.top_pred_tokens[0].token, "verify");
  EXPECT_EQ(r.top_expl_tokens[0].token, "bank");
}

TEST(AuditEmail, SelfConsistentBackendScoresOne) {
  const corpus::Corpus data = toy::MakeSeparableCorpus(30, 2);
  toy::TrainingConfig config;
  config.epochs = 20;
  const toy::ToyBackend toy(toy::TrainBce(data, data, config).model);
  const SelfConsistentBackend backend(toy);
  AuditOptions mc;
  mc.n_samples = 200;
  for (size_t i = 0; i < 10; ++i) {
    const auto& email = data.records()[i];
    const CcShapReport r = AuditEmail(email, EmailId(email), backend, mc);
    EXPECT_NEAR(r.cc_shap, 1.0, 1e-9) << i;
  }
  EXPECT_EQ(backend.id(), toy.id() + "+self");
}

TEST(AuditEmail, ConstantExplanationScorerIsDegenerate) {
  const FunctionBackend backend(
      "flat",
      [](const TokenSequence& s, Label label) {
        const double p = WeightedVisible(s, kClassWeights, 0.0);
        return label == Label::kPhishing ? p : 1.0 - p;
      },
      [](const TokenSequence&, const ExplanationTarget&) { return std::vector<double>{-0.7}; });
  const corpus::CleanEmail email = Email("verify account now");
  const CcShapReport r = AuditEmail(email, EmailId(email), backend, ExactOptions());
  EXPECT_EQ(r.cc_shap, 0.0);
  EXPECT_TRUE(r.expl_shap.degenerate);
  EXPECT_EQ(r.degeneracy_note, "explanation-side attributions are all zero");
}

TEST(AuditEmail, EmptyExplanationIsDegenerate) {
  const FunctionBackend backend(
      "mute", [](const TokenSequence&, Label) { return 0.5; },
      [](const TokenSequence&, const ExplanationTarget&) { return std::vector<double>{}; },
      std::vector<std::string>{});
  const corpus::CleanEmail email = Email("verify account now");
  const CcShapReport r = AuditEmail(email, EmailId(email), backend, ExactOptions());
  EXPECT_EQ(r.cc_shap, 0.0);
  EXPECT_NE(r.degeneracy_note.find("empty explanation"), std::string::npos);
  EXPECT_NE(r.degeneracy_note.find("prediction-side"), std::string::npos);
}

TEST(AuditEmail, MonteCarloIsDeterministicPerEmail) {
  const FunctionBackend backend = PipelineBackend();
  AuditOptions o = ExactOptions();
  o.estimator = Estimator::kMonteCarlo;
  o.n_samples = 64;
  const corpus::CleanEmail email = Email("verify account now bank urgent");
  const CcShapReport a = AuditEmail(email, EmailId(email), backend, o);
  o.threads = 4;
  EXPECT_EQ(AuditEmail(email, EmailId(email), backend, o), a);
  o.seed = 1;
  EXPECT_NE(AuditEmail(email, EmailId(email), backend, o).pred_raw.values, a.pred_raw.values);
}

TEST(AuditEmail, ErrorsCarryTheEmailId) {
  const FunctionBackend broken(
      "broken", [](const TokenSequence&, Label) -> double { throw Error(ErrorKind::kTransport, "down"); },
      [](const TokenSequence&, const ExplanationTarget&) { return std::vector<double>{}; });
  const corpus::CleanEmail email = Email("verify");
  try {
    AuditEmail(email, "abc123", broken, ExactOptions());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
    EXPECT_EQ(std::string(e.what()), "email abc123: down");
  }
}

TEST(TopTokens, OrdersByMagnitudeThenPosition) {
  const auto top = TopTokens({"a", "b", "c", "d"}, {0.1, -0.4, 0.4, 0.0}, 3);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0], (TokenValue{"b", 1, -0.4}));
  EXPECT_EQ(top[1], (TokenValue{"c", 2, 0.4}));
  EXPECT_EQ(top[2], (TokenValue{"a", 0, 0.1}));
  EXPECT_EQ(TopTokens({"a"}, {1.0}, 10).size(), 1u);
}

TEST(AuditBatch, RecordsFailuresAndKeepsOrder) {
  const FunctionBackend backend(
      "picky",
      [](const TokenSequence& s, Label label) {
        for (size_t i = 0; i < s.size(); ++i) {
          if (s.surface[i] == "poison") throw Error(ErrorKind::kProtocol, "bad reply");
        }
        const double p = WeightedVisible(s, kClassWeights, 0.0);
        return label == Label::kPhishing ? p : 1.0 - p;
      },
      [](const TokenSequence& s, const ExplanationTarget&) {
        return std::vector<double>{std::log(WeightedVisible(s, kExplWeights, 0.0))};
      });
  std::vector<AuditItem> items;
  for (int i = 0; i < 12; ++i) {
    const auto email = Email(i == 5 ? "poison here" : "verify bank number " + std::to_string(i));
    items.push_back({EmailId(email), email});
  }
  for (int jobs : {1, 4}) {
    const auto out = AuditBatch(items, backend, ExactOptions(), jobs);
    ASSERT_EQ(out.size(), items.size());
    for (size_t i = 0; i < items.size(); ++i) {
      if (i == 5) {
        const auto& f = std::get<AuditFailure>(out[i]);
        EXPECT_EQ(f.kind, ErrorKind::kProtocol);
        EXPECT_EQ(f.email_id, items[i].email_id);
      } else {
        EXPECT_EQ(std::get<CcShapReport>(out[i]).email_id, items[i].email_id);
      }
    }
  }
}

CcShapReport Synthetic(Label truth, Label predicted, double cc) {
  CcShapReport r;
  r.ground_truth_label = truth;
  r.predicted_label = predicted;
  r.cc_shap = cc;
  return r;
}

TEST(Aggregate, SingleReport) {
  const Summary s = Aggregate({Synthetic(Label::kPhishing, Label::kPhishing, 0.5)}, "m");
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.rows[0].label, Label::kPhishing);
  EXPECT_EQ(s.rows[0].mean, 0.5);
  EXPECT_EQ(s.rows[0].std, 0.0);
  EXPECT_EQ(s.rows[0].accuracy_pct, 100.0);
}

TEST(Aggregate, TwoClassesWithSampleStd) {
  std::vector<CcShapReport> reports;
  std::vector<double> ham_values;
  for (int i = 0; i < 20; ++i) {
    reports.push_back(Synthetic(Label::kLegitimate, i < 15 ? Label::kLegitimate : Label::kPhishing,
                                0.1 * (i % 5)));
    ham_values.push_back(0.1 * (i % 5));
    reports.push_back(Synthetic(Label::kPhishing, Label::kPhishing, 0.9));
  }
  const Summary s = Aggregate(reports, "m", 2);
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_EQ(s.rows[0].label, Label::kPhishing);
  EXPECT_EQ(s.rows[0].count, 20u);
  EXPECT_NEAR(s.rows[0].mean, 0.9, 1e-12);
  EXPECT_NEAR(s.rows[0].std, 0.0, 1e-12);
  EXPECT_EQ(s.rows[1].label, Label::kLegitimate);
  EXPECT_EQ(s.rows[1].correct, 15u);
  EXPECT_NEAR(s.rows[1].accuracy_pct, 75.0, 1e-12);
  double mean = 0;
  for (double v : ham_values) mean += v / 20.0;
  double ss = 0;
  for (double v : ham_values) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(s.rows[1].mean, mean, 1e-12);
  EXPECT_NEAR(s.rows[1].std, std::sqrt(ss / 19.0), 1e-12);
  EXPECT_EQ(s.failures, 2u);
}

TEST(Aggregate, EmptyIsAContractViolation) {
  try {
    Aggregate({}, "m");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract);
  }
}

}  // namespace
}  // namespace ccshap::audit
