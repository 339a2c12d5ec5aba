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

// CC-SHAP: agreement between the token attributions of a model's decision
// and of its own explanation for that decision.
//
//   cc_shap = 1 - cosine_distance(c_pred, c_expl) = cos(c_pred, c_expl)
//
// where c_pred and c_expl are the L1-normalized Shapley vectors over the
// same input tokens. 1 means the explanation leans on exactly the evidence
// the decision used; values near 0 or below mean it does not.

#ifndef CCSHAP_AUDIT_H_
#define CCSHAP_AUDIT_H_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ccshap/corpus.h"
#include "ccshap/error.h"
#include "ccshap/score_cache.h"
#include "ccshap/scoring.h"
#include "ccshap/shapley.h"

namespace ccshap::audit {

using shapley::NormalizedShap;
using shapley::ShapVector;

struct ConsistencyScore {
  double value = 0.0;       // in [-1, 1]
  bool degenerate = false;  // an input vector was all zero; value is 0
};

// Cosine similarity of the two vectors after L1 re-normalization. Throws a
// contract violation naming both lengths if they differ.
ConsistencyScore CcShapScore(const NormalizedShap& pred, const NormalizedShap& expl);

enum class Estimator { kMonteCarlo, kExact };

struct AuditOptions {
  Estimator estimator = Estimator::kMonteCarlo;
  size_t n_samples = 2000;
  size_t exact_limit = shapley::kDefaultExactLimit;
  bool antithetic = true;
  uint64_t seed = 0;
  size_t k_top = 10;
  size_t max_tokens = 256;
  bool attribute_template = false;
  std::string prompt_template = std::string(corpus::kDefaultTemplate);
  int threads = 1;        // Shapley permutation workers per email
  int max_in_flight = 0;  // cap on concurrent scorer calls (0: threads)
  std::string config_digest;  // copied into every report
};

struct TokenValue {
  std::string token;
  int player = 0;  // index into CcShapReport::tokens
  double value = 0.0;

  bool operator==(const TokenValue&) const = default;
};

struct CcShapReport {
  std::string email_id;
  Label ground_truth_label = Label::kPhishing;
  Label predicted_label = Label::kPhishing;
  double predicted_probability = 0.0;
  std::string input_text;
  bool truncated = false;
  std::string explanation_text;
  std::string explanation_prompt;
  std::vector<std::string> explanation_tokens;
  std::vector<std::string> tokens;  // attributed tokens (players), in order
  ShapVector pred_raw;
  ShapVector expl_raw;
  NormalizedShap pred_shap;
  NormalizedShap expl_shap;
  double cc_shap = 0.0;
  std::string degeneracy_note;  // empty unless a side was degenerate
  std::vector<TokenValue> top_pred_tokens;
  std::vector<TokenValue> top_expl_tokens;
  std::string config_digest;

  bool operator==(const CcShapReport&) const = default;
};

// Hex content hash of the email.
std::string EmailId(const corpus::CleanEmail& email);

// Shapley stream seed for one email; both targets share it so identical
// scorers yield identical attributions.
uint64_t EmailSeed(uint64_t global_seed, const std::string& email_id);

// render -> tokenize -> classify -> explain -> attribute both targets ->
// normalize -> score. Backend errors propagate with the email id attached.
CcShapReport AuditEmail(const corpus::CleanEmail& email, const std::string& email_id,
                        const scoring::Backend& backend, const AuditOptions& options,
                        scoring::ScoreCache* cache = nullptr);

// Top k players by |value|, ties broken by position.
std::vector<TokenValue> TopTokens(const std::vector<std::string>& tokens,
                                  const std::vector<double>& values, size_t k);

struct AuditItem {
  std::string email_id;
  corpus::CleanEmail email;
};

struct AuditFailure {
  std::string email_id;
  ErrorKind kind;
  std::string message;
};

using AuditOutcome = std::variant<CcShapReport, AuditFailure>;

// Audits every item with up to `jobs` emails in flight. Failures are
// recorded, never abort the batch; results come back in input order.
std::vector<AuditOutcome> AuditBatch(const std::vector<AuditItem>& items,
                                     const scoring::Backend& backend,
                                     const AuditOptions& options, int jobs,
                                     scoring::ScoreCache* cache = nullptr);

// Wraps a backend so that its explanation scorer IS its classification
// scorer: the explanation likelihood under a mask is the probability of
// the explained label. CC-SHAP against this backend is 1 by construction.
class SelfConsistentBackend : public scoring::Backend {
 public:
  explicit SelfConsistentBackend(const scoring::Backend& inner) : inner_(inner) {}

  std::string id() const override { return inner_.id() + "+self"; }
  double LabelProbability(const scoring::TokenSequence& masked, Label label) const override {
    return inner_.LabelProbability(masked, label);
  }
  std::vector<double> ExplanationLogprobs(
      const scoring::TokenSequence& masked,
      const scoring::ExplanationTarget& target) const override;
  scoring::ExplanationTarget Explain(const scoring::TokenSequence& full,
                                     std::span<const int> players,
                                     Label predicted) const override {
    return inner_.Explain(full, players, predicted);
  }

 private:
  const scoring::Backend& inner_;
};

}  // namespace ccshap::audit

#endif  // CCSHAP_AUDIT_H_
