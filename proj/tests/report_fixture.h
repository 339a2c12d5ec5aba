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

// The report and summaries behind tests/golden/.

#ifndef CCSHAP_TESTS_REPORT_FIXTURE_H_
#define CCSHAP_TESTS_REPORT_FIXTURE_H_

#include "ccshap/audit.h"
#include "ccshap/report.h"

namespace ccshap::testing {

using audit::CcShapReport;
using audit::Summary;

inline CcShapReport Fixed() {
  CcShapReport r;
  r.email_id = "00c0ffee12345678";
  r.ground_truth_label = Label::kPhishing;
  r.predicted_label = Label::kPhishing;
  r.predicted_probability = 0.8731;
  r.input_text = "From: alice\nSubject: Action required\nverify account now";
  r.explanation_text = "Classified as PHISHING because of: verify, now";
  r.explanation_prompt = "toy:top-k-contributions";
  r.explanation_tokens = {"verify", "now"};
  r.tokens = {"alice", "action", "required", "verify", "account", "now"};
  r.pred_raw.target = "classification";
  r.pred_raw.values = {-0.01, 0.05, 0.04, 0.2, 0.06, 0.04};
  r.pred_raw.standard_errors = {0.001, 0.002, 0.002, 0.003, 0.002, 0.001};
  r.pred_raw.n_samples = 2000;
  r.pred_raw.baseline = 0.4931;
  r.pred_raw.full_score = 0.8731;
  r.expl_raw.target = "explanation";
  r.expl_raw.values = {0.0, 0.01, 0.0, 0.3, -0.02, 0.17};
  r.expl_raw.standard_errors = {0.0, 0.001, 0.0, 0.004, 0.001, 0.003};
  r.expl_raw.n_samples = 2000;
  r.expl_raw.baseline = 0.21;
  r.expl_raw.full_score = 0.67;
  r.pred_shap = shapley::NormalizeContributions(r.pred_raw);
  r.expl_shap = shapley::NormalizeContributions(r.expl_raw);
  r.cc_shap = audit::CcShapScore(r.pred_shap, r.expl_shap).value;
  r.top_pred_tokens = audit::TopTokens(r.tokens, r.pred_shap.ratios, 3);
  r.top_expl_tokens = audit::TopTokens(r.tokens, r.expl_shap.ratios, 3);
  r.config_digest = "0123456789abcdef";
  return r;
}

inline std::vector<Summary> FixedSummaries() {
  Summary a{"toy:abc", {{Label::kPhishing, 20, 20, 0.96594, 0.03041, 100.0},
                        {Label::kLegitimate, 20, 19, 0.71236, 0.12, 95.0}}, 0};
  Summary b{"remote:m, \"quoted\"", {{Label::kLegitimate, 3, 2, -0.25, 0.5, 66.66666}}, 1};
  return {a, b};
}
}  // namespace ccshap::testing

#endif  // CCSHAP_TESTS_REPORT_FIXTURE_H_
