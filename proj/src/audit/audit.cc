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

#include "ccshap/audit.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "ccshap/hashing.h"
#include "ccshap/text_util.h"

namespace ccshap::audit {
namespace {

shapley::ShapVector Attribute(const shapley::CoalitionScorer& scorer, size_t n,
                              const std::string& target, uint64_t seed,
                              const AuditOptions& options) {
  if (options.estimator == Estimator::kExact) {
    return shapley::ExactShapley(scorer, n, target, options.exact_limit);
  }
  shapley::MonteCarloOptions mc;
  mc.n_samples = options.n_samples;
  mc.seed = seed;
  mc.antithetic = options.antithetic;
  mc.threads = options.threads;
  mc.max_in_flight = options.max_in_flight;
  return shapley::MonteCarloShapley(scorer, n, target, mc);
}

void AppendNote(std::string& note, const std::string& text) {
  if (!note.empty()) note += "; ";
  note += text;
}

}  // namespace

ConsistencyScore CcShapScore(const NormalizedShap& pred, const NormalizedShap& expl) {
  if (pred.ratios.size() != expl.ratios.size()) {
    throw Error(ErrorKind::kContract,
                "CC-SHAP needs equal-length vectors: prediction side has " +
                    std::to_string(pred.ratios.size()) + ", explanation side has " +
                    std::to_string(expl.ratios.size()));
  }
  const NormalizedShap a = shapley::NormalizeContributions(pred.ratios);
  const NormalizedShap b = shapley::NormalizeContributions(expl.ratios);
  ConsistencyScore out;
  if (pred.degenerate || expl.degenerate || a.degenerate || b.degenerate) {
    out.degenerate = true;
    return out;
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (size_t j = 0; j < a.ratios.size(); ++j) {
    dot += a.ratios[j] * b.ratios[j];
    na += a.ratios[j] * a.ratios[j];
    nb += b.ratios[j] * b.ratios[j];
  }
  out.value = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  return out;
}

std::string EmailId(const corpus::CleanEmail& email) { return HexDigest(email.content_hash); }

uint64_t EmailSeed(uint64_t global_seed, const std::string& email_id) {
  return DeriveSeed(global_seed, HashBytes(email_id));
}

std::vector<TokenValue> TopTokens(const std::vector<std::string>& tokens,
                                  const std::vector<double>& values, size_t k) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(values[static_cast<size_t>(a)]) > std::abs(values[static_cast<size_t>(b)]);
  });
  if (order.size() > k) order.resize(k);
  std::vector<TokenValue> out;
  out.reserve(order.size());
  for (int i : order) {
    out.push_back({tokens[static_cast<size_t>(i)], i, values[static_cast<size_t>(i)]});
  }
  return out;
}

CcShapReport AuditEmail(const corpus::CleanEmail& email, const std::string& email_id,
                        const scoring::Backend& backend, const AuditOptions& options,
                        scoring::ScoreCache* cache) {
  try {
    CcShapReport report;
    report.email_id = email_id;
    report.ground_truth_label = email.label;
    report.config_digest = options.config_digest;
    report.input_text = corpus::RenderInput(email, options.prompt_template);

    scoring::TokenizerOptions tokenizer;
    tokenizer.max_tokens = options.max_tokens;
    const scoring::TokenizedInput input = scoring::TokenizeSegments(
        corpus::RenderSegments(email, options.prompt_template), tokenizer,
        options.attribute_template);
    report.truncated = input.sequence.truncated;
    for (int p : input.players) {
      report.tokens.push_back(input.sequence.surface[static_cast<size_t>(p)]);
    }
    const size_t n = input.players.size();

    const double p_phishing = backend.LabelProbability(input.sequence, Label::kPhishing);
    const double p_legitimate = backend.LabelProbability(input.sequence, Label::kLegitimate);
    report.predicted_label = p_phishing >= p_legitimate ? Label::kPhishing : Label::kLegitimate;
    report.predicted_probability =
        scoring::Clamp(std::max(p_phishing, p_legitimate));

    const scoring::ExplanationTarget explanation =
        backend.Explain(input.sequence, input.players, report.predicted_label);
    report.explanation_text = explanation.text;
    report.explanation_prompt = explanation.prompt;
    report.explanation_tokens = explanation.tokens;

    const uint64_t seed = EmailSeed(options.seed, email_id);
    const scoring::Target pred_target = scoring::ClassificationTarget{report.predicted_label};
    report.pred_raw = Attribute(shapley::MakeCoalitionScorer(backend, input, pred_target, cache),
                                n, "classification", seed, options);
    report.pred_shap = shapley::NormalizeContributions(report.pred_raw);

    if (explanation.tokens.empty() || TrimWhitespace(explanation.text).empty()) {
      report.expl_raw.target = "explanation";
      report.expl_raw.values.assign(n, 0.0);
      report.expl_raw.standard_errors.assign(n, 0.0);
      report.expl_shap.ratios.assign(n, 0.0);
      report.expl_shap.degenerate = true;
      AppendNote(report.degeneracy_note, "empty explanation");
    } else {
      const scoring::Target expl_target = explanation;
      report.expl_raw =
          Attribute(shapley::MakeCoalitionScorer(backend, input, expl_target, cache), n,
                    "explanation", seed, options);
      report.expl_shap = shapley::NormalizeContributions(report.expl_raw);
      if (report.expl_shap.degenerate) {
        AppendNote(report.degeneracy_note, "explanation-side attributions are all zero");
      }
    }
    if (report.pred_shap.degenerate) {
      AppendNote(report.degeneracy_note, "prediction-side attributions are all zero");
    }

    const ConsistencyScore score = CcShapScore(report.pred_shap, report.expl_shap);
    report.cc_shap = score.value;
    report.top_pred_tokens = TopTokens(report.tokens, report.pred_shap.ratios, options.k_top);
    report.top_expl_tokens = TopTokens(report.tokens, report.expl_shap.ratios, options.k_top);
    return report;
  } catch (const Error& e) {
    throw Error(e.kind(), "email " + email_id + ": " + e.what());
  }
}

std::vector<AuditOutcome> AuditBatch(const std::vector<AuditItem>& items,
                                     const scoring::Backend& backend,
                                     const AuditOptions& options, int jobs,
                                     scoring::ScoreCache* cache) {
  std::vector<AuditOutcome> results(items.size());
  auto run_one = [&](size_t i) {
    const AuditItem& item = items[i];
    try {
      results[i] = AuditEmail(item.email, item.email_id, backend, options, cache);
    } catch (const Error& e) {
      results[i] = AuditFailure{item.email_id, e.kind(), e.what()};
    } catch (const std::exception& e) {
      results[i] = AuditFailure{item.email_id, ErrorKind::kInternal,
                                "email " + item.email_id + ": " + e.what()};
    }
  };
  const size_t workers = std::min<size_t>(static_cast<size_t>(std::max(jobs, 1)), items.size());
  if (workers <= 1) {
    for (size_t i = 0; i < items.size(); ++i) run_one(i);
    return results;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < items.size(); i = next++) run_one(i);
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

std::vector<double> SelfConsistentBackend::ExplanationLogprobs(
    const scoring::TokenSequence& masked, const scoring::ExplanationTarget& target) const {
  return {std::log(scoring::Clamp(inner_.LabelProbability(masked, target.label)))};
}

}  // namespace ccshap::audit
