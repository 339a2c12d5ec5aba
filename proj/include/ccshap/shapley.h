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

// Shapley value estimation over token coalitions.
//
// A "player" is one attributable token position. A coalition scorer maps a
// visibility mask over the players to a probability. ExactShapley enumerates
// all 2^n coalitions; MonteCarloShapley averages marginal contributions
// along seeded random permutations, i.e. for permutation pi and player j it
// accumulates P(pred_pi(j) + {j}) - P(pred_pi(j)) where pred_pi(j) is the
// set of players preceding j in pi. N counts permutations; each permutation
// contributes one sampled coalition per player. The estimator is unbiased
// for the exact value.

#ifndef CCSHAP_SHAPLEY_H_
#define CCSHAP_SHAPLEY_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ccshap/score_cache.h"
#include "ccshap/scoring.h"
#include "json.hpp"

namespace ccshap::shapley {

using scoring::CoalitionMask;

// Scores a coalition of players. Must be pure and safe to call
// concurrently when MonteCarloOptions::threads > 1.
using CoalitionScorer = std::function<double(const CoalitionMask& players)>;

struct ShapVector {
  std::string target;                    // "classification" / "explanation"
  std::vector<double> values;            // phi_j, probability units
  std::vector<double> standard_errors;   // per-value SE; zeros for exact
  size_t n_samples = 0;                  // permutations used; 0 for exact
  double baseline = 0.0;                 // P(no player visible)
  double full_score = 0.0;               // P(all players visible)

  bool operator==(const ShapVector&) const = default;
};

struct NormalizedShap {
  std::vector<double> ratios;  // c_j = phi_j / sum_i |phi_i|, in [-1, 1]
  bool degenerate = false;     // every phi_j was zero

  bool operator==(const NormalizedShap&) const = default;
};

inline constexpr size_t kDefaultExactLimit = 14;

// Classical Shapley values by enumerating all 2^n coalitions. Throws a
// config error directing the caller to MonteCarloShapley when
// n_players > exact_limit.
ShapVector ExactShapley(const CoalitionScorer& scorer, size_t n_players,
                        std::string target, size_t exact_limit = kDefaultExactLimit);

struct MonteCarloOptions {
  size_t n_samples = 2000;
  uint64_t seed = 0;
  // Pairs permutation 2k+1 with the reverse of permutation 2k.
  bool antithetic = true;
  int threads = 1;
  // Upper bound on concurrent scorer calls; 0 means `threads`.
  int max_in_flight = 0;
};

// Permutation-sampling estimate. Bit-identical for identical inputs
// regardless of thread count: permutation k draws from a stream derived
// from (seed, k) and the reduction runs in permutation order.
ShapVector MonteCarloShapley(const CoalitionScorer& scorer, size_t n_players,
                             std::string target, const MonteCarloOptions& options);

NormalizedShap NormalizeContributions(std::span<const double> values);
inline NormalizedShap NormalizeContributions(const ShapVector& shap) {
  return NormalizeContributions(shap.values);
}

// Adapts a backend to the player view of a tokenized input: hidden players
// are padded, non-player positions stay visible. Scores go through `cache`
// when it is non-null.
CoalitionScorer MakeCoalitionScorer(const scoring::Backend& backend,
                                    const scoring::TokenizedInput& input,
                                    const scoring::Target& target,
                                    scoring::ScoreCache* cache);

// {target, n_samples, baseline, full_score, values[], stderr[]}
nlohmann::ordered_json ToJson(const ShapVector& shap);
ShapVector ShapVectorFromJson(const nlohmann::ordered_json& json);

}  // namespace ccshap::shapley

#endif  // CCSHAP_SHAPLEY_H_
