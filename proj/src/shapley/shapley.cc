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

#include "ccshap/shapley.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <memory>
#include <thread>

#include "ccshap/error.h"
#include "ccshap/hashing.h"

namespace ccshap::shapley {
namespace {

// Calls the scorer, attaching the coalition to any error it raises.
double Evaluate(const CoalitionScorer& scorer, const CoalitionMask& mask) {
  try {
    return scorer(mask);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " [coalition " + mask.ToString() + "]");
  }
}

CoalitionMask MaskFromBits(uint64_t bits, size_t n) {
  CoalitionMask mask(n);
  for (size_t i = 0; i < n; ++i) {
    if ((bits >> i) & 1u) mask.set(i, true);
  }
  return mask;
}

// Marginal contributions of one permutation, written into `row`.
void WalkPermutation(const CoalitionScorer& scorer, size_t n, uint64_t seed,
                     size_t index, bool antithetic, double baseline,
                     std::span<double> row) {
  const uint64_t stream = antithetic ? index / 2 : index;
  Rng rng(DeriveSeed(seed, stream));
  std::vector<int> perm = RandomPermutation(static_cast<int>(n), rng);
  if (antithetic && index % 2 == 1) std::reverse(perm.begin(), perm.end());
  CoalitionMask mask(n);
  double previous = baseline;
  for (int player : perm) {
    mask.set(static_cast<size_t>(player), true);
    const double current = Evaluate(scorer, mask);
    row[static_cast<size_t>(player)] = current - previous;
    previous = current;
  }
}

}  // namespace

ShapVector ExactShapley(const CoalitionScorer& scorer, size_t n_players,
                        std::string target, size_t exact_limit) {
  if (n_players > exact_limit || n_players > 30) {
    throw Error(ErrorKind::kConfig,
                "exact Shapley needs 2^n evaluations; n=" + std::to_string(n_players) +
                    " exceeds exact_limit=" + std::to_string(exact_limit) +
                    ", use Monte Carlo estimation instead");
  }
  const size_t n = n_players;
  const uint64_t subsets = uint64_t{1} << n;
  std::vector<double> value(subsets);
  for (uint64_t bits = 0; bits < subsets; ++bits) {
    value[bits] = Evaluate(scorer, MaskFromBits(bits, n));
  }
  // weight[s] = s! (n-1-s)! / n!
  std::vector<double> weight(n, 0.0);
  for (size_t s = 0; s < n; ++s) {
    double w = 1.0 / static_cast<double>(n);
    // 1 / (n * C(n-1, s))
    for (size_t k = 1; k <= s; ++k) {
      w *= static_cast<double>(k) / static_cast<double>(n - k);
    }
    weight[s] = w;
  }
  ShapVector out;
  out.target = std::move(target);
  out.values.assign(n, 0.0);
  out.standard_errors.assign(n, 0.0);
  out.baseline = value[0];
  out.full_score = value[subsets - 1];
  for (size_t j = 0; j < n; ++j) {
    const uint64_t bit = uint64_t{1} << j;
    double sum = 0.0;
    for (uint64_t bits = 0; bits < subsets; ++bits) {
      if (bits & bit) continue;
      sum += weight[static_cast<size_t>(std::popcount(bits))] *
             (value[bits | bit] - value[bits]);
    }
    out.values[j] = sum;
  }
  return out;
}

ShapVector MonteCarloShapley(const CoalitionScorer& scorer, size_t n_players,
                             std::string target, const MonteCarloOptions& options) {
  if (options.n_samples == 0) {
    throw Error(ErrorKind::kConfig, "Monte Carlo Shapley needs at least one sample");
  }
  const size_t n = n_players;
  const size_t samples = options.n_samples;
  ShapVector out;
  out.target = std::move(target);
  out.n_samples = samples;
  out.values.assign(n, 0.0);
  out.standard_errors.assign(n, 0.0);
  out.baseline = Evaluate(scorer, CoalitionMask::AllHidden(n));
  out.full_score = Evaluate(scorer, CoalitionMask::AllVisible(n));
  if (n == 0) return out;

  std::vector<double> marginals(samples * n, 0.0);
  int workers = std::max(options.threads, 1);
  if (options.max_in_flight > 0) workers = std::min(workers, options.max_in_flight);
  workers = static_cast<int>(std::min<size_t>(static_cast<size_t>(workers), samples));

  auto run_range = [&](size_t begin, size_t end) {
    for (size_t k = begin; k < end; ++k) {
      WalkPermutation(scorer, n, options.seed, k, options.antithetic, out.baseline,
                      std::span<double>(marginals.data() + k * n, n));
    }
  };
  if (workers == 1) {
    run_range(0, samples);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    const size_t chunk = (samples + static_cast<size_t>(workers) - 1) / static_cast<size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const size_t begin = std::min(samples, static_cast<size_t>(w) * chunk);
      const size_t end = std::min(samples, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          run_range(begin, end);
        } catch (...) {
          errors[static_cast<size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Fixed-order reduction.
  for (size_t k = 0; k < samples; ++k) {
    for (size_t j = 0; j < n; ++j) out.values[j] += marginals[k * n + j];
  }
  for (size_t j = 0; j < n; ++j) out.values[j] /= static_cast<double>(samples);

  // Standard errors over independent units: antithetic pairs count as one
  // unit (their two permutations are correlated).
  const size_t unit = options.antithetic ? 2 : 1;
  const size_t units = (samples + unit - 1) / unit;
  if (units >= 2) {
    for (size_t j = 0; j < n; ++j) {
      double mean = 0.0;
      std::vector<double> unit_means(units);
      for (size_t u = 0; u < units; ++u) {
        const size_t begin = u * unit;
        const size_t end = std::min(samples, begin + unit);
        double s = 0.0;
        for (size_t k = begin; k < end; ++k) s += marginals[k * n + j];
        unit_means[u] = s / static_cast<double>(end - begin);
        mean += unit_means[u];
      }
      mean /= static_cast<double>(units);
      double ss = 0.0;
      for (double m : unit_means) ss += (m - mean) * (m - mean);
      out.standard_errors[j] =
          std::sqrt(ss / static_cast<double>(units - 1) / static_cast<double>(units));
    }
  }
  return out;
}

NormalizedShap NormalizeContributions(std::span<const double> values) {
  NormalizedShap out;
  out.ratios.assign(values.size(), 0.0);
  double l1 = 0.0;
  for (double v : values) l1 += std::abs(v);
  if (l1 == 0.0) {
    out.degenerate = true;
    return out;
  }
  for (size_t j = 0; j < values.size(); ++j) out.ratios[j] = values[j] / l1;
  return out;
}

CoalitionScorer MakeCoalitionScorer(const scoring::Backend& backend,
                                    const scoring::TokenizedInput& input,
                                    const scoring::Target& target,
                                    scoring::ScoreCache* cache) {
  return [&backend, &input, &target, cache](const CoalitionMask& players) {
    if (players.size() != input.players.size()) {
      throw Error(ErrorKind::kContract,
                  "coalition has " + std::to_string(players.size()) + " players, input has " +
                      std::to_string(input.players.size()));
    }
    CoalitionMask positions = CoalitionMask::AllVisible(input.sequence.size());
    for (size_t p = 0; p < players.size(); ++p) {
      if (!players.visible(p)) positions.set(static_cast<size_t>(input.players[p]), false);
    }
    const scoring::ScoreRequest request{input.sequence, positions, target};
    return cache != nullptr ? scoring::CachedScore(backend, request, *cache)
                            : scoring::Score(backend, request);
  };
}

nlohmann::ordered_json ToJson(const ShapVector& shap) {
  nlohmann::ordered_json out;
  out["target"] = shap.target;
  out["n_samples"] = shap.n_samples;
  out["baseline"] = shap.baseline;
  out["full_score"] = shap.full_score;
  out["values"] = shap.values;
  out["stderr"] = shap.standard_errors;
  return out;
}

ShapVector ShapVectorFromJson(const nlohmann::ordered_json& json) {
  ShapVector shap;
  try {
    shap.target = json.at("target").get<std::string>();
    shap.n_samples = json.at("n_samples").get<size_t>();
    shap.baseline = json.at("baseline").get<double>();
    shap.full_score = json.at("full_score").get<double>();
    shap.values = json.at("values").get<std::vector<double>>();
    shap.standard_errors = json.at("stderr").get<std::vector<double>>();
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kData, std::string("malformed SHAP vector: ") + e.what());
  }
  return shap;
}

}  // namespace ccshap::shapley
