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
#include <cstdio>

#include "ccshap/harness.h"

namespace ccshap::harness {
namespace {

double Bit(const shapley::CoalitionMask& m, size_t i) { return m.visible(i) ? 1.0 : 0.0; }

double Logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Toy classifier trained on the separable synthetic corpus, scored on a
// fixed 9-token phrase.
Fixture ToyModelFixture() {
  struct State {
    toy::ToyBackend backend;
    scoring::TokenizedInput input;
    scoring::Target target;
  };
  toy::TrainingConfig config;
  config.epochs = 40;
  config.seed = 7;
  const corpus::Corpus data = toy::MakeSeparableCorpus(40, 7);
  toy::TrainResult trained = toy::TrainBce(data, data, config);
  scoring::TokenizedInput input;
  input.sequence =
      scoring::Tokenize("urgent-verify your bank account please confirm the payment today");
  for (size_t i = 0; i < input.sequence.size(); ++i) input.players.push_back(static_cast<int>(i));
  auto state = std::make_shared<State>(State{toy::ToyBackend(std::move(trained.model)),
                                             std::move(input),
                                             scoring::ClassificationTarget{Label::kPhishing}});
  Fixture f;
  f.name = "toy_model";
  f.n_players = state->input.players.size();
  f.scorer = shapley::MakeCoalitionScorer(state->backend, state->input, state->target, nullptr);
  f.state = state;
  return f;
}

}  // namespace

std::vector<Fixture> StandardFixtures() {
  std::vector<Fixture> out;
  out.push_back({"constant", 8, [](const shapley::CoalitionMask&) { return 0.42; }, nullptr});
  out.push_back({"additive", 10,
                 [](const shapley::CoalitionMask& m) {
                   return 0.2 + 0.3 * Bit(m, 1) + 0.1 * Bit(m, 2);
                 },
                 nullptr});
  // Symmetric in players 0 and 1.
  out.push_back({"symmetric_pair", 6,
                 [](const shapley::CoalitionMask& m) {
                   return 0.1 + 0.3 * Bit(m, 0) * Bit(m, 1) +
                          0.075 * (Bit(m, 0) + Bit(m, 1)) * Bit(m, 2) + 0.1 * Bit(m, 3) -
                          0.05 * Bit(m, 4) * Bit(m, 5) +
                          0.12 * Bit(m, 0) * Bit(m, 1) * Bit(m, 5);
                 },
                 nullptr});
  // Player 6 never matters.
  out.push_back({"planted_dummy", 12,
                 [](const shapley::CoalitionMask& m) {
                   return Logistic(-0.5 + 0.8 * Bit(m, 0) - 0.6 * Bit(m, 3) +
                                   0.9 * Bit(m, 5) * Bit(m, 7) + 0.4 * Bit(m, 10) -
                                   0.3 * Bit(m, 2) * Bit(m, 11) + 0.2 * Bit(m, 9));
                 },
                 nullptr});
  out.push_back(ToyModelFixture());
  return out;
}

std::vector<FixtureResult> RunVerify(const VerifyOptions& options, std::ostream& out) {
  std::vector<FixtureResult> results;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %7s %12s %10s  %s\n", "fixture", "players",
                "max_abs_dev", "tolerance", "result");
  out << line;
  for (const Fixture& f : StandardFixtures()) {
    const shapley::ShapVector exact = shapley::ExactShapley(f.scorer, f.n_players, "fixture");
    shapley::MonteCarloOptions mc;
    mc.n_samples = options.n_samples;
    mc.seed = options.seed;
    mc.threads = options.threads;
    const shapley::ShapVector estimate =
        shapley::MonteCarloShapley(f.scorer, f.n_players, "fixture", mc);
    FixtureResult r;
    r.name = f.name;
    r.n_players = f.n_players;
    for (size_t j = 0; j < f.n_players; ++j) {
      r.max_abs_deviation =
          std::max(r.max_abs_deviation, std::abs(estimate.values[j] - exact.values[j]));
    }
    r.pass = r.max_abs_deviation <= options.tolerance;
    std::snprintf(line, sizeof(line), "%-16s %7zu %12.6f %10.4f  %s\n", r.name.c_str(),
                  r.n_players, r.max_abs_deviation, options.tolerance, r.pass ? "PASS" : "FAIL");
    out << line;
    results.push_back(r);
  }
  return results;
}

}  // namespace ccshap::harness
