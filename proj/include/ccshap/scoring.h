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

// The coalition-scoring contract: tokenization, pad-token masking, and
// probability evaluation of either the classification decision or the
// likelihood of a generated explanation.

#ifndef CCSHAP_SCORING_H_
#define CCSHAP_SCORING_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ccshap/corpus.h"
#include "ccshap/label.h"

namespace ccshap::scoring {

inline constexpr int32_t kPadId = 0;
// Stand-in for the pad token when a backend consumes text, not ids.
inline constexpr std::string_view kMaskLiteral = "<mask>";
inline constexpr double kProbabilityEpsilon = 1e-9;

struct TokenSequence {
  std::vector<int32_t> ids;
  std::vector<std::string> surface;   // lower-cased
  std::vector<std::string> original;  // as written; used to rebuild text
  int32_t pad_id = kPadId;
  bool truncated = false;

  size_t size() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

// Id of a surface form. Never equals kPadId.
int32_t TokenId(std::string_view surface);

struct TokenizerOptions {
  size_t max_tokens = 256;
};

// Lower-case word-boundary split with every punctuation character as its
// own token. Words may contain inner '-', '_', '\'' and '.' between
// alphanumerics ("urgent-verify", "don't", "paypal.com"). Text past
// max_tokens is dropped and `truncated` set. Throws a data error on text
// with no tokens ("nothing to attribute").
TokenSequence Tokenize(std::string_view text, const TokenizerOptions& options = {});

// A tokenized prompt plus the positions that take part in attribution.
struct TokenizedInput {
  TokenSequence sequence;
  // Attributable positions, ascending. Template tokens are excluded unless
  // attribute_template is set; they then stay visible in every coalition.
  std::vector<int> players;
};

// Tokenizes rendered segments under the max_tokens budget. Sender, subject
// and template tokens are always kept; the body is truncated from the tail.
TokenizedInput TokenizeSegments(const std::vector<corpus::Segment>& segments,
                                const TokenizerOptions& options,
                                bool attribute_template);

// Visibility bitset over a token sequence (or over attribution players).
class CoalitionMask {
 public:
  CoalitionMask() = default;
  explicit CoalitionMask(size_t size, bool visible = false);

  static CoalitionMask AllVisible(size_t size) { return CoalitionMask(size, true); }
  static CoalitionMask AllHidden(size_t size) { return CoalitionMask(size, false); }

  size_t size() const { return size_; }
  bool visible(size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
  void set(size_t i, bool visible);
  size_t count() const;
  std::span<const uint64_t> words() const { return words_; }

  // "1011..." with position 0 first.
  std::string ToString() const;

  bool operator==(const CoalitionMask&) const = default;

 private:
  size_t size_ = 0;
  std::vector<uint64_t> words_;
};

// Hidden positions carry pad_id (and the mask literal as surface).
// Throws a contract violation if the lengths differ.
TokenSequence ApplyMask(const TokenSequence& sequence, const CoalitionMask& mask);

// Joins the original surfaces with single spaces, writing kMaskLiteral at
// padded positions. This is the text a remote backend receives.
std::string Detokenize(const TokenSequence& sequence);

struct ClassificationTarget {
  Label label;
};

struct ExplanationTarget {
  Label label;                      // the decision being explained
  std::string text;                 // full explanation text
  std::vector<std::string> tokens;  // tokens whose likelihood is scored
  std::string prompt;               // elicitation prompt, for provenance
};

using Target = std::variant<ClassificationTarget, ExplanationTarget>;

std::string TargetTag(const Target& target);  // "classification" / "explanation"
uint64_t TargetDigest(const Target& target);
uint64_t SequenceDigest(const TokenSequence& sequence);

struct ScoreRequest {
  const TokenSequence& sequence;
  const CoalitionMask& mask;
  const Target& target;
};

// A model the audit can query. Implementations must be pure: identical
// inputs give identical outputs, and concurrent calls are allowed.
class Backend {
 public:
  virtual ~Backend() = default;

  // Stable identifier; part of every score-cache key.
  virtual std::string id() const = 0;

  // P(label | masked input).
  virtual double LabelProbability(const TokenSequence& masked, Label label) const = 0;

  // Natural-log probability of each explanation token given the masked
  // input. Must return one entry per scored token.
  virtual std::vector<double> ExplanationLogprobs(const TokenSequence& masked,
                                                  const ExplanationTarget& target) const = 0;

  // Produces an explanation for `predicted` from the unmasked input.
  // `players` lists the positions the explanation may cite.
  virtual ExplanationTarget Explain(const TokenSequence& full,
                                    std::span<const int> players,
                                    Label predicted) const = 0;
};

// Probability of the request's target under the masked input, clamped to
// [1e-9, 1 - 1e-9]. Explanation targets score the geometric mean of the
// per-token probabilities. NaN from a backend is an internal error.
double Score(const Backend& backend, const ScoreRequest& request);

double Clamp(double probability);

}  // namespace ccshap::scoring

#endif  // CCSHAP_SCORING_H_
