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

#include "ccshap/scoring.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>

#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "ccshap/text_util.h"

namespace ccshap::scoring {
namespace {

bool IsWordByte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool IsConnector(char c) { return c == '-' || c == '_' || c == '\'' || c == '.'; }

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Appends tokens of `text` to `seq`, stopping once `limit` tokens were
// added. Returns true if tokens were dropped.
bool AppendTokens(std::string_view text, size_t limit, TokenSequence& seq) {
  size_t added = 0;
  size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (IsSpace(text[i])) {
      ++i;
      continue;
    }
    size_t j = i + 1;
    if (IsWordByte(c)) {
      while (j < text.size()) {
        const auto cj = static_cast<unsigned char>(text[j]);
        if (IsWordByte(cj)) {
          ++j;
        } else if (IsConnector(text[j]) && j + 1 < text.size() &&
                   IsWordByte(static_cast<unsigned char>(text[j + 1]))) {
          j += 2;
        } else {
          break;
        }
      }
    }
    if (added == limit) return true;
    const std::string_view word = text.substr(i, j - i);
    std::string lower = ToLowerAscii(word);
    seq.ids.push_back(TokenId(lower));
    seq.surface.push_back(std::move(lower));
    seq.original.emplace_back(word);
    ++added;
    i = j;
  }
  return false;
}

}  // namespace

int32_t TokenId(std::string_view surface) {
  const uint64_t h = HashBytes(surface);
  return static_cast<int32_t>(h % 0x7ffffffeULL) + 1;
}

TokenSequence Tokenize(std::string_view text, const TokenizerOptions& options) {
  TokenSequence seq;
  seq.truncated = AppendTokens(text, options.max_tokens, seq);
  if (seq.size() == 0) {
    throw Error(ErrorKind::kData, "nothing to attribute: input has no tokens");
  }
  return seq;
}

TokenizedInput TokenizeSegments(const std::vector<corpus::Segment>& segments,
                                const TokenizerOptions& options,
                                bool attribute_template) {
  using Kind = corpus::Segment::Kind;
  // Budget left for the body once every other segment is kept whole.
  size_t fixed = 0;
  for (const auto& segment : segments) {
    if (segment.kind == Kind::kBody) continue;
    TokenSequence probe;
    AppendTokens(segment.text, SIZE_MAX, probe);
    fixed += probe.size();
  }
  size_t body_budget = options.max_tokens > fixed ? options.max_tokens - fixed : 0;

  TokenizedInput input;
  for (const auto& segment : segments) {
    const size_t before = input.sequence.size();
    if (segment.kind == Kind::kBody) {
      const size_t start = input.sequence.size();
      if (AppendTokens(segment.text, body_budget, input.sequence)) {
        input.sequence.truncated = true;
      }
      body_budget -= input.sequence.size() - start;
    } else {
      AppendTokens(segment.text, SIZE_MAX, input.sequence);
    }
    if (segment.kind != Kind::kTemplate || attribute_template) {
      for (size_t p = before; p < input.sequence.size(); ++p) {
        input.players.push_back(static_cast<int>(p));
      }
    }
  }
  if (input.sequence.size() == 0) {
    throw Error(ErrorKind::kData, "nothing to attribute: input has no tokens");
  }
  if (input.players.empty()) {
    throw Error(ErrorKind::kData, "nothing to attribute: every token is template text");
  }
  return input;
}

CoalitionMask::CoalitionMask(size_t size, bool visible)
    : size_(size), words_((size + 63) / 64, visible ? ~uint64_t{0} : 0) {
  if (visible && size % 64 != 0) {
    words_.back() &= (uint64_t{1} << (size % 64)) - 1;
  }
}

void CoalitionMask::set(size_t i, bool visible) {
  const uint64_t bit = uint64_t{1} << (i % 64);
  if (visible) {
    words_[i / 64] |= bit;
  } else {
    words_[i / 64] &= ~bit;
  }
}

size_t CoalitionMask::count() const {
  size_t total = 0;
  for (uint64_t w : words_) total += static_cast<size_t>(std::popcount(w));
  return total;
}

std::string CoalitionMask::ToString() const {
  std::string out(size_, '0');
  for (size_t i = 0; i < size_; ++i) {
    if (visible(i)) out[i] = '1';
  }
  return out;
}

TokenSequence ApplyMask(const TokenSequence& sequence, const CoalitionMask& mask) {
  if (mask.size() != sequence.size()) {
    throw Error(ErrorKind::kContract,
                "mask length " + std::to_string(mask.size()) +
                    " does not match sequence length " + std::to_string(sequence.size()));
  }
  TokenSequence masked = sequence;
  for (size_t i = 0; i < sequence.size(); ++i) {
    if (!mask.visible(i)) {
      masked.ids[i] = sequence.pad_id;
      masked.surface[i] = std::string(kMaskLiteral);
      masked.original[i] = std::string(kMaskLiteral);
    }
  }
  return masked;
}

std::string Detokenize(const TokenSequence& sequence) {
  std::string out;
  for (size_t i = 0; i < sequence.size(); ++i) {
    if (i > 0) out.push_back(' ');
    if (sequence.ids[i] == sequence.pad_id) {
      out.append(kMaskLiteral);
    } else {
      out.append(sequence.original[i]);
    }
  }
  return out;
}

std::string TargetTag(const Target& target) {
  return std::holds_alternative<ClassificationTarget>(target) ? "classification"
                                                              : "explanation";
}

uint64_t TargetDigest(const Target& target) {
  Fnv1a64 hash;
  if (const auto* c = std::get_if<ClassificationTarget>(&target)) {
    hash.Update(std::string_view("classification")).Update(LabelName(c->label));
  } else {
    const auto& e = std::get<ExplanationTarget>(target);
    hash.Update(std::string_view("explanation")).Update(LabelName(e.label));
    hash.Update(static_cast<uint64_t>(e.text.size())).Update(e.text);
    hash.Update(static_cast<uint64_t>(e.tokens.size()));
    for (const auto& t : e.tokens) hash.Update(static_cast<uint64_t>(t.size())).Update(t);
  }
  return hash.digest();
}

uint64_t SequenceDigest(const TokenSequence& sequence) {
  Fnv1a64 hash;
  hash.Update(static_cast<uint64_t>(sequence.size()));
  hash.Update(static_cast<uint64_t>(static_cast<uint32_t>(sequence.pad_id)));
  for (size_t i = 0; i < sequence.size(); ++i) {
    hash.Update(static_cast<uint64_t>(static_cast<uint32_t>(sequence.ids[i])));
    hash.Update(static_cast<uint64_t>(sequence.original[i].size())).Update(sequence.original[i]);
  }
  return hash.digest();
}

double Clamp(double probability) {
  return std::clamp(probability, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

double Score(const Backend& backend, const ScoreRequest& request) {
  const TokenSequence masked = ApplyMask(request.sequence, request.mask);
  double p;
  if (const auto* c = std::get_if<ClassificationTarget>(&request.target)) {
    p = backend.LabelProbability(masked, c->label);
  } else {
    const auto& e = std::get<ExplanationTarget>(request.target);
    if (e.tokens.empty()) {
      throw Error(ErrorKind::kContract, "explanation target has no tokens to score");
    }
    const std::vector<double> logprobs = backend.ExplanationLogprobs(masked, e);
    if (logprobs.empty()) {
      throw Error(ErrorKind::kInternal, "backend " + backend.id() +
                                            " returned no explanation log-probabilities");
    }
    double sum = 0.0;
    for (double lp : logprobs) sum += lp;
    p = std::exp(sum / static_cast<double>(logprobs.size()));
  }
  if (std::isnan(p)) {
    throw Error(ErrorKind::kInternal, "backend " + backend.id() + " returned NaN for mask " +
                                          request.mask.ToString());
  }
  return Clamp(p);
}

}  // namespace ccshap::scoring
