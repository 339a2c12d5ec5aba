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

#include <cctype>
#include <cmath>
#include <numeric>
#include <optional>

#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "ccshap/label.h"

namespace ccshap {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return "config error";
    case ErrorKind::kTemplate:
      return "template error";
    case ErrorKind::kIngestion:
      return "ingestion error";
    case ErrorKind::kData:
      return "data error";
    case ErrorKind::kContract:
      return "contract violation";
    case ErrorKind::kTraining:
      return "training error";
    case ErrorKind::kTransport:
      return "transport error";
    case ErrorKind::kProtocol:
      return "protocol error";
    case ErrorKind::kInternal:
      return "internal error";
    case ErrorKind::kVerification:
      return "verification failure";
  }
  return "error";
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kTemplate:
      return 1;
    case ErrorKind::kTransport:
    case ErrorKind::kProtocol:
      return 3;
    case ErrorKind::kVerification:
      return 4;
    default:
      return 2;
  }
}

std::string HexDigest(uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

uint64_t Rng::Below(uint64_t bound) {
  // Reject the top partial bucket so every residue is equally likely.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t x;
  do {
    x = Next();
  } while (x >= limit);
  return x % bound;
}

double Rng::Normal() {
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<int> RandomPermutation(int n, Rng& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.Shuffle(std::span<int>(perm));
  return perm;
}

std::string_view LabelName(Label label) {
  return label == Label::kPhishing ? "PHISHING" : "LEGITIMATE";
}

std::optional<Label> ParseLabel(std::string_view text) {
  std::string lower;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
    lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (lower == "phishing" || lower == "phish" || lower == "spam" || lower == "1") {
    return Label::kPhishing;
  }
  if (lower == "legitimate" || lower == "ham" || lower == "legit" || lower == "0") {
    return Label::kLegitimate;
  }
  return std::nullopt;
}

}  // namespace ccshap
