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

#ifndef CCSHAP_LABEL_H_
#define CCSHAP_LABEL_H_

#include <array>
#include <optional>
#include <string_view>

namespace ccshap {

enum class Label { kPhishing, kLegitimate };

inline constexpr std::array<Label, 2> kAllLabels = {Label::kPhishing,
                                                    Label::kLegitimate};

inline Label Opposite(Label label) {
  return label == Label::kPhishing ? Label::kLegitimate : Label::kPhishing;
}

// "PHISHING" / "LEGITIMATE".
std::string_view LabelName(Label label);

// Accepts the canonical names plus common corpus spellings
// (phishing/spam/1, legitimate/ham/0), case-insensitively.
std::optional<Label> ParseLabel(std::string_view text);

}  // namespace ccshap

#endif  // CCSHAP_LABEL_H_
