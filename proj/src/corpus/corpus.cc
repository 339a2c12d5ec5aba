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

#include "ccshap/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <thread>
#include <unordered_set>

#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "ccshap/text_util.h"
#include "json.hpp"

namespace ccshap::corpus {
namespace {

using ordered_json = nlohmann::ordered_json;

struct CleanOutcome {
  std::optional<CleanEmail> email;
  std::string reason;
};

// "Name <addr>" -> "Name (addr)", quotes around the name dropped.
std::string FormatSender(std::string_view from) {
  const size_t open = from.rfind('<');
  const size_t close = open == std::string_view::npos ? open : from.find('>', open);
  if (close == std::string_view::npos) return std::string(from);
  const std::string address(TrimWhitespace(from.substr(open + 1, close - open - 1)));
  std::string_view name = TrimWhitespace(from.substr(0, open));
  if (name.size() >= 2 && name.front() == '"' && name.back() == '"') {
    name = name.substr(1, name.size() - 2);
  }
  std::string unescaped;
  for (size_t i = 0; i < name.size(); ++i) {
    if (name[i] == '\\' && i + 1 < name.size()) ++i;
    unescaped += name[i];
  }
  unescaped = std::string(TrimWhitespace(unescaped));
  if (unescaped.empty()) return address;
  if (address.empty()) return unescaped;
  return unescaped + " (" + address + ")";
}

CleanOutcome CleanOne(const RawEmail& raw, const CleanOptions& options) {
  CleanOutcome outcome;
  if (raw.origin == Origin::kUnlabeled) {
    outcome.reason = "unlabeled record";
    return outcome;
  }
  CleanEmail email;
  email.sender = CleanText(FormatSender(raw.Header("From").value_or("")));
  email.subject = CleanText(raw.Header("Subject").value_or(""));
  email.body = CleanText(raw.body_raw);
  email.label = raw.origin == Origin::kPhishingSource ? Label::kPhishing
                                                       : Label::kLegitimate;
  if (email.body.empty() && email.subject.empty()) {
    outcome.reason = "empty after cleaning";
    return outcome;
  }
  const double ratio = StopwordRatio(email.subject + " " + email.body);
  if (ratio < options.min_stopword_ratio) {
    outcome.reason = "non-English (stopword ratio " + std::to_string(ratio) + ")";
    return outcome;
  }
  email.content_hash = ContentHash(email.sender, email.subject, email.body);
  outcome.email = std::move(email);
  return outcome;
}

std::vector<size_t> IndicesOf(const std::vector<CleanEmail>& records, Label label) {
  std::vector<size_t> out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == label) out.push_back(i);
  }
  return out;
}

// First `take` entries of a seeded shuffle of `indices`, sorted back into
// corpus order.
std::vector<size_t> SampleWithoutReplacement(std::vector<size_t> indices,
                                             size_t take, uint64_t seed) {
  Rng rng(seed);
  for (size_t i = 0; i < take; ++i) {
    const size_t j = i + static_cast<size_t>(rng.Below(indices.size() - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(take);
  std::sort(indices.begin(), indices.end());
  return indices;
}

std::string LowerLabelName(Label label) { return ToLowerAscii(LabelName(label)); }

}  // namespace

Corpus::Corpus(std::vector<CleanEmail> records) : records_(std::move(records)) {
  for (Label label : kAllLabels) class_counts_[label] = 0;
  for (const CleanEmail& email : records_) ++class_counts_[email.label];
}

size_t Corpus::count(Label label) const {
  const auto it = class_counts_.find(label);
  return it == class_counts_.end() ? 0 : it->second;
}

CleanResult CleanAll(const std::vector<RawEmail>& raw, const CleanOptions& options,
                     int threads) {
  std::vector<CleanOutcome> outcomes(raw.size());
  const size_t workers =
      std::clamp<size_t>(static_cast<size_t>(std::max(threads, 1)), 1,
                         std::max<size_t>(raw.size(), 1));
  if (workers == 1) {
    for (size_t i = 0; i < raw.size(); ++i) outcomes[i] = CleanOne(raw[i], options);
  } else {
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (size_t i = w; i < raw.size(); i += workers) {
          outcomes[i] = CleanOne(raw[i], options);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  CleanResult result;
  for (size_t i = 0; i < raw.size(); ++i) {
    if (outcomes[i].email) {
      result.emails.push_back(std::move(*outcomes[i].email));
    } else {
      result.skipped.push_back({raw[i].source_id, outcomes[i].reason});
    }
  }
  return result;
}

std::vector<CleanEmail> Deduplicate(const std::vector<CleanEmail>& emails) {
  std::unordered_set<uint64_t> seen;
  std::vector<CleanEmail> out;
  out.reserve(emails.size());
  for (const CleanEmail& email : emails) {
    if (seen.insert(email.content_hash).second) out.push_back(email);
  }
  return out;
}

Corpus Balance(const Corpus& corpus, size_t per_class, uint64_t seed) {
  std::vector<size_t> keep;
  for (Label label : kAllLabels) {
    std::vector<size_t> indices = IndicesOf(corpus.records(), label);
    if (indices.size() < per_class) {
      throw Error(ErrorKind::kData,
                  "cannot balance to " + std::to_string(per_class) +
                      " per class: " + LowerLabelName(label) + "=" +
                      std::to_string(indices.size()) + " available");
    }
    const uint64_t stream = label == Label::kPhishing ? 1 : 2;
    auto picked = SampleWithoutReplacement(std::move(indices), per_class,
                                           DeriveSeed(seed, stream));
    keep.insert(keep.end(), picked.begin(), picked.end());
  }
  std::sort(keep.begin(), keep.end());
  std::vector<CleanEmail> records;
  records.reserve(keep.size());
  for (size_t i : keep) records.push_back(corpus.records()[i]);
  return Corpus(std::move(records));
}

Split SplitCorpus(const Corpus& corpus, double train_fraction, uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::kConfig, "train fraction must lie in (0, 1), got " +
                                        std::to_string(train_fraction));
  }
  if (corpus.empty()) throw Error(ErrorKind::kData, "cannot split an empty corpus");
  std::vector<bool> in_train(corpus.size(), false);
  for (Label label : kAllLabels) {
    std::vector<size_t> indices = IndicesOf(corpus.records(), label);
    const auto take = static_cast<size_t>(
        std::llround(train_fraction * static_cast<double>(indices.size())));
    const uint64_t stream = label == Label::kPhishing ? 11 : 12;
    for (size_t i : SampleWithoutReplacement(std::move(indices), take,
                                             DeriveSeed(seed, stream))) {
      in_train[i] = true;
    }
  }
  std::vector<CleanEmail> train, validation;
  for (size_t i = 0; i < corpus.size(); ++i) {
    (in_train[i] ? train : validation).push_back(corpus.records()[i]);
  }
  return {Corpus(std::move(train)), Corpus(std::move(validation))};
}

std::vector<Segment> RenderSegments(const CleanEmail& email,
                                    std::string_view prompt_template) {
  struct Placeholder {
    std::string_view token;
    Segment::Kind kind;
  };
  static constexpr Placeholder kPlaceholders[] = {
      {"{sender}", Segment::Kind::kSender},
      {"{subject}", Segment::Kind::kSubject},
      {"{body}", Segment::Kind::kBody},
  };
  for (const auto& p : kPlaceholders) {
    if (prompt_template.find(p.token) == std::string_view::npos) {
      throw Error(ErrorKind::kTemplate,
                  "prompt template is missing placeholder " + std::string(p.token));
    }
  }
  std::vector<Segment> segments;
  std::string literal;
  size_t i = 0;
  while (i < prompt_template.size()) {
    const Placeholder* match = nullptr;
    for (const auto& p : kPlaceholders) {
      if (prompt_template.substr(i, p.token.size()) == p.token) {
        match = &p;
        break;
      }
    }
    if (match == nullptr) {
      literal.push_back(prompt_template[i++]);
      continue;
    }
    if (!literal.empty()) {
      segments.push_back({Segment::Kind::kTemplate, std::move(literal)});
      literal.clear();
    }
    const std::string& value = match->kind == Segment::Kind::kSender ? email.sender
                               : match->kind == Segment::Kind::kSubject
                                   ? email.subject
                                   : email.body;
    segments.push_back({match->kind, value});
    i += match->token.size();
  }
  if (!literal.empty()) segments.push_back({Segment::Kind::kTemplate, std::move(literal)});
  return segments;
}

std::string RenderInput(const CleanEmail& email, std::string_view prompt_template) {
  std::string out;
  for (const Segment& s : RenderSegments(email, prompt_template)) out += s.text;
  return out;
}

std::string ToJsonLine(const CleanEmail& email) {
  ordered_json row;
  row["sender"] = email.sender;
  row["subject"] = email.subject;
  row["body"] = email.body;
  row["label"] = LabelName(email.label);
  row["content_hash"] = HexDigest(email.content_hash);
  return row.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

CleanEmail FromJsonLine(std::string_view line) {
  const auto row = ordered_json::parse(line, nullptr, false);
  if (row.is_discarded() || !row.is_object()) {
    throw Error(ErrorKind::kData, "corpus line is not a JSON object");
  }
  CleanEmail email;
  try {
    email.sender = row.at("sender").get<std::string>();
    email.subject = row.at("subject").get<std::string>();
    email.body = row.at("body").get<std::string>();
    const auto label = ParseLabel(row.at("label").get<std::string>());
    if (!label) throw Error(ErrorKind::kData, "corpus line has an unknown label");
    email.label = *label;
    if (auto it = row.find("content_hash"); it != row.end()) {
      email.content_hash = std::stoull(it->get<std::string>(), nullptr, 16);
    } else {
      email.content_hash = ContentHash(email.sender, email.subject, email.body);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kData, std::string("malformed corpus line: ") + e.what());
  }
  return email;
}

void WriteCorpusJsonl(const std::filesystem::path& path, const Corpus& corpus) {
  std::string out;
  for (const CleanEmail& email : corpus.records()) {
    out += ToJsonLine(email);
    out += '\n';
  }
  WriteFileOrThrow(path, out);
}

Corpus ReadCorpusJsonl(const std::filesystem::path& path) {
  const std::string text = ReadFileOrThrow(path);
  std::vector<CleanEmail> records;
  size_t start = 0;
  size_t line_no = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    ++line_no;
    const std::string_view line(text.data() + start, nl - start);
    if (!TrimWhitespace(line).empty()) {
      try {
        records.push_back(FromJsonLine(line));
      } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " +
                                  e.what());
      }
    }
    start = nl + 1;
  }
  return Corpus(std::move(records));
}

void WriteSkipReport(const std::filesystem::path& path, const SkipReport& report) {
  std::string out;
  for (const SkipEntry& entry : report) {
    ordered_json row;
    row["source_id"] = entry.source_id;
    row["reason"] = entry.reason;
    out += row.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
    out += '\n';
  }
  WriteFileOrThrow(path, out);
}

}  // namespace ccshap::corpus
