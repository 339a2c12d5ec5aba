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

// Email corpus preparation: ingestion of .eml directories, mbox files,
// JSONL and CSV exports, followed by cleaning, deduplication, class
// balancing and a stratified train/validation split.
//
// Every operation returns a fresh collection; inputs are never mutated.

#ifndef CCSHAP_CORPUS_H_
#define CCSHAP_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ccshap/label.h"

namespace ccshap::corpus {

enum class Origin { kPhishingSource, kHamSource, kUnlabeled };

enum class Format { kEmlDir, kMbox, kJsonl, kCsv };

std::optional<Format> ParseFormat(std::string_view name);

// Guesses the format from the path: directories are eml_dir, otherwise the
// extension decides (.mbox, .jsonl/.json, .csv).
std::optional<Format> DetectFormat(const std::filesystem::path& path);

struct RawEmail {
  std::string source_id;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body_raw;
  Origin origin = Origin::kUnlabeled;

  // First header with this name, compared case-insensitively.
  std::optional<std::string> Header(std::string_view name) const;
};

struct CleanEmail {
  std::string sender;
  std::string subject;
  std::string body;
  Label label = Label::kPhishing;
  uint64_t content_hash = 0;

  bool operator==(const CleanEmail&) const = default;
};

struct SkipEntry {
  std::string source_id;
  std::string reason;

  bool operator==(const SkipEntry&) const = default;
};

using SkipReport = std::vector<SkipEntry>;

struct LoadResult {
  std::vector<RawEmail> emails;
  SkipReport skipped;
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<CleanEmail> records);

  const std::vector<CleanEmail>& records() const { return records_; }
  const std::map<Label, size_t>& class_counts() const { return class_counts_; }
  size_t count(Label label) const;
  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

 private:
  std::vector<CleanEmail> records_;
  std::map<Label, size_t> class_counts_;
};

// Reads one corpus file (or directory of .eml files). For eml_dir and mbox
// every message gets `origin`; for jsonl/csv the per-row label column wins
// and `origin` is used only for rows without one. Unreadable paths throw an
// ingestion error naming the file; malformed messages land in `skipped`.
LoadResult LoadCorpus(const std::filesystem::path& path, Format format,
                      Origin origin = Origin::kUnlabeled);

// Parses a single RFC 822 message. Returns nullopt (with `reason` filled)
// when the text has no header block.
std::optional<RawEmail> ParseMessage(std::string_view text,
                                     std::string source_id, Origin origin,
                                     std::string* reason);

// Strips markup, decodes entities and escape codes, drops control
// characters, collapses whitespace. Idempotent.
std::string CleanText(std::string_view raw);

// Case-folded, whitespace-normalized digest of (sender, subject, body).
uint64_t ContentHash(std::string_view sender, std::string_view subject,
                     std::string_view body);

struct CleanOptions {
  // Records whose English stopword ratio falls below this are dropped.
  double min_stopword_ratio = 0.02;
};

// Ratio of tokens that are common English stopwords.
double StopwordRatio(std::string_view text);

struct CleanResult {
  std::vector<CleanEmail> emails;
  SkipReport skipped;
};

// Cleans every raw email. Records that are unlabeled, empty, or fail the
// language heuristic go to the skip report. Output order matches input
// order regardless of `threads`.
CleanResult CleanAll(const std::vector<RawEmail>& raw,
                     const CleanOptions& options = {}, int threads = 1);

std::vector<CleanEmail> Deduplicate(const std::vector<CleanEmail>& emails);

// Exactly `per_class` records per class by seeded sampling without
// replacement. Selected records keep their relative corpus order.
Corpus Balance(const Corpus& corpus, size_t per_class, uint64_t seed);

struct Split {
  Corpus train;
  Corpus validation;
};

// Stratified by label; each class contributes round(fraction * count)
// records to train.
Split SplitCorpus(const Corpus& corpus, double train_fraction, uint64_t seed);

inline constexpr std::string_view kDefaultTemplate =
    "From: {sender}\nSubject: {subject}\n{body}";

// A rendered prompt piece: either literal template text or a field value.
struct Segment {
  enum class Kind { kTemplate, kSender, kSubject, kBody };
  Kind kind;
  std::string text;
};

// Splits the template around {sender}, {subject} and {body}. Throws a
// template error if any placeholder is missing.
std::vector<Segment> RenderSegments(const CleanEmail& email,
                                    std::string_view prompt_template);

std::string RenderInput(const CleanEmail& email,
                        std::string_view prompt_template);

// Canonical corpus JSONL: keys sender, subject, body, label, content_hash.
std::string ToJsonLine(const CleanEmail& email);
CleanEmail FromJsonLine(std::string_view line);
void WriteCorpusJsonl(const std::filesystem::path& path, const Corpus& corpus);
Corpus ReadCorpusJsonl(const std::filesystem::path& path);
void WriteSkipReport(const std::filesystem::path& path,
                     const SkipReport& report);

}  // namespace ccshap::corpus

#endif  // CCSHAP_CORPUS_H_
