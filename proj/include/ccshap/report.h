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

// Audit artifacts: per-email JSONL, per-email text report, and the
// per-class summary (CSV and printed table).

#ifndef CCSHAP_REPORT_H_
#define CCSHAP_REPORT_H_

#include <filesystem>
#include <string>
#include <vector>

#include "ccshap/audit.h"
#include "json.hpp"

namespace ccshap::audit {

nlohmann::ordered_json ReportToJson(const CcShapReport& report);
CcShapReport ReportFromJson(const nlohmann::ordered_json& json);

// One line, no trailing newline. Doubles round-trip exactly.
std::string ReportJsonLine(const CcShapReport& report);
std::vector<CcShapReport> ReadReportsJsonl(const std::filesystem::path& path);

// Panels: input, prediction, explanation, CC-SHAP score, top prediction
// tokens with their explanation values, top explanation tokens with their
// prediction values.
std::string FormatTextReport(const CcShapReport& report);

struct ClassSummary {
  Label label = Label::kPhishing;
  size_t count = 0;
  size_t correct = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 when count == 1
  double accuracy_pct = 0.0;
};

struct Summary {
  std::string model;
  std::vector<ClassSummary> rows;  // phishing first; classes with no reports omitted
  size_t failures = 0;
};

// Groups by ground-truth label. Throws a contract violation on an empty
// list.
Summary Aggregate(const std::vector<CcShapReport>& reports, const std::string& model,
                  size_t failures = 0);

// "phishing" / "ham".
std::string ClassName(Label label);

// model,class,ccshap_mean,ccshap_std,accuracy_pct
std::string SummaryCsv(const std::vector<Summary>& summaries);

// One row per model: phishing and ham "mean ± std" cells, then the two
// accuracy cells, then a counts line per model.
std::string SummaryTable(const std::vector<Summary>& summaries);

}  // namespace ccshap::audit

#endif  // CCSHAP_REPORT_H_
