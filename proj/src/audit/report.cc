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

#include "ccshap/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccshap/text_util.h"

namespace ccshap::audit {
namespace {

using nlohmann::ordered_json;

std::string Fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

std::string PadRight(const std::string& text, size_t width) {
  return text.size() >= width ? text : text + std::string(width - text.size(), ' ');
}

std::string PadLeft(const std::string& text, size_t width) {
  return text.size() >= width ? text : std::string(width - text.size(), ' ') + text;
}

std::string CsvField(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ordered_json TokensToJson(const std::vector<TokenValue>& tokens) {
  ordered_json out = ordered_json::array();
  for (const auto& t : tokens) {
    out.push_back({{"token", t.token}, {"player", t.player}, {"value", t.value}});
  }
  return out;
}

std::vector<TokenValue> TokensFromJson(const ordered_json& json) {
  std::vector<TokenValue> out;
  for (const auto& t : json) {
    out.push_back({t.at("token").get<std::string>(), t.at("player").get<int>(),
                   t.at("value").get<double>()});
  }
  return out;
}

Label LabelFromJson(const ordered_json& json) {
  const auto label = ParseLabel(json.get<std::string>());
  if (!label) throw Error(ErrorKind::kData, "unknown label " + json.dump());
  return *label;
}

// Rows of (token, first value, second value) for a top-token panel.
void AppendTokenTable(std::ostringstream& out, const std::vector<TokenValue>& top,
                      const std::vector<double>& other, const std::string& first,
                      const std::string& second) {
  size_t width = 5;
  for (const auto& t : top) width = std::max(width, t.token.size());
  out << "rank  " << PadRight("token", width) << "  " << PadLeft(first, 11) << "  "
      << PadLeft(second, 11) << "\n";
  if (top.empty()) {
    out << "(no tokens)\n";
    return;
  }
  for (size_t i = 0; i < top.size(); ++i) {
    const auto player = static_cast<size_t>(top[i].player);
    const double counterpart = player < other.size() ? other[player] : 0.0;
    out << PadLeft(std::to_string(i + 1), 4) << "  " << PadRight(top[i].token, width) << "  "
        << PadLeft(Fixed(top[i].value, 4), 11) << "  " << PadLeft(Fixed(counterpart, 4), 11)
        << "\n";
  }
}

}  // namespace

ordered_json ReportToJson(const CcShapReport& r) {
  ordered_json out;
  out["email_id"] = r.email_id;
  out["ground_truth_label"] = LabelName(r.ground_truth_label);
  out["predicted_label"] = LabelName(r.predicted_label);
  out["predicted_probability"] = r.predicted_probability;
  out["input_text"] = r.input_text;
  out["truncated"] = r.truncated;
  out["explanation_text"] = r.explanation_text;
  out["explanation_prompt"] = r.explanation_prompt;
  out["explanation_tokens"] = r.explanation_tokens;
  out["tokens"] = r.tokens;
  out["pred_raw"] = shapley::ToJson(r.pred_raw);
  out["expl_raw"] = shapley::ToJson(r.expl_raw);
  out["pred_shap"] = r.pred_shap.ratios;
  out["pred_degenerate"] = r.pred_shap.degenerate;
  out["expl_shap"] = r.expl_shap.ratios;
  out["expl_degenerate"] = r.expl_shap.degenerate;
  out["cc_shap"] = r.cc_shap;
  out["degeneracy_note"] = r.degeneracy_note;
  out["top_pred_tokens"] = TokensToJson(r.top_pred_tokens);
  out["top_expl_tokens"] = TokensToJson(r.top_expl_tokens);
  out["config_digest"] = r.config_digest;
  return out;
}

CcShapReport ReportFromJson(const ordered_json& json) {
  CcShapReport r;
  try {
    r.email_id = json.at("email_id").get<std::string>();
    r.ground_truth_label = LabelFromJson(json.at("ground_truth_label"));
    r.predicted_label = LabelFromJson(json.at("predicted_label"));
    r.predicted_probability = json.at("predicted_probability").get<double>();
    r.input_text = json.at("input_text").get<std::string>();
    r.truncated = json.at("truncated").get<bool>();
    r.explanation_text = json.at("explanation_text").get<std::string>();
    r.explanation_prompt = json.at("explanation_prompt").get<std::string>();
    r.explanation_tokens = json.at("explanation_tokens").get<std::vector<std::string>>();
    r.tokens = json.at("tokens").get<std::vector<std::string>>();
    r.pred_raw = shapley::ShapVectorFromJson(json.at("pred_raw"));
    r.expl_raw = shapley::ShapVectorFromJson(json.at("expl_raw"));
    r.pred_shap.ratios = json.at("pred_shap").get<std::vector<double>>();
    r.pred_shap.degenerate = json.at("pred_degenerate").get<bool>();
    r.expl_shap.ratios = json.at("expl_shap").get<std::vector<double>>();
    r.expl_shap.degenerate = json.at("expl_degenerate").get<bool>();
    r.cc_shap = json.at("cc_shap").get<double>();
    r.degeneracy_note = json.at("degeneracy_note").get<std::string>();
    r.top_pred_tokens = TokensFromJson(json.at("top_pred_tokens"));
    r.top_expl_tokens = TokensFromJson(json.at("top_expl_tokens"));
    r.config_digest = json.at("config_digest").get<std::string>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kData, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string ReportJsonLine(const CcShapReport& report) {
  return ReportToJson(report).dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

std::vector<CcShapReport> ReadReportsJsonl(const std::filesystem::path& path) {
  std::istringstream in(ReadFileOrThrow(path));
  std::vector<CcShapReport> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (TrimWhitespace(line).empty()) continue;
    try {
      out.push_back(ReportFromJson(ordered_json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kData,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string FormatTextReport(const CcShapReport& r) {
  std::ostringstream out;
  out << "==== Email " << r.email_id << " ====\n\n";
  out << "[Input]\n" << r.input_text << "\n";
  if (r.truncated) out << "(input truncated to the token budget)\n";
  out << "\n[Prediction]\n"
      << LabelName(r.predicted_label) << " (p = " << Fixed(r.predicted_probability, 4)
      << "; ground truth " << LabelName(r.ground_truth_label) << ")\n\n";
  out << "[Generated Explanation]\n"
      << (r.explanation_text.empty() ? "(empty)" : r.explanation_text) << "\n\n";
  out << "[CC-SHAP]\n" << Fixed(r.cc_shap, 4) << "\n";
  if (!r.degeneracy_note.empty()) out << "degenerate: " << r.degeneracy_note << "\n";
  out << "\n[Top tokens during prediction, with their values in the explanation]\n";
  AppendTokenTable(out, r.top_pred_tokens, r.expl_shap.ratios, "prediction", "explanation");
  out << "\n[Top tokens in the explanation, with their values during prediction]\n";
  AppendTokenTable(out, r.top_expl_tokens, r.pred_shap.ratios, "explanation", "prediction");
  return out.str();
}

std::string ClassName(Label label) { return label == Label::kPhishing ? "phishing" : "ham"; }

Summary Aggregate(const std::vector<CcShapReport>& reports, const std::string& model,
                  size_t failures) {
  if (reports.empty()) {
    throw Error(ErrorKind::kContract, "cannot aggregate an empty list of reports");
  }
  Summary summary;
  summary.model = model;
  summary.failures = failures;
  for (Label label : kAllLabels) {
    ClassSummary row;
    row.label = label;
    double sum = 0.0;
    for (const auto& r : reports) {
      if (r.ground_truth_label != label) continue;
      ++row.count;
      sum += r.cc_shap;
      if (r.predicted_label == r.ground_truth_label) ++row.correct;
    }
    if (row.count == 0) continue;
    row.mean = sum / static_cast<double>(row.count);
    if (row.count > 1) {
      double ss = 0.0;
      for (const auto& r : reports) {
        if (r.ground_truth_label == label) ss += (r.cc_shap - row.mean) * (r.cc_shap - row.mean);
      }
      row.std = std::sqrt(ss / static_cast<double>(row.count - 1));
    }
    row.accuracy_pct = 100.0 * static_cast<double>(row.correct) / static_cast<double>(row.count);
    summary.rows.push_back(row);
  }
  return summary;
}

std::string SummaryCsv(const std::vector<Summary>& summaries) {
  std::string out = "model,class,ccshap_mean,ccshap_std,accuracy_pct\n";
  for (const auto& s : summaries) {
    for (const auto& row : s.rows) {
      out += CsvField(s.model) + "," + ClassName(row.label) + "," + Fixed(row.mean, 4) + "," +
             Fixed(row.std, 4) + "," + Fixed(row.accuracy_pct, 1) + "\n";
    }
  }
  return out;
}

std::string SummaryTable(const std::vector<Summary>& summaries) {
  const std::vector<std::string> header = {"Model", "Phishing CC-SHAP (Mean ± Std Dev)",
                                           "Ham CC-SHAP (Mean ± Std Dev)",
                                           "Phishing Accuracy (%)", "Ham Accuracy (%)"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : summaries) {
    std::vector<std::string> cells = {s.model, "n/a", "n/a", "n/a", "n/a"};
    for (const auto& row : s.rows) {
      const size_t col = row.label == Label::kPhishing ? 1 : 2;
      cells[col] = Fixed(row.mean, 4) + " ± " + Fixed(row.std, 4);
      cells[col + 2] = Fixed(row.accuracy_pct, 1);
    }
    rows.push_back(std::move(cells));
  }
  std::string out = Join(header, " | ") + "\n";
  for (const auto& cells : rows) out += Join(cells, " | ") + "\n";
  for (const auto& s : summaries) {
    out += s.model + ":";
    for (Label label : kAllLabels) {
      size_t count = 0;
      for (const auto& row : s.rows) {
        if (row.label == label) count = row.count;
      }
      out += " " + ClassName(label) + "=" + std::to_string(count);
    }
    out += " failed=" + std::to_string(s.failures) + "\n";
  }
  return out;
}

}  // namespace ccshap::audit
