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
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ccshap/corpus.h"
#include "ccshap/error.h"
#include "ccshap/text_util.h"
#include "json.hpp"

namespace ccshap::corpus {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start <= text.size()) {
    const size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string NormalizeNewlines(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

bool IsHeaderLine(std::string_view line) {
  const size_t colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0) return false;
  for (size_t i = 0; i < colon; ++i) {
    const auto c = static_cast<unsigned char>(line[i]);
    if (c <= 32 || c >= 127) return false;
  }
  return true;
}

using HeaderList = std::vector<std::pair<std::string, std::string>>;

struct HeaderBlock {
  HeaderList headers;
  std::string_view body;
  bool ok = false;
};

// Splits `text` (LF newlines) into unfolded headers and the body.
HeaderBlock SplitHeaders(std::string_view text) {
  HeaderBlock block;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    const size_t next = std::min(nl + 1, text.size());
    if (line.empty()) {
      block.body = text.substr(next);
      block.ok = !block.headers.empty();
      return block;
    }
    if ((line[0] == ' ' || line[0] == '\t') && !block.headers.empty()) {
      block.headers.back().second += " ";
      block.headers.back().second += std::string(TrimWhitespace(line));
    } else if (IsHeaderLine(line)) {
      const size_t colon = line.find(':');
      block.headers.emplace_back(std::string(line.substr(0, colon)),
                                 std::string(TrimWhitespace(line.substr(colon + 1))));
    } else {
      // Non-header text before any blank line: only acceptable once we have
      // seen headers (some exports omit the separator).
      block.body = text.substr(pos);
      block.ok = !block.headers.empty();
      return block;
    }
    pos = next;
    if (nl == text.size()) break;
  }
  block.ok = !block.headers.empty();
  return block;
}

std::optional<std::string> FindHeader(const HeaderList& headers,
                                      std::string_view name) {
  for (const auto& [key, value] : headers) {
    if (EqualsIgnoreCase(key, name)) return value;
  }
  return std::nullopt;
}

// Returns a parameter value from a structured header such as
// `multipart/alternative; boundary="abc"`.
std::string HeaderParam(std::string_view header, std::string_view param) {
  size_t pos = 0;
  while (true) {
    const size_t semi = header.find(';', pos);
    if (semi == std::string_view::npos) return "";
    std::string_view rest = TrimWhitespace(header.substr(semi + 1));
    const size_t eq = rest.find('=');
    if (eq != std::string_view::npos &&
        EqualsIgnoreCase(TrimWhitespace(rest.substr(0, eq)), param)) {
      std::string_view value = TrimWhitespace(rest.substr(eq + 1));
      if (!value.empty() && value[0] == '"') {
        const size_t close = value.find('"', 1);
        return std::string(value.substr(1, close == std::string_view::npos
                                               ? std::string_view::npos
                                               : close - 1));
      }
      const size_t end = value.find(';');
      return std::string(TrimWhitespace(value.substr(0, end)));
    }
    pos = semi + 1;
  }
}

std::string MediaType(const HeaderList& headers) {
  const auto ct = FindHeader(headers, "Content-Type");
  if (!ct) return "text/plain";
  const std::string_view value = *ct;
  return ToLowerAscii(TrimWhitespace(value.substr(0, value.find(';'))));
}

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string DecodeQuotedPrintable(std::string_view text, bool underscores) {
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '=' && i + 1 < text.size() && text[i + 1] == '\n') {
      ++i;  // soft line break
    } else if (c == '=' && i + 2 < text.size() && HexValue(text[i + 1]) >= 0 &&
               HexValue(text[i + 2]) >= 0) {
      out.push_back(static_cast<char>(HexValue(text[i + 1]) * 16 +
                                      HexValue(text[i + 2])));
      i += 2;
    } else if (underscores && c == '_') {
      out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string DecodeBase64(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  std::string out;
  uint32_t buffer = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = value(c);
    if (v < 0) continue;
    buffer = (buffer << 6) | static_cast<uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xff));
    }
  }
  return out;
}

std::string ToUtf8(std::string text, std::string_view charset) {
  const std::string cs = ToLowerAscii(charset);
  if (cs == "iso-8859-1" || cs == "latin1" || cs == "latin-1" ||
      cs == "windows-1252" || cs == "cp1252") {
    return Latin1ToUtf8(text);
  }
  return text;
}

std::string DecodeTransfer(std::string_view body, const HeaderList& headers) {
  const std::string encoding =
      ToLowerAscii(TrimWhitespace(FindHeader(headers, "Content-Transfer-Encoding")
                                      .value_or("")));
  std::string decoded;
  if (encoding == "quoted-printable") {
    decoded = DecodeQuotedPrintable(body, false);
  } else if (encoding == "base64") {
    decoded = DecodeBase64(body);
  } else {
    decoded = std::string(body);
  }
  const auto ct = FindHeader(headers, "Content-Type");
  return ToUtf8(std::move(decoded), ct ? HeaderParam(*ct, "charset") : "");
}

// RFC 2047 encoded words (=?charset?B|Q?text?=) in header values.
std::string DecodeEncodedWords(std::string_view value) {
  std::string out;
  size_t i = 0;
  bool last_was_word = false;
  while (i < value.size()) {
    const size_t start = value.find("=?", i);
    if (start == std::string_view::npos) {
      out.append(value.substr(i));
      break;
    }
    const size_t q1 = value.find('?', start + 2);
    const size_t q2 = q1 == std::string_view::npos ? q1 : value.find('?', q1 + 1);
    const size_t end = q2 == std::string_view::npos ? q2 : value.find("?=", q2 + 1);
    if (end == std::string_view::npos || q2 != q1 + 2) {
      out.append(value.substr(i));
      break;
    }
    const std::string_view between = value.substr(i, start - i);
    // Whitespace between adjacent encoded words is dropped.
    if (!(last_was_word && TrimWhitespace(between).empty())) out.append(between);
    const std::string_view charset = value.substr(start + 2, q1 - start - 2);
    const char mode = static_cast<char>(std::toupper(static_cast<unsigned char>(value[q1 + 1])));
    const std::string_view payload = value.substr(q2 + 1, end - q2 - 1);
    std::string decoded = mode == 'B' ? DecodeBase64(payload)
                                      : DecodeQuotedPrintable(payload, true);
    out.append(ToUtf8(std::move(decoded), charset));
    last_was_word = true;
    i = end + 2;
  }
  return out;
}

struct TextParts {
  std::vector<std::string> plain;
  std::vector<std::string> html;
};

// Collects text/plain and text/html leaves of a MIME tree. Returns false if
// a multipart container has no parts delimited by its boundary.
bool CollectParts(std::string_view body, const HeaderList& headers,
                  TextParts& parts, int depth) {
  const std::string type = MediaType(headers);
  if (type.rfind("multipart/", 0) == 0 && depth < 16) {
    const std::string boundary =
        HeaderParam(*FindHeader(headers, "Content-Type"), "boundary");
    if (boundary.empty()) return false;
    const std::string delimiter = "--" + boundary;
    std::vector<std::string_view> sections;
    bool in_part = false;
    size_t part_start = 0;
    size_t pos = 0;
    bool found = false;
    while (pos <= body.size()) {
      size_t nl = body.find('\n', pos);
      if (nl == std::string_view::npos) nl = body.size();
      const std::string_view line = body.substr(pos, nl - pos);
      if (line.rfind(delimiter, 0) == 0) {
        found = true;
        if (in_part) {
          const size_t end = pos > part_start ? pos - 1 : part_start;
          sections.push_back(body.substr(part_start, end - part_start));
        }
        const bool closing = line.substr(delimiter.size(), 2) == "--";
        in_part = !closing;
        part_start = std::min(nl + 1, body.size());
        if (closing) break;
      }
      if (nl == body.size()) break;
      pos = nl + 1;
    }
    if (in_part && part_start < body.size()) {
      sections.push_back(body.substr(part_start));
    }
    if (!found) return false;
    for (std::string_view section : sections) {
      HeaderBlock part = SplitHeaders(section);
      if (!part.ok) {
        // A part without headers is text/plain by default.
        part.headers.clear();
        part.body = section.substr(section.empty() || section[0] != '\n' ? 0 : 1);
      }
      if (!CollectParts(part.body, part.headers, parts, depth + 1)) return false;
    }
    return true;
  }
  const auto disposition = FindHeader(headers, "Content-Disposition");
  if (disposition && ToLowerAscii(*disposition).rfind("attachment", 0) == 0) {
    return true;
  }
  if (type == "text/plain") {
    parts.plain.push_back(DecodeTransfer(body, headers));
  } else if (type == "text/html") {
    parts.html.push_back(DecodeTransfer(body, headers));
  }
  return true;
}

RawEmail FromFields(std::string source_id, const std::string& sender,
                    const std::string& subject, const std::string& body,
                    Origin origin) {
  RawEmail email;
  email.source_id = std::move(source_id);
  email.headers = {{"From", sender}, {"Subject", subject}};
  email.body_raw = body;
  email.origin = origin;
  return email;
}

Origin OriginForLabel(std::string_view label_text, Origin fallback, bool* bad) {
  *bad = false;
  if (TrimWhitespace(label_text).empty()) return fallback;
  const auto label = ParseLabel(label_text);
  if (!label) {
    *bad = true;
    return fallback;
  }
  return *label == Label::kPhishing ? Origin::kPhishingSource : Origin::kHamSource;
}

std::string Ordinal(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

LoadResult LoadEmlDir(const fs::path& dir, Origin origin) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorKind::kIngestion, "cannot read " + dir.string() +
                                           ": not a directory");
  }
  std::vector<fs::path> files;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    const auto& entry = *it;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && !name.empty() && name[0] != '.') {
      files.push_back(entry.path());
    }
  }
  if (ec) throw Error(ErrorKind::kIngestion, "cannot read " + dir.string());
  std::sort(files.begin(), files.end());
  LoadResult result;
  for (const fs::path& file : files) {
    const std::string text = ReadFileOrThrow(file);
    std::string reason;
    auto email = ParseMessage(text, file.filename().string(), origin, &reason);
    if (email) {
      result.emails.push_back(std::move(*email));
    } else {
      result.skipped.push_back({file.filename().string(), reason});
    }
  }
  return result;
}

LoadResult LoadMbox(const fs::path& path, Origin origin) {
  const std::string text = NormalizeNewlines(ReadFileOrThrow(path));
  const std::string stem = path.filename().string();
  LoadResult result;
  std::vector<std::string> messages;
  std::string current;
  bool have_message = false;
  bool previous_blank = true;
  bool leading_garbage = false;
  for (std::string_view line : SplitLines(text)) {
    if (previous_blank && line.rfind("From ", 0) == 0) {
      if (have_message) messages.push_back(std::move(current));
      current.clear();
      have_message = true;
      previous_blank = false;
      continue;
    }
    previous_blank = line.empty();
    if (!have_message) {
      if (!TrimWhitespace(line).empty()) leading_garbage = true;
      continue;
    }
    // mboxrd: one level of '>' quoting is removed from ">From " lines.
    size_t quotes = 0;
    while (quotes < line.size() && line[quotes] == '>') ++quotes;
    if (quotes > 0 && line.substr(quotes).rfind("From ", 0) == 0) {
      line.remove_prefix(1);
    }
    current.append(line);
    current.push_back('\n');
  }
  if (have_message) messages.push_back(std::move(current));
  if (leading_garbage) {
    result.skipped.push_back({stem + "#preamble", "text before first From_ line"});
  }
  for (size_t i = 0; i < messages.size(); ++i) {
    const std::string id = stem + "#" + Ordinal(i);
    std::string reason;
    auto email = ParseMessage(messages[i], id, origin, &reason);
    if (email) {
      result.emails.push_back(std::move(*email));
    } else {
      result.skipped.push_back({id, reason});
    }
  }
  return result;
}

LoadResult LoadJsonl(const fs::path& path, Origin origin) {
  const std::string text = ReadFileOrThrow(path);
  const std::string stem = path.filename().string();
  LoadResult result;
  size_t line_no = 0;
  for (std::string_view line : SplitLines(text)) {
    ++line_no;
    if (TrimWhitespace(line).empty()) continue;
    const std::string id = stem + ":" + Ordinal(line_no);
    json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (row.is_discarded() || !row.is_object()) {
      result.skipped.push_back({id, "invalid JSON"});
      continue;
    }
    if (row.find("body") == row.end()) {
      result.skipped.push_back({id, "missing body field"});
      continue;
    }
    auto field = [&](const char* key) -> std::optional<std::string> {
      auto it = row.find(key);
      if (it == row.end() || it->is_null()) return std::string();
      if (!it->is_string()) return std::nullopt;
      return it->get<std::string>();
    };
    const auto sender = field("sender");
    const auto subject = field("subject");
    const auto body = field("body");
    const auto label = field("label");
    if (!sender || !subject || !body || !label) {
      result.skipped.push_back({id, "non-string field"});
      continue;
    }
    bool bad_label = false;
    const Origin row_origin = OriginForLabel(*label, origin, &bad_label);
    if (bad_label) {
      result.skipped.push_back({id, "unknown label '" + *label + "'"});
      continue;
    }
    result.emails.push_back(FromFields(id, *sender, *subject, *body, row_origin));
  }
  return result;
}

// RFC 4180 records. Returns false on an unterminated quoted field.
bool ParseCsv(std::string_view text, std::vector<std::vector<std::string>>& rows) {
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      row_has_content = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      row_has_content = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      row_has_content = false;
    } else {
      field.push_back(c);
      row_has_content = true;
    }
  }
  if (in_quotes) return false;
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return true;
}

LoadResult LoadCsv(const fs::path& path, Origin origin) {
  const std::string text = ReadFileOrThrow(path);
  const std::string stem = path.filename().string();
  LoadResult result;
  std::vector<std::vector<std::string>> rows;
  if (!ParseCsv(text, rows)) {
    throw Error(ErrorKind::kIngestion,
                "cannot parse " + path.string() + ": unterminated quoted field");
  }
  if (rows.empty()) return result;
  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> int {
    for (size_t i = 0; i < header.size(); ++i) {
      if (EqualsIgnoreCase(TrimWhitespace(header[i]), name)) return static_cast<int>(i);
    }
    return -1;
  };
  const int sender_col = column("sender");
  const int subject_col = column("subject");
  const int body_col = column("body");
  const int label_col = column("label");
  if (body_col < 0) {
    throw Error(ErrorKind::kIngestion,
                "cannot parse " + path.string() + ": header row lacks a body column");
  }
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string id = stem + ":" + Ordinal(r + 1);
    if (row.size() != header.size()) {
      result.skipped.push_back({id, "expected " + std::to_string(header.size()) +
                                        " columns, found " + std::to_string(row.size())});
      continue;
    }
    auto get = [&](int col) { return col < 0 ? std::string() : row[col]; };
    bool bad_label = false;
    const Origin row_origin = OriginForLabel(get(label_col), origin, &bad_label);
    if (bad_label) {
      result.skipped.push_back({id, "unknown label '" + get(label_col) + "'"});
      continue;
    }
    result.emails.push_back(
        FromFields(id, get(sender_col), get(subject_col), get(body_col), row_origin));
  }
  return result;
}

}  // namespace

std::optional<Format> ParseFormat(std::string_view name) {
  const std::string lower = ToLowerAscii(name);
  if (lower == "eml_dir" || lower == "eml") return Format::kEmlDir;
  if (lower == "mbox") return Format::kMbox;
  if (lower == "jsonl") return Format::kJsonl;
  if (lower == "csv") return Format::kCsv;
  return std::nullopt;
}

std::optional<Format> DetectFormat(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) return Format::kEmlDir;
  const std::string ext = ToLowerAscii(path.extension().string());
  if (ext == ".mbox" || ext == ".mbx") return Format::kMbox;
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return Format::kJsonl;
  if (ext == ".csv") return Format::kCsv;
  return std::nullopt;
}

std::optional<std::string> RawEmail::Header(std::string_view name) const {
  return FindHeader(headers, name);
}

std::optional<RawEmail> ParseMessage(std::string_view text,
                                     std::string source_id, Origin origin,
                                     std::string* reason) {
  const std::string normalized = NormalizeNewlines(text);
  if (TrimWhitespace(normalized).empty()) {
    *reason = "empty message";
    return std::nullopt;
  }
  const HeaderBlock block = SplitHeaders(normalized);
  if (!block.ok) {
    *reason = "no header block";
    return std::nullopt;
  }
  RawEmail email;
  email.source_id = std::move(source_id);
  email.origin = origin;
  for (const auto& [name, value] : block.headers) {
    email.headers.emplace_back(name, DecodeEncodedWords(value));
  }
  TextParts parts;
  if (!CollectParts(block.body, block.headers, parts, 0)) {
    *reason = "multipart boundary not found";
    return std::nullopt;
  }
  const auto& chosen = parts.plain.empty() ? parts.html : parts.plain;
  email.body_raw = Join(chosen, "\n");
  return email;
}

LoadResult LoadCorpus(const fs::path& path, Format format, Origin origin) {
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    throw Error(ErrorKind::kIngestion, "cannot read " + path.string() +
                                           ": no such file or directory");
  }
  switch (format) {
    case Format::kEmlDir:
      return LoadEmlDir(path, origin);
    case Format::kMbox:
      return LoadMbox(path, origin);
    case Format::kJsonl:
      return LoadJsonl(path, origin);
    case Format::kCsv:
      return LoadCsv(path, origin);
  }
  return {};
}

}  // namespace ccshap::corpus
