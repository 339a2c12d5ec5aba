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

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <unordered_set>

#include "ccshap/corpus.h"
#include "ccshap/hashing.h"
#include "ccshap/text_util.h"

namespace ccshap::corpus {
namespace {

struct NamedEntity {
  std::string_view name;
  uint32_t code_point;
};

constexpr std::array<NamedEntity, 24> kEntities = {{
    {"nbsp", 0x20},    {"amp", '&'},      {"lt", '<'},
    {"gt", '>'},       {"quot", '"'},     {"apos", '\''},
    {"copy", 0xa9},    {"reg", 0xae},     {"trade", 0x2122},
    {"hellip", 0x2026}, {"mdash", 0x2014}, {"ndash", 0x2013},
    {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201c},
    {"rdquo", 0x201d}, {"bull", 0x2022},  {"euro", 0x20ac},
    {"pound", 0xa3},   {"yen", 0xa5},     {"cent", 0xa2},
    {"sect", 0xa7},    {"middot", 0xb7},  {"zwnj", 0x200c},
}};

bool IsTagStart(std::string_view s, size_t i) {
  if (s[i] != '<' || i + 1 >= s.size()) return false;
  const char next = s[i + 1];
  return std::isalpha(static_cast<unsigned char>(next)) || next == '/' ||
         next == '!' || next == '?';
}

// Lower-case tag name starting right after '<' (and an optional '/').
std::string TagName(std::string_view s, size_t open) {
  size_t i = open + 1;
  if (i < s.size() && s[i] == '/') ++i;
  std::string name;
  while (i < s.size() && std::isalnum(static_cast<unsigned char>(s[i]))) {
    name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
    ++i;
  }
  return name;
}

size_t FindIgnoreCase(std::string_view haystack, std::string_view needle,
                      size_t from) {
  for (size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    if (EqualsIgnoreCase(haystack.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

// Forgiving tag stripper. A '<' only opens a tag when followed by a letter,
// '/', '!' or '?'; a tag with no closing '>' is kept as literal text.
// <script> and <style> elements are dropped with their content.
std::string StripTags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (!IsTagStart(s, i)) {
      out.push_back(s[i++]);
      continue;
    }
    if (s.substr(i, 4) == "<!--") {
      const size_t end = s.find("-->", i + 4);
      i = end == std::string_view::npos ? s.size() : end + 3;
      out.push_back(' ');
      continue;
    }
    const size_t close = s.find('>', i + 1);
    if (close == std::string_view::npos) {
      out.push_back(s[i++]);
      continue;
    }
    const std::string name = TagName(s, i);
    const bool is_closing = s[i + 1] == '/';
    i = close + 1;
    if (!is_closing && (name == "script" || name == "style")) {
      const size_t end = FindIgnoreCase(s, "</" + name, i);
      if (end == std::string_view::npos) {
        i = s.size();
      } else {
        const size_t end_close = s.find('>', end);
        i = end_close == std::string_view::npos ? s.size() : end_close + 1;
      }
    }
    out.push_back(' ');
  }
  return out;
}

std::string DecodeEntities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    const size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back(s[i++]);
      continue;
    }
    const std::string_view body = s.substr(i + 1, semi - i - 1);
    bool decoded = false;
    if (body.size() >= 2 && body[0] == '#') {
      const bool hex = body[1] == 'x' || body[1] == 'X';
      const std::string_view digits = body.substr(hex ? 2 : 1);
      uint32_t cp = 0;
      bool ok = !digits.empty();
      for (char c : digits) {
        const int v = std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                      : hex && std::isxdigit(static_cast<unsigned char>(c))
                          ? std::tolower(static_cast<unsigned char>(c)) - 'a' + 10
                          : -1;
        if (v < 0 || cp > 0x10ffff) {
          ok = false;
          break;
        }
        cp = cp * (hex ? 16 : 10) + static_cast<uint32_t>(v);
      }
      if (ok && cp <= 0x10ffff) {
        AppendUtf8(cp == 0xa0 ? 0x20 : cp, out);
        decoded = true;
      }
    } else {
      for (const NamedEntity& e : kEntities) {
        if (EqualsIgnoreCase(body, e.name)) {
          AppendUtf8(e.code_point, out);
          decoded = true;
          break;
        }
      }
    }
    if (decoded) {
      i = semi + 1;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

// Literal backslash escapes left behind by CSV/JSON exports.
std::string DecodeBackslashEscapes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() &&
        (s[i + 1] == 'n' || s[i + 1] == 'r' || s[i + 1] == 't')) {
      out.push_back(' ');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

// ASCII whitespace controls become spaces; other C0/C1 controls, DEL and
// zero-width characters are removed; U+00A0 becomes a space.
std::string DropControls(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      out.push_back(' ');
      continue;
    }
    if (c < 0x20 || c == 0x7f) continue;
    if (c == 0xc2 && i + 1 < s.size()) {
      const auto n = static_cast<unsigned char>(s[i + 1]);
      if (n >= 0x80 && n <= 0x9f) {
        ++i;
        continue;
      }
      if (n == 0xa0) {
        out.push_back(' ');
        ++i;
        continue;
      }
    }
    if (c == 0xe2 && i + 2 < s.size() &&
        static_cast<unsigned char>(s[i + 1]) == 0x80) {
      const auto n = static_cast<unsigned char>(s[i + 2]);
      if (n >= 0x8b && n <= 0x8d) {  // U+200B..U+200D
        i += 2;
        continue;
      }
    }
    if (c == 0xef && i + 2 < s.size() &&
        static_cast<unsigned char>(s[i + 1]) == 0xbb &&
        static_cast<unsigned char>(s[i + 2]) == 0xbf) {  // U+FEFF
      i += 2;
      continue;
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

// Runs of three or more identical punctuation symbols ("=====", "*****")
// shrink to one.
std::string SquashSymbolRuns(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    size_t j = i;
    while (j < s.size() && s[j] == c) ++j;
    const size_t run = j - i;
    if (run >= 3 && std::ispunct(static_cast<unsigned char>(c))) {
      out.push_back(c);
    } else {
      out.append(s.substr(i, run));
    }
    i = j;
  }
  return out;
}

std::string CleanOnce(std::string_view raw) {
  std::string s = SanitizeUtf8(raw);
  s = DecodeBackslashEscapes(s);
  s = StripTags(s);
  s = DecodeEntities(s);
  s = DropControls(s);
  s = SquashSymbolRuns(s);
  return CollapseWhitespace(s);
}

const std::unordered_set<std::string>& Stopwords() {
  static const auto* const kWords = new std::unordered_set<std::string>{
      "a",     "about", "above", "after",  "again", "all",   "am",    "an",
      "and",   "any",   "are",   "as",     "at",    "be",    "been",  "before",
      "being", "below", "but",   "by",     "can",   "could", "did",   "do",
      "does",  "down",  "for",   "from",   "had",   "has",   "have",  "he",
      "her",   "here",  "him",   "his",    "how",   "i",     "if",    "in",
      "into",  "is",    "it",    "its",    "just",  "me",    "more",  "most",
      "my",    "no",    "not",   "now",    "of",    "on",    "once",  "only",
      "or",    "other", "our",   "out",    "over",  "please", "she",  "should",
      "so",    "some",  "such",  "than",   "that",  "the",   "their", "them",
      "then",  "there", "these", "they",   "this",  "those", "to",    "too",
      "under", "until", "up",    "very",   "was",   "we",    "were",  "what",
      "when",  "where", "which", "while",  "who",   "will",  "with",  "would",
      "you",   "your"};
  return *kWords;
}

}  // namespace

std::string CleanText(std::string_view raw) {
  // Entity decoding can expose new markup ("&lt;b&gt;"), so iterate to a
  // fixed point. Every non-final pass strictly shortens the text.
  std::string current = CleanOnce(raw);
  while (true) {
    std::string next = CleanOnce(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

double StopwordRatio(std::string_view text) {
  const auto& stopwords = Stopwords();
  size_t total = 0;
  size_t hits = 0;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    ++total;
    if (stopwords.count(word) > 0) ++hits;
    word.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u) || u >= 0x80 || c == '\'') {
      word.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

uint64_t ContentHash(std::string_view sender, std::string_view subject,
                     std::string_view body) {
  Fnv1a64 hash;
  hash.Update(CollapseWhitespace(ToLowerAscii(sender)));
  hash.Update(std::string_view("\x1f"));
  hash.Update(CollapseWhitespace(ToLowerAscii(subject)));
  hash.Update(std::string_view("\x1f"));
  hash.Update(CollapseWhitespace(ToLowerAscii(body)));
  return hash.digest();
}

}  // namespace ccshap::corpus
