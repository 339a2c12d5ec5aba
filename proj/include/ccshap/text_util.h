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

#ifndef CCSHAP_TEXT_UTIL_H_
#define CCSHAP_TEXT_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ccshap {

std::string ToLowerAscii(std::string_view text);
bool EqualsIgnoreCase(std::string_view a, std::string_view b);
std::string_view TrimWhitespace(std::string_view text);

// Collapses every run of ASCII whitespace to one space and trims the ends.
std::string CollapseWhitespace(std::string_view text);

// Drops bytes that are not part of a well-formed UTF-8 sequence.
std::string SanitizeUtf8(std::string_view text);

// Appends the UTF-8 encoding of `code_point` (invalid points are skipped).
void AppendUtf8(uint32_t code_point, std::string& out);

// Converts ISO-8859-1 bytes to UTF-8.
std::string Latin1ToUtf8(std::string_view text);

std::string Join(const std::vector<std::string>& parts, std::string_view sep);

// Reads a whole file. Throws an ingestion error naming the path on failure.
std::string ReadFileOrThrow(const std::filesystem::path& path);

// Writes (truncating) a whole file. Throws a config error on failure.
void WriteFileOrThrow(const std::filesystem::path& path,
                      std::string_view contents);

}  // namespace ccshap

#endif  // CCSHAP_TEXT_UTIL_H_
