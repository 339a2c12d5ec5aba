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

#include "ccshap/score_cache.h"

#include <array>
#include <bit>
#include <cstring>

#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "ccshap/text_util.h"

namespace ccshap::scoring {
namespace {

constexpr std::string_view kMagic = "CCSHAPC1";
constexpr size_t kRecordSize = 24;

void PutU64(uint64_t v, char* out) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

uint64_t GetU64(const char* in) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  }
  return v;
}

}  // namespace

CacheKey MakeCacheKey(std::string_view backend_id, uint64_t sequence_digest,
                      const CoalitionMask& mask, uint64_t target_digest) {
  Fnv1a64 a;
  a.Update(static_cast<uint64_t>(backend_id.size())).Update(backend_id);
  a.Update(sequence_digest).Update(target_digest);
  a.Update(static_cast<uint64_t>(mask.size()));
  for (uint64_t w : mask.words()) a.Update(w);
  // Second lane: same material, independently mixed.
  uint64_t b = Mix64(a.digest() ^ 0x5bd1e9955bd1e995ULL);
  b = Mix64(b ^ sequence_digest);
  b = Mix64(b ^ target_digest);
  for (uint64_t w : mask.words()) b = Mix64(b ^ w);
  b = Mix64(b ^ HashBytes(backend_id));
  return {a.digest(), b};
}

ScoreCache::ScoreCache(const std::filesystem::path& log_path) {
  std::error_code ec;
  if (std::filesystem::exists(log_path, ec)) {
    const std::string data = ReadFileOrThrow(log_path);
    if (data.size() < kMagic.size() || data.compare(0, kMagic.size(), kMagic) != 0) {
      throw Error(ErrorKind::kConfig,
                  log_path.string() + " is not a score cache (bad magic)");
    }
    for (size_t off = kMagic.size(); off + kRecordSize <= data.size(); off += kRecordSize) {
      const CacheKey key{GetU64(data.data() + off), GetU64(data.data() + off + 8)};
      entries_[key] = std::bit_cast<double>(GetU64(data.data() + off + 16));
    }
    const size_t payload = data.size() - kMagic.size();
    if (payload % kRecordSize != 0) {
      // Drop the torn tail so new records stay aligned.
      std::filesystem::resize_file(log_path,
                                   kMagic.size() + payload - payload % kRecordSize);
    }
    log_.open(log_path, std::ios::binary | std::ios::app);
  } else {
    log_.open(log_path, std::ios::binary | std::ios::trunc);
    log_.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  }
  if (!log_) throw Error(ErrorKind::kConfig, "cannot open score cache " + log_path.string());
  log_.flush();
}

std::optional<double> ScoreCache::Lookup(const CacheKey& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    misses_.fetch_add(1);
    return std::nullopt;
  }
  hits_.fetch_add(1);
  return it->second;
}

void ScoreCache::Insert(const CacheKey& key, double value) {
  std::lock_guard<std::mutex> lock(mu_);
  entries_[key] = value;
  if (log_.is_open()) {
    std::array<char, kRecordSize> record;
    PutU64(key.hi, record.data());
    PutU64(key.lo, record.data() + 8);
    PutU64(std::bit_cast<uint64_t>(value), record.data() + 16);
    log_.write(record.data(), record.size());
    log_.flush();
  }
}

size_t ScoreCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

double CachedScore(const Backend& backend, const ScoreRequest& request, ScoreCache& cache) {
  const CacheKey key = MakeCacheKey(backend.id(), SequenceDigest(request.sequence),
                                    request.mask, TargetDigest(request.target));
  if (auto hit = cache.Lookup(key)) return *hit;
  const double value = Score(backend, request);
  cache.Insert(key, value);
  return value;
}

}  // namespace ccshap::scoring
