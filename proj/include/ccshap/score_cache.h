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

#ifndef CCSHAP_SCORE_CACHE_H_
#define CCSHAP_SCORE_CACHE_H_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string_view>
#include <unordered_map>

#include "ccshap/scoring.h"

namespace ccshap::scoring {

// 128-bit digest of (backend id, sequence, mask bits, target).
struct CacheKey {
  uint64_t hi = 0;
  uint64_t lo = 0;
  bool operator==(const CacheKey&) const = default;
};

CacheKey MakeCacheKey(std::string_view backend_id, uint64_t sequence_digest,
                      const CoalitionMask& mask, uint64_t target_digest);

// Thread-safe memo of coalition scores. When opened on a file, every new
// entry is appended as (key, float64) so an interrupted audit can resume.
//
// On-disk layout, little-endian: 8-byte magic "CCSHAPC1", then 24-byte
// records {u64 hi, u64 lo, f64 value}. A torn trailing record is ignored.
class ScoreCache {
 public:
  ScoreCache() = default;
  explicit ScoreCache(const std::filesystem::path& log_path);

  ScoreCache(const ScoreCache&) = delete;
  ScoreCache& operator=(const ScoreCache&) = delete;

  std::optional<double> Lookup(const CacheKey& key) const;
  // Concurrent inserts of the same key are fine: last write wins, and
  // values for one key are identical by backend purity.
  void Insert(const CacheKey& key, double value);

  size_t size() const;
  uint64_t hits() const { return hits_.load(); }
  uint64_t misses() const { return misses_.load(); }

 private:
  struct KeyHash {
    size_t operator()(const CacheKey& k) const { return k.hi ^ (k.lo * 31); }
  };

  mutable std::mutex mu_;
  std::unordered_map<CacheKey, double, KeyHash> entries_;
  std::ofstream log_;
  mutable std::atomic<uint64_t> hits_{0};
  mutable std::atomic<uint64_t> misses_{0};
};

// Score() behind a cache: hits return the stored value bit-exact, misses
// delegate and store.
double CachedScore(const Backend& backend, const ScoreRequest& request,
                   ScoreCache& cache);

}  // namespace ccshap::scoring

#endif  // CCSHAP_SCORE_CACHE_H_
