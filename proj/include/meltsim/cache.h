// Copyright 2026 The meltsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MELTSIM_CACHE_H_
#define MELTSIM_CACHE_H_

#include <cstdint>
#include <list>
#include <random>
#include <unordered_map>

#include "meltsim/vmem.h"

namespace meltsim {

struct CacheConfig {
  std::uint64_t line_size = 64;
  std::uint32_t hit_latency = 50;
  std::uint32_t miss_latency = 300;
  std::uint32_t threshold = 150;
  // Probability that an access reports the latency of the other class.
  double noise = 0.0;
  // Maximum number of resident lines; 0 means unbounded. LRU eviction.
  std::uint64_t capacity = 0;
  std::uint64_t seed = 0;

  // Throws ConfigError unless hit < threshold <= miss, the line size divides
  // the page size and noise is a probability.
  void Validate() const;
};

// Line-granular cache. Membership alone decides hit or miss; an access never
// touches any line but its own.
class CacheState {
 public:
  explicit CacheState(const CacheConfig& cfg = {});

  CacheState(const CacheState& other);
  CacheState& operator=(const CacheState& other);
  CacheState(CacheState&&) = default;
  CacheState& operator=(CacheState&&) = default;

  const CacheConfig& config() const { return cfg_; }

  // Returns the observed latency and leaves the line cached.
  std::uint32_t Access(PhysAddr pa);
  void Flush(PhysAddr pa);

  // White-box hook for tests. The attack never calls this.
  bool IsCached(PhysAddr pa) const;

  std::size_t resident_lines() const { return lru_.size(); }
  std::uint64_t LineOf(PhysAddr pa) const { return pa.value / cfg_.line_size; }

 private:
  void Touch(std::uint64_t line);

  CacheConfig cfg_;
  std::list<std::uint64_t> lru_;  // most recent at front
  std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> index_;
  std::mt19937_64 noise_rng_;
};

}  // namespace meltsim

#endif  // MELTSIM_CACHE_H_
