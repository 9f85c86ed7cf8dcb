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

#include "meltsim/cache.h"

#include <utility>

#include "meltsim/errors.h"

namespace meltsim {

void CacheConfig::Validate() const {
  if (line_size == 0 || kPageSize % line_size != 0) {
    throw ConfigError("cache line size must divide the page size");
  }
  if (!(hit_latency < threshold && threshold <= miss_latency)) {
    throw ConfigError("cache.threshold must satisfy hit < threshold <= miss");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) {
    throw ConfigError("cache.noise must lie in [0, 1]");
  }
}

CacheState::CacheState(const CacheConfig& cfg) : cfg_(cfg), noise_rng_(cfg.seed) {
  cfg_.Validate();
}

CacheState::CacheState(const CacheState& other)
    : cfg_(other.cfg_), lru_(other.lru_), noise_rng_(other.noise_rng_) {
  for (auto it = lru_.begin(); it != lru_.end(); ++it) index_.emplace(*it, it);
}

CacheState& CacheState::operator=(const CacheState& other) {
  if (this != &other) {
    CacheState copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void CacheState::Touch(std::uint64_t line) {
  if (auto it = index_.find(line); it != index_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    return;
  }
  lru_.push_front(line);
  index_.emplace(line, lru_.begin());
  if (cfg_.capacity != 0 && lru_.size() > cfg_.capacity) {
    index_.erase(lru_.back());
    lru_.pop_back();
  }
}

std::uint32_t CacheState::Access(PhysAddr pa) {
  const std::uint64_t line = LineOf(pa);
  bool hit = index_.contains(line);
  Touch(line);
  if (cfg_.noise > 0.0) {
    const double u = static_cast<double>(noise_rng_() >> 11) * 0x1.0p-53;
    if (u < cfg_.noise) hit = !hit;
  }
  return hit ? cfg_.hit_latency : cfg_.miss_latency;
}

void CacheState::Flush(PhysAddr pa) {
  auto it = index_.find(LineOf(pa));
  if (it == index_.end()) return;
  lru_.erase(it->second);
  index_.erase(it);
}

bool CacheState::IsCached(PhysAddr pa) const {
  return index_.contains(LineOf(pa));
}

}  // namespace meltsim
