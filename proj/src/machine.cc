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

#include "meltsim/machine.h"

#include <algorithm>
#include <vector>

namespace meltsim {

MachineState BuildMachine(const MachineConfig& cfg) {
  AddressSpace asp = BuildAddressSpace(cfg.vmem);
  MachineState m{cfg, {}, AccessMode::kUser, PhysicalMemory(cfg.vmem.phys_size),
                 std::move(asp), CacheState(cfg.cache), {}};
  const std::vector<std::uint8_t> filler(kTrampolinePages * kPageSize,
                                         kTrampolineFiller);
  m.memory.Write(m.asp.trampoline_phys(), filler);
  return m;
}

ResolvedAccess ResolveAccess(const MachineState& m, VirtAddr va,
                             std::uint64_t len) {
  ResolvedAccess out;
  out.data_reachable = true;
  out.writable = true;
  std::uint64_t done = 0;
  while (done < len) {
    const VirtAddr cur = va + done;
    const std::uint64_t chunk = std::min(len - done, kPageSize - cur.offset());
    const Translation t = Translate(cur, m.mode, m.asp);
    if (out.fault == FaultKind::kNone) out.fault = t.fault;
    if (!t.paddr || t.split_shortcut) {
      out.data_reachable = false;
      out.segments = 0;
      return out;
    }
    out.writable = out.writable && t.writable;
    out.start[out.segments] = *t.paddr;
    out.length[out.segments] = chunk;
    ++out.segments;
    done += chunk;
  }
  return out;
}

std::uint64_t ReadResolved(const PhysicalMemory& mem, const ResolvedAccess& a) {
  std::uint64_t value = 0;
  unsigned shift = 0;
  for (int s = 0; s < a.segments; ++s) {
    for (std::uint64_t i = 0; i < a.length[s]; ++i, shift += 8) {
      value |= std::uint64_t{mem.ReadByte(a.start[s] + i)} << shift;
    }
  }
  return value;
}

void WriteResolved(PhysicalMemory& mem, const ResolvedAccess& a,
                   std::uint64_t value) {
  for (int s = 0; s < a.segments; ++s) {
    for (std::uint64_t i = 0; i < a.length[s]; ++i) {
      mem.WriteByte(a.start[s] + i, static_cast<std::uint8_t>(value));
      value >>= 8;
    }
  }
}

namespace {

template <typename Fn>
void ForEachLine(const CacheState& cache, const ResolvedAccess& a, Fn&& fn) {
  const std::uint64_t line = cache.config().line_size;
  for (int s = 0; s < a.segments; ++s) {
    const std::uint64_t first = a.start[s].value / line;
    const std::uint64_t last = (a.start[s].value + a.length[s] - 1) / line;
    for (std::uint64_t l = first; l <= last; ++l) fn(PhysAddr{l * line});
  }
}

}  // namespace

std::uint32_t AccessLines(CacheState& cache, const ResolvedAccess& a) {
  std::uint32_t latency = 0;
  ForEachLine(cache, a, [&](PhysAddr pa) {
    latency = std::max(latency, cache.Access(pa));
  });
  return latency;
}

void FlushLines(CacheState& cache, const ResolvedAccess& a) {
  ForEachLine(cache, a, [&](PhysAddr pa) { cache.Flush(pa); });
}

}  // namespace meltsim
