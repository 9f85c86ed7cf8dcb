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

#ifndef MELTSIM_MACHINE_H_
#define MELTSIM_MACHINE_H_

#include <array>
#include <cstdint>
#include <unordered_set>

#include "meltsim/cache.h"
#include "meltsim/isa.h"
#include "meltsim/vmem.h"

namespace meltsim {

// Simulated-cycle costs. Only the ordering fault >> abort is meaningful.
struct CostConfig {
  std::uint64_t fault = 2000;  // trap into the kernel and back to a handler
  std::uint64_t abort = 200;   // transactional abort
  std::uint64_t translate = 10;  // page walk on a TLB miss
};

struct MachineConfig {
  AddressSpaceConfig vmem;
  CacheConfig cache;
  CostConfig cost;
  bool supports_transactions = true;
  // Permission check completes before a faulting load forwards data.
  bool serialized_check = false;
  // Architectural instruction budget per program run.
  std::uint64_t max_steps = 1 << 16;
};

// Architectural state (registers, physical memory, privilege) next to the
// microarchitectural state that survives between runs (cache, TLB). The ROB
// lives inside the core for the duration of a run.
struct MachineState {
  MachineConfig config;
  RegisterFile regs{};
  AccessMode mode = AccessMode::kUser;
  PhysicalMemory memory;
  AddressSpace asp;
  CacheState cache;
  std::unordered_set<std::uint64_t> tlb;  // virtual page numbers
};

// Builds the address space and fills the trampoline frames with filler bytes.
MachineState BuildMachine(const MachineConfig& cfg);

// A multi-byte virtual access resolved to at most two physical segments.
struct ResolvedAccess {
  FaultKind fault = FaultKind::kNone;
  // Physical addresses are known for every byte. Also true for protection
  // faults found through the page table; false for not-present faults and
  // hard-split rejections.
  bool data_reachable = false;
  bool writable = false;
  int segments = 0;
  std::array<PhysAddr, 2> start{};
  std::array<std::uint64_t, 2> length{};
};

ResolvedAccess ResolveAccess(const MachineState& m, VirtAddr va,
                             std::uint64_t len);

// Little-endian read of a resolved access straight from physical memory.
std::uint64_t ReadResolved(const PhysicalMemory& mem, const ResolvedAccess& a);
void WriteResolved(PhysicalMemory& mem, const ResolvedAccess& a,
                   std::uint64_t value);

// Accesses every cache line the resolved range covers; returns the slowest
// observed latency.
std::uint32_t AccessLines(CacheState& cache, const ResolvedAccess& a);
void FlushLines(CacheState& cache, const ResolvedAccess& a);

}  // namespace meltsim

#endif  // MELTSIM_MACHINE_H_
