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

// Out-of-order core.
//
// Instructions are decoded into µops and dispatched into a reorder buffer in
// program order. A µop executes as soon as its operands are available;
// results become architectural only when the µop reaches the head of the
// ROB. Permission faults are recorded on the µop and acted upon at
// retirement, so the µops behind a faulting load keep executing until the
// fault retires. The number of µops that can get in behind it is the
// transient window. At retirement everything younger is squashed; the cache
// lines those µops touched stay cached.

#ifndef MELTSIM_OOO_CORE_H_
#define MELTSIM_OOO_CORE_H_

#include <cstdint>
#include <vector>

#include "meltsim/interpreter.h"
#include "meltsim/isa.h"
#include "meltsim/machine.h"

namespace meltsim {

enum class CoreMode {
  kBaseline,
  // The permission check completes before a load forwards any data, so a
  // load that fails it never produces a value.
  kSerializedCheck,
};

// Race between a faulting load's retirement and its dependents.
struct WindowModel {
  // µops dispatched behind an unretired fault before it retires.
  std::uint64_t budget = 8;
  // Chance that the consumers of a faulting load see 0 instead of the data.
  double p_zero = 0.2;
  std::uint64_t seed = 0;

  // Throws ConfigError when p_zero is not a probability.
  void Validate() const;
};

struct ExecutionTrace {
  ArchResult arch;
  std::uint64_t cycles = 0;
  // Physical address of every cache access made by µops that were later
  // squashed, in execution order.
  std::vector<PhysAddr> transient_loads;
  std::uint64_t squashed_uops = 0;

  TxOutcome tx() const { return arch.tx; }
  bool operator==(const ExecutionTrace&) const = default;
};

// Runs prog on the machine. Registers, memory, cache and TLB of the machine
// are updated. The architectural part of the trace matches InterpretInOrder
// for every program; only cache state can differ.
ExecutionTrace Run(const Program& prog, MachineState& machine,
                   const WindowModel& wm, CoreMode mode = CoreMode::kBaseline);

// Run for programs with a transactional region: a fault inside the region
// rolls back to TX_BEGIN, is not delivered, and execution resumes after
// TX_END. Throws ProgramError when prog has no region.
ExecutionTrace RunTransaction(const Program& prog, MachineState& machine,
                              const WindowModel& wm,
                              CoreMode mode = CoreMode::kBaseline);

}  // namespace meltsim

#endif  // MELTSIM_OOO_CORE_H_
