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

#ifndef MELTSIM_INTERPRETER_H_
#define MELTSIM_INTERPRETER_H_

#include <cstdint>
#include <map>
#include <optional>

#include "meltsim/isa.h"
#include "meltsim/machine.h"

namespace meltsim {

enum class RunStatus {
  kHalted,     // HALT retired
  kEnded,      // fell off the end of the program
  kFaulted,    // fault delivered to the program
  kStepLimit,  // MachineConfig::max_steps instructions retired
};

enum class TxOutcome { kNone, kCommitted, kAborted };

const char* RunStatusName(RunStatus status);
const char* TxOutcomeName(TxOutcome tx);

// Architecturally visible outcome of running a program.
struct ArchResult {
  RegisterFile regs{};
  // Final value of every physical byte written, keyed by physical address.
  std::map<std::uint64_t, std::uint8_t> memory_delta;
  RunStatus status = RunStatus::kEnded;
  FaultKind fault = FaultKind::kNone;
  std::optional<std::size_t> fault_index;
  // Outcome of the last transaction and, for aborts, the fault behind it.
  TxOutcome tx = TxOutcome::kNone;
  FaultKind tx_abort_cause = FaultKind::kNone;
  std::uint64_t retired = 0;

  bool operator==(const ArchResult&) const = default;
};

// Strictly sequential execution with every permission check made before any
// data is read. The machine is not modified: register, memory and cache
// effects are computed on private copies.
ArchResult InterpretInOrder(const Program& prog, const MachineState& machine);

}  // namespace meltsim

#endif  // MELTSIM_INTERPRETER_H_
