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

#include "meltsim/interpreter.h"

#include <string>

#include "meltsim/errors.h"

namespace meltsim {

const char* RunStatusName(RunStatus status) {
  switch (status) {
    case RunStatus::kHalted:
      return "halted";
    case RunStatus::kEnded:
      return "ended";
    case RunStatus::kFaulted:
      return "faulted";
    case RunStatus::kStepLimit:
      return "step-limit";
  }
  return "?";
}

const char* TxOutcomeName(TxOutcome tx) {
  switch (tx) {
    case TxOutcome::kNone:
      return "none";
    case TxOutcome::kCommitted:
      return "committed";
    case TxOutcome::kAborted:
      return "aborted";
  }
  return "?";
}

namespace {

class InOrderInterpreter {
 public:
  InOrderInterpreter(const Program& prog, const MachineState& m)
      : prog_(prog), m_(m), cache_(m.cache) {
    result_.regs = m.regs;
  }

  ArchResult Run() {
    if (prog_.uses_transactions() && !m_.config.supports_transactions) {
      throw UnsupportedError("machine has no transactional memory");
    }
    std::size_t pc = 0;
    while (true) {
      if (pc >= prog_.size()) {
        result_.status = RunStatus::kEnded;
        break;
      }
      if (result_.retired >= m_.config.max_steps) {
        result_.status = RunStatus::kStepLimit;
        break;
      }
      const Step step = Execute(pc);
      if (step.fault != FaultKind::kNone) {
        if (!tx_begin_) {
          result_.status = RunStatus::kFaulted;
          result_.fault = step.fault;
          result_.fault_index = pc;
          break;
        }
        // Roll back to TX_BEGIN and resume after the region.
        result_.regs = tx_regs_;
        tx_writes_.clear();
        result_.tx = TxOutcome::kAborted;
        result_.tx_abort_cause = step.fault;
        pc = prog_.tx_end_of(*tx_begin_) + 1;
        tx_begin_.reset();
        continue;
      }
      ++result_.retired;
      if (step.halt) {
        result_.status = RunStatus::kHalted;
        break;
      }
      pc = step.next_pc;
    }
    return result_;
  }

 private:
  struct Step {
    FaultKind fault = FaultKind::kNone;
    std::size_t next_pc = 0;
    bool halt = false;
  };

  std::uint64_t& R(const std::optional<Reg>& r) { return result_.regs[r->id]; }

  VirtAddr EffectiveAddress(const Instruction& inst) const {
    std::uint64_t a = result_.regs[inst.mem.base->id];
    if (inst.mem.index) a += result_.regs[inst.mem.index->id];
    return VirtAddr{a};
  }

  std::uint8_t ReadByte(PhysAddr pa) const {
    if (auto it = tx_writes_.find(pa.value); it != tx_writes_.end()) {
      return it->second;
    }
    if (auto it = result_.memory_delta.find(pa.value);
        it != result_.memory_delta.end()) {
      return it->second;
    }
    return m_.memory.ReadByte(pa);
  }

  std::uint64_t Read(const ResolvedAccess& a) const {
    std::uint64_t value = 0;
    unsigned shift = 0;
    for (int s = 0; s < a.segments; ++s) {
      for (std::uint64_t i = 0; i < a.length[s]; ++i, shift += 8) {
        value |= std::uint64_t{ReadByte(a.start[s] + i)} << shift;
      }
    }
    return value;
  }

  void Write(const ResolvedAccess& a, std::uint64_t value) {
    auto& sink = tx_begin_ ? tx_writes_ : result_.memory_delta;
    for (int s = 0; s < a.segments; ++s) {
      for (std::uint64_t i = 0; i < a.length[s]; ++i) {
        sink[(a.start[s] + i).value] = static_cast<std::uint8_t>(value);
        value >>= 8;
      }
    }
  }

  Step Execute(std::size_t pc) {
    const Instruction& inst = prog_.at(pc);
    Step step{.next_pc = pc + 1};
    switch (inst.op) {
      case Opcode::kLoadByte:
      case Opcode::kLoadWord:
      case Opcode::kTimeRead: {
        const std::uint64_t width = inst.op == Opcode::kLoadWord ? 8 : 1;
        const ResolvedAccess a = ResolveAccess(m_, EffectiveAddress(inst), width);
        if (a.fault != FaultKind::kNone) {
          step.fault = a.fault;
          return step;
        }
        const std::uint32_t latency = AccessLines(cache_, a);
        if (inst.op == Opcode::kTimeRead) {
          R(inst.dst) = latency;
        } else if (width == 1) {
          R(inst.dst) = MergeLowByte(R(inst.dst), static_cast<std::uint8_t>(Read(a)));
        } else {
          R(inst.dst) = Read(a);
        }
        break;
      }
      case Opcode::kStore: {
        const ResolvedAccess a = ResolveAccess(m_, EffectiveAddress(inst), 8);
        if (a.fault != FaultKind::kNone) {
          step.fault = a.fault;
          return step;
        }
        if (!a.writable) {
          step.fault = FaultKind::kProtection;
          return step;
        }
        Write(a, R(inst.src));
        break;
      }
      case Opcode::kShlImm:
        R(inst.dst) <<= inst.imm;
        break;
      case Opcode::kShrImm:
        R(inst.dst) >>= inst.imm;
        break;
      case Opcode::kAndImm:
        R(inst.dst) &= inst.imm;
        break;
      case Opcode::kAdd:
        R(inst.dst) += R(inst.src);
        break;
      case Opcode::kMovImm:
        R(inst.dst) = inst.imm;
        break;
      case Opcode::kJz:
        if (R(inst.src) == 0) step.next_pc = inst.target;
        break;
      case Opcode::kJmp:
        step.next_pc = inst.target;
        break;
      case Opcode::kClflush: {
        const ResolvedAccess a = ResolveAccess(m_, EffectiveAddress(inst), 1);
        if (a.fault != FaultKind::kNone) {
          step.fault = a.fault;
          return step;
        }
        FlushLines(cache_, a);
        break;
      }
      case Opcode::kTxBegin:
        if (tx_begin_) {
          throw UnsupportedError("nested transaction at index " +
                                 std::to_string(pc));
        }
        tx_begin_ = pc;
        tx_regs_ = result_.regs;
        break;
      case Opcode::kTxEnd:
        if (!tx_begin_) {
          throw ProgramError("TX_END at index " + std::to_string(pc) +
                             " outside a transaction");
        }
        for (const auto& [pa, byte] : tx_writes_) result_.memory_delta[pa] = byte;
        tx_writes_.clear();
        tx_begin_.reset();
        result_.tx = TxOutcome::kCommitted;
        break;
      case Opcode::kRaise:
        step.fault = FaultKind::kTrap;
        return step;
      case Opcode::kHalt:
        step.halt = true;
        break;
    }
    return step;
  }

  const Program& prog_;
  const MachineState& m_;
  CacheState cache_;  // private copy; the machine's cache is never touched
  ArchResult result_;
  std::optional<std::size_t> tx_begin_;
  RegisterFile tx_regs_{};
  std::map<std::uint64_t, std::uint8_t> tx_writes_;
};

}  // namespace

ArchResult InterpretInOrder(const Program& prog, const MachineState& machine) {
  return InOrderInterpreter(prog, machine).Run();
}

}  // namespace meltsim
