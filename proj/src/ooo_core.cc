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

#include "meltsim/ooo_core.h"

#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "meltsim/errors.h"

namespace meltsim {

void WindowModel::Validate() const {
  if (!(p_zero >= 0.0 && p_zero <= 1.0)) {
    throw ConfigError("window.p_zero must lie in [0, 1]");
  }
}

namespace {

enum class EntryStatus : std::uint8_t { kWaiting, kExecuted, kFaulted };

struct RobEntry {
  const Microop* uop = nullptr;
  std::uint64_t seq = 0;
  EntryStatus status = EntryStatus::kWaiting;
  bool last_of_instruction = false;
  // Result; a faulted load may still carry a (transient) value.
  bool has_value = false;
  std::uint64_t value = 0;
  FaultKind fault = FaultKind::kNone;
  // Cache access made while executing, if any.
  bool accessed = false;
  PhysAddr access_pa;
  // Store target, valid once an executed store has resolved it.
  ResolvedAccess target;
};

class Core {
 public:
  Core(const Program& prog, MachineState& m, const WindowModel& wm,
       CoreMode mode)
      : prog_(prog), m_(m), wm_(wm), mode_(mode), rng_(wm.seed) {}

  ExecutionTrace Execute() {
    wm_.Validate();
    if (prog_.uses_transactions() && !m_.config.supports_transactions) {
      throw UnsupportedError("machine has no transactional memory");
    }
    trace_.arch.regs = m_.regs;
    while (!finished_) {
      Retire();
      if (finished_) break;
      if (!rob_.empty()) {
        // Retire() only stops at a faulted head.
        if (rob_.size() - 1 >= wm_.budget || FrontendBlocked()) {
          ResolveFault();
          continue;
        }
      } else if (cursor_ == 0) {
        if (fetch_pc_ >= prog_.size()) {
          Finish(RunStatus::kEnded);
          break;
        }
        if (trace_.arch.retired >= m_.config.max_steps) {
          Finish(RunStatus::kStepLimit);
          break;
        }
      }
      DispatchNext();
    }
    m_.regs = trace_.arch.regs;
    return std::move(trace_);
  }

 private:
  RobEntry& Entry(std::uint64_t seq) { return rob_[seq - rob_.front().seq]; }

  bool FrontendBlocked() const {
    return halted_ || stalled_ || (cursor_ == 0 && fetch_pc_ >= prog_.size());
  }

  void Finish(RunStatus status) {
    trace_.arch.status = status;
    finished_ = true;
  }

  // Value of an architectural register as seen by the next dispatched µop.
  std::optional<std::uint64_t> ReadReg(Reg r) {
    if (const auto& producer = rat_[r.id]) {
      const RobEntry& p = Entry(*producer);
      if (!p.has_value) return std::nullopt;
      return p.value;
    }
    return trace_.arch.regs[r.id];
  }

  std::uint8_t ReadByteSpeculative(PhysAddr pa, std::uint64_t before_seq) {
    for (auto it = rob_.rbegin(); it != rob_.rend(); ++it) {
      if (it->seq >= before_seq || it->uop->kind != UopKind::kMemStore ||
          it->status != EntryStatus::kExecuted) {
        continue;
      }
      const ResolvedAccess& t = it->target;
      std::uint64_t shift = 0;
      for (int s = 0; s < t.segments; ++s) {
        if (pa >= t.start[s] && pa.value - t.start[s].value < t.length[s]) {
          return static_cast<std::uint8_t>(
              it->value >> (8 * (shift + pa.value - t.start[s].value)));
        }
        shift += t.length[s];
      }
    }
    if (auto it = tx_writes_.find(pa.value); it != tx_writes_.end()) {
      return it->second;
    }
    return m_.memory.ReadByte(pa);
  }

  std::uint64_t ReadSpeculative(const ResolvedAccess& a, std::uint64_t seq) {
    std::uint64_t value = 0;
    unsigned shift = 0;
    for (int s = 0; s < a.segments; ++s) {
      for (std::uint64_t i = 0; i < a.length[s]; ++i, shift += 8) {
        value |= std::uint64_t{ReadByteSpeculative(a.start[s] + i, seq)} << shift;
      }
    }
    return value;
  }

  bool DrawZero() {
    if (wm_.p_zero <= 0.0) return false;
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return u < wm_.p_zero;
  }

  ResolvedAccess Resolve(VirtAddr va, std::uint64_t width) {
    ResolvedAccess a = ResolveAccess(m_, va, width);
    if (!m_.tlb.contains(va.page())) {
      trace_.cycles += m_.config.cost.translate;
      if (a.data_reachable) m_.tlb.insert(va.page());
    }
    return a;
  }

  void TouchCache(RobEntry& e, const ResolvedAccess& a, std::uint32_t& latency) {
    latency = AccessLines(m_.cache, a);
    trace_.cycles += latency;
    e.accessed = true;
    e.access_pa = a.start[0];
  }

  // Loads and timed reads.
  void ExecuteLoad(RobEntry& e, std::uint64_t address) {
    const Microop& u = *e.uop;
    std::optional<std::uint64_t> old;
    if (u.kind == UopKind::kMemLoad && u.width == 1) {
      old = ReadReg(*u.writes);
      if (!old) return;  // merge source not ready
    }
    const ResolvedAccess a = Resolve(VirtAddr{address}, u.width);
    trace_.cycles += 1;
    const bool forwards =
        a.fault == FaultKind::kNone ||
        (a.data_reachable && mode_ == CoreMode::kBaseline);
    if (!forwards) {
      e.status = EntryStatus::kFaulted;
      e.fault = a.fault;
      return;
    }
    std::uint32_t latency = 0;
    TouchCache(e, a, latency);
    std::uint64_t value = latency;
    if (u.kind == UopKind::kMemLoad) {
      const std::uint64_t data = ReadSpeculative(a, e.seq);
      value = u.width == 1 ? MergeLowByte(*old, static_cast<std::uint8_t>(data))
                           : data;
    }
    e.has_value = true;
    if (a.fault == FaultKind::kNone) {
      e.value = value;
      e.status = EntryStatus::kExecuted;
      return;
    }
    // The permission check fails at retirement; until then dependents run
    // with either the data or the zeroed register.
    e.value = DrawZero() ? 0 : value;
    e.status = EntryStatus::kFaulted;
    e.fault = a.fault;
  }

  void ExecuteEntry(RobEntry& e) {
    const Microop& u = *e.uop;
    const Instruction& inst = prog_.at(u.inst_index);
    std::optional<std::uint64_t> address;
    if (u.kind == UopKind::kMemLoad || u.kind == UopKind::kMemStore ||
        u.kind == UopKind::kFlush || u.kind == UopKind::kTimer) {
      // The address-gen µop dispatched just before may already have retired.
      if (!agen_address_) return;
      address = agen_address_;
    }

    switch (u.kind) {
      case UopKind::kAddressGen: {
        auto base = ReadReg(*inst.mem.base);
        std::optional<std::uint64_t> index = 0;
        if (inst.mem.index) index = ReadReg(*inst.mem.index);
        if (!base || !index) {
          agen_address_.reset();
          return;
        }
        e.value = *base + *index;
        e.has_value = true;
        agen_address_ = e.value;
        break;
      }
      case UopKind::kMemLoad:
      case UopKind::kTimer:
        ExecuteLoad(e, *address);
        return;
      case UopKind::kMemStore: {
        auto data = ReadReg(*inst.src);
        if (!data) return;
        const ResolvedAccess a = Resolve(VirtAddr{*address}, u.width);
        trace_.cycles += 1;
        if (a.fault != FaultKind::kNone || !a.writable) {
          e.status = EntryStatus::kFaulted;
          e.fault = a.fault != FaultKind::kNone ? a.fault : FaultKind::kProtection;
          return;
        }
        e.target = a;
        e.value = *data;
        e.status = EntryStatus::kExecuted;
        return;
      }
      case UopKind::kFlush: {
        const ResolvedAccess a = Resolve(VirtAddr{*address}, 1);
        trace_.cycles += 1;
        if (a.fault != FaultKind::kNone) {
          e.status = EntryStatus::kFaulted;
          e.fault = a.fault;
          return;
        }
        FlushLines(m_.cache, a);
        e.status = EntryStatus::kExecuted;
        return;
      }
      case UopKind::kAlu: {
        std::optional<std::uint64_t> dst = 0;
        if (u.alu != AluOp::kMov) dst = ReadReg(*inst.dst);
        std::optional<std::uint64_t> src = 0;
        if (u.alu == AluOp::kAdd) src = ReadReg(*inst.src);
        if (!dst || !src) return;
        switch (u.alu) {
          case AluOp::kMov:
            e.value = u.imm;
            break;
          case AluOp::kAdd:
            e.value = *dst + *src;
            break;
          case AluOp::kShl:
            e.value = *dst << u.imm;
            break;
          case AluOp::kShr:
            e.value = *dst >> u.imm;
            break;
          case AluOp::kAnd:
            e.value = *dst & u.imm;
            break;
        }
        e.has_value = true;
        break;
      }
      case UopKind::kBranch:
        if (u.halt) {
          halted_ = true;
        } else if (u.conditional) {
          auto cond = ReadReg(*inst.src);
          if (!cond) {
            stalled_ = true;
            return;
          }
          fetch_pc_ = *cond == 0 ? u.target : u.inst_index + 1;
        } else {
          fetch_pc_ = u.target;
        }
        break;
      case UopKind::kTxMarker:
        break;
      case UopKind::kFaultMarker:
        trace_.cycles += 1;
        e.status = EntryStatus::kFaulted;
        e.fault = FaultKind::kTrap;
        return;
    }
    trace_.cycles += 1;
    e.status = EntryStatus::kExecuted;
  }

  void DispatchNext() {
    const auto& uops = prog_.uops(fetch_pc_);
    RobEntry e;
    e.uop = &uops[cursor_];
    e.seq = next_seq_++;
    e.last_of_instruction = cursor_ + 1 == uops.size();
    rob_.push_back(e);
    RobEntry& entry = rob_.back();
    const std::size_t pc = fetch_pc_;

    ExecuteEntry(entry);
    if (const auto& dst = entry.uop->writes) rat_[dst->id] = entry.seq;

    if (entry.last_of_instruction) {
      cursor_ = 0;
      if (entry.uop->kind != UopKind::kBranch) fetch_pc_ = pc + 1;
    } else {
      ++cursor_;
    }
  }

  void Commit(RobEntry& e) {
    const Microop& u = *e.uop;
    ArchResult& arch = trace_.arch;
    if (u.writes) {
      arch.regs[u.writes->id] = e.value;
      if (rat_[u.writes->id] == e.seq) rat_[u.writes->id].reset();
    }
    switch (u.kind) {
      case UopKind::kMemStore: {
        std::uint64_t v = e.value;
        for (int s = 0; s < e.target.segments; ++s) {
          for (std::uint64_t i = 0; i < e.target.length[s]; ++i, v >>= 8) {
            const PhysAddr pa = e.target.start[s] + i;
            const auto byte = static_cast<std::uint8_t>(v);
            if (tx_begin_) {
              tx_writes_[pa.value] = byte;
            } else {
              m_.memory.WriteByte(pa, byte);
              arch.memory_delta[pa.value] = byte;
            }
          }
        }
        break;
      }
      case UopKind::kTxMarker:
        if (u.tx_begin) {
          if (tx_begin_) {
            throw UnsupportedError("nested transaction at index " +
                                   std::to_string(u.inst_index));
          }
          tx_begin_ = u.inst_index;
          tx_regs_ = arch.regs;
        } else {
          if (!tx_begin_) {
            throw ProgramError("TX_END at index " +
                               std::to_string(u.inst_index) +
                               " outside a transaction");
          }
          for (const auto& [pa, byte] : tx_writes_) {
            m_.memory.WriteByte(PhysAddr{pa}, byte);
            arch.memory_delta[pa] = byte;
          }
          tx_writes_.clear();
          tx_begin_.reset();
          arch.tx = TxOutcome::kCommitted;
        }
        break;
      case UopKind::kBranch:
        if (u.halt) Finish(RunStatus::kHalted);
        break;
      default:
        break;
    }
  }

  void Retire() {
    while (!rob_.empty() && rob_.front().status == EntryStatus::kExecuted) {
      Commit(rob_.front());
      if (rob_.front().last_of_instruction) ++trace_.arch.retired;
      rob_.pop_front();
      if (finished_) return;
    }
  }

  // The head of the ROB holds a fault and has reached retirement.
  void ResolveFault() {
    const RobEntry& head = rob_.front();
    const FaultKind fault = head.fault;
    const std::size_t index = head.uop->inst_index;
    for (std::size_t i = 1; i < rob_.size(); ++i) {
      if (rob_[i].accessed) trace_.transient_loads.push_back(rob_[i].access_pa);
    }
    trace_.squashed_uops += rob_.size() - 1;
    rob_.clear();
    rat_.fill(std::nullopt);
    halted_ = false;
    stalled_ = false;
    cursor_ = 0;

    ArchResult& arch = trace_.arch;
    if (tx_begin_) {
      arch.regs = tx_regs_;
      tx_writes_.clear();
      arch.tx = TxOutcome::kAborted;
      arch.tx_abort_cause = fault;
      trace_.cycles += m_.config.cost.abort;
      fetch_pc_ = prog_.tx_end_of(*tx_begin_) + 1;
      tx_begin_.reset();
      return;
    }
    arch.fault = fault;
    arch.fault_index = index;
    trace_.cycles += m_.config.cost.fault;
    Finish(RunStatus::kFaulted);
  }

  const Program& prog_;
  MachineState& m_;
  const WindowModel wm_;
  const CoreMode mode_;
  std::mt19937_64 rng_;

  ExecutionTrace trace_;
  std::deque<RobEntry> rob_;
  std::array<std::optional<std::uint64_t>, kNumRegisters> rat_{};
  std::uint64_t next_seq_ = 0;

  std::size_t fetch_pc_ = 0;
  std::size_t cursor_ = 0;  // next µop within the instruction at fetch_pc_
  std::optional<std::uint64_t> agen_address_;
  bool halted_ = false;
  bool stalled_ = false;
  bool finished_ = false;

  std::optional<std::size_t> tx_begin_;
  RegisterFile tx_regs_{};
  std::map<std::uint64_t, std::uint8_t> tx_writes_;
};

}  // namespace

ExecutionTrace Run(const Program& prog, MachineState& machine,
                   const WindowModel& wm, CoreMode mode) {
  return Core(prog, machine, wm, mode).Execute();
}

ExecutionTrace RunTransaction(const Program& prog, MachineState& machine,
                              const WindowModel& wm, CoreMode mode) {
  if (!prog.uses_transactions()) {
    throw ProgramError("program has no TX_BEGIN/TX_END region");
  }
  return Core(prog, machine, wm, mode).Execute();
}

}  // namespace meltsim
