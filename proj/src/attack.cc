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

#include "meltsim/attack.h"

#include <string>

#include "meltsim/errors.h"
#include "meltsim/seed.h"

namespace meltsim {

const char* ExceptionModeName(ExceptionMode mode) {
  return mode == ExceptionMode::kHandling ? "handling" : "suppression";
}

const char* ConfidenceName(Confidence c) {
  switch (c) {
    case Confidence::kHit:
      return "hit";
    case Confidence::kInferredZero:
      return "inferred-zero";
    case Confidence::kUnknown:
      return "unknown";
  }
  return "?";
}

void AttackConfig::Validate() const {
  if (bits_per_tx != 1 && bits_per_tx != 8) {
    throw ConfigError("attack.bits_per_tx must be 1 or 8");
  }
  if (max_retries < 0) throw ConfigError("attack.max_retries must be >= 0");
  window.Validate();
}

double AttackResult::accuracy() const {
  if (!errors || bytes.empty()) return 0.0;
  return static_cast<double>(bytes.size() - *errors) /
         static_cast<double>(bytes.size());
}

std::vector<std::optional<std::uint8_t>> AttackResult::values() const {
  std::vector<std::optional<std::uint8_t>> out;
  out.reserve(bytes.size());
  for (const LeakOutcome& b : bytes) {
    if (b.confidence == Confidence::kUnknown) {
      out.emplace_back();
    } else {
      out.emplace_back(b.value);
    }
  }
  return out;
}

namespace {

// Register roles shared by every attack program.
constexpr Reg kData{0};
constexpr Reg kTarget{1};
constexpr Reg kProbe{2};
constexpr Reg kSink{3};
constexpr Reg kLatency{4};
constexpr Reg kLine{5};

constexpr std::uint64_t kBitLineShift = 6;  // a set bit selects cache line 1

// Appends HALT and, for suppression, wraps body in TX_BEGIN/TX_END. Branch
// targets in body are body-relative.
Program Finish(std::vector<Instruction> body, ExceptionMode mode) {
  std::vector<Instruction> prog;
  if (mode == ExceptionMode::kSuppression) {
    prog.push_back(Instruction::Simple(Opcode::kTxBegin));
    for (Instruction& inst : body) {
      if (inst.op == Opcode::kJz || inst.op == Opcode::kJmp) ++inst.target;
    }
  }
  prog.insert(prog.end(), body.begin(), body.end());
  if (mode == ExceptionMode::kSuppression) {
    prog.push_back(Instruction::Simple(Opcode::kTxEnd));
  }
  prog.push_back(Instruction::Simple(Opcode::kHalt));
  return Program::Create(std::move(prog));
}

// retry: LOAD_BYTE R0,[R1]; SHL_IMM R0,12; JZ R0,retry; LOAD_BYTE R3,[R2+R0]
Program ByteSender(const AttackConfig& cfg) {
  std::vector<Instruction> body;
  body.push_back(Instruction::LoadByte(kData, kTarget));
  body.push_back(Instruction::ShlImm(kData, kPageShift));
  if (cfg.retry) body.push_back(Instruction::Jz(kData, 0));
  body.push_back(Instruction::LoadByte(kSink, kProbe, kData));
  return Finish(std::move(body), cfg.mode);
}

// retry: LOAD_BYTE R0,[R1]; JZ R0,retry; SHR_IMM R0,bit; AND_IMM R0,1;
//        SHL_IMM R0,6; LOAD_BYTE R3,[R2+R0]
Program BitSender(const AttackConfig& cfg, unsigned bit) {
  std::vector<Instruction> body;
  body.push_back(Instruction::LoadByte(kData, kTarget));
  if (cfg.retry) body.push_back(Instruction::Jz(kData, 0));
  if (bit != 0) body.push_back(Instruction::ShrImm(kData, bit));
  body.push_back(Instruction::AndImm(kData, 1));
  body.push_back(Instruction::ShlImm(kData, kBitLineShift));
  body.push_back(Instruction::LoadByte(kSink, kProbe, kData));
  return Finish(std::move(body), cfg.mode);
}

Program Receiver() {
  return Program::Create({Instruction::TimeRead(kLatency, kLine),
                          Instruction::Clflush(kLine),
                          Instruction::Simple(Opcode::kHalt)});
}

Program Flusher() {
  return Program::Create(
      {Instruction::Clflush(kLine), Instruction::Simple(Opcode::kHalt)});
}

CoreMode CoreModeOf(const MachineState& m) {
  return m.config.serialized_check ? CoreMode::kSerializedCheck
                                   : CoreMode::kBaseline;
}

}  // namespace

Attacker::Attacker(MachineState& machine, const AttackConfig& cfg,
                   VirtAddr probe_base)
    : m_(machine), cfg_(cfg), probe_base_(probe_base),
      core_mode_(CoreModeOf(machine)) {
  cfg_.Validate();
  if (cfg_.mode == ExceptionMode::kSuppression &&
      !m_.config.supports_transactions) {
    throw CapabilityError(
        "exception suppression needs transactional memory support");
  }
  if (probe_base_.offset() != 0) {
    throw SetupError("probe array base is not page-aligned");
  }
  for (std::uint64_t i = 0; i < kProbePages; ++i) {
    const VirtAddr va = probe_base_ + i * kPageSize;
    const Translation t = Translate(va, AccessMode::kUser, m_.asp);
    if (t.fault != FaultKind::kNone || !t.paddr) {
      throw SetupError("probe page " + std::to_string(i) +
                       " is not user-accessible");
    }
  }
  byte_sender_ = ByteSender(cfg_);
  for (unsigned bit = 0; bit < 8; ++bit) bit_senders_[bit] = BitSender(cfg_, bit);
  receiver_ = Receiver();
  flusher_ = Flusher();
  FlushProbeArray();
}

ExecutionTrace Attacker::RunProgram(const Program& prog,
                                    const RegisterFile& regs) {
  m_.regs = regs;
  WindowModel wm = cfg_.window;
  wm.seed = DeriveSeed(cfg_.window.seed, run_counter_++);
  ExecutionTrace trace = Run(prog, m_, wm, core_mode_);
  cycles_ += trace.cycles;
  return trace;
}

void Attacker::FlushProbeArray() {
  RegisterFile regs{};
  for (std::uint64_t i = 0; i < kProbePages; ++i) {
    for (std::uint64_t line = 0; line < 2; ++line) {
      regs[kLine.id] = (probe_base_ + i * kPageSize + (line << kBitLineShift)).value;
      RunProgram(flusher_, regs);
    }
  }
}

std::uint32_t Attacker::Reload(VirtAddr va) {
  RegisterFile regs{};
  regs[kLine.id] = va.value;
  const ExecutionTrace t = RunProgram(receiver_, regs);
  const auto latency = static_cast<std::uint32_t>(t.arch.regs[kLatency.id]);
  if (latency < m_.config.cache.threshold) ++observed_hits_;
  return latency;
}

std::array<std::uint32_t, kProbePages> Attacker::ReloadAll() {
  std::array<std::uint32_t, kProbePages> out{};
  for (std::uint64_t i = 0; i < kProbePages; ++i) {
    out[i] = Reload(probe_base_ + i * kPageSize);
  }
  return out;
}

FaultKind Attacker::Transmit(const Program& prog, VirtAddr target) {
  RegisterFile regs{};
  regs[kTarget.id] = target.value;
  regs[kProbe.id] = probe_base_.value;
  const ExecutionTrace t = RunProgram(prog, regs);
  if (t.arch.status == RunStatus::kFaulted) ++delivered_faults_;
  if (cfg_.mode == ExceptionMode::kSuppression) {
    return t.arch.tx == TxOutcome::kAborted ? t.arch.tx_abort_cause
                                            : FaultKind::kNone;
  }
  return t.arch.fault;
}

LeakOutcome Attacker::LeakByteMode(VirtAddr va) {
  const int attempts = cfg_.retry ? cfg_.max_retries + 1 : 1;
  const std::uint32_t threshold = m_.config.cache.threshold;
  for (int a = 0; a < attempts; ++a) {
    if (Transmit(byte_sender_, va) == FaultKind::kNotPresent) return {};
    const auto latencies = ReloadAll();
    int hits = 0;
    std::uint8_t value = 0;
    for (std::uint64_t i = 0; i < kProbePages; ++i) {
      if (latencies[i] < threshold) {
        ++hits;
        value = static_cast<std::uint8_t>(i);
      }
    }
    if (hits == 1) return {value, Confidence::kHit};
    if (hits > 1) return {};
  }
  return {0, Confidence::kInferredZero};
}

LeakOutcome Attacker::LeakBitMode(VirtAddr va) {
  const int attempts = cfg_.retry ? cfg_.max_retries + 1 : 1;
  const std::uint32_t threshold = m_.config.cache.threshold;
  const VirtAddr line1 = probe_base_ + (std::uint64_t{1} << kBitLineShift);
  std::uint8_t value = 0;
  bool any_hit = false;
  for (unsigned bit = 0; bit < 8; ++bit) {
    // A lost race looks like a 0 bit, so only a 1 ends the attempts early.
    for (int a = 0; a < attempts; ++a) {
      if (Transmit(bit_senders_[bit], va) == FaultKind::kNotPresent) return {};
      if (Reload(line1) < threshold) {
        value |= static_cast<std::uint8_t>(1u << bit);
        any_hit = true;
        break;
      }
    }
  }
  if (!any_hit) return {0, Confidence::kInferredZero};
  return {value, Confidence::kHit};
}

LeakOutcome Attacker::LeakByte(VirtAddr va) {
  return cfg_.bits_per_tx == 8 ? LeakByteMode(va) : LeakBitMode(va);
}

AttackResult Attacker::DumpRange(VirtAddr start, std::size_t len,
                                 std::optional<std::span<const std::uint8_t>> oracle) {
  if (len == 0) throw BoundsError("dump length must be at least 1");
  if (oracle && oracle->size() != len) {
    throw BoundsError("oracle length " + std::to_string(oracle->size()) +
                      " does not match dump length " + std::to_string(len));
  }
  AttackResult r;
  r.bytes.reserve(len);
  const std::uint64_t before = cycles_;
  for (std::size_t i = 0; i < len; ++i) {
    const LeakOutcome o = LeakByte(start + i);
    if (o.confidence == Confidence::kUnknown) ++r.unknown;
    if (o.confidence == Confidence::kHit) ++r.hits;
    r.bytes.push_back(o);
  }
  r.cycles = cycles_ - before;
  r.cycles_per_byte = static_cast<double>(r.cycles) / static_cast<double>(len);
  if (oracle) {
    std::size_t errors = 0;
    for (std::size_t i = 0; i < len; ++i) {
      const LeakOutcome& o = r.bytes[i];
      if (o.confidence == Confidence::kUnknown || o.value != (*oracle)[i]) {
        ++errors;
      }
    }
    r.errors = errors;
  }
  return r;
}

KaslrSearchResult Attacker::FindDirectMap(std::uint64_t phys_size,
                                          std::optional<std::uint64_t> probe_offset) {
  if (phys_size == 0 || phys_size % kPageSize != 0) {
    throw ConfigError("phys_size must be a positive multiple of the page size");
  }
  const std::uint64_t offset = probe_offset.value_or(phys_size - kPageSize);
  const std::uint64_t candidates =
      KaslrCandidateCount(phys_size, m_.config.vmem.kaslr_entropy_bits);
  KaslrSearchResult result;
  const std::uint64_t before = cycles_;
  for (std::uint64_t k = 0; k < candidates; ++k) {
    const VirtAddr base = kDirectMapFixedBase + k * phys_size;
    ++result.probes;
    for (std::uint64_t i = 0; i < kDirectMapProbeBytes; ++i) {
      const LeakOutcome o = LeakByte(base + offset + i);
      if (o.confidence == Confidence::kUnknown) break;
      if (o.confidence == Confidence::kHit) {
        result.base = base;
        result.cycles = cycles_ - before;
        return result;
      }
    }
  }
  result.cycles = cycles_ - before;
  return result;
}

std::array<std::uint32_t, kProbePages> ToyExample(std::uint8_t data,
                                                  MachineState& machine,
                                                  const WindowModel& wm) {
  AttackConfig cfg;
  cfg.mode = ExceptionMode::kHandling;
  cfg.window = wm;
  Attacker attacker(machine, cfg);
  // MOV_IMM R0,data; RAISE; SHL_IMM R0,12; LOAD_BYTE R3,[R2+R0]; HALT
  const Program toy = Program::Create({
      Instruction::MovImm(kData, data),
      Instruction::Simple(Opcode::kRaise),
      Instruction::ShlImm(kData, kPageShift),
      Instruction::LoadByte(kSink, kProbe, kData),
      Instruction::Simple(Opcode::kHalt),
  });
  RegisterFile regs{};
  regs[kProbe.id] = kUserProbeBase.value;
  machine.regs = regs;
  Run(toy, machine, wm, CoreModeOf(machine));
  return attacker.ReloadAll();
}

LeakOutcome LeakByte(VirtAddr va, const AttackConfig& cfg, MachineState& machine) {
  return Attacker(machine, cfg).LeakByte(va);
}

AttackResult DumpRange(VirtAddr start, std::size_t len, const AttackConfig& cfg,
                       MachineState& machine,
                       std::optional<std::span<const std::uint8_t>> oracle) {
  return Attacker(machine, cfg).DumpRange(start, len, oracle);
}

KaslrSearchResult FindDirectMap(const AttackConfig& cfg, MachineState& machine,
                                std::uint64_t phys_size,
                                std::optional<std::uint64_t> probe_offset) {
  return Attacker(machine, cfg).FindDirectMap(phys_size, probe_offset);
}

}  // namespace meltsim
