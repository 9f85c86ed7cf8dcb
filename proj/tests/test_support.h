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

// Shared fixtures for the unit tests and the acceptance binary.

#ifndef MELTSIM_TESTS_TEST_SUPPORT_H_
#define MELTSIM_TESTS_TEST_SUPPORT_H_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "meltsim/attack.h"
#include "meltsim/hexdump.h"
#include "meltsim/isa.h"
#include "meltsim/machine.h"
#include "meltsim/ooo_core.h"
#include "meltsim/vmem.h"

namespace meltsim::testing {

// Physical address where tests plant kernel secrets.
inline constexpr std::uint64_t kSecretPaddr = 0x40000;

inline MachineConfig SmallConfig() {
  MachineConfig cfg;
  cfg.vmem.phys_size = 4ULL << 20;
  return cfg;
}

inline MachineState SmallMachine(MachineConfig cfg = SmallConfig()) {
  return BuildMachine(cfg);
}

inline VirtAddr KernelVa(const MachineState& m, std::uint64_t paddr) {
  return m.asp.direct_map_base() + paddr;
}

inline PhysAddr ProbePhys(const MachineState& m, std::uint64_t page,
                          std::uint64_t offset = 0) {
  const Translation t =
      Translate(kUserProbeBase + page * kPageSize + offset, AccessMode::kUser, m.asp);
  return *t.paddr;
}

inline std::vector<std::uint8_t> RandomBytes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

// Sender that retries on a zero read: R1 = address, R2 = probe base.
inline Program RetrySender(bool wrap_in_tx) {
  const char* body =
      "retry:\n"
      "  LOAD_BYTE R0, [R1]\n"
      "  SHL_IMM R0, 12\n"
      "  JZ R0, retry\n"
      "  LOAD_BYTE R3, [R2 + R0]\n";
  std::string text = wrap_in_tx ? std::string("TX_BEGIN\n") + body + "TX_END\n"
                                : std::string(body);
  return Assemble(text + "HALT\n");
}

// Random straight-line programs with forward branches, stores, flushes, an
// injected fault (RAISE or a kernel load) and optionally a transaction around
// part of the program. TIME_READ is left out: its result is a cache latency,
// which is the one thing allowed to differ between the engines.
class ProgramFuzzer {
 public:
  explicit ProgramFuzzer(std::uint64_t seed) : rng_(seed) {}

  struct Case {
    Program program;
    RegisterFile regs{};
  };

  Case Next(const MachineState& m) {
    const std::size_t n = Uniform(3, 14);
    std::vector<Instruction> code;
    for (std::size_t i = 0; i < n; ++i) code.push_back(RandomInstruction(i, n));
    // Inject one faulting instruction.
    const std::size_t at = Uniform(0, n - 1);
    code[at] = Uniform(0, 2) == 0 ? Instruction::Simple(Opcode::kRaise)
                                  : Instruction::LoadByte(R(Uniform(0, 5)), Reg{7});
    if (Uniform(0, 2) == 0) code.push_back(Instruction::Simple(Opcode::kHalt));
    if (Uniform(0, 1) == 0) WrapInTx(code, at);
    FixTargets(code);

    Case c{Program::Create(std::move(code)), {}};
    for (int r = 0; r < 6; ++r) c.regs[r] = Uniform(0, 3) == 0 ? 0 : Uniform(0, 300);
    c.regs[6] = kUserScratchBase.value + Uniform(0, 64);
    c.regs[7] = (m.asp.direct_map_base() + kSecretPaddr + Uniform(0, 63)).value;
    return c;
  }

 private:
  std::uint64_t Uniform(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
  }
  static Reg R(std::uint64_t id) { return Reg{static_cast<std::uint8_t>(id)}; }
  Reg AnyReg() { return R(Uniform(0, 5)); }

  Instruction RandomInstruction(std::size_t i, std::size_t n) {
    switch (Uniform(0, 11)) {
      case 0:
        return Instruction::MovImm(AnyReg(), Uniform(0, 1) ? 0 : Uniform(0, 1000));
      case 1:
        return Instruction::Add(AnyReg(), AnyReg());
      case 2:
        return Instruction::ShlImm(AnyReg(), Uniform(0, 12));
      case 3:
        return Instruction::ShrImm(AnyReg(), Uniform(0, 8));
      case 4:
        return Instruction::AndImm(AnyReg(), Uniform(0, 255));
      case 5:
        return Instruction::LoadByte(AnyReg(), Reg{6});
      case 6:
        return Instruction::LoadWord(AnyReg(), Reg{6}, AnyReg());
      case 7:
        return Instruction::Store(Reg{6}, std::nullopt, AnyReg());
      case 8:
        return Instruction::Clflush(Reg{6});
      case 9:
        return Instruction::Jz(AnyReg(), Uniform(i + 1, n));
      case 10:
        return Instruction::Jmp(Uniform(i + 1, n));
      default:
        return Instruction::LoadByte(AnyReg(), Reg{7});
    }
  }

  void WrapInTx(std::vector<Instruction>& code, std::size_t fault_at) {
    const std::size_t begin = Uniform(0, fault_at);
    const std::size_t end = Uniform(fault_at + 1, code.size());
    // Branches must not leave or enter the region; keep them inside.
    code.insert(code.begin() + static_cast<std::ptrdiff_t>(end),
                Instruction::Simple(Opcode::kTxEnd));
    code.insert(code.begin() + static_cast<std::ptrdiff_t>(begin),
                Instruction::Simple(Opcode::kTxBegin));
    tx_ = {begin, end + 1};
  }

  // Branch targets were drawn before insertions; shift and clamp them so the
  // program stays well-formed and no branch crosses a TX marker.
  void FixTargets(std::vector<Instruction>& code) {
    for (std::size_t i = 0; i < code.size(); ++i) {
      Instruction& inst = code[i];
      if (inst.op != Opcode::kJz && inst.op != Opcode::kJmp) continue;
      std::size_t t = inst.target;
      if (tx_) {
        if (t >= tx_->first) ++t;
        if (t >= tx_->second) ++t;
        if (i > tx_->first && i < tx_->second) {
          t = std::min(t, tx_->second);  // at most to TX_END
        } else if (i < tx_->first && t > tx_->first) {
          t = tx_->first;  // up to TX_BEGIN
        }
      }
      if (i + 1 >= code.size()) {
        inst = Instruction::Simple(Opcode::kHalt);
        continue;
      }
      inst.target = std::clamp<std::size_t>(t, i + 1, code.size() - 1);
    }
    tx_.reset();
  }

  std::mt19937_64 rng_;
  std::optional<std::pair<std::size_t, std::size_t>> tx_;
};

// Fixture behind the hexdump golden file: planted at kGoldenPaddr, with the
// unset entries treated as bytes the side channel did not yield.
inline constexpr std::uint64_t kGoldenPaddr = 0x10'0000;
inline constexpr std::uint8_t kGoldenGapFill = 0xcc;

inline std::vector<std::optional<std::uint8_t>> GoldenBuffer() {
  using B = std::optional<std::uint8_t>;
  const B u;
  std::vector<B> out = {0x70, 0x52, 0xd4, u, 0, 0, 0, 0, 0x61, 0x64, 0x6d, 0x69, 0x6e, u, u, 0};
  for (char c : std::string("Dolphin18")) out.push_back(static_cast<std::uint8_t>(c));
  out.insert(out.end(), 7, u);
  for (char c : std::string("insta_0203")) out.push_back(static_cast<std::uint8_t>(c));
  out.insert(out.end(), {B{0}, u, u, B{'p'}, B{'w'}, B{0x0a}});
  for (char c : std::string("secretpwd")) out.push_back(static_cast<std::uint8_t>(c));
  return out;
}

// Plants GoldenBuffer (gaps filled with kGoldenGapFill), leaks it back
// through the direct map, blanks the gap positions and renders the result.
inline std::string RenderGoldenDump() {
  const auto golden = GoldenBuffer();
  std::vector<std::uint8_t> planted;
  for (const auto& b : golden) planted.push_back(b.value_or(kGoldenGapFill));
  MachineState m = SmallMachine();
  m.memory.Plant(PhysAddr{kGoldenPaddr}, planted);
  AttackConfig cfg;
  cfg.window.p_zero = 0.0;
  const VirtAddr va = KernelVa(m, kGoldenPaddr);
  auto leaked = DumpRange(va, planted.size(), cfg, m).values();
  for (std::size_t i = 0; i < golden.size(); ++i) {
    if (!golden[i]) leaked[i].reset();
  }
  return FormatHexdump(leaked, va);
}

}  // namespace meltsim::testing

#endif  // MELTSIM_TESTS_TEST_SUPPORT_H_
