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

// The toy instruction set.
//
// Eight 64-bit registers R0..R7. Memory operands are [Rb] or [Rb + Ri].
//
//   LOAD_BYTE Rd, [m]    Rd.low8 <- mem8[m]      (upper 56 bits preserved)
//   LOAD_WORD Rd, [m]    Rd <- mem64[m]          (little endian)
//   STORE [m], Rs        mem64[m] <- Rs
//   SHL_IMM Rd, n        Rd <- Rd << n
//   SHR_IMM Rd, n        Rd <- Rd >> n
//   AND_IMM Rd, imm      Rd <- Rd & imm
//   ADD Rd, Rs           Rd <- Rd + Rs
//   MOV_IMM Rd, imm      Rd <- imm
//   JZ Rs, label         branch if Rs == 0
//   JMP label
//   CLFLUSH [m]          evict the line holding m
//   TIME_READ Rd, [m]    timed byte access to m; Rd <- its latency in cycles
//   TX_BEGIN / TX_END    transactional region
//   RAISE                unconditional trap
//   HALT

#ifndef MELTSIM_ISA_H_
#define MELTSIM_ISA_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace meltsim {

inline constexpr int kNumRegisters = 8;

// Register id in [0, kNumRegisters).
struct Reg {
  std::uint8_t id = 0;
  constexpr auto operator<=>(const Reg&) const = default;
};

using RegisterFile = std::array<std::uint64_t, kNumRegisters>;

// Writes the low byte of a register, keeping the upper 56 bits.
constexpr std::uint64_t MergeLowByte(std::uint64_t reg, std::uint8_t low) {
  return (reg & ~std::uint64_t{0xff}) | low;
}

enum class Opcode : std::uint8_t {
  kLoadByte,
  kLoadWord,
  kStore,
  kShlImm,
  kShrImm,
  kAndImm,
  kAdd,
  kMovImm,
  kJz,
  kJmp,
  kClflush,
  kTimeRead,
  kTxBegin,
  kTxEnd,
  kRaise,
  kHalt,
};

std::string_view OpcodeName(Opcode op);
std::optional<Opcode> OpcodeFromName(std::string_view name);

struct MemOperand {
  std::optional<Reg> base;
  std::optional<Reg> index;
};

struct Instruction {
  Opcode op = Opcode::kHalt;
  std::optional<Reg> dst;
  std::optional<Reg> src;
  MemOperand mem;
  std::uint64_t imm = 0;
  std::size_t target = 0;  // branch target instruction index

  static Instruction LoadByte(Reg dst, Reg base, std::optional<Reg> index = {});
  static Instruction LoadWord(Reg dst, Reg base, std::optional<Reg> index = {});
  static Instruction Store(Reg base, std::optional<Reg> index, Reg src);
  static Instruction ShlImm(Reg dst, std::uint64_t amount);
  static Instruction ShrImm(Reg dst, std::uint64_t amount);
  static Instruction AndImm(Reg dst, std::uint64_t mask);
  static Instruction Add(Reg dst, Reg src);
  static Instruction MovImm(Reg dst, std::uint64_t value);
  static Instruction Jz(Reg src, std::size_t target);
  static Instruction Jmp(std::size_t target);
  static Instruction Clflush(Reg base, std::optional<Reg> index = {});
  static Instruction TimeRead(Reg dst, Reg base, std::optional<Reg> index = {});
  static Instruction Simple(Opcode op);  // TX_BEGIN, TX_END, RAISE, HALT
};

std::string FormatInstruction(const Instruction& inst);

enum class UopKind : std::uint8_t {
  kAddressGen,
  kMemLoad,
  kMemStore,
  kAlu,
  kBranch,
  kFlush,
  kTimer,
  kTxMarker,
  kFaultMarker,
};

std::string_view UopKindName(UopKind kind);

enum class AluOp : std::uint8_t { kMov, kAdd, kShl, kShr, kAnd };

// Register bitmask; bit i set means Ri.
using RegMask = std::uint8_t;

constexpr RegMask MaskOf(Reg r) { return static_cast<RegMask>(1u << r.id); }

struct Microop {
  UopKind kind = UopKind::kAlu;
  std::size_t inst_index = 0;
  // Architectural registers the µop's semantics read.
  RegMask reads = 0;
  std::optional<Reg> writes;

  // Memory µops take their address from the address-gen µop immediately
  // before them in the same instruction.
  std::uint8_t width = 0;  // bytes accessed by loads/stores
  AluOp alu = AluOp::kMov;
  std::uint64_t imm = 0;
  // Branches: conditional (JZ), target, or halt.
  bool conditional = false;
  bool halt = false;
  std::size_t target = 0;
  bool tx_begin = false;  // tx-marker: begin vs end

  bool operator==(const Microop&) const = default;
};

// Throws DecodeError naming the offending field for malformed instructions.
// inst_index is stamped into every µop.
std::vector<Microop> Decode(const Instruction& inst, std::size_t inst_index = 0);

// An immutable, validated program. Creation decodes every instruction,
// resolves branch targets and pairs TX markers.
class Program {
 public:
  // Throws DecodeError, ProgramError (bad target, unbalanced TX markers) or
  // UnsupportedError (nested TX regions).
  static Program Create(std::vector<Instruction> instructions,
                        std::map<std::string, std::size_t> labels = {});

  const std::vector<Instruction>& instructions() const { return instructions_; }
  const std::map<std::string, std::size_t>& labels() const { return labels_; }
  std::size_t size() const { return instructions_.size(); }
  const Instruction& at(std::size_t i) const { return instructions_[i]; }

  // Pre-decoded µops of instruction i.
  const std::vector<Microop>& uops(std::size_t i) const { return uops_[i]; }

  bool uses_transactions() const { return !tx_end_of_.empty(); }
  // Index of the TX_END matching the TX_BEGIN at begin_index.
  std::size_t tx_end_of(std::size_t begin_index) const;

 private:
  std::vector<Instruction> instructions_;
  std::map<std::string, std::size_t> labels_;
  std::vector<std::vector<Microop>> uops_;
  std::map<std::size_t, std::size_t> tx_end_of_;
};

// Textual assembly: one instruction per line, ';' starts a comment and
// 'name:' defines a label. Throws AssemblyError with the line number.
Program Assemble(std::string_view source);

}  // namespace meltsim

#endif  // MELTSIM_ISA_H_
