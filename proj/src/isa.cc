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

#include "meltsim/isa.h"

#include <sstream>

#include "meltsim/errors.h"

namespace meltsim {
namespace {

struct OpcodeInfo {
  Opcode op;
  std::string_view name;
};

constexpr OpcodeInfo kOpcodes[] = {
    {Opcode::kLoadByte, "LOAD_BYTE"}, {Opcode::kLoadWord, "LOAD_WORD"},
    {Opcode::kStore, "STORE"},        {Opcode::kShlImm, "SHL_IMM"},
    {Opcode::kShrImm, "SHR_IMM"},     {Opcode::kAndImm, "AND_IMM"},
    {Opcode::kAdd, "ADD"},            {Opcode::kMovImm, "MOV_IMM"},
    {Opcode::kJz, "JZ"},              {Opcode::kJmp, "JMP"},
    {Opcode::kClflush, "CLFLUSH"},    {Opcode::kTimeRead, "TIME_READ"},
    {Opcode::kTxBegin, "TX_BEGIN"},   {Opcode::kTxEnd, "TX_END"},
    {Opcode::kRaise, "RAISE"},        {Opcode::kHalt, "HALT"},
};

// Which operand fields an opcode takes.
struct Shape {
  bool dst = false;
  bool src = false;
  bool mem = false;
};

Shape ShapeOf(Opcode op) {
  switch (op) {
    case Opcode::kLoadByte:
    case Opcode::kLoadWord:
    case Opcode::kTimeRead:
      return {.dst = true, .mem = true};
    case Opcode::kStore:
      return {.src = true, .mem = true};
    case Opcode::kShlImm:
    case Opcode::kShrImm:
    case Opcode::kAndImm:
    case Opcode::kMovImm:
      return {.dst = true};
    case Opcode::kAdd:
      return {.dst = true, .src = true};
    case Opcode::kJz:
      return {.src = true};
    case Opcode::kClflush:
      return {.mem = true};
    case Opcode::kJmp:
    case Opcode::kTxBegin:
    case Opcode::kTxEnd:
    case Opcode::kRaise:
    case Opcode::kHalt:
      return {};
  }
  return {};
}

void CheckReg(const std::optional<Reg>& r, bool wanted, const char* field,
              Opcode op) {
  if (wanted && !r) {
    throw DecodeError(field, std::string(OpcodeName(op)) + " requires it");
  }
  if (!wanted && r) {
    throw DecodeError(field,
                      std::string(OpcodeName(op)) + " takes no such operand");
  }
  if (r && r->id >= kNumRegisters) {
    throw DecodeError(field, "register R" + std::to_string(r->id) +
                                 " does not exist");
  }
}

RegMask AddressMask(const MemOperand& m) {
  RegMask mask = MaskOf(*m.base);
  if (m.index) mask |= MaskOf(*m.index);
  return mask;
}

Instruction WithMem(Opcode op, Reg base, std::optional<Reg> index) {
  Instruction i;
  i.op = op;
  i.mem = {base, index};
  return i;
}

}  // namespace

std::string_view OpcodeName(Opcode op) {
  for (const auto& info : kOpcodes) {
    if (info.op == op) return info.name;
  }
  return "?";
}

std::optional<Opcode> OpcodeFromName(std::string_view name) {
  for (const auto& info : kOpcodes) {
    if (info.name == name) return info.op;
  }
  return std::nullopt;
}

std::string_view UopKindName(UopKind kind) {
  switch (kind) {
    case UopKind::kAddressGen:
      return "address-gen";
    case UopKind::kMemLoad:
      return "mem-load";
    case UopKind::kMemStore:
      return "mem-store";
    case UopKind::kAlu:
      return "alu";
    case UopKind::kBranch:
      return "branch";
    case UopKind::kFlush:
      return "flush";
    case UopKind::kTimer:
      return "timer";
    case UopKind::kTxMarker:
      return "tx-marker";
    case UopKind::kFaultMarker:
      return "fault-marker";
  }
  return "?";
}

Instruction Instruction::LoadByte(Reg dst, Reg base, std::optional<Reg> index) {
  Instruction i = WithMem(Opcode::kLoadByte, base, index);
  i.dst = dst;
  return i;
}

Instruction Instruction::LoadWord(Reg dst, Reg base, std::optional<Reg> index) {
  Instruction i = WithMem(Opcode::kLoadWord, base, index);
  i.dst = dst;
  return i;
}

Instruction Instruction::Store(Reg base, std::optional<Reg> index, Reg src) {
  Instruction i = WithMem(Opcode::kStore, base, index);
  i.src = src;
  return i;
}

Instruction Instruction::ShlImm(Reg dst, std::uint64_t amount) {
  Instruction i;
  i.op = Opcode::kShlImm;
  i.dst = dst;
  i.imm = amount;
  return i;
}

Instruction Instruction::ShrImm(Reg dst, std::uint64_t amount) {
  Instruction i;
  i.op = Opcode::kShrImm;
  i.dst = dst;
  i.imm = amount;
  return i;
}

Instruction Instruction::AndImm(Reg dst, std::uint64_t mask) {
  Instruction i;
  i.op = Opcode::kAndImm;
  i.dst = dst;
  i.imm = mask;
  return i;
}

Instruction Instruction::Add(Reg dst, Reg src) {
  Instruction i;
  i.op = Opcode::kAdd;
  i.dst = dst;
  i.src = src;
  return i;
}

Instruction Instruction::MovImm(Reg dst, std::uint64_t value) {
  Instruction i;
  i.op = Opcode::kMovImm;
  i.dst = dst;
  i.imm = value;
  return i;
}

Instruction Instruction::Jz(Reg src, std::size_t target) {
  Instruction i;
  i.op = Opcode::kJz;
  i.src = src;
  i.target = target;
  return i;
}

Instruction Instruction::Jmp(std::size_t target) {
  Instruction i;
  i.op = Opcode::kJmp;
  i.target = target;
  return i;
}

Instruction Instruction::Clflush(Reg base, std::optional<Reg> index) {
  return WithMem(Opcode::kClflush, base, index);
}

Instruction Instruction::TimeRead(Reg dst, Reg base, std::optional<Reg> index) {
  Instruction i = WithMem(Opcode::kTimeRead, base, index);
  i.dst = dst;
  return i;
}

Instruction Instruction::Simple(Opcode op) {
  Instruction i;
  i.op = op;
  return i;
}

std::string FormatInstruction(const Instruction& inst) {
  std::ostringstream out;
  out << OpcodeName(inst.op);
  auto reg = [](Reg r) { return "R" + std::to_string(r.id); };
  auto mem = [&]() {
    std::string s = "[" + reg(*inst.mem.base);
    if (inst.mem.index) s += " + " + reg(*inst.mem.index);
    return s + "]";
  };
  switch (inst.op) {
    case Opcode::kLoadByte:
    case Opcode::kLoadWord:
    case Opcode::kTimeRead:
      out << ' ' << reg(*inst.dst) << ", " << mem();
      break;
    case Opcode::kStore:
      out << ' ' << mem() << ", " << reg(*inst.src);
      break;
    case Opcode::kShlImm:
    case Opcode::kShrImm:
      out << ' ' << reg(*inst.dst) << ", " << inst.imm;
      break;
    case Opcode::kAndImm:
    case Opcode::kMovImm:
      out << ' ' << reg(*inst.dst) << ", 0x" << std::hex << inst.imm;
      break;
    case Opcode::kAdd:
      out << ' ' << reg(*inst.dst) << ", " << reg(*inst.src);
      break;
    case Opcode::kJz:
      out << ' ' << reg(*inst.src) << ", @" << inst.target;
      break;
    case Opcode::kJmp:
      out << " @" << inst.target;
      break;
    case Opcode::kClflush:
      out << ' ' << mem();
      break;
    default:
      break;
  }
  return out.str();
}

std::vector<Microop> Decode(const Instruction& inst, std::size_t inst_index) {
  const Shape shape = ShapeOf(inst.op);
  CheckReg(inst.dst, shape.dst, "dst", inst.op);
  CheckReg(inst.src, shape.src, "src", inst.op);
  CheckReg(inst.mem.base, shape.mem, "mem.base", inst.op);
  if (inst.mem.index) {
    CheckReg(inst.mem.index, shape.mem, "mem.index", inst.op);
  }
  if ((inst.op == Opcode::kShlImm || inst.op == Opcode::kShrImm) &&
      inst.imm >= 64) {
    throw DecodeError("imm", "shift amount " + std::to_string(inst.imm) +
                                 " exceeds 63");
  }

  auto uop = [&](UopKind kind) {
    Microop u;
    u.kind = kind;
    u.inst_index = inst_index;
    return u;
  };
  auto agen = [&]() {
    Microop u = uop(UopKind::kAddressGen);
    u.reads = AddressMask(inst.mem);
    return u;
  };
  auto alu = [&](AluOp op, RegMask reads) {
    Microop u = uop(UopKind::kAlu);
    u.alu = op;
    u.reads = reads;
    u.writes = inst.dst;
    u.imm = inst.imm;
    return std::vector<Microop>{u};
  };

  switch (inst.op) {
    case Opcode::kLoadByte:
    case Opcode::kLoadWord: {
      Microop load = uop(UopKind::kMemLoad);
      load.width = inst.op == Opcode::kLoadByte ? 1 : 8;
      // The byte load merges into the old register value.
      load.reads = inst.op == Opcode::kLoadByte ? MaskOf(*inst.dst) : 0;
      load.writes = inst.dst;
      return {agen(), load};
    }
    case Opcode::kStore: {
      Microop store = uop(UopKind::kMemStore);
      store.width = 8;
      store.reads = MaskOf(*inst.src);
      return {agen(), store};
    }
    case Opcode::kShlImm:
      return alu(AluOp::kShl, MaskOf(*inst.dst));
    case Opcode::kShrImm:
      return alu(AluOp::kShr, MaskOf(*inst.dst));
    case Opcode::kAndImm:
      return alu(AluOp::kAnd, MaskOf(*inst.dst));
    case Opcode::kAdd:
      return alu(AluOp::kAdd, MaskOf(*inst.dst) | MaskOf(*inst.src));
    case Opcode::kMovImm:
      return alu(AluOp::kMov, 0);
    case Opcode::kJz: {
      Microop b = uop(UopKind::kBranch);
      b.conditional = true;
      b.reads = MaskOf(*inst.src);
      b.target = inst.target;
      return {b};
    }
    case Opcode::kJmp: {
      Microop b = uop(UopKind::kBranch);
      b.target = inst.target;
      return {b};
    }
    case Opcode::kHalt: {
      Microop b = uop(UopKind::kBranch);
      b.halt = true;
      return {b};
    }
    case Opcode::kClflush:
      return {agen(), uop(UopKind::kFlush)};
    case Opcode::kTimeRead: {
      Microop t = uop(UopKind::kTimer);
      t.width = 1;
      t.writes = inst.dst;
      return {agen(), t};
    }
    case Opcode::kTxBegin:
    case Opcode::kTxEnd: {
      Microop m = uop(UopKind::kTxMarker);
      m.tx_begin = inst.op == Opcode::kTxBegin;
      return {m};
    }
    case Opcode::kRaise:
      return {uop(UopKind::kFaultMarker)};
  }
  throw DecodeError("opcode", "unknown opcode");
}

Program Program::Create(std::vector<Instruction> instructions,
                        std::map<std::string, std::size_t> labels) {
  Program p;
  p.uops_.reserve(instructions.size());
  std::optional<std::size_t> open_tx;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    const Instruction& inst = instructions[i];
    p.uops_.push_back(Decode(inst, i));
    if ((inst.op == Opcode::kJz || inst.op == Opcode::kJmp) &&
        inst.target >= instructions.size()) {
      throw ProgramError("branch at index " + std::to_string(i) +
                         " targets " + std::to_string(inst.target) +
                         ", outside the program");
    }
    if (inst.op == Opcode::kTxBegin) {
      if (open_tx) {
        throw UnsupportedError("nested transaction at index " +
                               std::to_string(i));
      }
      open_tx = i;
    } else if (inst.op == Opcode::kTxEnd) {
      if (!open_tx) {
        throw ProgramError("TX_END at index " + std::to_string(i) +
                           " without TX_BEGIN");
      }
      p.tx_end_of_[*open_tx] = i;
      open_tx.reset();
    }
  }
  if (open_tx) {
    throw ProgramError("TX_BEGIN at index " + std::to_string(*open_tx) +
                       " is never closed");
  }
  for (const auto& [name, index] : labels) {
    if (index > instructions.size()) {
      throw ProgramError("label '" + name + "' points outside the program");
    }
  }
  p.instructions_ = std::move(instructions);
  p.labels_ = std::move(labels);
  return p;
}

std::size_t Program::tx_end_of(std::size_t begin_index) const {
  auto it = tx_end_of_.find(begin_index);
  if (it == tx_end_of_.end()) {
    throw ProgramError("no TX_BEGIN at index " + std::to_string(begin_index));
  }
  return it->second;
}

}  // namespace meltsim
