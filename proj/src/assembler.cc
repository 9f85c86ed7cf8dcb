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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "meltsim/errors.h"
#include "meltsim/isa.h"

namespace meltsim {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::string Upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return out;
}

bool IsIdentifier(std::string_view s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s.front()))) {
    return false;
  }
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.';
  });
}

// Splits on commas that are not inside brackets.
std::vector<std::string_view> SplitOperands(std::string_view s) {
  std::vector<std::string_view> out;
  if (Trim(s).empty()) return out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
    if (s[i] == ',' && depth == 0) {
      out.push_back(Trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(Trim(s.substr(start)));
  return out;
}

class LineParser {
 public:
  explicit LineParser(int line) : line_(line) {}

  [[noreturn]] void Fail(const std::string& what) const {
    throw AssemblyError(line_, what);
  }

  Reg ParseReg(std::string_view tok) const {
    const std::string t = Upper(Trim(tok));
    if (t.size() != 2 || t[0] != 'R' || t[1] < '0' || t[1] > '7') {
      Fail("expected register R0..R7, got '" + std::string(tok) + "'");
    }
    return Reg{static_cast<std::uint8_t>(t[1] - '0')};
  }

  std::uint64_t ParseImm(std::string_view tok) const {
    std::string t;
    for (char c : Trim(tok)) {
      if (c != '_') t.push_back(c);
    }
    bool negative = false;
    std::string_view digits = t;
    if (!digits.empty() && digits.front() == '-') {
      negative = true;
      digits.remove_prefix(1);
    }
    int base = 10;
    if (digits.size() > 2 && digits[0] == '0' &&
        (digits[1] == 'x' || digits[1] == 'X')) {
      base = 16;
      digits.remove_prefix(2);
    }
    std::uint64_t value = 0;
    auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
    if (digits.empty() || ec != std::errc() ||
        ptr != digits.data() + digits.size()) {
      Fail("bad immediate '" + std::string(tok) + "'");
    }
    return negative ? ~value + 1 : value;
  }

  MemOperand ParseMem(std::string_view tok) const {
    tok = Trim(tok);
    if (tok.size() < 2 || tok.front() != '[' || tok.back() != ']') {
      Fail("expected memory operand [Rb] or [Rb + Ri], got '" +
           std::string(tok) + "'");
    }
    std::string_view inner = tok.substr(1, tok.size() - 2);
    MemOperand m;
    if (auto plus = inner.find('+'); plus != std::string_view::npos) {
      m.base = ParseReg(inner.substr(0, plus));
      m.index = ParseReg(inner.substr(plus + 1));
    } else {
      m.base = ParseReg(inner);
    }
    return m;
  }

 private:
  int line_;
};

struct PendingBranch {
  std::size_t inst_index;
  std::string label;
  int line;
};

}  // namespace

Program Assemble(std::string_view source) {
  std::vector<Instruction> instructions;
  std::map<std::string, std::size_t> labels;
  std::vector<PendingBranch> pending;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    std::size_t eol = source.find('\n', pos);
    if (eol == std::string_view::npos) eol = source.size();
    std::string_view line = source.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    LineParser lp(line_no);

    if (auto semi = line.find(';'); semi != std::string_view::npos) {
      line = line.substr(0, semi);
    }
    line = Trim(line);
    // Any number of leading "label:" definitions.
    while (true) {
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) break;
      const std::string_view name = Trim(line.substr(0, colon));
      if (!IsIdentifier(name)) lp.Fail("bad label '" + std::string(name) + "'");
      if (!labels.emplace(std::string(name), instructions.size()).second) {
        lp.Fail("duplicate label '" + std::string(name) + "'");
      }
      line = Trim(line.substr(colon + 1));
    }
    if (line.empty()) continue;

    const std::size_t space = line.find_first_of(" \t");
    const std::string mnemonic = Upper(line.substr(0, space));
    const auto ops = SplitOperands(
        space == std::string_view::npos ? std::string_view{} : line.substr(space));
    const auto op = OpcodeFromName(mnemonic);
    if (!op) lp.Fail("unknown mnemonic '" + mnemonic + "'");

    auto expect = [&](std::size_t n) {
      if (ops.size() != n) {
        lp.Fail(mnemonic + " takes " + std::to_string(n) + " operand(s), got " +
                std::to_string(ops.size()));
      }
    };

    Instruction inst;
    inst.op = *op;
    switch (*op) {
      case Opcode::kLoadByte:
      case Opcode::kLoadWord:
      case Opcode::kTimeRead:
        expect(2);
        inst.dst = lp.ParseReg(ops[0]);
        inst.mem = lp.ParseMem(ops[1]);
        break;
      case Opcode::kStore:
        expect(2);
        inst.mem = lp.ParseMem(ops[0]);
        inst.src = lp.ParseReg(ops[1]);
        break;
      case Opcode::kShlImm:
      case Opcode::kShrImm:
      case Opcode::kAndImm:
      case Opcode::kMovImm:
        expect(2);
        inst.dst = lp.ParseReg(ops[0]);
        inst.imm = lp.ParseImm(ops[1]);
        break;
      case Opcode::kAdd:
        expect(2);
        inst.dst = lp.ParseReg(ops[0]);
        inst.src = lp.ParseReg(ops[1]);
        break;
      case Opcode::kJz:
        expect(2);
        inst.src = lp.ParseReg(ops[0]);
        pending.push_back({instructions.size(), std::string(ops[1]), line_no});
        break;
      case Opcode::kJmp:
        expect(1);
        pending.push_back({instructions.size(), std::string(ops[0]), line_no});
        break;
      case Opcode::kClflush:
        expect(1);
        inst.mem = lp.ParseMem(ops[0]);
        break;
      default:
        expect(0);
        break;
    }
    try {
      Decode(inst, instructions.size());
    } catch (const DecodeError& e) {
      lp.Fail(e.what());
    }
    instructions.push_back(inst);
  }

  for (const PendingBranch& b : pending) {
    LineParser lp(b.line);
    if (!b.label.empty() && b.label.front() == '@') {
      instructions[b.inst_index].target = lp.ParseImm(b.label.substr(1));
      continue;
    }
    auto it = labels.find(b.label);
    if (it == labels.end()) lp.Fail("undefined label '" + b.label + "'");
    instructions[b.inst_index].target = it->second;
  }

  return Program::Create(std::move(instructions), std::move(labels));
}

}  // namespace meltsim
