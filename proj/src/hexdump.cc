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

#include "meltsim/hexdump.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <string>

#include "meltsim/errors.h"

namespace meltsim {
namespace {

constexpr std::size_t kBytesPerLine = 16;
constexpr std::size_t kGroup = 8;

bool Printable(std::uint8_t b) { return b >= 0x20 && b < 0x7f; }

std::optional<std::uint64_t> ParseHex(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

std::string FormatHexdump(std::span<const MaybeByte> bytes, VirtAddr base) {
  std::string out;
  char buf[32];
  for (std::size_t line = 0; line < bytes.size(); line += kBytesPerLine) {
    const std::size_t n = std::min(kBytesPerLine, bytes.size() - line);
    std::snprintf(buf, sizeof buf, "%016llx:",
                  static_cast<unsigned long long>(base.value + line));
    out += buf;
    std::string gutter;
    for (std::size_t i = 0; i < kBytesPerLine; ++i) {
      if (i == kGroup) out += ' ';
      if (i >= n) {
        out += "   ";
        continue;
      }
      const MaybeByte& b = bytes[line + i];
      if (b) {
        std::snprintf(buf, sizeof buf, " %02x", *b);
        out += buf;
      } else {
        out += " XX";
      }
      gutter += b && Printable(*b) ? static_cast<char>(*b) : '.';
    }
    out += " |" + gutter + "|\n";
  }
  return out;
}

ParsedHexdump ParseHexdump(std::string_view text) {
  ParsedHexdump result;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    if (line.empty()) continue;
    ++line_no;
    auto fail = [&](const std::string& what) {
      throw ParseError("hexdump line " + std::to_string(line_no) + ": " + what);
    };

    const std::size_t colon = line.find(':');
    const std::size_t bar = line.find('|');
    if (colon == std::string_view::npos || bar == std::string_view::npos ||
        bar < colon || line.back() != '|') {
      fail("expected 'address: bytes |gutter|'");
    }
    const auto address = ParseHex(line.substr(0, colon));
    if (!address) fail("bad address");
    const std::uint64_t expected = result.base.value + result.bytes.size();
    if (result.bytes.empty()) {
      result.base = VirtAddr{*address};
    } else if (*address != expected || result.bytes.size() % kBytesPerLine) {
      fail("address does not continue the previous line");
    }

    std::string_view hex = line.substr(colon + 1, bar - colon - 1);
    std::size_t count = 0;
    while (true) {
      while (!hex.empty() && hex.front() == ' ') hex.remove_prefix(1);
      if (hex.empty()) break;
      const std::size_t end = std::min(hex.find(' '), hex.size());
      const std::string_view tok = hex.substr(0, end);
      hex.remove_prefix(end);
      if (tok == "XX") {
        result.bytes.emplace_back();
      } else if (const auto v = ParseHex(tok); v && tok.size() == 2) {
        result.bytes.emplace_back(static_cast<std::uint8_t>(*v));
      } else {
        fail("bad byte '" + std::string(tok) + "'");
      }
      ++count;
    }
    const std::string_view gutter = line.substr(bar + 1, line.size() - bar - 2);
    if (count == 0 || count > kBytesPerLine || gutter.size() != count) {
      fail("byte count does not match the gutter");
    }
  }
  return result;
}

void WriteLatencyCsv(std::ostream& out, std::span<const std::uint32_t> latencies) {
  out << "page,cycles\n";
  for (std::size_t i = 0; i < latencies.size(); ++i) {
    out << i << ',' << latencies[i] << '\n';
  }
}

std::string LatencyCsv(std::span<const std::uint32_t> latencies) {
  std::ostringstream out;
  WriteLatencyCsv(out, latencies);
  return out.str();
}

}  // namespace meltsim
