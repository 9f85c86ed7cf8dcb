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

#ifndef MELTSIM_HEXDUMP_H_
#define MELTSIM_HEXDUMP_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meltsim/vmem.h"

namespace meltsim {

using MaybeByte = std::optional<std::uint8_t>;

// 16 bytes per line:
//   ffff880000001000: 12 XX e0 81 19 XX e0 81  44 6f 6c 70 68 69 6e 31 |........Dolphin1|
// Unknown bytes print as XX, and as '.' in the gutter like every
// non-printable byte. A short last line is padded so the gutter lines up.
std::string FormatHexdump(std::span<const MaybeByte> bytes, VirtAddr base);

struct ParsedHexdump {
  VirtAddr base;
  std::vector<MaybeByte> bytes;
};

// Inverse of FormatHexdump. Throws ParseError on malformed input.
ParsedHexdump ParseHexdump(std::string_view text);

// "page,cycles" header, then one row per probe page.
void WriteLatencyCsv(std::ostream& out, std::span<const std::uint32_t> latencies);
std::string LatencyCsv(std::span<const std::uint32_t> latencies);

}  // namespace meltsim

#endif  // MELTSIM_HEXDUMP_H_
