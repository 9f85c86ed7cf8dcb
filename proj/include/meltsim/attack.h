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

// Meltdown against the simulated machine.
//
// Sender: a transient sequence that loads a byte from an arbitrary address and
// uses it to index a 256-page probe array before the load's permission fault
// retires. Receiver: Flush+Reload over the probe array, built from TIME_READ
// and CLFLUSH instructions executed by the attacker's own programs. The
// attacker learns only what those programs leave in architectural registers:
// latencies and the kind of fault that was delivered or caused the abort.

#ifndef MELTSIM_ATTACK_H_
#define MELTSIM_ATTACK_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "meltsim/isa.h"
#include "meltsim/machine.h"
#include "meltsim/ooo_core.h"

namespace meltsim {

enum class ExceptionMode {
  kHandling,     // fault delivered to a handler, which then runs the receiver
  kSuppression,  // sequence wrapped in a transaction; faults become aborts
};

const char* ExceptionModeName(ExceptionMode mode);

struct AttackConfig {
  ExceptionMode mode = ExceptionMode::kSuppression;
  // 8: one probe page per byte value, 256 reloads per attempt.
  // 1: one bit per transient round, a single reload of cache line 1.
  int bits_per_tx = 1;
  // In-sequence retry on a zero read plus whole-attempt repetition.
  bool retry = true;
  int max_retries = 10;
  WindowModel window;

  void Validate() const;
};

enum class Confidence {
  kHit,           // the value was observed through the cache
  kInferredZero,  // no hit after all retries; the byte is taken to be 0
  kUnknown,       // nothing can be said (unmapped address, ambiguous hits)
};

const char* ConfidenceName(Confidence c);

struct LeakOutcome {
  std::uint8_t value = 0;
  Confidence confidence = Confidence::kUnknown;

  bool operator==(const LeakOutcome&) const = default;
};

struct AttackResult {
  std::vector<LeakOutcome> bytes;
  // Filled when DumpRange was given the planted data.
  std::optional<std::size_t> errors;
  std::size_t unknown = 0;
  std::size_t hits = 0;
  std::uint64_t cycles = 0;
  double cycles_per_byte = 0.0;

  // Fraction of bytes matching the oracle; 0 without one.
  double accuracy() const;
  // Recovered bytes with unknowns as std::nullopt.
  std::vector<std::optional<std::uint8_t>> values() const;
};

struct KaslrSearchResult {
  std::optional<VirtAddr> base;
  std::uint64_t probes = 0;
  std::uint64_t cycles = 0;
};

inline constexpr std::uint64_t kDirectMapProbeBytes = 16;

class Attacker {
 public:
  // Throws SetupError if the probe array is not user-accessible and
  // CapabilityError if suppression is requested on a machine without
  // transactions.
  Attacker(MachineState& machine, const AttackConfig& cfg,
           VirtAddr probe_base = kUserProbeBase);

  LeakOutcome LeakByte(VirtAddr va);

  // One LeakByte per address. With an oracle (the planted bytes) errors and
  // accuracy are filled in.
  AttackResult DumpRange(VirtAddr start, std::size_t len,
                         std::optional<std::span<const std::uint8_t>> oracle = {});

  // Probes fixed_base + k * phys_size for k = 0, 1, ... and returns the first
  // candidate from which a byte leaks with a cache hit. Bytes are read at
  // probe_offset (a physical offset known to hold non-zero data; by default
  // the top frame, which holds the entry trampoline) and the next
  // kDirectMapProbeBytes - 1 bytes.
  KaslrSearchResult FindDirectMap(std::uint64_t phys_size,
                                  std::optional<std::uint64_t> probe_offset = {});

  // Reload latency of the first line of every probe page, flushing each.
  std::array<std::uint32_t, kProbePages> ReloadAll();

  void FlushProbeArray();

  std::uint64_t cycles() const { return cycles_; }
  // Sub-threshold reloads seen so far.
  std::uint64_t observed_hits() const { return observed_hits_; }
  // Sender runs that ended in a delivered fault (always 0 under suppression).
  std::uint64_t delivered_faults() const { return delivered_faults_; }
  const AttackConfig& config() const { return cfg_; }

 private:
  ExecutionTrace RunProgram(const Program& prog, const RegisterFile& regs);
  // Runs one transient attempt; returns the fault the attacker observed.
  FaultKind Transmit(const Program& prog, VirtAddr target);
  std::uint32_t Reload(VirtAddr va);
  LeakOutcome LeakByteMode(VirtAddr va);
  LeakOutcome LeakBitMode(VirtAddr va);

  MachineState& m_;
  AttackConfig cfg_;
  VirtAddr probe_base_;
  CoreMode core_mode_;
  std::uint64_t run_counter_ = 0;
  std::uint64_t cycles_ = 0;
  std::uint64_t observed_hits_ = 0;
  std::uint64_t delivered_faults_ = 0;

  Program byte_sender_;
  std::array<Program, 8> bit_senders_;
  Program receiver_;
  Program flusher_;
};

// Latency per probe page after running RAISE followed by a transient access
// to probe[data * 4096].
std::array<std::uint32_t, kProbePages> ToyExample(std::uint8_t data,
                                                  MachineState& machine,
                                                  const WindowModel& wm);

// Per-call convenience wrappers around Attacker.
LeakOutcome LeakByte(VirtAddr va, const AttackConfig& cfg, MachineState& machine);
AttackResult DumpRange(VirtAddr start, std::size_t len, const AttackConfig& cfg,
                       MachineState& machine,
                       std::optional<std::span<const std::uint8_t>> oracle = {});
KaslrSearchResult FindDirectMap(const AttackConfig& cfg, MachineState& machine,
                                std::uint64_t phys_size,
                                std::optional<std::uint64_t> probe_offset = {});

}  // namespace meltsim

#endif  // MELTSIM_ATTACK_H_
