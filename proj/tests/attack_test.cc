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

#include <set>

#include <gtest/gtest.h>

#include "meltsim/attack.h"
#include "meltsim/errors.h"
#include "test_support.h"

namespace meltsim {
namespace {

using testing::KernelVa;
using testing::kSecretPaddr;
using testing::SmallMachine;

AttackConfig Config(ExceptionMode mode, int bits, double p_zero = 0.0,
                    std::uint64_t seed = 1) {
  AttackConfig cfg;
  cfg.mode = mode;
  cfg.bits_per_tx = bits;
  cfg.window.p_zero = p_zero;
  cfg.window.seed = seed;
  return cfg;
}

MachineState Planted(const std::vector<std::uint8_t>& bytes,
                     MachineConfig cfg = testing::SmallConfig()) {
  MachineState m = SmallMachine(cfg);
  m.memory.Plant(PhysAddr{kSecretPaddr}, bytes);
  return m;
}

class LeakByteTest
    : public ::testing::TestWithParam<std::tuple<ExceptionMode, int>> {};

TEST_P(LeakByteTest, LeaksPlantedKernelByte) {
  const auto [mode, bits] = GetParam();
  MachineState m = Planted({0x54, 0x00, 0xff, 0x80, 0x01});
  Attacker attacker(m, Config(mode, bits));
  const VirtAddr va = KernelVa(m, kSecretPaddr);
  EXPECT_EQ(attacker.LeakByte(va), (LeakOutcome{0x54, Confidence::kHit}));
  EXPECT_EQ(attacker.LeakByte(va + 1), (LeakOutcome{0x00, Confidence::kInferredZero}));
  EXPECT_EQ(attacker.LeakByte(va + 2), (LeakOutcome{0xff, Confidence::kHit}));
  EXPECT_EQ(attacker.LeakByte(va + 3), (LeakOutcome{0x80, Confidence::kHit}));
  EXPECT_EQ(attacker.LeakByte(va + 4), (LeakOutcome{0x01, Confidence::kHit}));
  if (mode == ExceptionMode::kSuppression) {
    EXPECT_EQ(attacker.delivered_faults(), 0u);
  } else {
    EXPECT_GT(attacker.delivered_faults(), 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Modes, LeakByteTest,
    ::testing::Combine(::testing::Values(ExceptionMode::kHandling,
                                         ExceptionMode::kSuppression),
                       ::testing::Values(1, 8)));

TEST(AttackTest, ZeroBytesNeverHit) {
  MachineState m = Planted(std::vector<std::uint8_t>(64, 0));
  Attacker attacker(m, Config(ExceptionMode::kSuppression, 8, 0.3));
  const AttackResult r = attacker.DumpRange(KernelVa(m, kSecretPaddr), 64);
  for (const LeakOutcome& o : r.bytes) {
    EXPECT_EQ(o, (LeakOutcome{0, Confidence::kInferredZero}));
  }
  EXPECT_EQ(attacker.observed_hits(), 0u);
}

TEST(AttackTest, KaiserYieldsUnknownExceptTrampoline) {
  MachineConfig cfg = testing::SmallConfig();
  cfg.vmem.kaiser = true;
  MachineState m = Planted({0x54}, cfg);
  Attacker attacker(m, Config(ExceptionMode::kSuppression, 1));
  EXPECT_EQ(attacker.LeakByte(KernelVa(m, kSecretPaddr)).confidence,
            Confidence::kUnknown);
  EXPECT_EQ(attacker.LeakByte(KernelVa(m, 0)).confidence, Confidence::kUnknown);
  // The trampoline stays mapped; it only holds filler.
  EXPECT_EQ(attacker.LeakByte(kTrampolineBase + 5),
            (LeakOutcome{kTrampolineFiller, Confidence::kHit}));
}

TEST(AttackTest, SetupAndCapabilityErrors) {
  MachineState m = SmallMachine();
  EXPECT_THROW((void)Attacker(m, Config(ExceptionMode::kHandling, 8), VirtAddr{0x30000000}),
               SetupError);
  EXPECT_THROW((void)Attacker(m, Config(ExceptionMode::kHandling, 8), kUserProbeBase + 64),
               SetupError);
  // Last probe page would run past the user mapping.
  EXPECT_THROW((void)Attacker(m, Config(ExceptionMode::kHandling, 8), kUserProbeBase + kPageSize),
               SetupError);
  MachineConfig cfg = testing::SmallConfig();
  cfg.supports_transactions = false;
  MachineState no_tx = SmallMachine(cfg);
  EXPECT_THROW((void)Attacker(no_tx, Config(ExceptionMode::kSuppression, 1)), CapabilityError);
  EXPECT_NO_THROW((void)Attacker(no_tx, Config(ExceptionMode::kHandling, 1)));
  AttackConfig bad = Config(ExceptionMode::kHandling, 4);
  EXPECT_THROW((void)Attacker(m, bad), ConfigError);
}

TEST(AttackTest, DumpMatchesOracle) {
  const auto secret = testing::RandomBytes(4096, 7);
  MachineState m = Planted(secret);
  const AttackResult r = DumpRange(KernelVa(m, kSecretPaddr), secret.size(),
                                   Config(ExceptionMode::kSuppression, 1), m,
                                   std::span<const std::uint8_t>(secret));
  ASSERT_EQ(r.bytes.size(), secret.size());
  EXPECT_EQ(r.errors, 0u);
  EXPECT_EQ(r.unknown, 0u);
  EXPECT_DOUBLE_EQ(r.accuracy(), 1.0);
  EXPECT_GT(r.cycles, 0u);
  EXPECT_DOUBLE_EQ(r.cycles_per_byte, static_cast<double>(r.cycles) / 4096.0);
}

TEST(AttackTest, DumpRejectsEmptyRangeAndBadOracle) {
  MachineState m = SmallMachine();
  Attacker attacker(m, Config(ExceptionMode::kSuppression, 1));
  EXPECT_THROW(attacker.DumpRange(KernelVa(m, 0), 0), BoundsError);
  const std::vector<std::uint8_t> two(2);
  EXPECT_THROW(attacker.DumpRange(KernelVa(m, 0), 3, std::span<const std::uint8_t>(two)),
               BoundsError);
}

TEST(AttackTest, RetryNeverHurts) {
  const auto secret = testing::RandomBytes(256, 8);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double acc[2];
    for (int retry = 0; retry < 2; ++retry) {
      MachineState m = Planted(secret);
      AttackConfig cfg = Config(ExceptionMode::kSuppression, 1, 0.5, seed);
      cfg.retry = retry == 1;
      acc[retry] = DumpRange(KernelVa(m, kSecretPaddr), secret.size(), cfg, m,
                             std::span<const std::uint8_t>(secret))
                       .accuracy();
    }
    EXPECT_GE(acc[1], acc[0]) << "seed " << seed;
    EXPECT_GE(acc[1], 0.99);
  }
}

TEST(AttackTest, CountermeasuresStopEveryHit) {
  const auto secret = testing::RandomBytes(128, 9);
  for (int which = 0; which < 3; ++which) {
    MachineConfig cfg = testing::SmallConfig();
    cfg.vmem.kaiser = which == 0;
    cfg.serialized_check = which == 1;
    cfg.vmem.hard_split = which == 2;
    for (int bits : {1, 8}) {
      MachineState m = Planted(secret, cfg);
      Attacker attacker(m, Config(ExceptionMode::kSuppression, bits));
      const AttackResult r = attacker.DumpRange(KernelVa(m, kSecretPaddr), secret.size());
      EXPECT_EQ(r.hits, 0u) << "countermeasure " << which;
      EXPECT_EQ(attacker.observed_hits(), 0u);
    }
  }
}

TEST(AttackTest, SuppressionIsCheaperPerByte) {
  const auto secret = testing::RandomBytes(256, 10);
  double cpb[2];
  for (int i = 0; i < 2; ++i) {
    MachineState m = Planted(secret);
    cpb[i] = DumpRange(KernelVa(m, kSecretPaddr), secret.size(),
                       Config(i ? ExceptionMode::kSuppression : ExceptionMode::kHandling, 1),
                       m)
                 .cycles_per_byte;
  }
  EXPECT_LT(cpb[1], cpb[0]);
}

TEST(AttackTest, BitAndByteModesAgree) {
  const auto secret = testing::RandomBytes(512, 12);
  std::vector<LeakOutcome> out[2];
  for (int i = 0; i < 2; ++i) {
    MachineState m = Planted(secret);
    out[i] = DumpRange(KernelVa(m, kSecretPaddr), secret.size(),
                       Config(ExceptionMode::kSuppression, i ? 8 : 1, 0.2), m)
                 .bytes;
  }
  EXPECT_EQ(out[0], out[1]);
}

// The receiver only sees TIME_READ results: other latencies still work, and a
// cache that always reports the opposite class defeats the attack.
TEST(AttackTest, WorksThroughTimingAlone) {
  MachineConfig cfg = testing::SmallConfig();
  cfg.cache.hit_latency = 12;
  cfg.cache.threshold = 40;
  cfg.cache.miss_latency = 41;
  MachineState m = Planted({0x54}, cfg);
  EXPECT_EQ(LeakByte(KernelVa(m, kSecretPaddr), Config(ExceptionMode::kHandling, 8), m),
            (LeakOutcome{0x54, Confidence::kHit}));

  MachineConfig inverted = testing::SmallConfig();
  inverted.cache.noise = 1.0;
  MachineState n = Planted({0x54}, inverted);
  EXPECT_NE(LeakByte(KernelVa(n, kSecretPaddr), Config(ExceptionMode::kHandling, 8), n),
            (LeakOutcome{0x54, Confidence::kHit}));
}

TEST(AttackTest, NoisyCacheGivesUnknownNotGuesses) {
  MachineConfig cfg = testing::SmallConfig();
  cfg.cache.noise = 0.05;
  MachineState m = Planted(testing::RandomBytes(64, 3), cfg);
  const AttackResult r = DumpRange(KernelVa(m, kSecretPaddr), 64,
                                   Config(ExceptionMode::kSuppression, 8), m);
  EXPECT_GT(r.unknown, 0u);
  std::size_t unknown = 0;
  for (const auto& v : r.values()) unknown += !v;
  EXPECT_EQ(unknown, r.unknown);
}

TEST(ToyExampleTest, SingleDipAtData) {
  for (int data : {1, 84, 255}) {
    MachineState m = SmallMachine();
    const auto lat = ToyExample(static_cast<std::uint8_t>(data), m, WindowModel{});
    for (int i = 0; i < 256; ++i) {
      EXPECT_EQ(lat[i] < m.config.cache.threshold, i == data) << i;
    }
  }
}

TEST(ToyExampleTest, DataZeroHitsPageZero) {
  MachineState m = SmallMachine();
  const auto lat = ToyExample(0, m, WindowModel{});
  EXPECT_LT(lat[0], m.config.cache.threshold);
  for (int i = 1; i < 256; ++i) EXPECT_GE(lat[i], m.config.cache.threshold);
}

TEST(ToyExampleTest, EmptyWindowIsFlat) {
  MachineState m = SmallMachine();
  WindowModel wm;
  wm.budget = 0;
  for (std::uint32_t l : ToyExample(84, m, wm)) {
    EXPECT_GE(l, m.config.cache.threshold);
  }
}

TEST(ToyExampleTest, EncodingIsInjective) {
  std::set<int> dips;
  for (int data = 1; data < 256; ++data) {
    MachineState m = SmallMachine();
    const auto lat = ToyExample(static_cast<std::uint8_t>(data), m, WindowModel{});
    for (int i = 0; i < 256; ++i) {
      if (lat[i] < m.config.cache.threshold) dips.insert(i);
    }
  }
  EXPECT_EQ(dips.size(), 255u);
}

TEST(KaslrSearchTest, FixedBaseInOneProbe) {
  MachineState m = SmallMachine();
  const KaslrSearchResult r =
      FindDirectMap(Config(ExceptionMode::kSuppression, 1), m, m.config.vmem.phys_size);
  ASSERT_TRUE(r.base);
  EXPECT_EQ(*r.base, kDirectMapFixedBase);
  EXPECT_EQ(r.probes, 1u);
}

TEST(KaslrSearchTest, RandomizedEightGigabytes) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MachineConfig cfg;
    cfg.vmem.phys_size = 8ULL << 30;
    cfg.vmem.kaslr = true;
    cfg.vmem.seed = seed;
    MachineState m = BuildMachine(cfg);
    const KaslrSearchResult r =
        FindDirectMap(Config(ExceptionMode::kSuppression, 1), m, cfg.vmem.phys_size);
    ASSERT_TRUE(r.base);
    EXPECT_EQ(*r.base, m.asp.direct_map_base());
    EXPECT_LE(r.probes, 128u);
  }
}

TEST(KaslrSearchTest, KaiserHidesTheMap) {
  MachineConfig cfg = testing::SmallConfig();
  cfg.vmem.kaiser = true;
  cfg.vmem.phys_size = 1ULL << 36;  // keep the candidate list short
  MachineState m = BuildMachine(cfg);
  const KaslrSearchResult r =
      FindDirectMap(Config(ExceptionMode::kSuppression, 1), m, cfg.vmem.phys_size);
  EXPECT_FALSE(r.base);
  EXPECT_EQ(r.probes, KaslrCandidateCount(cfg.vmem.phys_size));
}

}  // namespace
}  // namespace meltsim
