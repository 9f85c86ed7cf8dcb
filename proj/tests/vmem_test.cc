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

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "meltsim/errors.h"
#include "meltsim/vmem.h"

namespace meltsim {
namespace {

constexpr std::uint64_t k16M = 16ULL << 20;
constexpr std::uint64_t k8G = 8ULL << 30;

AddressSpace Build(bool kaiser = false, bool kaslr = false, bool hard_split = false,
                   std::uint64_t seed = 0, std::uint64_t phys = k16M) {
  return BuildAddressSpace({phys, kaiser, kaslr, hard_split, seed});
}

TEST(AddrTest, PageAndOffset) {
  const VirtAddr va{0x12345678};
  EXPECT_EQ(va.page(), 0x12345u);
  EXPECT_EQ(va.offset(), 0x678u);
  EXPECT_EQ((PhysAddr{0x1fff} + 1).page(), 2u);
}

TEST(PhysicalMemoryTest, RoundTripAndBounds) {
  PhysicalMemory mem(k16M);
  mem.Write(PhysAddr{0x1000}, std::vector<std::uint8_t>{0x54});
  EXPECT_EQ(mem.Read(PhysAddr{0x1000}, 1), std::vector<std::uint8_t>{0x54});
  EXPECT_EQ(mem.ReadByte(PhysAddr{0x2000}), 0);  // zero-initialised
  EXPECT_THROW(mem.Read(PhysAddr{k16M - 1}, 2), BoundsError);
  EXPECT_THROW(mem.ReadByte(PhysAddr{k16M}), BoundsError);
  EXPECT_THROW(mem.WriteByte(PhysAddr{~std::uint64_t{0}}, 1), BoundsError);
  EXPECT_NO_THROW(mem.Read(PhysAddr{k16M - 1}, 1));
}

TEST(PhysicalMemoryTest, PlantRecordsOracle) {
  PhysicalMemory mem(k16M);
  const std::vector<std::uint8_t> secret{1, 2, 3};
  mem.Plant(PhysAddr{0x4000}, secret);
  ASSERT_EQ(mem.planted().size(), 1u);
  EXPECT_EQ(mem.planted()[0].start, PhysAddr{0x4000});
  EXPECT_EQ(mem.planted()[0].bytes, secret);
  PhysicalMemory copy = mem;
  copy.WriteByte(PhysAddr{0x4000}, 9);
  EXPECT_EQ(mem.ReadByte(PhysAddr{0x4000}), 1);  // deep copy
}

TEST(PhysicalMemoryTest, EightGigabytesIsSparse) {
  PhysicalMemory mem(k8G);
  mem.WriteByte(PhysAddr{k8G - 1}, 0xee);
  EXPECT_EQ(mem.ReadByte(PhysAddr{k8G - 1}), 0xee);
}

TEST(AddressSpaceTest, RejectsBadSizes) {
  EXPECT_THROW(Build(false, false, false, 0, 0), ConfigError);
  EXPECT_THROW(Build(false, false, false, 0, k16M + 1), ConfigError);
  EXPECT_THROW(Build(false, false, false, 0, 64 * kPageSize), ConfigError);
}

TEST(AddressSpaceTest, FixedDirectMapWithoutKaslr) {
  const AddressSpace asp = Build();
  EXPECT_EQ(asp.direct_map_base(), VirtAddr{0xffff880000000000ULL});
  EXPECT_EQ(asp.kaslr_entropy_bits(), 0u);
}

TEST(AddressSpaceTest, DirectMapCoversPhysicalMemory) {
  const AddressSpace asp = Build();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t pa = rng() % k16M;
    const Translation t = Translate(asp.direct_map_base() + pa, AccessMode::kKernel, asp);
    ASSERT_EQ(t.fault, FaultKind::kNone);
    EXPECT_EQ(t.paddr, PhysAddr{pa});
  }
  EXPECT_EQ(Translate(asp.direct_map_base() + k16M, AccessMode::kKernel, asp).fault,
            FaultKind::kNotPresent);
}

TEST(TranslateTest, UserSeesKernelAsProtected) {
  const AddressSpace asp = Build();
  const Translation t = Translate(asp.direct_map_base() + 0x1234, AccessMode::kUser, asp);
  EXPECT_EQ(t.fault, FaultKind::kProtection);
  EXPECT_EQ(t.paddr, PhysAddr{0x1234});
  EXPECT_FALSE(t.split_shortcut);
}

TEST(TranslateTest, UserPagesAndUnmapped) {
  const AddressSpace asp = Build();
  const Translation probe = Translate(kUserProbeBase + 10, AccessMode::kUser, asp);
  EXPECT_EQ(probe.fault, FaultKind::kNone);
  EXPECT_EQ(probe.paddr, asp.reserved_phys_begin() + 10);
  EXPECT_TRUE(probe.writable);
  EXPECT_EQ(Translate(VirtAddr{0x5000}, AccessMode::kUser, asp).fault,
            FaultKind::kNotPresent);
}

TEST(TranslateTest, ProbePagesAreDistinctFrames) {
  const AddressSpace asp = Build();
  std::set<std::uint64_t> frames;
  for (std::uint64_t i = 0; i < kProbePages; ++i) {
    const Translation t = Translate(kUserProbeBase + i * kPageSize, AccessMode::kUser, asp);
    ASSERT_EQ(t.fault, FaultKind::kNone);
    frames.insert(t.paddr->page());
  }
  EXPECT_EQ(frames.size(), kProbePages);
}

TEST(KaiserTest, KernelDataIsNotPresentForUser) {
  const AddressSpace asp = Build(/*kaiser=*/true);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const VirtAddr va = asp.direct_map_base() + rng() % k16M;
    EXPECT_EQ(Translate(va, AccessMode::kUser, asp).fault, FaultKind::kNotPresent);
    EXPECT_EQ(Translate(va, AccessMode::kKernel, asp).fault, FaultKind::kNone);
  }
  EXPECT_EQ(Translate(kUserProbeBase, AccessMode::kUser, asp).fault, FaultKind::kNone);
}

TEST(KaiserTest, OnlyTrampolineKernelPagesRemainInUserTable) {
  const AddressSpace asp = Build(/*kaiser=*/true);
  std::size_t kernel_pages = 0;
  for (const auto& [vpage, pte] : asp.table_for(AccessMode::kUser).entries()) {
    if (pte.user_accessible) continue;
    ++kernel_pages;
    EXPECT_GE(vpage, kTrampolineBase.page());
    EXPECT_LT(vpage, kTrampolineBase.page() + kTrampolinePages);
  }
  EXPECT_GE(kernel_pages, 1u);
  EXPECT_LE(kernel_pages, 4u);
}

TEST(HardSplitTest, ShortcutMatchesTableDecision) {
  const AddressSpace split = Build(false, false, /*hard_split=*/true);
  const AddressSpace plain = Build();
  std::mt19937_64 rng(9);
  std::vector<VirtAddr> vas{kUserProbeBase, kUserScratchBase, kTrampolineBase,
                            plain.direct_map_base()};
  for (int i = 0; i < 500; ++i) vas.push_back(plain.direct_map_base() + rng() % k16M);
  for (const VirtAddr va : vas) {
    const Translation a = Translate(va, AccessMode::kUser, split);
    const Translation b = Translate(va, AccessMode::kUser, plain);
    EXPECT_EQ(a.fault, b.fault) << std::hex << va.value;
    if (va >= kKernelSplitBoundary) {
      EXPECT_TRUE(a.split_shortcut);
      EXPECT_FALSE(a.paddr);  // decided without the table
    }
  }
}

TEST(KaslrTest, SameSeedSameBase) {
  EXPECT_EQ(Build(false, true, false, 77, k8G).direct_map_base(),
            Build(false, true, false, 77, k8G).direct_map_base());
}

TEST(KaslrTest, CandidateCount) {
  EXPECT_EQ(KaslrCandidateCount(k8G), 128u);
  EXPECT_EQ(KaslrCandidateCount(k16M), 65536u);
  EXPECT_EQ(KaslrCandidateCount(3ULL << 30), 342u);  // rounds up
}

TEST(KaslrTest, BaseIsOnThePhysSizeGrid) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const AddressSpace asp = Build(false, true, false, seed, k8G);
    const VirtAddr base = asp.direct_map_base();
    EXPECT_EQ(asp.kaslr_entropy_bits(), 40u);
    EXPECT_EQ(base.offset(), 0u);
    EXPECT_EQ(base.value % k8G, kDirectMapFixedBase.value % k8G);
    ASSERT_GE(base, kDirectMapFixedBase);
    const std::uint64_t k = (base.value - kDirectMapFixedBase.value) / k8G;
    EXPECT_LT(k, 128u);
    seen.insert(k);
  }
  EXPECT_GT(seen.size(), 64u);  // actually randomised
}

TEST(KaslrTest, EntropyIsConfigurable) {
  AddressSpaceConfig cfg;
  cfg.phys_size = k8G;
  cfg.kaslr = true;
  cfg.kaslr_entropy_bits = 36;
  std::set<std::uint64_t> seen;
  for (cfg.seed = 0; cfg.seed < 100; ++cfg.seed) {
    const AddressSpace asp = BuildAddressSpace(cfg);
    EXPECT_EQ(asp.kaslr_entropy_bits(), 36u);
    seen.insert((asp.direct_map_base().value - kDirectMapFixedBase.value) / k8G);
  }
  EXPECT_EQ(seen.size(), KaslrCandidateCount(k8G, 36));
  EXPECT_EQ(*seen.rbegin(), 7u);
  cfg.kaslr_entropy_bits = 47;
  EXPECT_THROW(BuildAddressSpace(cfg), ConfigError);
  cfg.kaslr_entropy_bits = 11;
  EXPECT_THROW(BuildAddressSpace(cfg), ConfigError);
  cfg.kaslr_entropy_bits = 46;
  cfg.phys_size = 0x3c00'0000'0000ULL;  // two candidates overrun the window
  EXPECT_THROW(BuildAddressSpace(cfg), ConfigError);
}

}  // namespace
}  // namespace meltsim
