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

// Physical memory, page tables and the user/kernel address-space layout.
//
// The kernel half of every address space contains a direct-physical map: a
// linear mapping of all of physical memory at direct_map_base(), marked
// kernel-only. With KAISER enabled user mode runs on a shadow table that holds
// only user pages and a small trampoline, so kernel addresses do not resolve
// at all from user mode.

#ifndef MELTSIM_VMEM_H_
#define MELTSIM_VMEM_H_

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace meltsim {

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr unsigned kPageShift = 12;

struct PhysAddr {
  std::uint64_t value = 0;

  constexpr std::uint64_t page() const { return value >> kPageShift; }
  constexpr std::uint64_t offset() const { return value & (kPageSize - 1); }
  constexpr PhysAddr operator+(std::uint64_t delta) const {
    return {value + delta};
  }
  constexpr auto operator<=>(const PhysAddr&) const = default;
};

struct VirtAddr {
  std::uint64_t value = 0;

  constexpr std::uint64_t page() const { return value >> kPageShift; }
  constexpr std::uint64_t offset() const { return value & (kPageSize - 1); }
  constexpr VirtAddr operator+(std::uint64_t delta) const {
    return {value + delta};
  }
  constexpr auto operator<=>(const VirtAddr&) const = default;
};

// Fixed layout constants.
inline constexpr VirtAddr kDirectMapFixedBase{0xffff'8800'0000'0000ULL};
inline constexpr VirtAddr kKernelSplitBoundary{0xffff'8000'0000'0000ULL};
inline constexpr VirtAddr kTrampolineBase{0xffff'fe00'0000'0000ULL};
inline constexpr VirtAddr kUserProbeBase{0x0000'0000'1000'0000ULL};
inline constexpr VirtAddr kUserScratchBase{0x0000'0000'2000'0000ULL};
inline constexpr std::uint64_t kProbePages = 256;
inline constexpr std::uint64_t kUserScratchPages = 4;
inline constexpr std::uint64_t kTrampolinePages = 1;
inline constexpr std::uint8_t kTrampolineFiller = 0x90;
inline constexpr unsigned kKaslrEntropyBits = 40;
inline constexpr unsigned kMaxKaslrEntropyBits = 46;

enum class AccessMode { kUser, kKernel };

// Results of a translation; faults are values.
enum class FaultKind {
  kNone,
  kNotPresent,  // page fault: no mapping
  kProtection,  // mapping exists but is not accessible in this mode
  kTrap,        // explicit RAISE
};

const char* FaultKindName(FaultKind kind);

// Sparse, zero-initialised byte store. Pages are materialised on first write,
// so multi-gigabyte machines cost only what is touched.
class PhysicalMemory {
 public:
  explicit PhysicalMemory(std::uint64_t size);

  PhysicalMemory(const PhysicalMemory& other);
  PhysicalMemory& operator=(const PhysicalMemory& other);
  PhysicalMemory(PhysicalMemory&&) = default;
  PhysicalMemory& operator=(PhysicalMemory&&) = default;

  std::uint64_t size() const { return size_; }

  // Throws BoundsError when [pa, pa + len) leaves [0, size).
  std::vector<std::uint8_t> Read(PhysAddr pa, std::uint64_t len) const;
  void Write(PhysAddr pa, std::span<const std::uint8_t> bytes);
  std::uint8_t ReadByte(PhysAddr pa) const;
  void WriteByte(PhysAddr pa, std::uint8_t value);

  // Write plus bookkeeping of the planted range for test oracles.
  void Plant(PhysAddr pa, std::span<const std::uint8_t> bytes);

  struct PlantedRange {
    PhysAddr start;
    std::vector<std::uint8_t> bytes;
  };
  const std::vector<PlantedRange>& planted() const { return planted_; }

 private:
  using Page = std::array<std::uint8_t, kPageSize>;

  void CheckRange(PhysAddr pa, std::uint64_t len) const;
  const Page* FindPage(std::uint64_t page) const;
  Page& MutablePage(std::uint64_t page);

  std::uint64_t size_;
  std::unordered_map<std::uint64_t, std::unique_ptr<Page>> pages_;
  std::vector<PlantedRange> planted_;
};

struct PageTableEntry {
  std::uint64_t phys_page = 0;
  bool present = false;
  bool user_accessible = false;
  bool writable = false;
};

// Single-level table: virtual page -> entry. Large linear regions (the direct
// map) are stored as ranges instead of one entry per page.
class PageTable {
 public:
  void Map(std::uint64_t virt_page, const PageTableEntry& pte);
  void MapLinear(std::uint64_t virt_page, std::uint64_t phys_page,
                 std::uint64_t pages, bool user_accessible, bool writable);
  std::optional<PageTableEntry> Lookup(std::uint64_t virt_page) const;

  // Every individually mapped page (linear ranges excluded).
  const std::unordered_map<std::uint64_t, PageTableEntry>& entries() const {
    return entries_;
  }

 private:
  struct LinearRange {
    std::uint64_t virt_page;
    std::uint64_t phys_page;
    std::uint64_t pages;
    bool user_accessible;
    bool writable;
  };

  std::unordered_map<std::uint64_t, PageTableEntry> entries_;
  std::vector<LinearRange> linear_;
};

struct AddressSpaceConfig {
  std::uint64_t phys_size = 16ULL << 20;
  bool kaiser = false;
  bool kaslr = false;
  bool hard_split = false;
  std::uint64_t seed = 0;
  // log2 of the virtual window the direct map is placed in under KASLR.
  unsigned kaslr_entropy_bits = kKaslrEntropyBits;
};

class AddressSpace {
 public:
  bool kaiser_mode() const { return kaiser_; }
  bool hard_split() const { return hard_split_; }
  VirtAddr direct_map_base() const { return direct_map_base_; }
  unsigned kaslr_entropy_bits() const { return kaslr_entropy_bits_; }
  VirtAddr split_boundary() const { return kKernelSplitBoundary; }
  std::uint64_t phys_size() const { return phys_size_; }

  // Physical frames backing the user region and the trampoline. Everything
  // below reserved_phys_begin() is free for kernel data.
  PhysAddr reserved_phys_begin() const { return reserved_begin_; }
  PhysAddr trampoline_phys() const { return trampoline_phys_; }

  // Table consulted for the given privilege mode.
  const PageTable& table_for(AccessMode mode) const;

 private:
  friend AddressSpace BuildAddressSpace(const AddressSpaceConfig& cfg);

  PageTable kernel_table_;
  PageTable user_table_;  // only used when kaiser_ is set
  bool kaiser_ = false;
  bool hard_split_ = false;
  VirtAddr direct_map_base_ = kDirectMapFixedBase;
  unsigned kaslr_entropy_bits_ = 0;
  std::uint64_t phys_size_ = 0;
  PhysAddr reserved_begin_;
  PhysAddr trampoline_phys_;
};

// Throws ConfigError for a zero, unaligned or too-small phys_size.
AddressSpace BuildAddressSpace(const AddressSpaceConfig& cfg);

// Number of direct-map placements KASLR can choose from. The randomisation
// window is 2^entropy_bits bytes and placements are phys_size apart.
std::uint64_t KaslrCandidateCount(std::uint64_t phys_size,
                                  unsigned entropy_bits = kKaslrEntropyBits);

struct Translation {
  std::optional<PhysAddr> paddr;
  FaultKind fault = FaultKind::kNone;
  bool writable = false;
  // Set when the hard-split rule rejected the access before any table walk.
  bool split_shortcut = false;
};

Translation Translate(VirtAddr va, AccessMode mode, const AddressSpace& asp);

}  // namespace meltsim

#endif  // MELTSIM_VMEM_H_
