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

#include "meltsim/vmem.h"

#include <algorithm>
#include <random>
#include <string>

#include "meltsim/errors.h"

namespace meltsim {

const char* FaultKindName(FaultKind kind) {
  switch (kind) {
    case FaultKind::kNone:
      return "none";
    case FaultKind::kNotPresent:
      return "not-present";
    case FaultKind::kProtection:
      return "protection";
    case FaultKind::kTrap:
      return "trap";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// PhysicalMemory

PhysicalMemory::PhysicalMemory(std::uint64_t size) : size_(size) {}

PhysicalMemory::PhysicalMemory(const PhysicalMemory& other)
    : size_(other.size_), planted_(other.planted_) {
  for (const auto& [page, data] : other.pages_) {
    pages_.emplace(page, std::make_unique<Page>(*data));
  }
}

PhysicalMemory& PhysicalMemory::operator=(const PhysicalMemory& other) {
  if (this != &other) {
    PhysicalMemory copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void PhysicalMemory::CheckRange(PhysAddr pa, std::uint64_t len) const {
  if (pa.value > size_ || len > size_ - pa.value) {
    throw BoundsError("physical access [" + std::to_string(pa.value) + ", +" +
                      std::to_string(len) + ") outside memory of size " +
                      std::to_string(size_));
  }
}

const PhysicalMemory::Page* PhysicalMemory::FindPage(std::uint64_t page) const {
  auto it = pages_.find(page);
  return it == pages_.end() ? nullptr : it->second.get();
}

PhysicalMemory::Page& PhysicalMemory::MutablePage(std::uint64_t page) {
  auto& slot = pages_[page];
  if (!slot) {
    slot = std::make_unique<Page>();
    slot->fill(0);
  }
  return *slot;
}

std::vector<std::uint8_t> PhysicalMemory::Read(PhysAddr pa,
                                               std::uint64_t len) const {
  CheckRange(pa, len);
  std::vector<std::uint8_t> out(len, 0);
  std::uint64_t done = 0;
  while (done < len) {
    const PhysAddr cur = pa + done;
    const std::uint64_t chunk = std::min(len - done, kPageSize - cur.offset());
    if (const Page* page = FindPage(cur.page())) {
      std::copy_n(page->begin() + cur.offset(), chunk, out.begin() + done);
    }
    done += chunk;
  }
  return out;
}

void PhysicalMemory::Write(PhysAddr pa, std::span<const std::uint8_t> bytes) {
  CheckRange(pa, bytes.size());
  std::uint64_t done = 0;
  while (done < bytes.size()) {
    const PhysAddr cur = pa + done;
    const std::uint64_t chunk =
        std::min<std::uint64_t>(bytes.size() - done, kPageSize - cur.offset());
    Page& page = MutablePage(cur.page());
    std::copy_n(bytes.begin() + done, chunk, page.begin() + cur.offset());
    done += chunk;
  }
}

std::uint8_t PhysicalMemory::ReadByte(PhysAddr pa) const {
  CheckRange(pa, 1);
  const Page* page = FindPage(pa.page());
  return page ? (*page)[pa.offset()] : 0;
}

void PhysicalMemory::WriteByte(PhysAddr pa, std::uint8_t value) {
  CheckRange(pa, 1);
  MutablePage(pa.page())[pa.offset()] = value;
}

void PhysicalMemory::Plant(PhysAddr pa, std::span<const std::uint8_t> bytes) {
  Write(pa, bytes);
  planted_.push_back({pa, std::vector<std::uint8_t>(bytes.begin(), bytes.end())});
}

// ---------------------------------------------------------------------------
// PageTable

void PageTable::Map(std::uint64_t virt_page, const PageTableEntry& pte) {
  entries_[virt_page] = pte;
}

void PageTable::MapLinear(std::uint64_t virt_page, std::uint64_t phys_page,
                          std::uint64_t pages, bool user_accessible,
                          bool writable) {
  linear_.push_back({virt_page, phys_page, pages, user_accessible, writable});
}

std::optional<PageTableEntry> PageTable::Lookup(std::uint64_t virt_page) const {
  if (auto it = entries_.find(virt_page); it != entries_.end()) {
    return it->second;
  }
  for (const LinearRange& r : linear_) {
    if (virt_page >= r.virt_page && virt_page - r.virt_page < r.pages) {
      return PageTableEntry{r.phys_page + (virt_page - r.virt_page), true,
                            r.user_accessible, r.writable};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// AddressSpace

const PageTable& AddressSpace::table_for(AccessMode mode) const {
  return (mode == AccessMode::kUser && kaiser_) ? user_table_ : kernel_table_;
}

std::uint64_t KaslrCandidateCount(std::uint64_t phys_size,
                                  unsigned entropy_bits) {
  if (phys_size == 0) throw ConfigError("vmem.phys_size must be non-zero");
  if (entropy_bits >= 64) throw ConfigError("KASLR entropy must be < 64 bits");
  const std::uint64_t window = std::uint64_t{1} << entropy_bits;
  return std::max<std::uint64_t>(1, (window + phys_size - 1) / phys_size);
}

AddressSpace BuildAddressSpace(const AddressSpaceConfig& cfg) {
  if (cfg.phys_size == 0) {
    throw ConfigError("vmem.phys_size must be non-zero");
  }
  if (cfg.phys_size % kPageSize != 0) {
    throw ConfigError("vmem.phys_size must be a multiple of 4096");
  }
  const std::uint64_t phys_pages = cfg.phys_size / kPageSize;
  const std::uint64_t reserved_pages =
      kProbePages + kUserScratchPages + kTrampolinePages;
  if (phys_pages <= reserved_pages) {
    throw ConfigError("vmem.phys_size too small: need more than " +
                      std::to_string(reserved_pages * kPageSize) + " bytes");
  }

  AddressSpace asp;
  asp.kaiser_ = cfg.kaiser;
  asp.hard_split_ = cfg.hard_split;
  asp.phys_size_ = cfg.phys_size;

  if (cfg.kaslr) {
    if (cfg.kaslr_entropy_bits < kPageShift || cfg.kaslr_entropy_bits > kMaxKaslrEntropyBits) {
      throw ConfigError("vmem.kaslr_entropy_bits must be in [12, 46]");
    }
    const std::uint64_t candidates =
        KaslrCandidateCount(cfg.phys_size, cfg.kaslr_entropy_bits);
    if (candidates > (kTrampolineBase.value - kDirectMapFixedBase.value) / cfg.phys_size) {
      throw ConfigError("vmem.phys_size too large for the KASLR window");
    }
    asp.kaslr_entropy_bits_ = cfg.kaslr_entropy_bits;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::uint64_t> pick(0, candidates - 1);
    asp.direct_map_base_ = kDirectMapFixedBase + pick(rng) * cfg.phys_size;
  }

  // Top of physical memory: [user frames][trampoline].
  const std::uint64_t trampoline_frame = phys_pages - kTrampolinePages;
  const std::uint64_t user_frame = trampoline_frame - kProbePages - kUserScratchPages;
  asp.reserved_begin_ = PhysAddr{user_frame * kPageSize};
  asp.trampoline_phys_ = PhysAddr{trampoline_frame * kPageSize};

  auto map_user = [&](PageTable& table) {
    for (std::uint64_t i = 0; i < kProbePages; ++i) {
      table.Map(kUserProbeBase.page() + i, {user_frame + i, true, true, true});
    }
    for (std::uint64_t i = 0; i < kUserScratchPages; ++i) {
      table.Map(kUserScratchBase.page() + i,
                {user_frame + kProbePages + i, true, true, true});
    }
  };
  auto map_trampoline = [&](PageTable& table) {
    for (std::uint64_t i = 0; i < kTrampolinePages; ++i) {
      table.Map(kTrampolineBase.page() + i,
                {trampoline_frame + i, true, false, false});
    }
  };

  map_user(asp.kernel_table_);
  map_trampoline(asp.kernel_table_);
  asp.kernel_table_.MapLinear(asp.direct_map_base_.page(), 0, phys_pages,
                              /*user_accessible=*/false, /*writable=*/true);

  if (cfg.kaiser) {
    map_user(asp.user_table_);
    map_trampoline(asp.user_table_);
  }
  return asp;
}

Translation Translate(VirtAddr va, AccessMode mode, const AddressSpace& asp) {
  Translation t;
  if (mode == AccessMode::kUser && asp.hard_split() &&
      va >= asp.split_boundary()) {
    t.fault = FaultKind::kProtection;
    t.split_shortcut = true;
    return t;
  }
  const auto pte = asp.table_for(mode).Lookup(va.page());
  if (!pte || !pte->present) {
    t.fault = FaultKind::kNotPresent;
    return t;
  }
  t.paddr = PhysAddr{(pte->phys_page << kPageShift) | va.offset()};
  t.writable = pte->writable;
  if (mode == AccessMode::kUser && !pte->user_accessible) {
    t.fault = FaultKind::kProtection;
  }
  return t;
}

}  // namespace meltsim
