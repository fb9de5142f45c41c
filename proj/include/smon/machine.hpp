/*
 * Copyright 2026 The smon Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Abstract multiprocessor the monitor runs on: cores, sparse physical
// memory, per-domain address translation with a TLB, and one of two
// isolation backends (fixed DRAM regions or arbitrary protected intervals).
//
// The machine is a passive store. It performs no locking; the monitor
// serializes every mutation.

#pragma once

#include <map>
#include <set>
#include <vector>

#include "smon/types.hpp"

namespace smon {

enum class IsolationBackendKind : std::uint8_t { RegionBased, IntervalBased };

std::string_view to_string(IsolationBackendKind kind);

struct MachineConfig {
  std::uint32_t core_count = 2;
  std::uint64_t phys_memory_bytes = 8 * 64 * 1024;
  std::uint64_t page_size = 4096;
  IsolationBackendKind backend = IsolationBackendKind::RegionBased;
  std::uint64_t region_size = 64 * 1024;  // RegionBased only
  std::uint32_t region_count = 8;         // RegionBased only
  // Memory reserved for the monitor at boot: leading regions (RegionBased)
  // or one interval at physical address 0 (IntervalBased).
  std::uint32_t monitor_regions = 1;
  std::uint64_t monitor_interval_bytes = 64 * 1024;

  /// 8 regions x 64 KiB, 4 KiB pages, 2 cores.
  static MachineConfig desk_scale();
  /// 64 regions x 32 MiB.
  static MachineConfig production_regions();
  static MachineConfig interval_based(std::uint64_t memory_bytes, std::uint64_t page_size,
                                      std::uint64_t monitor_bytes, std::uint32_t cores = 2);

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  std::uint64_t page_count() const { return phys_memory_bytes / page_size; }
  std::uint64_t pages_per_region() const { return region_size / page_size; }
  std::uint64_t monitor_bytes() const;
};

struct CoreState {
  CoreId id = 0;
  RegisterFile regs{};
  VirtAddr pc = 0;
  DomainId domain = DomainId::os();
  std::optional<PhysAddr> thread;
  bool microarch_dirty = false;

  bool operator==(const CoreState&) const = default;
};

struct Mapping {
  std::uint64_t ppn = 0;
  std::uint8_t perms = 0;

  bool operator==(const Mapping&) const = default;
};

struct PageTable {
  DomainId owner;
  std::map<std::uint64_t, Mapping> entries;  // vpn -> mapping

  bool operator==(const PageTable&) const = default;
};

/// Translation state the monitor programs for one enclave: its private
/// virtual range, the private table, and OS pages it may reach outside the range.
struct AddressSpace {
  VirtAddr ev_base = 0;
  std::uint64_t ev_size = 0;
  PageTable table;
  std::map<std::uint64_t, std::uint64_t> shared;  // vpn -> ppn, outside evrange

  bool contains(VirtAddr va) const { return va >= ev_base && va - ev_base < ev_size; }
};

struct TlbEntry {
  std::uint64_t vpn = 0;
  DomainId domain;
  std::uint64_t ppn = 0;
  std::uint8_t perms = 0;

  auto operator<=>(const TlbEntry&) const = default;
};

struct Interval {
  PhysAddr base = 0;
  std::uint64_t size = 0;
  DomainId owner;

  bool contains(PhysAddr p) const { return p >= base && p - base < size; }
};

/// Hardware ownership map. RegionBased tags each fixed-size region;
/// IntervalBased keeps protected intervals and defaults the rest to the OS.
class IsolationBackend {
 public:
  explicit IsolationBackend(const MachineConfig& config);

  IsolationBackendKind kind() const { return kind_; }
  DomainId owner_of(PhysAddr paddr) const;

  std::uint32_t region_of(PhysAddr paddr) const { return static_cast<std::uint32_t>(paddr / region_size_); }
  void set_region_owner(std::uint32_t region, DomainId owner);
  DomainId region_owner(std::uint32_t region) const { return region_owners_.at(region); }

  /// Adds a protected interval; fails with BadArgument on misalignment,
  /// overflow, or overlap with an existing interval.
  Status add_interval(PhysAddr base, std::uint64_t size, DomainId owner);
  Status set_interval_owner(PhysAddr base, DomainId owner);
  Status remove_interval(PhysAddr base);
  const Interval* interval_at(PhysAddr base) const;
  const std::map<PhysAddr, Interval>& intervals() const { return intervals_; }

  /// Last-level cache partition of a page: its region index under
  /// RegionBased (page coloring), none under IntervalBased.
  std::optional<std::uint32_t> cache_partition(PhysAddr paddr) const;

  void serialize(Bytes& out) const;

 private:
  IsolationBackendKind kind_;
  std::uint64_t memory_bytes_;
  std::uint64_t page_size_;
  std::uint64_t region_size_;
  std::vector<DomainId> region_owners_;
  std::map<PhysAddr, Interval> intervals_;
};

enum class Access : std::uint8_t { Allowed, Denied };

class Machine {
 public:
  explicit Machine(MachineConfig config);

  const MachineConfig& config() const { return config_; }
  std::uint64_t page_size() const { return config_.page_size; }
  std::uint64_t ppn_of(PhysAddr p) const { return p / config_.page_size; }
  PhysAddr page_base(std::uint64_t ppn) const { return ppn * config_.page_size; }
  bool valid(PhysAddr p) const { return p < config_.phys_memory_bytes; }

  IsolationBackend& backend() { return backend_; }
  const IsolationBackend& backend() const { return backend_; }

  Result<DomainId> backend_owner_of(PhysAddr paddr) const;
  /// Allowed iff the domain is the monitor, owns the page, or the page is an
  /// OS page registered as shared with that enclave. DMA has OS rights only.
  Result<Access> check_access(DomainId domain, PhysAddr paddr, AccessKind kind) const;

  // Physical memory. Pages absent from the store read as zero.
  Word read_word(PhysAddr paddr) const;
  void write_word(PhysAddr paddr, Word value, DomainId writer);
  Bytes read_page(std::uint64_t ppn) const;
  void write_page(std::uint64_t ppn, ByteView contents, DomainId writer);
  void copy_page(std::uint64_t src_ppn, std::uint64_t dst_ppn);
  void zero_range(PhysAddr base, std::uint64_t size);
  bool page_is_zero(std::uint64_t ppn) const;
  /// Domains whose data currently resides in a page; empty once zeroed.
  const std::set<DomainId>& page_writers(std::uint64_t ppn) const;
  const std::map<std::uint64_t, Bytes>& pages() const { return pages_; }

  // Cores.
  std::uint32_t core_count() const { return static_cast<std::uint32_t>(cores_.size()); }
  CoreState& core(CoreId id) { return cores_.at(id); }
  const CoreState& core(CoreId id) const { return cores_.at(id); }
  /// Zeroes architected state, drops TLB entries of the departing domain,
  /// and hands the core back to the OS. Idempotent.
  void clean_core(CoreId id);
  void set_flush_tlb_on_clean(bool flush) { flush_tlb_on_clean_ = flush; }

  // Translation.
  void install_address_space(DomainId enclave, AddressSpace space);
  void remove_address_space(DomainId enclave);
  AddressSpace* address_space(DomainId enclave);
  const AddressSpace* address_space(DomainId enclave) const;
  const std::map<DomainId, AddressSpace>& address_spaces() const { return spaces_; }

  /// Walks the active domain's tables (TLB first). PageFault for an unmapped
  /// address or a permission mismatch, AccessDenied when the isolation
  /// backend rejects the walk. Successful walks are cached in the TLB.
  Result<PhysAddr> translate(CoreId core, VirtAddr vaddr, AccessKind kind);
  Result<Word> load(CoreId core, VirtAddr vaddr);
  Status store(CoreId core, VirtAddr vaddr, Word value);
  Result<Word> dma_read(PhysAddr paddr) const;
  Status dma_write(PhysAddr paddr, Word value);

  const std::set<TlbEntry>& tlb(CoreId core) const { return tlbs_.at(core); }
  void tlb_shootdown(PhysAddr base, std::uint64_t size);

  /// Canonical byte image of all mutable state (for hashing).
  void serialize(Bytes& out) const;

 private:
  Result<Mapping> walk(const CoreState& core, VirtAddr vaddr) const;

  MachineConfig config_;
  IsolationBackend backend_;
  std::vector<CoreState> cores_;
  std::vector<std::set<TlbEntry>> tlbs_;
  std::map<std::uint64_t, Bytes> pages_;
  std::map<std::uint64_t, std::set<DomainId>> writers_;
  std::map<DomainId, AddressSpace> spaces_;
  bool flush_tlb_on_clean_ = true;
};

}  // namespace smon
