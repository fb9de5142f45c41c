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

#include "smon/machine.hpp"

#include <algorithm>
#include <cstring>

namespace smon {

namespace {

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

const std::set<DomainId> kNoWriters;

std::uint8_t required_perm(AccessKind kind) {
  switch (kind) {
    case AccessKind::Read:
    case AccessKind::Dma:
      return perm::kRead;
    case AccessKind::Write:
      return perm::kWrite;
    case AccessKind::Execute:
      return perm::kExecute;
  }
  return perm::kRead;
}

}  // namespace

std::string_view to_string(IsolationBackendKind kind) {
  return kind == IsolationBackendKind::RegionBased ? "region" : "interval";
}

MachineConfig MachineConfig::desk_scale() { return MachineConfig{}; }

MachineConfig MachineConfig::production_regions() {
  MachineConfig c;
  c.core_count = 4;
  c.region_count = 64;
  c.region_size = 32ULL * 1024 * 1024;
  c.phys_memory_bytes = c.region_count * c.region_size;
  c.page_size = 4096;
  return c;
}

MachineConfig MachineConfig::interval_based(std::uint64_t memory_bytes, std::uint64_t page_size,
                                            std::uint64_t monitor_bytes, std::uint32_t cores) {
  MachineConfig c;
  c.backend = IsolationBackendKind::IntervalBased;
  c.core_count = cores;
  c.phys_memory_bytes = memory_bytes;
  c.page_size = page_size;
  c.region_count = 0;
  c.region_size = 0;
  c.monitor_regions = 0;
  c.monitor_interval_bytes = monitor_bytes;
  return c;
}

std::uint64_t MachineConfig::monitor_bytes() const {
  return backend == IsolationBackendKind::RegionBased ? monitor_regions * region_size : monitor_interval_bytes;
}

void MachineConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("machine config: " + what); };
  if (core_count == 0) bad("core_count must be positive");
  if (!is_pow2(page_size)) bad("page_size must be a power of two");
  if (page_size < 64) bad("page_size must be at least 64 bytes");
  if (phys_memory_bytes == 0 || phys_memory_bytes % page_size != 0) {
    bad("phys_memory_bytes must be a positive multiple of page_size");
  }
  if (backend == IsolationBackendKind::RegionBased) {
    if (region_count == 0) bad("region_count must be positive");
    if (region_size == 0 || region_size % page_size != 0) bad("page_size must divide region_size");
    if (phys_memory_bytes != region_count * region_size) {
      bad("phys_memory_bytes must equal region_count x region_size");
    }
    if (monitor_regions == 0 || monitor_regions >= region_count) bad("monitor_regions must be in [1, region_count)");
  } else {
    if (monitor_interval_bytes == 0 || monitor_interval_bytes % page_size != 0 ||
        monitor_interval_bytes >= phys_memory_bytes) {
      bad("monitor_interval_bytes must be a page multiple smaller than memory");
    }
  }
}

IsolationBackend::IsolationBackend(const MachineConfig& config)
    : kind_(config.backend),
      memory_bytes_(config.phys_memory_bytes),
      page_size_(config.page_size),
      region_size_(config.backend == IsolationBackendKind::RegionBased ? config.region_size
                                                                         : config.phys_memory_bytes) {
  if (kind_ == IsolationBackendKind::RegionBased) {
    region_owners_.assign(config.region_count, DomainId::os());
    for (std::uint32_t r = 0; r < config.monitor_regions; ++r) region_owners_[r] = DomainId::monitor();
  } else {
    intervals_[0] = Interval{0, config.monitor_interval_bytes, DomainId::monitor()};
  }
}

DomainId IsolationBackend::owner_of(PhysAddr paddr) const {
  if (kind_ == IsolationBackendKind::RegionBased) return region_owners_.at(region_of(paddr));
  auto it = intervals_.upper_bound(paddr);
  if (it == intervals_.begin()) return DomainId::os();
  --it;
  return it->second.contains(paddr) ? it->second.owner : DomainId::os();
}

void IsolationBackend::set_region_owner(std::uint32_t region, DomainId owner) { region_owners_.at(region) = owner; }

Status IsolationBackend::add_interval(PhysAddr base, std::uint64_t size, DomainId owner) {
  if (kind_ != IsolationBackendKind::IntervalBased) return Status::BadArgument;
  if (size == 0 || base % page_size_ != 0 || size % page_size_ != 0) return Status::BadArgument;
  if (base >= memory_bytes_ || size > memory_bytes_ - base) return Status::BadArgument;
  auto next = intervals_.lower_bound(base);
  if (next != intervals_.end() && next->second.base < base + size) return Status::BadArgument;
  if (next != intervals_.begin()) {
    auto prev = std::prev(next);
    if (prev->second.base + prev->second.size > base) return Status::BadArgument;
  }
  intervals_[base] = Interval{base, size, owner};
  return Status::Ok;
}

Status IsolationBackend::set_interval_owner(PhysAddr base, DomainId owner) {
  auto it = intervals_.find(base);
  if (it == intervals_.end()) return Status::NoSuchResource;
  it->second.owner = owner;
  return Status::Ok;
}

Status IsolationBackend::remove_interval(PhysAddr base) {
  return intervals_.erase(base) == 1 ? Status::Ok : Status::NoSuchResource;
}

const Interval* IsolationBackend::interval_at(PhysAddr base) const {
  auto it = intervals_.find(base);
  return it == intervals_.end() ? nullptr : &it->second;
}

std::optional<std::uint32_t> IsolationBackend::cache_partition(PhysAddr paddr) const {
  if (kind_ != IsolationBackendKind::RegionBased) return std::nullopt;
  return region_of(paddr);
}

void IsolationBackend::serialize(Bytes& out) const {
  put_u8(out, static_cast<std::uint8_t>(kind_));
  for (DomainId d : region_owners_) put_u64(out, d.raw());
  put_u64(out, intervals_.size());
  for (const auto& [base, iv] : intervals_) {
    put_u64(out, base);
    put_u64(out, iv.size);
    put_u64(out, iv.owner.raw());
  }
}

Machine::Machine(MachineConfig config) : config_((config.validate(), config)), backend_(config_) {
  cores_.resize(config_.core_count);
  for (CoreId i = 0; i < config_.core_count; ++i) cores_[i].id = i;
  tlbs_.resize(config_.core_count);
}

Result<DomainId> Machine::backend_owner_of(PhysAddr paddr) const {
  if (!valid(paddr)) return Status::AddressOutOfRange;
  return backend_.owner_of(paddr);
}

Result<Access> Machine::check_access(DomainId domain, PhysAddr paddr, AccessKind kind) const {
  if (!valid(paddr)) return Status::AddressOutOfRange;
  DomainId owner = backend_.owner_of(paddr);
  if (kind == AccessKind::Dma) return owner.is_os() ? Access::Allowed : Access::Denied;
  if (domain.is_monitor() || owner == domain) return Access::Allowed;
  if (domain.is_enclave() && owner.is_os()) {
    if (const AddressSpace* space = address_space(domain)) {
      std::uint64_t ppn = ppn_of(paddr);
      for (const auto& [vpn, shared_ppn] : space->shared) {
        if (shared_ppn == ppn) return Access::Allowed;
      }
    }
  }
  return Access::Denied;
}

Word Machine::read_word(PhysAddr paddr) const {
  auto it = pages_.find(ppn_of(paddr));
  if (it == pages_.end()) return 0;
  std::uint64_t off = (paddr % config_.page_size) & ~std::uint64_t{7};
  Word v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<Word>(it->second[off + i]) << (8 * i);
  return v;
}

void Machine::write_word(PhysAddr paddr, Word value, DomainId writer) {
  std::uint64_t ppn = ppn_of(paddr);
  auto [it, inserted] = pages_.try_emplace(ppn);
  if (inserted) it->second.assign(config_.page_size, 0);
  std::uint64_t off = (paddr % config_.page_size) & ~std::uint64_t{7};
  for (int i = 0; i < 8; ++i) it->second[off + i] = static_cast<std::uint8_t>(value >> (8 * i));
  writers_[ppn].insert(writer);
}

Bytes Machine::read_page(std::uint64_t ppn) const {
  auto it = pages_.find(ppn);
  if (it == pages_.end()) return Bytes(config_.page_size, 0);
  return it->second;
}

void Machine::write_page(std::uint64_t ppn, ByteView contents, DomainId writer) {
  Bytes page(config_.page_size, 0);
  std::copy_n(contents.begin(), std::min<std::size_t>(contents.size(), page.size()), page.begin());
  pages_[ppn] = std::move(page);
  writers_[ppn] = {writer};
}

void Machine::copy_page(std::uint64_t src_ppn, std::uint64_t dst_ppn) {
  auto it = pages_.find(src_ppn);
  if (it == pages_.end()) {
    pages_.erase(dst_ppn);
    writers_.erase(dst_ppn);
    return;
  }
  pages_[dst_ppn] = it->second;
  writers_[dst_ppn] = page_writers(src_ppn);
}

void Machine::zero_range(PhysAddr base, std::uint64_t size) {
  std::uint64_t first = ppn_of(base);
  std::uint64_t last = ppn_of(base + size - 1);
  pages_.erase(pages_.lower_bound(first), pages_.upper_bound(last));
  writers_.erase(writers_.lower_bound(first), writers_.upper_bound(last));
}

bool Machine::page_is_zero(std::uint64_t ppn) const {
  auto it = pages_.find(ppn);
  if (it == pages_.end()) return true;
  return std::all_of(it->second.begin(), it->second.end(), [](std::uint8_t b) { return b == 0; });
}

const std::set<DomainId>& Machine::page_writers(std::uint64_t ppn) const {
  auto it = writers_.find(ppn);
  return it == writers_.end() ? kNoWriters : it->second;
}

void Machine::clean_core(CoreId id) {
  CoreState& c = cores_.at(id);
  DomainId departing = c.domain;
  c.regs.fill(0);
  c.pc = 0;
  c.microarch_dirty = false;
  if (flush_tlb_on_clean_) {
    std::erase_if(tlbs_.at(id), [&](const TlbEntry& e) { return e.domain == departing; });
  }
  c.domain = DomainId::os();
  c.thread.reset();
}

void Machine::install_address_space(DomainId enclave, AddressSpace space) {
  space.table.owner = enclave;
  spaces_[enclave] = std::move(space);
}

void Machine::remove_address_space(DomainId enclave) { spaces_.erase(enclave); }

AddressSpace* Machine::address_space(DomainId enclave) {
  auto it = spaces_.find(enclave);
  return it == spaces_.end() ? nullptr : &it->second;
}

const AddressSpace* Machine::address_space(DomainId enclave) const {
  auto it = spaces_.find(enclave);
  return it == spaces_.end() ? nullptr : &it->second;
}

Result<Mapping> Machine::walk(const CoreState& core, VirtAddr vaddr) const {
  std::uint64_t vpn = vaddr / config_.page_size;
  if (!core.domain.is_enclave()) {
    // The OS table is the identity over physical memory.
    if (!valid(vaddr)) return Status::PageFault;
    return Mapping{vpn, perm::kAll};
  }
  const AddressSpace* space = address_space(core.domain);
  if (space == nullptr) return Status::PageFault;
  if (space->contains(vaddr)) {
    auto it = space->table.entries.find(vpn);
    if (it == space->table.entries.end()) return Status::PageFault;
    return it->second;
  }
  auto it = space->shared.find(vpn);
  if (it == space->shared.end()) return Status::PageFault;
  return Mapping{it->second, static_cast<std::uint8_t>(perm::kRead | perm::kWrite)};
}

Result<PhysAddr> Machine::translate(CoreId core_id, VirtAddr vaddr, AccessKind kind) {
  CoreState& core = cores_.at(core_id);
  std::uint64_t vpn = vaddr / config_.page_size;
  std::uint64_t offset = vaddr % config_.page_size;
  std::uint8_t need = required_perm(kind);
  auto& tlb = tlbs_.at(core_id);
  for (auto it = tlb.lower_bound(TlbEntry{vpn, core.domain, 0, 0}); it != tlb.end() && it->vpn == vpn; ++it) {
    if (it->domain != core.domain) continue;
    if ((it->perms & need) != need) return Status::PageFault;
    core.microarch_dirty = true;
    return page_base(it->ppn) + offset;
  }
  auto mapping = walk(core, vaddr);
  if (!mapping) return mapping.status();
  if ((mapping->perms & need) != need) return Status::PageFault;
  PhysAddr paddr = page_base(mapping->ppn) + offset;
  auto access = check_access(core.domain, paddr, kind);
  if (!access || *access == Access::Denied) return Status::AccessDenied;
  tlb.insert(TlbEntry{vpn, core.domain, mapping->ppn, mapping->perms});
  core.microarch_dirty = true;
  return paddr;
}

Result<Word> Machine::load(CoreId core, VirtAddr vaddr) {
  auto paddr = translate(core, vaddr, AccessKind::Read);
  if (!paddr) return paddr.status();
  return read_word(*paddr);
}

Status Machine::store(CoreId core, VirtAddr vaddr, Word value) {
  auto paddr = translate(core, vaddr, AccessKind::Write);
  if (!paddr) return paddr.status();
  // Data an enclave writes into an OS page through a shared mapping is published.
  DomainId writer = backend_.owner_of(*paddr).is_os() ? DomainId::os() : cores_.at(core).domain;
  write_word(*paddr, value, writer);
  return Status::Ok;
}

Result<Word> Machine::dma_read(PhysAddr paddr) const {
  auto access = check_access(DomainId::os(), paddr, AccessKind::Dma);
  if (!access) return access.status();
  if (*access == Access::Denied) return Status::AccessDenied;
  return read_word(paddr);
}

Status Machine::dma_write(PhysAddr paddr, Word value) {
  auto access = check_access(DomainId::os(), paddr, AccessKind::Dma);
  if (!access) return access.status();
  if (*access == Access::Denied) return Status::AccessDenied;
  write_word(paddr, value, DomainId::os());
  return Status::Ok;
}

void Machine::tlb_shootdown(PhysAddr base, std::uint64_t size) {
  if (size == 0) return;
  std::uint64_t first = ppn_of(base);
  std::uint64_t last = ppn_of(base + size - 1);
  for (auto& tlb : tlbs_) {
    std::erase_if(tlb, [&](const TlbEntry& e) { return e.ppn >= first && e.ppn <= last; });
  }
}

void Machine::serialize(Bytes& out) const {
  backend_.serialize(out);
  for (const CoreState& c : cores_) {
    for (Word r : c.regs) put_u64(out, r);
    put_u64(out, c.pc);
    put_u64(out, c.domain.raw());
    put_u64(out, c.thread.value_or(~std::uint64_t{0}));
    put_u8(out, c.microarch_dirty ? 1 : 0);
  }
  for (const auto& tlb : tlbs_) {
    put_u64(out, tlb.size());
    for (const TlbEntry& e : tlb) {
      put_u64(out, e.vpn);
      put_u64(out, e.domain.raw());
      put_u64(out, e.ppn);
      put_u8(out, e.perms);
    }
  }
  for (const auto& [ppn, bytes] : pages_) {
    if (page_is_zero(ppn)) continue;
    put_u64(out, ppn);
    put_bytes(out, bytes);
  }
  put_u64(out, ~std::uint64_t{0});
  for (const auto& [ppn, writers] : writers_) {
    if (writers.empty()) continue;
    put_u64(out, ppn);
    put_u64(out, writers.size());
    for (DomainId d : writers) put_u64(out, d.raw());
  }
  put_u64(out, ~std::uint64_t{0});
  for (const auto& [domain, space] : spaces_) {
    put_u64(out, domain.raw());
    put_u64(out, space.ev_base);
    put_u64(out, space.ev_size);
    put_u64(out, space.table.entries.size());
    for (const auto& [vpn, m] : space.table.entries) {
      put_u64(out, vpn);
      put_u64(out, m.ppn);
      put_u8(out, m.perms);
    }
    put_u64(out, space.shared.size());
    for (const auto& [vpn, ppn] : space.shared) {
      put_u64(out, vpn);
      put_u64(out, ppn);
    }
  }
}

}  // namespace smon
