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

#include "smon/monitor.hpp"

#include <utility>

namespace smon {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

ApiResponse respond(Status s) { return ApiResponse{s, std::monostate{}}; }

template <class T>
ApiResponse respond(Result<T> r) {
  if (!r) return respond(r.status());
  return ApiResponse{Status::Ok, std::move(r).value()};
}

}  // namespace

std::optional<std::uint32_t> mutation::parse(std::string_view name) {
  for (const auto& m : kAll) {
    if (m.name == name) return m.bit;
  }
  return std::nullopt;
}

std::string_view to_string(GuardKey::Class cls) {
  switch (cls) {
    case GuardKey::Class::Enclave: return "enclave";
    case GuardKey::Class::Thread: return "thread";
    case GuardKey::Class::Core: return "core";
    case GuardKey::Class::Region: return "region";
    case GuardKey::Class::Interval: return "interval";
    case GuardKey::Class::Mailbox: return "mailbox";
  }
  return "unknown";
}

SecurityMonitor::SecurityMonitor(MonitorConfig config)
    : config_(std::move(config)),
      machine_(config_.machine),
      device_(simulated_device(config_.device_label, simulated_manufacturer(config_.manufacturer_label))),
      sm_(derive_sm_identity(device_, config_.sm_image)) {
  machine_.set_flush_tlb_on_clean(!mutated(mutation::kSkipTlbFlushOnCoreClean));
  const MachineConfig& mc = machine_.config();
  for (CoreId c = 0; c < mc.core_count; ++c) {
    resources_.insert({{ResourceType::Core, c}, DomainId::os(), ResourceState::Owned, {}});
  }
  if (mc.backend == IsolationBackendKind::RegionBased) {
    for (std::uint32_t r = 0; r < mc.region_count; ++r) {
      resources_.insert({{ResourceType::MemoryRegion, r}, machine_.backend().region_owner(r), ResourceState::Owned, {}});
    }
  } else {
    resources_.insert({{ResourceType::MemoryInterval, 0}, DomainId::monitor(), ResourceState::Owned, {}});
  }
}

SecurityMonitor::SecurityMonitor(const SecurityMonitor& other)
    : config_(other.config_), machine_(other.machine_), device_(other.device_), sm_(other.sm_) {
  std::lock_guard lock(other.mutex_);
  resources_ = other.resources_;
  enclaves_ = other.enclaves_;
  threads_ = other.threads_;
}

const EnclaveMetadata* SecurityMonitor::enclave(PhysAddr eid) const {
  auto it = enclaves_.find(eid);
  return it == enclaves_.end() ? nullptr : &it->second;
}

const ThreadMetadata* SecurityMonitor::thread(PhysAddr tid) const {
  auto it = threads_.find(tid);
  return it == threads_.end() ? nullptr : &it->second;
}

Result<std::pair<DomainId, ResourceState>> SecurityMonitor::owner_of(const ResourceId& id) const {
  const ResourceRecord* rec = resources_.find(id);
  if (rec == nullptr) return Status::NoSuchResource;
  return std::make_pair(rec->owner, rec->state);
}

std::uint64_t SecurityMonitor::capabilities() const {
  std::uint64_t caps = capability::kDmaFiltering | capability::kCoreCleaning;
  if (machine_.backend().kind() == IsolationBackendKind::RegionBased) {
    caps |= capability::kRegionIsolation | capability::kCachePartitioning;
  } else {
    caps |= capability::kIntervalIsolation;
  }
  return caps;
}

std::optional<ResourceId> SecurityMonitor::memory_resource_of(PhysAddr paddr) const {
  if (!machine_.valid(paddr)) return std::nullopt;
  const IsolationBackend& b = machine_.backend();
  if (b.kind() == IsolationBackendKind::RegionBased) return ResourceId{ResourceType::MemoryRegion, b.region_of(paddr)};
  auto it = b.intervals().upper_bound(paddr);
  if (it == b.intervals().begin()) return std::nullopt;
  --it;
  if (!it->second.contains(paddr)) return std::nullopt;
  return ResourceId{ResourceType::MemoryInterval, it->first};
}

std::optional<std::pair<PhysAddr, std::uint64_t>> SecurityMonitor::memory_range(const ResourceId& id) const {
  const MachineConfig& mc = machine_.config();
  if (id.type == ResourceType::MemoryRegion && mc.backend == IsolationBackendKind::RegionBased &&
      id.rid < mc.region_count) {
    return std::make_pair(id.rid * mc.region_size, mc.region_size);
  }
  if (id.type == ResourceType::MemoryInterval) {
    if (const Interval* iv = machine_.backend().interval_at(id.rid)) return std::make_pair(iv->base, iv->size);
  }
  return std::nullopt;
}

std::vector<std::uint64_t> SecurityMonitor::pages_owned_by(DomainId domain) const {
  std::vector<std::uint64_t> out;
  const MachineConfig& mc = machine_.config();
  const IsolationBackend& b = machine_.backend();
  auto add = [&](PhysAddr base, std::uint64_t size) {
    for (std::uint64_t p = machine_.ppn_of(base); p < machine_.ppn_of(base + size); ++p) out.push_back(p);
  };
  if (b.kind() == IsolationBackendKind::RegionBased) {
    for (std::uint32_t r = 0; r < mc.region_count; ++r) {
      if (b.region_owner(r) == domain) add(r * mc.region_size, mc.region_size);
    }
  } else {
    for (const auto& [base, iv] : b.intervals()) {
      if (iv.owner == domain) add(base, iv.size);
    }
  }
  return out;
}

bool SecurityMonitor::metadata_slot_free(PhysAddr base, std::uint64_t bytes) const {
  if (base % kMetadataAlign != 0 || base < kMonitorStaticBytes) return false;
  std::uint64_t limit = machine_.config().monitor_bytes();
  if (bytes > limit || base > limit - bytes) return false;
  for (PhysAddr p = base; p < base + bytes; p += machine_.page_size()) {
    if (!machine_.backend().owner_of(p).is_monitor()) return false;
  }
  auto overlaps = [&](PhysAddr other, std::uint64_t size) { return base < other + size && other < base + bytes; };
  for (const auto& [eid, e] : enclaves_) {
    if (overlaps(eid, e.footprint())) return false;
  }
  for (const auto& [tid, t] : threads_) {
    if (overlaps(tid, kThreadMetadataBytes)) return false;
  }
  return true;
}

std::optional<PhysAddr> SecurityMonitor::free_metadata_slot(std::uint64_t bytes) const {
  std::uint64_t limit = machine_.config().monitor_bytes();
  for (PhysAddr p = kMonitorStaticBytes; p + bytes <= limit; p += kMetadataAlign) {
    if (metadata_slot_free(p, bytes)) return p;
  }
  return std::nullopt;
}

// --- transactions -----------------------------------------------------------

std::vector<GuardKey> SecurityMonitor::guards_for(CoreId core, DomainId caller, const ApiCall& request) const {
  using C = GuardKey::Class;
  std::set<GuardKey> keys{{C::Core, core}};
  auto enclave_key = [&](PhysAddr eid) { keys.insert({C::Enclave, eid}); };
  auto resource_key = [&](const ResourceId& id) {
    switch (id.type) {
      case ResourceType::Core: keys.insert({C::Core, id.rid}); break;
      case ResourceType::MemoryRegion: keys.insert({C::Region, id.rid}); break;
      case ResourceType::MemoryInterval: keys.insert({C::Interval, id.rid}); break;
      case ResourceType::Thread: keys.insert({C::Thread, id.rid}); break;
      case ResourceType::MailboxSlot: keys.insert({C::Mailbox, id.rid}); break;
    }
  };
  auto memory_key = [&](PhysAddr paddr) {
    if (auto id = memory_resource_of(paddr)) resource_key(*id);
  };
  auto current_thread = [&]() { return machine_.core(core).thread; };
  std::visit(overloaded{
                 [&](const api::CreateEnclave& a) { enclave_key(a.eid); },
                 [&](const api::AllocatePageTable& a) { enclave_key(a.eid); },
                 [&](const api::LoadPage& a) {
                   enclave_key(a.eid);
                   memory_key(a.dest);
                   memory_key(a.source);
                 },
                 [&](const api::MapShared& a) {
                   enclave_key(a.eid);
                   memory_key(a.paddr);
                 },
                 [&](const api::CreateThread& a) {
                   enclave_key(a.eid);
                   keys.insert({C::Thread, a.tid});
                 },
                 [&](const api::InitEnclave& a) { enclave_key(a.eid); },
                 [&](const api::EnterEnclave& a) {
                   enclave_key(a.eid);
                   keys.insert({C::Thread, a.tid});
                 },
                 [&](const api::DeleteEnclave& a) {
                   enclave_key(a.eid);
                   if (const EnclaveMetadata* e = enclave(a.eid)) {
                     for (PhysAddr tid : e->threads) keys.insert({C::Thread, tid});
                   }
                 },
                 [&](const api::CleanResource& a) {
                   resource_key(a.id);
                   if (const ResourceRecord* rec = resources_.find(a.id); rec && rec->owner.is_enclave()) {
                     enclave_key(rec->owner.eid());
                   }
                 },
                 [&](const api::GrantResource& a) {
                   resource_key(a.id);
                   if (a.to.is_enclave()) enclave_key(a.to.eid());
                 },
                 [&](const api::CarveInterval& a) { keys.insert({C::Interval, a.base}); },
                 [&](const api::ReleaseInterval& a) { keys.insert({C::Interval, a.base}); },
                 [&](const api::BlockResource& a) {
                   resource_key(a.id);
                   if (caller.is_enclave()) enclave_key(caller.eid());
                 },
                 [&](const api::ExitEnclave&) {
                   if (auto tid = current_thread()) keys.insert({C::Thread, *tid});
                 },
                 [&](const api::AcceptResource& a) {
                   resource_key(a.id);
                   if (caller.is_enclave()) enclave_key(caller.eid());
                 },
                 [&](const api::AcceptThread& a) {
                   if (caller.is_enclave()) enclave_key(caller.eid());
                   keys.insert({C::Thread, a.tid});
                 },
                 [&](const api::AcceptMail& a) {
                   if (caller.is_enclave()) keys.insert({C::Mailbox, mailbox_address(caller.eid(), a.mailbox)});
                 },
                 [&](const api::SendMail& a) {
                   const EnclaveMetadata* r = enclave(a.recipient);
                   if (r == nullptr) return;
                   for (std::uint32_t i = 0; i < r->mailboxes.size(); ++i) {
                     const Mailbox& mb = r->mailboxes[i];
                     if (mb.state == Mailbox::State::Accepting && mb.expected_sender == caller) {
                       keys.insert({C::Mailbox, mailbox_address(a.recipient, i)});
                       return;
                     }
                   }
                 },
                 [&](const api::GetMail& a) {
                   if (caller.is_enclave()) keys.insert({C::Mailbox, mailbox_address(caller.eid(), a.mailbox)});
                 },
                 [&](const api::GetAttestationKey&) {
                   const EnclaveMetadata* e = caller.is_enclave() ? enclave(caller.eid()) : nullptr;
                   if (e == nullptr) return;
                   for (std::uint32_t i = 0; i < e->mailboxes.size(); ++i) {
                     if (e->mailboxes[i].state == Mailbox::State::Accepting &&
                         e->mailboxes[i].expected_sender.is_monitor()) {
                       keys.insert({C::Mailbox, mailbox_address(caller.eid(), i)});
                     }
                   }
                 },
                 [&](const api::GetAexState&) {
                   if (auto tid = current_thread()) keys.insert({C::Thread, *tid});
                 },
                 [&](const api::GetField&) {},
             },
             request);
  return {keys.begin(), keys.end()};
}

Result<Transaction> SecurityMonitor::begin(CoreId core, const ApiCall& request) {
  std::lock_guard lock(mutex_);
  if (core >= machine_.core_count()) return Status::BadArgument;
  DomainId caller = machine_.core(core).domain;
  std::vector<GuardKey> keys = guards_for(core, caller, request);
  for (const GuardKey& k : keys) {
    if (held_.count(k) != 0) return Status::ConcurrentCall;
  }
  held_.insert(keys.begin(), keys.end());
  return Transaction{core, caller, request, std::move(keys)};
}

ApiResponse SecurityMonitor::commit(Transaction txn) {
  std::lock_guard lock(mutex_);
  ApiResponse response;
  if (machine_.core(txn.core).domain != txn.caller) {
    response = respond(Status::ConcurrentCall);
  } else {
    response = dispatch(txn.core, txn.caller, txn.call);
    if (journal_enabled_) journal_.push_back({txn.core, txn.call, response.status});
  }
  for (const GuardKey& k : txn.guards) held_.erase(k);
  return response;
}

void SecurityMonitor::set_journal(bool enabled) {
  std::lock_guard lock(mutex_);
  journal_enabled_ = enabled;
}

std::vector<JournalEntry> SecurityMonitor::take_journal() {
  std::lock_guard lock(mutex_);
  return std::exchange(journal_, {});
}

void SecurityMonitor::abort(Transaction txn) {
  std::lock_guard lock(mutex_);
  for (const GuardKey& k : txn.guards) held_.erase(k);
}

ApiResponse SecurityMonitor::call(CoreId core, const ApiCall& request) {
  auto txn = begin(core, request);
  if (!txn) return respond(txn.status());
  return commit(std::move(txn).value());
}

ApiResponse SecurityMonitor::dispatch(CoreId core, DomainId caller, const ApiCall& request) {
  return std::visit(
      overloaded{
          [&](const api::CreateEnclave& a) { return respond(create_enclave(caller, a)); },
          [&](const api::AllocatePageTable& a) { return respond(allocate_page_table(caller, a)); },
          [&](const api::LoadPage& a) { return respond(load_page(caller, a)); },
          [&](const api::MapShared& a) { return respond(map_shared(caller, a)); },
          [&](const api::CreateThread& a) { return respond(create_thread(caller, a)); },
          [&](const api::InitEnclave& a) { return respond(init_enclave(caller, a)); },
          [&](const api::EnterEnclave& a) { return respond(enter_enclave(core, caller, a)); },
          [&](const api::DeleteEnclave& a) { return respond(delete_enclave(caller, a)); },
          [&](const api::CleanResource& a) { return respond(clean_resource(caller, a.id)); },
          [&](const api::GrantResource& a) { return respond(grant_resource(caller, a.id, a.to)); },
          [&](const api::CarveInterval& a) { return respond(carve_interval(caller, a.base, a.size)); },
          [&](const api::ReleaseInterval& a) { return respond(release_interval(caller, a.base)); },
          [&](const api::BlockResource& a) { return respond(block_resource(caller, a.id)); },
          [&](const api::ExitEnclave&) { return respond(exit_enclave(core, caller)); },
          [&](const api::AcceptResource& a) { return respond(accept_resource(caller, a.id)); },
          [&](const api::AcceptThread& a) { return respond(accept_thread(caller, a)); },
          [&](const api::AcceptMail& a) { return respond(accept_mail(caller, a)); },
          [&](const api::SendMail& a) { return respond(send_mail(caller, a)); },
          [&](const api::GetMail& a) { return respond(get_mail(caller, a)); },
          [&](const api::GetAttestationKey&) { return respond(get_attestation_key(caller)); },
          [&](const api::GetAexState&) { return respond(get_aex_state(core, caller)); },
          [&](const api::GetField& a) { return respond(get_field(a)); },
      },
      request);
}

// --- events -------------------------------------------------------------------

Disposition SecurityMonitor::handle_event(CoreId core, const MachineEvent& event) {
  if (event.kind == EventKind::SmApiCall) {
    Disposition d;
    d.kind = Disposition::Kind::ApiHandled;
    d.response = event.call ? call(core, *event.call) : respond(Status::BadArgument);
    return d;
  }
  std::lock_guard lock(mutex_);
  return handle_event_locked(core, event);
}

Disposition SecurityMonitor::handle_event_locked(CoreId core, const MachineEvent& event) {
  Disposition d;
  d.kind = Disposition::Kind::DelegatedToOs;
  CoreState& c = machine_.core(core);
  if (!c.domain.is_enclave() || !c.thread) {
    if (event.kind == EventKind::Exit) d.response = respond(Status::NotInEnclave);
    return d;
  }
  ThreadMetadata& t = threads_.at(*c.thread);
  switch (event.kind) {
    case EventKind::Interrupt:
      aex(core);
      d.aex = true;
      return d;
    case EventKind::PageFault:
    case EventKind::EnclaveFault: {
      FaultKind kind = event.kind == EventKind::PageFault ? FaultKind::PageFault : FaultKind::EnclaveFault;
      auto handler = t.fault_handlers.find(kind);
      if (handler != t.fault_handlers.end() && !t.in_fault_handler) {
        t.fault_state = c.regs;
        t.fault_pc = c.pc;
        t.slot_writer = c.domain;
        t.in_fault_handler = true;
        c.pc = handler->second;
        c.regs[11] = event.fault_address;
        c.regs[12] = event.cause;
        d.kind = Disposition::Kind::EnclaveHandler;
        d.handler = handler->second;
        return d;
      }
      aex(core);
      d.aex = true;
      return d;
    }
    case EventKind::Exit:
      d.response = respond(exit_enclave(core, c.domain));
      return d;
    case EventKind::SmApiCall:
      break;
  }
  return d;
}

void SecurityMonitor::aex(CoreId core) {
  CoreState& c = machine_.core(core);
  ThreadMetadata& t = threads_.at(*c.thread);
  t.aex_state = c.regs;
  t.aex_pc = c.pc;
  t.aex_present = true;
  t.slot_writer = c.domain;
  t.in_fault_handler = false;
  t.state = ThreadState::Assigned;
  t.core.reset();
  if (mutated(mutation::kSkipAexCoreClean)) {
    c.domain = DomainId::os();
    c.thread.reset();
    return;
  }
  machine_.clean_core(core);
}

// --- hardware actions ---------------------------------------------------------

Result<Word> SecurityMonitor::load(CoreId core, VirtAddr vaddr) {
  std::lock_guard lock(mutex_);
  return machine_.load(core, vaddr);
}

Status SecurityMonitor::store(CoreId core, VirtAddr vaddr, Word value) {
  std::lock_guard lock(mutex_);
  return machine_.store(core, vaddr, value);
}

Status SecurityMonitor::store_page(CoreId core, VirtAddr vaddr, ByteView contents) {
  std::lock_guard lock(mutex_);
  if (vaddr % machine_.page_size() != 0 || contents.size() > machine_.page_size()) return Status::BadArgument;
  auto paddr = machine_.translate(core, vaddr, AccessKind::Write);
  if (!paddr) return paddr.status();
  DomainId writer = machine_.backend().owner_of(*paddr).is_os() ? DomainId::os() : machine_.core(core).domain;
  machine_.write_page(machine_.ppn_of(*paddr), contents, writer);
  return Status::Ok;
}

Result<Word> SecurityMonitor::dma_read(PhysAddr paddr) {
  std::lock_guard lock(mutex_);
  return machine_.dma_read(paddr);
}

Status SecurityMonitor::dma_write(PhysAddr paddr, Word value) {
  std::lock_guard lock(mutex_);
  return machine_.dma_write(paddr, value);
}

void SecurityMonitor::set_register(CoreId core, std::size_t index, Word value) {
  std::lock_guard lock(mutex_);
  machine_.core(core).regs.at(index) = value;
}

void SecurityMonitor::set_pc(CoreId core, VirtAddr pc) {
  std::lock_guard lock(mutex_);
  machine_.core(core).pc = pc;
}

// --- state image ----------------------------------------------------------------

Bytes SecurityMonitor::serialize() const {
  Bytes out;
  out.reserve(4096);
  machine_.serialize(out);
  resources_.serialize(out);
  put_u64(out, enclaves_.size());
  for (const auto& [eid, e] : enclaves_) {
    put_u64(out, eid);
    put_u8(out, static_cast<std::uint8_t>(e.state));
    put_u64(out, e.ev_base);
    put_u64(out, e.ev_size);
    if (e.final_measurement) {
      put_u8(out, 1);
      put_bytes(out, *e.final_measurement);
    } else {
      put_u8(out, 0);
      e.measurement.serialize(out);
    }
    put_u64(out, e.threads.size());
    for (PhysAddr tid : e.threads) put_u64(out, tid);
    put_u64(out, e.mailboxes.size());
    for (const Mailbox& mb : e.mailboxes) {
      put_u8(out, static_cast<std::uint8_t>(mb.state));
      put_u64(out, mb.expected_sender.raw());
      put_u64(out, mb.sender.raw());
      put_u64(out, mb.message.size());
      put_bytes(out, mb.message);
      put_bytes(out, mb.sender_measurement);
    }
    put_u64(out, e.load_cursor.value_or(~std::uint64_t{0}));
    put_u64(out, e.page_table_pages.size());
    for (std::uint64_t p : e.page_table_pages) put_u64(out, p);
    put_u64(out, e.page_table_vaddrs.size());
    for (VirtAddr v : e.page_table_vaddrs) put_u64(out, v);
    put_u8(out, e.data_loaded ? 1 : 0);
  }
  put_u64(out, threads_.size());
  for (const auto& [tid, t] : threads_) {
    put_u64(out, tid);
    put_u64(out, t.owner.value_or(~std::uint64_t{0}));
    put_u8(out, static_cast<std::uint8_t>(t.state));
    put_u64(out, t.core ? *t.core : ~std::uint64_t{0});
    put_u64(out, t.entry_point);
    put_u64(out, t.fault_handlers.size());
    for (const auto& [kind, va] : t.fault_handlers) {
      put_u8(out, static_cast<std::uint8_t>(kind));
      put_u64(out, va);
    }
    put_u8(out, t.aex_present ? 1 : 0);
    for (Word w : t.aex_state) put_u64(out, w);
    put_u64(out, t.aex_pc);
    for (Word w : t.fault_state) put_u64(out, w);
    put_u64(out, t.fault_pc);
    put_u8(out, t.in_fault_handler ? 1 : 0);
    put_u64(out, t.slot_writer ? t.slot_writer->raw() : 0);
  }
  return out;
}

Digest SecurityMonitor::state_hash() const { return crypto::sha3_256(serialize()); }

}  // namespace smon
