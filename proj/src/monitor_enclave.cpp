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

namespace smon {

Status SecurityMonitor::create_enclave(DomainId caller, const api::CreateEnclave& a) {
  if (!caller.is_os()) return Status::NotOS;
  std::uint64_t page = machine_.page_size();
  if (a.mailbox_count > kMaxMailboxes) return Status::BadArgument;
  if (a.ev_size == 0 || a.ev_base % page != 0 || a.ev_size % page != 0 || a.ev_base + a.ev_size < a.ev_base) {
    return Status::BadArgument;
  }
  if (a.eid % kMetadataAlign != 0) return Status::BadArgument;
  if (!metadata_slot_free(a.eid, enclave_metadata_bytes(a.mailbox_count))) return Status::BadAddress;

  EnclaveMetadata e;
  e.eid = a.eid;
  e.ev_base = a.ev_base;
  e.ev_size = a.ev_size;
  e.mailboxes.resize(a.mailbox_count);
  e.measurement.extend(CreateRecord{a.ev_base, a.ev_size, a.mailbox_count, sm_.sm_image_hash, capabilities()});
  for (std::uint32_t i = 0; i < a.mailbox_count; ++i) {
    resources_.insert({{ResourceType::MailboxSlot, mailbox_address(a.eid, i)}, e.domain(), ResourceState::Owned, {}});
  }
  AddressSpace space;
  space.ev_base = a.ev_base;
  space.ev_size = a.ev_size;
  machine_.install_address_space(e.domain(), std::move(space));
  enclaves_.emplace(a.eid, std::move(e));
  return Status::Ok;
}

Status SecurityMonitor::check_loading(DomainId caller, PhysAddr eid, EnclaveMetadata*& out) {
  if (!caller.is_os()) return Status::NotOS;
  auto it = enclaves_.find(eid);
  if (it == enclaves_.end() || it->second.state == EnclaveState::Deleted) return Status::NoSuchEnclave;
  bool sealed = it->second.state != EnclaveState::Loading;
  if (sealed && !mutated(mutation::kSkipSealCheck)) return Status::WrongState;
  out = &it->second;
  return Status::Ok;
}

Status SecurityMonitor::allocate_page_table(DomainId caller, const api::AllocatePageTable& a) {
  EnclaveMetadata* e = nullptr;
  if (Status s = check_loading(caller, a.eid, e); s != Status::Ok) return s;
  if (a.vaddr % machine_.page_size() != 0 || !e->in_evrange(a.vaddr)) return Status::BadArgument;
  if (e->data_loaded) return Status::TablesFirstViolation;
  if (e->page_table_vaddrs.count(a.vaddr) != 0) return Status::AliasViolation;
  std::optional<std::uint64_t> page;
  for (std::uint64_t ppn : pages_owned_by(e->domain())) {
    if (!e->load_cursor || ppn > *e->load_cursor) {
      page = ppn;
      break;
    }
  }
  if (!page) return Status::OutOfEnclaveMemory;
  machine_.zero_range(machine_.page_base(*page), machine_.page_size());
  e->load_cursor = *page;
  e->page_table_pages.push_back(*page);
  e->page_table_vaddrs.insert(a.vaddr);
  if (!e->measurement.finalized()) e->measurement.extend(PageTableRecord{a.vaddr});
  return Status::Ok;
}

Status SecurityMonitor::load_page(DomainId caller, const api::LoadPage& a) {
  EnclaveMetadata* e = nullptr;
  if (Status s = check_loading(caller, a.eid, e); s != Status::Ok) return s;
  std::uint64_t page = machine_.page_size();
  if (a.vaddr % page != 0 || !e->in_evrange(a.vaddr)) return Status::BadArgument;
  if (a.perms == 0 || a.perms > perm::kAll) return Status::BadArgument;
  if (a.dest % page != 0 || !machine_.valid(a.dest) || machine_.backend().owner_of(a.dest) != e->domain()) {
    return Status::BadArgument;
  }
  if (a.source % page != 0) return Status::BadArgument;
  auto readable = machine_.check_access(DomainId::os(), a.source, AccessKind::Read);
  if (!readable || *readable != Access::Allowed) return Status::BadArgument;
  if (e->page_table_pages.empty()) return Status::TablesFirstViolation;
  AddressSpace* space = machine_.address_space(e->domain());
  std::uint64_t vpn = a.vaddr / page;
  if (space->table.entries.count(vpn) != 0) return Status::AliasViolation;
  std::uint64_t ppn = machine_.ppn_of(a.dest);
  if (e->load_cursor && ppn <= *e->load_cursor) return Status::OrderViolation;

  machine_.copy_page(machine_.ppn_of(a.source), ppn);
  space->table.entries[vpn] = Mapping{ppn, a.perms};
  e->load_cursor = ppn;
  e->data_loaded = true;
  if (!e->measurement.finalized()) {
    e->measurement.extend(LoadPageRecord{a.vaddr, a.perms, machine_.read_page(ppn)});
  }
  return Status::Ok;
}

Status SecurityMonitor::map_shared(DomainId caller, const api::MapShared& a) {
  EnclaveMetadata* e = nullptr;
  if (Status s = check_loading(caller, a.eid, e); s != Status::Ok) return s;
  std::uint64_t page = machine_.page_size();
  if (a.vaddr % page != 0 || e->in_evrange(a.vaddr)) return Status::BadArgument;
  if (a.paddr % page != 0 || !machine_.valid(a.paddr) || !machine_.backend().owner_of(a.paddr).is_os()) {
    return Status::BadArgument;
  }
  AddressSpace* space = machine_.address_space(e->domain());
  std::uint64_t vpn = a.vaddr / page;
  if (space->shared.count(vpn) != 0) return Status::AliasViolation;
  space->shared[vpn] = machine_.ppn_of(a.paddr);
  return Status::Ok;
}

Status SecurityMonitor::create_thread(DomainId caller, const api::CreateThread& a) {
  EnclaveMetadata* e = nullptr;
  if (Status s = check_loading(caller, a.eid, e); s != Status::Ok) return s;
  if (!e->in_evrange(a.entry_point)) return Status::BadArgument;
  for (const auto& [kind, va] : a.handlers) {
    if (!e->in_evrange(va)) return Status::BadArgument;
  }
  if (a.tid % kMetadataAlign != 0) return Status::BadArgument;
  if (!metadata_slot_free(a.tid, kThreadMetadataBytes)) return Status::BadAddress;

  ThreadMetadata t;
  t.tid = a.tid;
  t.owner = a.eid;
  t.state = ThreadState::Assigned;
  t.entry_point = a.entry_point;
  t.fault_handlers = a.handlers;
  threads_.emplace(a.tid, std::move(t));
  resources_.insert({{ResourceType::Thread, a.tid}, e->domain(), ResourceState::Owned, {}});
  e->threads.insert(a.tid);
  if (!e->measurement.finalized()) e->measurement.extend(ThreadRecord{a.entry_point, a.handlers});
  return Status::Ok;
}

Result<Digest> SecurityMonitor::init_enclave(DomainId caller, const api::InitEnclave& a) {
  if (!caller.is_os()) return Status::NotOS;
  auto it = enclaves_.find(a.eid);
  if (it == enclaves_.end() || it->second.state == EnclaveState::Deleted) return Status::NoSuchEnclave;
  EnclaveMetadata& e = it->second;
  if (e.state != EnclaveState::Loading) return Status::WrongState;
  if (e.threads.empty()) return Status::NoThreads;
  e.final_measurement = e.measurement.finalize();
  e.state = EnclaveState::Initialized;
  return *e.final_measurement;
}

Status SecurityMonitor::enter_enclave(CoreId core, DomainId caller, const api::EnterEnclave& a) {
  if (!caller.is_os()) return Status::NotOS;
  auto it = enclaves_.find(a.eid);
  if (it == enclaves_.end() || it->second.state == EnclaveState::Deleted) return Status::NoSuchEnclave;
  EnclaveMetadata& e = it->second;
  if (e.state != EnclaveState::Initialized) return Status::WrongState;
  auto tit = threads_.find(a.tid);
  if (tit == threads_.end()) return Status::NoSuchThread;
  ThreadMetadata& t = tit->second;
  const ResourceRecord* trec = resources_.find({ResourceType::Thread, a.tid});
  if (t.owner != a.eid || trec == nullptr || trec->owner != e.domain()) return Status::NotOwner;
  if (t.state == ThreadState::Scheduled && !mutated(mutation::kSkipThreadBusyCheck)) return Status::ThreadBusy;
  if (trec->state != ResourceState::Owned) return Status::WrongState;
  if (t.state != ThreadState::Assigned && t.state != ThreadState::Scheduled) return Status::WrongState;
  const ResourceRecord* crec = resources_.find({ResourceType::Core, core});
  if (crec == nullptr || crec->state != ResourceState::Owned) return Status::CoreBusy;

  machine_.clean_core(core);
  CoreState& c = machine_.core(core);
  c.domain = e.domain();
  c.thread = a.tid;
  c.pc = t.entry_point;
  c.regs[10] = t.aex_present ? 1 : 0;
  t.state = ThreadState::Scheduled;
  t.core = core;
  return Status::Ok;
}

Status SecurityMonitor::exit_enclave(CoreId core, DomainId caller) {
  CoreState& c = machine_.core(core);
  if (!caller.is_enclave() || !c.domain.is_enclave() || !c.thread) return Status::NotInEnclave;
  ThreadMetadata& t = threads_.at(*c.thread);
  t.state = ThreadState::Assigned;
  t.core.reset();
  t.aex_present = false;
  t.in_fault_handler = false;
  machine_.clean_core(core);
  return Status::Ok;
}

Status SecurityMonitor::delete_enclave(DomainId caller, const api::DeleteEnclave& a) {
  if (!caller.is_os()) return Status::NotOS;
  auto it = enclaves_.find(a.eid);
  if (it == enclaves_.end() || it->second.state == EnclaveState::Deleted) return Status::NoSuchEnclave;
  EnclaveMetadata& e = it->second;
  for (PhysAddr tid : e.threads) {
    if (threads_.at(tid).state == ThreadState::Scheduled) return Status::ThreadsScheduled;
  }
  DomainId d = e.domain();
  std::vector<ResourceId> offered;
  for (const auto& [id, rec] : resources_.records()) {
    if (rec.state == ResourceState::Offered && rec.offered_to == d) offered.push_back(id);
  }
  for (const ResourceId& id : offered) resources_.find(id)->state = ResourceState::Clean;
  for (const ResourceId& id : resources_.owned_by(d)) {
    ResourceRecord* rec = resources_.find(id);
    if (rec->state != ResourceState::Owned) continue;
    rec->state = ResourceState::Blocked;
    if (id.type == ResourceType::Thread) threads_.at(id.rid).state = ThreadState::Blocked;
  }
  e.state = EnclaveState::Deleted;
  reclaim_enclave_slot(a.eid);
  return Status::Ok;
}

Result<AexSnapshot> SecurityMonitor::get_aex_state(CoreId core, DomainId caller) {
  const CoreState& c = machine_.core(core);
  if (!caller.is_enclave() || !c.thread) return Status::NotEnclave;
  const ThreadMetadata& t = threads_.at(*c.thread);
  return AexSnapshot{t.aex_state, t.aex_pc};
}

}  // namespace smon
