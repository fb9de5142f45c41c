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

namespace {

bool is_memory(const ResourceId& id) {
  return id.type == ResourceType::MemoryRegion || id.type == ResourceType::MemoryInterval;
}

}  // namespace

Status SecurityMonitor::block_resource(DomainId caller, const ResourceId& id) {
  ResourceRecord* rec = resources_.find(id);
  if (rec == nullptr) return Status::NoSuchResource;
  if (id.type == ResourceType::MailboxSlot) return Status::BadArgument;
  if (rec->owner != caller && !mutated(mutation::kSkipBlockOwnerCheck)) return Status::NotOwner;
  auto next = next_resource_state(rec->state, ResourceEdge::Block);
  if (!next) return next.status();
  if (id.type == ResourceType::Core && machine_.core(static_cast<CoreId>(id.rid)).domain.is_enclave()) {
    return Status::CoreBusy;
  }
  if (id.type == ResourceType::Thread) {
    ThreadMetadata& t = threads_.at(id.rid);
    if (t.state == ThreadState::Scheduled) return Status::ThreadBusy;
    t.state = ThreadState::Blocked;
  }
  rec->state = *next;
  return Status::Ok;
}

Status SecurityMonitor::clean_resource(DomainId caller, const ResourceId& id) {
  if (!caller.is_os()) return Status::NotOS;
  ResourceRecord* rec = resources_.find(id);
  if (rec == nullptr) return Status::NoSuchResource;
  auto next = next_resource_state(rec->state, ResourceEdge::Clean);
  if (!next) return next.status();
  DomainId former = rec->owner;
  switch (id.type) {
    case ResourceType::MemoryRegion:
    case ResourceType::MemoryInterval:
      scrub_memory(id, former);
      break;
    case ResourceType::Core:
      machine_.clean_core(static_cast<CoreId>(id.rid));
      break;
    case ResourceType::Thread:
      scrub_thread(threads_.at(id.rid));
      break;
    case ResourceType::MailboxSlot: {
      // Mailboxes live inside the enclave metadata and go away with it.
      if (former.is_enclave()) {
        auto it = enclaves_.find(former.eid());
        if (it != enclaves_.end()) {
          for (std::uint32_t i = 0; i < it->second.mailboxes.size(); ++i) {
            if (mailbox_address(former.eid(), i) == id.rid) it->second.mailboxes[i] = Mailbox{};
          }
        }
      }
      resources_.erase(id);
      if (former.is_enclave()) reclaim_enclave_slot(former.eid());
      return Status::Ok;
    }
  }
  rec->owner = DomainId::os();
  rec->state = *next;
  if (former.is_enclave()) reclaim_enclave_slot(former.eid());
  return Status::Ok;
}

void SecurityMonitor::scrub_memory(const ResourceId& id, DomainId former_owner) {
  auto range = memory_range(id);
  if (!range) return;
  auto [base, size] = *range;
  if (!mutated(mutation::kSkipScrubOnClean)) machine_.zero_range(base, size);
  if (!mutated(mutation::kSkipTlbShootdown)) machine_.tlb_shootdown(base, size);
  if (id.type == ResourceType::MemoryRegion) {
    machine_.backend().set_region_owner(static_cast<std::uint32_t>(id.rid), DomainId::os());
  } else {
    machine_.backend().set_interval_owner(id.rid, DomainId::os());
  }
  if (AddressSpace* space = former_owner.is_enclave() ? machine_.address_space(former_owner) : nullptr) {
    std::uint64_t first = machine_.ppn_of(base);
    std::uint64_t last = machine_.ppn_of(base + size - 1);
    std::erase_if(space->table.entries, [&](const auto& kv) { return kv.second.ppn >= first && kv.second.ppn <= last; });
  }
}

void SecurityMonitor::scrub_thread(ThreadMetadata& t) {
  if (t.owner) {
    auto it = enclaves_.find(*t.owner);
    if (it != enclaves_.end()) it->second.threads.erase(t.tid);
  }
  PhysAddr tid = t.tid;
  if (mutated(mutation::kSkipScrubOnClean)) {
    t.owner.reset();
    t.state = ThreadState::Created;
    return;
  }
  t = ThreadMetadata{};
  t.tid = tid;
}

void SecurityMonitor::assign_memory(const ResourceId& id, DomainId owner) {
  auto range = memory_range(id);
  if (!range) return;
  if (id.type == ResourceType::MemoryRegion) {
    machine_.backend().set_region_owner(static_cast<std::uint32_t>(id.rid), owner);
  } else {
    machine_.backend().set_interval_owner(id.rid, owner);
  }
  if (!mutated(mutation::kSkipTlbShootdown)) machine_.tlb_shootdown(range->first, range->second);
}

Status SecurityMonitor::grant_resource(DomainId caller, const ResourceId& id, DomainId to) {
  if (!caller.is_os()) return Status::NotOS;
  ResourceRecord* rec = resources_.find(id);
  if (rec == nullptr) return Status::NoSuchResource;
  if (id.type == ResourceType::MailboxSlot || to.is_monitor()) return Status::BadArgument;
  if (id.type == ResourceType::Core && to.is_enclave()) return Status::BadArgument;
  if (to.is_os()) {
    auto next = next_resource_state(rec->state, ResourceEdge::Reclaim);
    if (!next) return next.status();
    rec->owner = DomainId::os();
    rec->state = *next;
    return Status::Ok;
  }
  auto next = next_resource_state(rec->state, ResourceEdge::Offer);
  if (!next) return next.status();
  auto it = enclaves_.find(to.eid());
  if (it == enclaves_.end() || it->second.state == EnclaveState::Deleted) return Status::NoSuchDomain;
  EnclaveMetadata& e = it->second;
  if (e.state == EnclaveState::Loading) {
    // A loading enclave cannot run to accept; memory is handed over directly.
    if (!is_memory(id)) return Status::WrongState;
    assign_memory(id, to);
    rec->owner = to;
    rec->state = ResourceState::Owned;
    return Status::Ok;
  }
  if (!config_.allow_post_init_accept) return Status::WrongState;
  rec->state = *next;
  rec->offered_to = to;
  return Status::Ok;
}

Status SecurityMonitor::accept_resource(DomainId caller, const ResourceId& id) {
  if (!caller.is_enclave()) return Status::NotEnclave;
  ResourceRecord* rec = resources_.find(id);
  if (rec == nullptr) return Status::NoSuchResource;
  if (id.type == ResourceType::Thread) return Status::BadArgument;
  if (rec->state != ResourceState::Offered || rec->offered_to != caller) return Status::NotOffered;
  if (is_memory(id)) assign_memory(id, caller);
  rec->owner = caller;
  rec->state = ResourceState::Owned;
  return Status::Ok;
}

Status SecurityMonitor::accept_thread(DomainId caller, const api::AcceptThread& a) {
  if (!caller.is_enclave()) return Status::NotEnclave;
  ResourceRecord* rec = resources_.find({ResourceType::Thread, a.tid});
  if (rec == nullptr) return Status::NoSuchThread;
  if (rec->state != ResourceState::Offered || rec->offered_to != caller) return Status::NotOffered;
  EnclaveMetadata& e = enclaves_.at(caller.eid());
  if (!e.in_evrange(a.entry_point)) return Status::BadArgument;
  for (const auto& [kind, va] : a.handlers) {
    if (!e.in_evrange(va)) return Status::BadArgument;
  }
  ThreadMetadata& t = threads_.at(a.tid);
  t.owner = caller.eid();
  t.state = ThreadState::Assigned;
  t.entry_point = a.entry_point;
  t.fault_handlers = a.handlers;
  e.threads.insert(a.tid);
  rec->owner = caller;
  rec->state = ResourceState::Owned;
  return Status::Ok;
}

Status SecurityMonitor::carve_interval(DomainId caller, PhysAddr base, std::uint64_t size) {
  if (!caller.is_os()) return Status::NotOS;
  if (machine_.backend().kind() != IsolationBackendKind::IntervalBased) return Status::BadArgument;
  Status s = machine_.backend().add_interval(base, size, DomainId::os());
  if (s != Status::Ok) return s;
  resources_.insert({{ResourceType::MemoryInterval, base}, DomainId::os(), ResourceState::Owned, {}});
  return Status::Ok;
}

Status SecurityMonitor::release_interval(DomainId caller, PhysAddr base) {
  if (!caller.is_os()) return Status::NotOS;
  ResourceRecord* rec = resources_.find({ResourceType::MemoryInterval, base});
  if (rec == nullptr) return Status::NoSuchResource;
  if (rec->owner != DomainId::os()) return Status::NotOwner;
  if (rec->state != ResourceState::Owned) return Status::WrongState;
  machine_.backend().remove_interval(base);
  resources_.erase(rec->id);
  return Status::Ok;
}

void SecurityMonitor::reclaim_enclave_slot(PhysAddr eid) {
  auto it = enclaves_.find(eid);
  if (it == enclaves_.end() || it->second.state != EnclaveState::Deleted) return;
  DomainId d = it->second.domain();
  for (const auto& [id, rec] : resources_.records()) {
    if (rec.owner == d) return;
  }
  machine_.remove_address_space(d);
  enclaves_.erase(it);
}

}  // namespace smon
