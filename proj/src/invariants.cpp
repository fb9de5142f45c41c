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

#include "smon/invariants.hpp"

#include <algorithm>
#include <sstream>

namespace smon {

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

bool is_memory(const ResourceId& id) {
  return id.type == ResourceType::MemoryRegion || id.type == ResourceType::MemoryInterval;
}

class Checker {
 public:
  explicit Checker(std::vector<InvariantViolation>& out) : out_(out) {}
  void fail(std::string_view invariant, std::string detail) { out_.push_back({std::string(invariant), std::move(detail)}); }

 private:
  std::vector<InvariantViolation>& out_;
};

std::array<Word, 4> secret_words(const SecurityMonitor& sm) {
  std::array<Word, 4> w{};
  const auto& key = sm.sm_identity().secret_key;
  for (int i = 0; i < 4; ++i) {
    for (int b = 0; b < 8; ++b) w[i] |= static_cast<Word>(key[i * 8 + b]) << (8 * b);
  }
  return w;
}

bool holds_secret(ByteView bytes, const std::array<Word, 4>& words) {
  for (std::size_t off = 0; off + 8 <= bytes.size(); off += 8) {
    Word v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<Word>(bytes[off + b]) << (8 * b);
    if (v != 0 && std::find(words.begin(), words.end(), v) != words.end()) return true;
  }
  return false;
}

bool holds_secret(const RegisterFile& regs, const std::array<Word, 4>& words) {
  for (Word v : regs) {
    if (v != 0 && std::find(words.begin(), words.end(), v) != words.end()) return true;
  }
  return false;
}

void ownership_partition(const SecurityMonitor& sm, Checker& c) {
  const Machine& m = sm.machine();
  const IsolationBackend& backend = m.backend();
  for (const auto& [id, rec] : sm.resources().records()) {
    if (!is_memory(id)) continue;
    DomainId hw;
    if (id.type == ResourceType::MemoryRegion) {
      hw = backend.region_owner(static_cast<std::uint32_t>(id.rid));
    } else {
      const Interval* iv = backend.interval_at(id.rid);
      if (iv == nullptr) {
        c.fail(invariant::kOwnershipPartition, id.str() + " has a record but no interval");
        continue;
      }
      hw = iv->owner;
    }
    bool handed_over = rec.state == ResourceState::Owned || rec.state == ResourceState::Blocked;
    DomainId expected = handed_over ? rec.owner : DomainId::os();
    if (hw != expected) {
      c.fail(invariant::kOwnershipPartition,
             id.str() + " is " + std::string(to_string(rec.state)) + " by " + rec.owner.str() + " but hardware assigns it to " + hw.str());
    }
  }
  for (const auto& [domain, space] : m.address_spaces()) {
    for (const auto& [vpn, map] : space.table.entries) {
      DomainId o = backend.owner_of(m.page_base(map.ppn));
      if (o != domain) {
        c.fail(invariant::kOwnershipPartition, domain.str() + " maps vpn " + hex(vpn) + " to page " + hex(map.ppn) +
                                                   " owned by " + o.str());
      }
    }
    for (const auto& [vpn, ppn] : space.shared) {
      if (!backend.owner_of(m.page_base(ppn)).is_os()) {
        c.fail(invariant::kOwnershipPartition, domain.str() + " shares page " + hex(ppn) + " that left the OS");
      }
    }
  }
  for (CoreId core = 0; core < m.core_count(); ++core) {
    DomainId current = m.core(core).domain;
    for (const TlbEntry& e : m.tlb(core)) {
      if (e.domain != current) {
        c.fail(invariant::kOwnershipPartition, "core " + std::to_string(core) + " running " + current.str() +
                                                   " caches a translation of " + e.domain.str());
        continue;
      }
      auto access = m.check_access(e.domain, m.page_base(e.ppn), AccessKind::Read);
      if (!access || *access != Access::Allowed) {
        c.fail(invariant::kOwnershipPartition, "core " + std::to_string(core) + " caches vpn " + hex(e.vpn) +
                                                   " -> page " + hex(e.ppn) + " that " + e.domain.str() +
                                                   " may no longer access");
      }
    }
  }
}

void clean_before_reuse(const SecurityMonitor& sm, Checker& c) {
  const Machine& m = sm.machine();
  for (const auto& [ppn, bytes] : m.pages()) {
    DomainId owner = m.backend().owner_of(m.page_base(ppn));
    if (owner.is_monitor()) continue;
    for (DomainId w : m.page_writers(ppn)) {
      if (w != owner && !w.is_os()) {
        c.fail(invariant::kCleanBeforeReuse, "page " + hex(ppn) + " owned by " + owner.str() + " still holds data of " + w.str());
      }
    }
  }
  for (const auto& [id, rec] : sm.resources().records()) {
    if (rec.state != ResourceState::Clean) continue;
    if (is_memory(id)) {
      auto range = sm.memory_range(id);
      if (!range) continue;
      for (PhysAddr p = range->first; p < range->first + range->second; p += m.page_size()) {
        const auto& writers = m.page_writers(m.ppn_of(p));
        if (std::any_of(writers.begin(), writers.end(), [](DomainId w) { return !w.is_os(); })) {
          c.fail(invariant::kCleanBeforeReuse, id.str() + " is Clean but page " + hex(m.ppn_of(p)) +
                                                   " still holds enclave data");
          break;
        }
      }
    } else if (id.type == ResourceType::Thread) {
      const ThreadMetadata* t = sm.thread(id.rid);
      if (t != nullptr && (t->slot_writer || t->aex_present || t->aex_state != RegisterFile{})) {
        c.fail(invariant::kCleanBeforeReuse, id.str() + " is Clean but keeps saved register state");
      }
    }
  }
}

void seal_state(const SecurityMonitor& sm, Checker& c) {
  const Machine& m = sm.machine();
  for (CoreId core = 0; core < m.core_count(); ++core) {
    DomainId d = m.core(core).domain;
    if (!d.is_enclave()) continue;
    const EnclaveMetadata* e = sm.enclave(d.eid());
    if (e == nullptr || e->state != EnclaveState::Initialized) {
      c.fail(invariant::kSealMonotonicity, "core " + std::to_string(core) + " executes " + d.str() + " which is not sealed");
    }
  }
}

void aex_state(const SecurityMonitor& sm, Checker& c) {
  const Machine& m = sm.machine();
  for (const auto& [tid, t] : sm.threads()) {
    if (!t.slot_writer) continue;
    if (!t.owner || *t.slot_writer != DomainId::enclave(*t.owner)) {
      c.fail(invariant::kAexConfidentiality, "thread " + hex(tid) + " holds registers of " + t.slot_writer->str() +
                                                 " but belongs to " + (t.owner ? hex(*t.owner) : std::string("nobody")));
    }
  }
  for (CoreId core = 0; core < m.core_count(); ++core) {
    const CoreState& cs = m.core(core);
    if (!cs.domain.is_enclave() && cs.thread) {
      c.fail(invariant::kAexConfidentiality, "core " + std::to_string(core) + " runs the OS with thread " + hex(*cs.thread) + " attached");
    }
  }
}

void thread_exclusivity(const SecurityMonitor& sm, Checker& c) {
  const Machine& m = sm.machine();
  std::map<PhysAddr, CoreId> running;
  for (CoreId core = 0; core < m.core_count(); ++core) {
    const CoreState& cs = m.core(core);
    if (!cs.thread) continue;
    auto [it, fresh] = running.emplace(*cs.thread, core);
    if (!fresh) {
      c.fail(invariant::kThreadExclusivity, "thread " + hex(*cs.thread) + " runs on cores " + std::to_string(it->second) +
                                                " and " + std::to_string(core));
    }
    const ThreadMetadata* t = sm.thread(*cs.thread);
    if (t == nullptr || t->state != ThreadState::Scheduled || t->core != core ||
        !t->owner || DomainId::enclave(*t->owner) != cs.domain) {
      c.fail(invariant::kThreadExclusivity, "core " + std::to_string(core) + " runs thread " + hex(*cs.thread) +
                                                " whose metadata disagrees");
    }
  }
  for (const auto& [tid, t] : sm.threads()) {
    bool scheduled = t.state == ThreadState::Scheduled;
    if (scheduled != t.core.has_value() || (scheduled && running.count(tid) == 0)) {
      c.fail(invariant::kThreadExclusivity, "thread " + hex(tid) + " is " + std::string(to_string(t.state)) +
                                                " but its core binding disagrees");
    }
  }
}

void mail_authenticity(const SecurityMonitor& sm, Checker& c) {
  for (const auto& [eid, e] : sm.enclaves()) {
    for (std::size_t i = 0; i < e.mailboxes.size(); ++i) {
      const Mailbox& mb = e.mailboxes[i];
      if (mb.state != Mailbox::State::Full) continue;
      std::string where = "mailbox " + std::to_string(i) + " of " + e.domain().str();
      if (mb.sender != mb.expected_sender) {
        c.fail(invariant::kMailAuthenticity, where + " expected " + mb.expected_sender.str() + " but holds mail from " + mb.sender.str());
        continue;
      }
      if (!mb.sender.is_enclave()) continue;
      const EnclaveMetadata* s = sm.enclave(mb.sender.eid());
      if (s != nullptr && s->final_measurement && *s->final_measurement != mb.sender_measurement) {
        c.fail(invariant::kMailAuthenticity, where + " carries a measurement that is not the sender's");
      }
    }
  }
}

void key_confinement(const SecurityMonitor& sm, Checker& c) {
  auto words = secret_words(sm);
  const Machine& m = sm.machine();
  auto trusted = [&](DomainId d) { return d.is_monitor() || (d.is_enclave() && is_signing_enclave(sm, d.eid())); };
  for (const auto& [ppn, bytes] : m.pages()) {
    DomainId owner = m.backend().owner_of(m.page_base(ppn));
    if (!trusted(owner) && holds_secret(bytes, words)) {
      c.fail(invariant::kKeyConfinement, "page " + hex(ppn) + " owned by " + owner.str() + " holds attestation key material");
    }
  }
  for (const auto& [eid, e] : sm.enclaves()) {
    if (trusted(e.domain())) continue;
    for (std::size_t i = 0; i < e.mailboxes.size(); ++i) {
      if (holds_secret(e.mailboxes[i].message, words)) {
        c.fail(invariant::kKeyConfinement, "mailbox " + std::to_string(i) + " of " + e.domain().str() + " holds attestation key material");
      }
    }
  }
  for (CoreId core = 0; core < m.core_count(); ++core) {
    const CoreState& cs = m.core(core);
    if (!trusted(cs.domain) && holds_secret(cs.regs, words)) {
      c.fail(invariant::kKeyConfinement, "core " + std::to_string(core) + " running " + cs.domain.str() +
                                             " holds attestation key material in registers");
    }
  }
  for (const auto& [tid, t] : sm.threads()) {
    if (t.owner && trusted(DomainId::enclave(*t.owner))) continue;
    if (holds_secret(t.aex_state, words) || holds_secret(t.fault_state, words)) {
      c.fail(invariant::kKeyConfinement, "thread " + hex(tid) + " saved registers hold attestation key material");
    }
  }
}

}  // namespace

bool is_signing_enclave(const SecurityMonitor& sm, PhysAddr eid) {
  const auto& expected = sm.config().signing_enclave_measurement;
  const EnclaveMetadata* e = sm.enclave(eid);
  return expected && e != nullptr && e->final_measurement == expected;
}

std::vector<InvariantViolation> check_state(const SecurityMonitor& sm) {
  std::vector<InvariantViolation> out;
  Checker c(out);
  ownership_partition(sm, c);
  clean_before_reuse(sm, c);
  seal_state(sm, c);
  aex_state(sm, c);
  thread_exclusivity(sm, c);
  mail_authenticity(sm, c);
  key_confinement(sm, c);
  return out;
}

std::vector<InvariantViolation> check_transition(const SecurityMonitor& before, const SecurityMonitor& after,
                                                 const Action& action) {
  std::vector<InvariantViolation> out;
  Checker c(out);
  DomainId actor = before.machine().core(action.core).domain;
  bool api = action.kind == Action::Kind::Api;
  const auto* del = api ? std::get_if<api::DeleteEnclave>(&*action.call) : nullptr;

  // Only the owner, or deletion of the owner, moves an enclave's resource out of Owned.
  for (const auto& [id, rec] : before.resources().records()) {
    if (!rec.owner.is_enclave() || rec.state != ResourceState::Owned) continue;
    const ResourceRecord* now = after.resources().find(id);
    if (now != nullptr && now->owner == rec.owner && now->state == ResourceState::Owned) continue;
    bool by_owner = api && actor == rec.owner;
    bool by_delete = del != nullptr && DomainId::enclave(del->eid) == rec.owner;
    if (!by_owner && !by_delete) {
      c.fail(invariant::kOwnershipPartition, id.str() + " owned by " + rec.owner.str() + " changed through " +
                                                 actor.str() + "'s " + verb_of(action));
    }
  }

  for (const auto& [eid, e] : before.enclaves()) {
    const EnclaveMetadata* n = after.enclave(eid);
    if (e.state == EnclaveState::Initialized) {
      if (n == nullptr || n->state == EnclaveState::Deleted) continue;
      const AddressSpace* s0 = before.machine().address_space(e.domain());
      const AddressSpace* s1 = after.machine().address_space(e.domain());
      // Mappings of memory the enclave gave up may disappear; none may appear or change.
      bool same_tables = s1 == nullptr || (s0 != nullptr && s0->table.owner == s1->table.owner &&
                                           std::all_of(s1->table.entries.begin(), s1->table.entries.end(),
                                                       [&](const auto& kv) {
                                                         auto it = s0->table.entries.find(kv.first);
                                                         return it != s0->table.entries.end() && it->second == kv.second;
                                                       }));
      if (n->state != EnclaveState::Initialized || n->final_measurement != e.final_measurement || !same_tables ||
          n->load_cursor != e.load_cursor) {
        c.fail(invariant::kSealMonotonicity, e.domain().str() + " changed its sealed image through " + verb_of(action));
      }
    } else if (e.state == EnclaveState::Deleted && n != nullptr && n->state != EnclaveState::Deleted) {
      c.fail(invariant::kSealMonotonicity, e.domain().str() + " came back from deletion");
    }
  }

  const Machine& m0 = before.machine();
  const Machine& m1 = after.machine();
  for (CoreId core = 0; core < m0.core_count(); ++core) {
    if (m0.core(core).domain.is_enclave() && !m1.core(core).domain.is_enclave()) {
      const CoreState& cs = m1.core(core);
      if (cs.regs != RegisterFile{} || cs.pc != 0) {
        c.fail(invariant::kAexConfidentiality, "core " + std::to_string(core) + " returned to " + cs.domain.str() +
                                                   " with registers of " + m0.core(core).domain.str());
      }
    }
  }
  for (const auto& [tid, t] : before.threads()) {
    if (!t.aex_present || t.state == ThreadState::Scheduled) continue;
    const ThreadMetadata* n = after.thread(tid);
    if (n == nullptr || n->owner != t.owner || !n->aex_present) continue;
    if (n->aex_state != t.aex_state || n->aex_pc != t.aex_pc) {
      c.fail(invariant::kAexConfidentiality, "saved state of suspended thread " + hex(tid) + " changed through " +
                                                 actor.str() + "'s " + verb_of(action));
    }
  }
  return out;
}

}  // namespace smon
