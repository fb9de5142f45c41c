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

#include "smon/explorer.hpp"

#include <chrono>
#include <string_view>
#include <unordered_map>

namespace smon {

namespace {

bool is_memory(const ResourceId& id) {
  return id.type == ResourceType::MemoryRegion || id.type == ResourceType::MemoryInterval;
}

std::vector<PhysAddr> default_probes(const SecurityMonitor& sm) {
  std::vector<PhysAddr> out;
  for (const auto& [id, rec] : sm.resources().records()) {
    if (!is_memory(id) || rec.owner.is_monitor()) continue;
    if (auto range = sm.memory_range(id)) out.push_back(range->first);
  }
  return out;
}

std::optional<PhysAddr> next_load_dest(const SecurityMonitor& sm, const EnclaveMetadata& e) {
  auto owned = sm.pages_owned_by(e.domain());
  for (std::uint64_t ppn : owned) {
    if (!e.load_cursor || ppn > *e.load_cursor) return sm.machine().page_base(ppn);
  }
  if (!owned.empty()) return sm.machine().page_base(owned.front());
  return std::nullopt;
}

class Search {
 public:
  Search(const Alphabet& alphabet, const ExploreOptions& options, ExplorationReport& report)
      : alphabet_(alphabet), options_(options), report_(report) {}

  void run(const SecurityMonitor& root) {
    seen_[state_key(root)] = 0;
    report_.states = 1;
    record(check_state(root));
    if (stop()) return;
    dfs(root, 0);
  }

 private:
  bool stop() const {
    return report_.budget_exceeded || (options_.stop_at_first && report_.violation_count > 0);
  }

  void record(const std::vector<InvariantViolation>& found) {
    for (const InvariantViolation& v : found) {
      ++report_.violation_count;
      auto it = std::find_if(report_.violations.begin(), report_.violations.end(),
                             [&](const Counterexample& c) { return c.invariant == v.invariant; });
      if (it != report_.violations.end() && it->path.size() <= path_.size()) continue;
      Counterexample c{v.invariant, v.detail, path_, statuses_};
      if (it != report_.violations.end()) {
        *it = std::move(c);
      } else {
        report_.violations.push_back(std::move(c));
      }
    }
  }

  void dfs(const SecurityMonitor& state, std::size_t depth) {
    if (depth >= options_.max_depth) return;
    report_.depth = std::max(report_.depth, depth + 1);
    std::uint64_t parent_key = state_key(state);
    for (const Action& action : enumerate_actions(state, alphabet_)) {
      if (report_.transitions >= options_.budget) {
        report_.budget_exceeded = true;
        return;
      }
      ++report_.transitions;
      SecurityMonitor next(state);
      ActionResult result = apply_action(next, action);
      std::uint64_t key = state_key(next);
      if (key == parent_key) continue;
      path_.push_back(action);
      statuses_.push_back(result.status);
      record(check_transition(state, next, action));
      auto [it, fresh] = seen_.try_emplace(key, static_cast<std::uint8_t>(depth + 1));
      if (fresh) {
        ++report_.states;
        record(check_state(next));
      }
      bool expand = fresh || it->second > depth + 1;
      it->second = std::min<std::uint8_t>(it->second, static_cast<std::uint8_t>(depth + 1));
      if (!stop() && expand) dfs(next, depth + 1);
      path_.pop_back();
      statuses_.pop_back();
      if (stop()) return;
    }
  }

  const Alphabet& alphabet_;
  const ExploreOptions& options_;
  ExplorationReport& report_;
  std::unordered_map<std::uint64_t, std::uint8_t> seen_;
  std::vector<Action> path_;
  std::vector<Status> statuses_;
};

}  // namespace

std::uint64_t state_key(const SecurityMonitor& sm) {
  Bytes b = sm.serialize();
  return std::hash<std::string_view>{}(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

std::vector<Action> enumerate_actions(const SecurityMonitor& sm, const Alphabet& alphabet) {
  std::vector<Action> out;
  const Machine& m = sm.machine();
  std::uint64_t page = m.page_size();
  std::uint64_t ev_size = alphabet.ev_size ? alphabet.ev_size : 4 * page;
  VirtAddr data_va = alphabet.ev_base + page;
  std::vector<PhysAddr> probes = alphabet.probe_pages.empty() ? default_probes(sm) : alphabet.probe_pages;

  std::vector<PhysAddr> live;
  for (const auto& [eid, e] : sm.enclaves()) {
    if (e.state != EnclaveState::Deleted) live.push_back(eid);
  }
  std::vector<CoreId> os_cores;
  for (CoreId c = 0; c < m.core_count(); ++c) {
    if (m.core(c).domain.is_os()) os_cores.push_back(c);
  }

  if (!os_cores.empty()) {
    CoreId os = os_cores.front();
    auto call = [&](ApiCall c) { out.push_back(Action::api(os, std::move(c))); };
    for (const auto& [id, rec] : sm.resources().records()) {
      if (!(is_memory(id) || id.type == ResourceType::Thread) || rec.owner.is_monitor()) continue;
      call(api::BlockResource{id});
      call(api::CleanResource{id});
      call(api::GrantResource{id, DomainId::os()});
      for (PhysAddr eid : live) call(api::GrantResource{id, DomainId::enclave(eid)});
    }
    for (PhysAddr slot : alphabet.eid_slots) {
      if (sm.enclaves().count(slot) == 0) {
        call(api::CreateEnclave{slot, alphabet.ev_base, ev_size, alphabet.mailboxes});
        break;
      }
    }
    std::optional<PhysAddr> free_tid;
    for (PhysAddr slot : alphabet.tid_slots) {
      if (sm.threads().count(slot) == 0) {
        free_tid = slot;
        break;
      }
    }
    for (PhysAddr eid : live) {
      const EnclaveMetadata& e = *sm.enclave(eid);
      if (e.state == EnclaveState::Loading) {
        call(api::AllocatePageTable{eid, e.ev_base});
        if (free_tid) call(api::CreateThread{eid, *free_tid, e.ev_base + page, {}});
        call(api::InitEnclave{eid});
      }
      if (auto dest = next_load_dest(sm, e); dest && !probes.empty()) {
        for (VirtAddr va : {e.ev_base + page, e.ev_base + 2 * page}) {
          call(api::LoadPage{eid, va, *dest, probes.front(), static_cast<std::uint8_t>(perm::kRead | perm::kWrite)});
        }
      }
      call(api::DeleteEnclave{eid});
      if (e.state == EnclaveState::Initialized) {
        for (PhysAddr tid : e.threads) {
          for (CoreId c : os_cores) out.push_back(Action::api(c, api::EnterEnclave{eid, tid}));
        }
      }
    }
    for (PhysAddr p : probes) {
      out.push_back(Action::access(Action::Kind::Read, os, p));
      out.push_back(Action::access(Action::Kind::Write, os, p, alphabet.os_marker));
    }
  }

  for (CoreId c = 0; c < m.core_count(); ++c) {
    DomainId d = m.core(c).domain;
    if (!d.is_enclave()) continue;
    const EnclaveMetadata* e = sm.enclave(d.eid());
    auto call = [&](ApiCall a) { out.push_back(Action::api(c, std::move(a))); };
    call(api::ExitEnclave{});
    out.push_back(Action::access(Action::Kind::Read, c, e ? e->ev_base + page : data_va));
    out.push_back(Action::access(Action::Kind::Write, c, e ? e->ev_base + page : data_va, alphabet.enclave_marker));
    if (e != nullptr && !e->mailboxes.empty()) {
      call(api::AcceptMail{0, DomainId::monitor()});
      for (PhysAddr other : live) {
        if (other != d.eid()) call(api::AcceptMail{0, DomainId::enclave(other)});
      }
      call(api::GetMail{0});
    }
    for (PhysAddr other : live) {
      if (other != d.eid()) call(api::SendMail{other, Bytes{0x6d, 0x61, 0x69, 0x6c}});
    }
    call(api::GetAttestationKey{});
    for (const auto& [id, rec] : sm.resources().records()) {
      if (rec.owner == d && rec.state == ResourceState::Owned && is_memory(id)) call(api::BlockResource{id});
      if (rec.state == ResourceState::Offered && rec.offered_to == d) {
        if (id.type == ResourceType::Thread) {
          call(api::AcceptThread{id.rid, e ? e->ev_base + page : data_va, {}});
        } else {
          call(api::AcceptResource{id});
        }
      }
    }
    out.push_back(Action::event(Action::Kind::Interrupt, c));
  }
  return out;
}

ExplorationReport explore(const SecurityMonitor& root, const Alphabet& alphabet, const ExploreOptions& options) {
  ExplorationReport report;
  auto start = std::chrono::steady_clock::now();
  Search search(alphabet, options, report);
  search.run(root);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace smon
