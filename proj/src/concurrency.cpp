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

#include "smon/concurrency.hpp"

#include <atomic>
#include <random>
#include <thread>

namespace smon {

namespace {

void extend(std::vector<Schedule>& out, Schedule& prefix, std::vector<int>& seen, std::size_t n) {
  if (prefix.size() == 2 * n) {
    out.push_back(prefix);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i] == 2) continue;
    ++seen[i];
    prefix.push_back(i);
    extend(out, prefix, seen, n);
    prefix.pop_back();
    --seen[i];
  }
}

bool intersects(const std::vector<GuardKey>& a, const std::vector<GuardKey>& b) {
  for (const GuardKey& k : a) {
    if (std::find(b.begin(), b.end(), k) != b.end()) return true;
  }
  return false;
}

std::string schedule_str(const Schedule& s) {
  std::vector<int> seen(s.size(), 0);
  std::string out;
  for (std::size_t i : s) {
    out += (seen[i]++ == 0 ? "b" : "c") + std::to_string(i) + " ";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

struct Traced {
  RaceOutcome outcome;
  bool exclusion_ok = true;
  std::string exclusion_detail;
};

Traced run_traced(SecurityMonitor& sm, const std::vector<RaceCall>& calls, const Schedule& schedule) {
  validate_schedule(schedule, calls.size());
  std::size_t n = calls.size();
  Traced t;
  t.outcome.statuses.assign(n, Status::Ok);
  t.outcome.payloads.assign(n, std::monostate{});
  t.outcome.admitted.assign(n, false);
  std::vector<std::optional<Transaction>> open(n);
  std::vector<bool> begun(n, false);
  for (std::size_t i : schedule) {
    if (!begun[i]) {
      begun[i] = true;
      SecurityMonitor probe(sm);
      auto wanted = probe.begin(calls[i].core, calls[i].call);
      bool conflict = false;
      if (wanted) {
        for (std::size_t j = 0; j < n; ++j) {
          if (open[j] && intersects(open[j]->guards, wanted->guards)) conflict = true;
        }
      }
      auto txn = sm.begin(calls[i].core, calls[i].call);
      bool refused = !txn && txn.status() == Status::ConcurrentCall;
      if (refused != conflict) {
        t.exclusion_ok = false;
        t.exclusion_detail = "call " + std::to_string(i) + (refused ? " refused without a conflicting open call"
                                                                    : " admitted despite a conflicting open call");
      }
      if (txn) {
        t.outcome.admitted[i] = true;
        open[i] = std::move(txn).value();
      } else {
        t.outcome.statuses[i] = txn.status();
      }
    } else if (open[i]) {
      ApiResponse r = sm.commit(std::move(*open[i]));
      open[i].reset();
      t.outcome.statuses[i] = r.status;
      t.outcome.payloads[i] = std::move(r.payload);
    }
  }
  t.outcome.state = sm.state_hash();
  return t;
}

}  // namespace

std::vector<Schedule> all_schedules(std::size_t n) {
  std::vector<Schedule> out;
  Schedule prefix;
  std::vector<int> seen(n, 0);
  extend(out, prefix, seen, n);
  return out;
}

Schedule serial_schedule(std::size_t n) {
  Schedule s;
  for (std::size_t i = 0; i < n; ++i) {
    s.push_back(i);
    s.push_back(i);
  }
  return s;
}

void validate_schedule(const Schedule& schedule, std::size_t n) {
  std::vector<int> count(n, 0);
  for (std::size_t i : schedule) {
    if (i >= n) throw std::invalid_argument("schedule names call " + std::to_string(i) + " of " + std::to_string(n));
    ++count[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] != 2) throw std::invalid_argument("schedule must name call " + std::to_string(i) + " exactly twice");
  }
}

RaceOutcome run_interleaved(SecurityMonitor& sm, const std::vector<RaceCall>& calls, const Schedule& schedule) {
  return run_traced(sm, calls, schedule).outcome;
}

SerializabilityReport check_serializability(const SecurityMonitor& root, const std::vector<RaceCall>& calls) {
  SerializabilityReport report;
  for (const Schedule& schedule : all_schedules(calls.size())) {
    ++report.schedules;
    SecurityMonitor sm(root);
    Traced t = run_traced(sm, calls, schedule);
    if (t.exclusion_ok) {
      ++report.exclusion_ok;
    } else {
      report.failures.push_back("[" + schedule_str(schedule) + "] " + t.exclusion_detail);
    }
    std::vector<std::size_t> applied;
    for (std::size_t i = 0; i < calls.size(); ++i) {
      if (t.outcome.admitted[i] && t.outcome.statuses[i] != Status::ConcurrentCall) applied.push_back(i);
    }
    bool matched = false;
    std::sort(applied.begin(), applied.end());
    do {
      SecurityMonitor serial(root);
      bool same = true;
      for (std::size_t i : applied) {
        if (serial.call(calls[i].core, calls[i].call).status != t.outcome.statuses[i]) {
          same = false;
          break;
        }
      }
      if (same && serial.state_hash() == t.outcome.state) {
        matched = true;
        break;
      }
    } while (std::next_permutation(applied.begin(), applied.end()));
    if (matched) {
      ++report.serializable;
    } else {
      report.failures.push_back("[" + schedule_str(schedule) + "] outcome matches no serial order");
    }
  }
  return report;
}

StressReport stress(SecurityMonitor& sm, std::uint64_t calls_per_core, std::uint64_t seed) {
  StressReport report;
  std::vector<CoreId> cores;
  for (CoreId c = 0; c < sm.machine().core_count(); ++c) {
    if (sm.machine().core(c).domain.is_os()) cores.push_back(c);
  }
  std::vector<ResourceId> targets;
  for (const auto& [id, rec] : sm.resources().records()) {
    bool memory = id.type == ResourceType::MemoryRegion || id.type == ResourceType::MemoryInterval;
    if (memory && !rec.owner.is_monitor()) targets.push_back(id);
  }
  std::vector<DomainId> grantees{DomainId::os()};
  for (const auto& [eid, e] : sm.enclaves()) {
    if (e.state != EnclaveState::Deleted) grantees.push_back(e.domain());
  }
  if (cores.empty() || targets.empty()) {
    report.failures.push_back("no OS core or no OS-visible memory to contend for");
    return report;
  }

  SecurityMonitor initial(sm);
  sm.set_journal(true);
  std::atomic<std::uint64_t> committed{0};
  std::atomic<std::uint64_t> refused{0};
  std::vector<std::thread> workers;
  for (CoreId core : cores) {
    workers.emplace_back([&, core] {
      std::mt19937_64 rng(seed * 1000003 + core);
      for (std::uint64_t k = 0; k < calls_per_core; ++k) {
        const ResourceId& id = targets[rng() % targets.size()];
        ApiCall call;
        switch (rng() % 4) {
          case 0: call = api::BlockResource{id}; break;
          case 1: call = api::CleanResource{id}; break;
          case 2: call = api::GrantResource{id, grantees[rng() % grantees.size()]}; break;
          default: call = api::GetField{static_cast<std::uint32_t>(1 + rng() % 4)}; break;
        }
        ApiResponse r = sm.call(core, call);
        (r.status == Status::ConcurrentCall ? refused : committed)++;
      }
    });
  }
  for (auto& w : workers) w.join();
  sm.set_journal(false);
  std::vector<JournalEntry> journal = sm.take_journal();
  report.calls = calls_per_core * cores.size();
  report.committed = committed;
  report.refused = refused;
  if (journal.size() != report.committed) {
    report.failures.push_back("journal holds " + std::to_string(journal.size()) + " commits, callers saw " +
                              std::to_string(report.committed));
  }
  SecurityMonitor replay(initial);
  for (std::size_t i = 0; i < journal.size(); ++i) {
    Status s = replay.call(journal[i].core, journal[i].call).status;
    if (s != journal[i].status) {
      report.failures.push_back("commit " + std::to_string(i) + " (" + describe(journal[i].call) + ") returned " +
                                std::string(to_string(journal[i].status)) + " concurrently but " +
                                std::string(to_string(s)) + " serially");
      break;
    }
  }
  report.replay_matches = report.failures.empty() && replay.state_hash() == sm.state_hash();
  if (!report.replay_matches && report.failures.empty()) report.failures.push_back("final state differs from serial replay");
  return report;
}

}  // namespace smon
