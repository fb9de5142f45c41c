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

// Bounded exhaustive exploration. From a root state, every action of every
// actor (the OS on its lowest free core, each running enclave, interrupts)
// is applied up to max_depth, deduplicating by a hash of the canonical state
// serialization. Invariants are evaluated on every new state and on every
// state-changing transition.

#pragma once

#include <cstdint>

#include "smon/invariants.hpp"

namespace smon {

/// Parameters of the action alphabet.
struct Alphabet {
  std::vector<PhysAddr> eid_slots;  // where create_enclave may place metadata
  std::vector<PhysAddr> tid_slots;  // where create_thread may place metadata
  VirtAddr ev_base = 0x100000;
  std::uint64_t ev_size = 0;        // 0: four pages
  std::uint32_t mailboxes = 1;
  std::vector<PhysAddr> probe_pages;  // OS read/write targets; empty: first page of every non-monitor unit
  Word os_marker = 0x05000000000000aaULL;
  Word enclave_marker = 0x0e000000000000bbULL;
};

std::vector<Action> enumerate_actions(const SecurityMonitor& sm, const Alphabet& alphabet);

struct ExploreOptions {
  std::size_t max_depth = 6;
  std::uint64_t budget = 20'000'000;  // transitions
  bool stop_at_first = false;
};

struct Counterexample {
  std::string invariant;
  std::string detail;
  std::vector<Action> path;
  std::vector<Status> statuses;
};

struct ExplorationReport {
  std::uint64_t states = 0;       // distinct states, root included
  std::uint64_t transitions = 0;  // actions applied
  std::size_t depth = 0;          // deepest level expanded
  bool budget_exceeded = false;
  std::uint64_t violation_count = 0;
  std::vector<Counterexample> violations;  // shortest found per invariant
  double seconds = 0;

  bool ok() const { return violation_count == 0 && !budget_exceeded; }
};

ExplorationReport explore(const SecurityMonitor& root, const Alphabet& alphabet, const ExploreOptions& options);

/// Hash used for deduplication (64 bits over serialize()).
std::uint64_t state_key(const SecurityMonitor& sm);

}  // namespace smon
