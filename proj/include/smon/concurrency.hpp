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

// Interleaving and concurrent-caller checks of the transactional contract.
// A schedule lists call indices; the first occurrence of an index is its
// begin (guard acquisition), the second its commit.

#pragma once

#include "smon/monitor.hpp"

namespace smon {

struct RaceCall {
  CoreId core = 0;
  ApiCall call;
};

using Schedule = std::vector<std::size_t>;

/// Every schedule of n calls: (2n)! / 2^n sequences.
std::vector<Schedule> all_schedules(std::size_t n);
/// b0 c0 b1 c1 ...
Schedule serial_schedule(std::size_t n);
/// Throws std::invalid_argument unless each index in [0, n) appears twice.
void validate_schedule(const Schedule& schedule, std::size_t n);

struct RaceOutcome {
  std::vector<Status> statuses;
  std::vector<ApiPayload> payloads;
  std::vector<bool> admitted;  // passed begin
  Digest state{};
};

RaceOutcome run_interleaved(SecurityMonitor& sm, const std::vector<RaceCall>& calls, const Schedule& schedule);

struct SerializabilityReport {
  std::size_t schedules = 0;
  std::size_t serializable = 0;
  std::size_t exclusion_ok = 0;  // schedules whose ConcurrentCall failures match guard conflicts exactly
  std::vector<std::string> failures;

  bool ok() const { return failures.empty() && serializable == schedules && exclusion_ok == schedules; }
};

/// Runs the calls under every schedule from copies of `root` and checks
/// (a) the final state and admitted results equal a serial execution of the
/// admitted calls in some order, and (b) a call is refused with
/// ConcurrentCall exactly when an admitted, still-open call shares a guard.
SerializabilityReport check_serializability(const SecurityMonitor& root, const std::vector<RaceCall>& calls);

struct StressReport {
  std::uint64_t calls = 0;
  std::uint64_t committed = 0;
  std::uint64_t refused = 0;  // ConcurrentCall
  bool replay_matches = false;
  std::vector<std::string> failures;

  bool ok() const { return replay_matches && failures.empty(); }
};

/// Genuinely concurrent callers: one thread per OS core issuing random
/// resource calls. The commit journal is replayed serially on a copy of the
/// initial state; results and final state must match.
StressReport stress(SecurityMonitor& sm, std::uint64_t calls_per_core, std::uint64_t seed);

}  // namespace smon
