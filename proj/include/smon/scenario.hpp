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

// Scenario files: one directive per line, '#' starts a comment.
//
// Header
//   machine preset=desk|production|interval cores=N regions=N region_size=B
//           page_size=B memory=B monitor_regions=N monitor_bytes=B
//   monitor post_init_accept=yes|no signing=<enclave name | 64 hex>
//           mutation=<name>[,<name>...]
//   seed N
//   enclave NAME manifest=PATH        declares an enclave actor
//   check invariants                  evaluate every invariant after each step
//   explore depth=N budget=N eid_slots=A,B tid_slots=A,B ev_base=V ev_size=B
//           mailboxes=N probes=P,Q     (exploration configs only)
//
// Steps (any step takes expect=ok|<Status>|<rule id>)
//   @CORE VERB key=value...           raw action on a core (see action.hpp)
//   os[@CORE] VERB key=value...       raw action as the OS (lowest OS core by default)
//   os load NAME [memory=R,R] [eid=A] [staging=P] [init=no]
//   os enter NAME core=C [thread=N]
//   NAME VERB key=value...            raw action on the core running NAME
//   NAME get_mail mailbox=N [expect_sender=D] [expect_measurement=NAME|measure:NAME|HEX] [expect_text=S]
//   NAME read addr=V [expect_value=W]
//   NAME fetch_key mailbox=N key=V    signing enclave: obtain the attestation key
//   NAME serve mailbox=N key=V        signing enclave: answer one request
//   NAME request_attestation signer=NAME mailbox=N
//   NAME collect_attestation mailbox=N [out=FILE]
//   remote challenge | remote verify [measurement=...] | remote channel
//   race [schedule=i,j,...] [winners=N] [check=all]  ... end
//
// Values accept numbers, $NAME (an enclave's eid), $NAME.tN (its Nth
// thread), and $NAME.mbN (the address of its Nth mailbox).

#pragma once

#include <filesystem>

#include "smon/attestation.hpp"
#include "smon/explorer.hpp"
#include "smon/manifest.hpp"

namespace smon {

struct Step {
  std::size_t line = 0;
  std::string actor;  // "os", "remote", an enclave name; empty for raw "@CORE" steps
  std::optional<CoreId> core;
  std::string verb;
  std::map<std::string, std::string> args;
  std::optional<std::string> expect;
  // race blocks
  std::vector<Step> members;
  std::optional<std::vector<std::size_t>> schedule;
  std::optional<std::size_t> winners;
  bool check_all = false;
};

struct EnclaveDecl {
  std::string name;
  std::filesystem::path path;
  Manifest manifest;
};

struct Scenario {
  MonitorConfig monitor;
  std::uint64_t seed = 0;
  std::vector<EnclaveDecl> enclaves;
  bool check_invariants = false;
  std::vector<Step> steps;

  bool explore_section = false;
  Alphabet alphabet;
  ExploreOptions explore;

  /// Throws ScenarioError (line-numbered) on malformed input.
  static Scenario parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static Scenario load_file(const std::filesystem::path& path);

  const EnclaveDecl* find_enclave(std::string_view name) const;
  /// Canonical machine/monitor/seed/enclave lines (absolute manifest paths).
  std::string header_text() const;
};

struct TraceEvent {
  std::size_t index = 0;
  std::string actor;
  std::optional<CoreId> core;
  std::string api;
  Digest args{};
  std::string result;
  Digest state{};

  std::string json() const;
};

struct RunOptions {
  std::uint64_t seed = 0;              // overrides the scenario seed when set
  bool override_seed = false;
  std::filesystem::path artifact_dir;  // where out= files go (default: current directory)
  std::uint64_t stress_calls = 0;      // > 0: concurrent-caller pass after the script
};

struct RunResult {
  std::vector<TraceEvent> trace;
  bool passed = true;
  std::string failure;               // first divergence
  std::optional<std::size_t> failed_event;
  std::vector<std::string> notes;    // human-readable progress (attestation results, race reports)
  std::optional<AttestationBundle> bundle;
  std::optional<VerifyExpectations> expectations;

  std::string trace_jsonl() const;
};

/// Runs every step. Assertion failures stop the run and are reported in the
/// result; malformed steps throw ScenarioError.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Builds the monitor and applies the steps; the state explorations start from.
SecurityMonitor setup_state(const Scenario& scenario);

/// Replayable scenario text: the header, "check invariants", the original
/// steps, and the counterexample path as raw actions with observed results.
std::string counterexample_scenario(const Scenario& scenario, const Counterexample& cex);

MachineConfig machine_preset(std::string_view name);

}  // namespace smon
