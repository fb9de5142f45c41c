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

// Core-level actions: one monitor call, one hardware event, or one memory
// access issued by whatever runs on a core. Scenarios, the explorer and the
// interleaving checker all drive the monitor through this type, and its
// text form ("@1 block_resource id=region:0x2") is what counterexample
// files contain.

#pragma once

#include <map>
#include <stdexcept>

#include "smon/monitor.hpp"

namespace smon {

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Program-visible results land in registers: loaded words in x1, the first
// word of received mail in x2.
inline constexpr std::size_t kLoadRegister = 1;
inline constexpr std::size_t kMailRegister = 2;

struct Action {
  enum class Kind : std::uint8_t { Api, Interrupt, PageFault, EnclaveFault, Read, Write, DmaRead, DmaWrite };

  Kind kind = Kind::Api;
  CoreId core = 0;
  std::optional<ApiCall> call;  // Api only
  std::uint64_t addr = 0;       // fault address, vaddr, or DMA paddr
  Word value = 0;               // Write / DmaWrite
  std::uint64_t cause = 0;      // faults

  static Action api(CoreId core, ApiCall call);
  static Action event(Kind kind, CoreId core, std::uint64_t addr = 0, std::uint64_t cause = 0);
  static Action access(Kind kind, CoreId core, std::uint64_t addr, Word value = 0);
};

struct ActionResult {
  Status status = Status::Ok;
  ApiPayload payload;
  std::optional<Word> value;
  std::optional<Disposition::Kind> disposition;
  bool aex = false;
};

/// Executes the action. Loads latch into kLoadRegister and mail into
/// kMailRegister of the issuing core (DMA has no core and latches nothing).
ActionResult apply_action(SecurityMonitor& sm, const Action& action);

/// Names usable as $name in action arguments: enclave names bind to eids,
/// "<name>.tN" to thread ids, "<name>.mbN" to mailbox addresses.
using Symbols = std::map<std::string, std::uint64_t, std::less<>>;

std::string verb_of(const Action& action);
/// "@core verb key=value ..." with every argument numeric.
std::string format_action(const Action& action);
/// Parses tokens after "@core" (verb first). Unknown keys and missing
/// arguments throw ScenarioError. Consumed keys are erased from `kv`.
Action parse_action(std::size_t line, CoreId core, const std::string& verb,
                    std::map<std::string, std::string>& kv, const Symbols& symbols);

// Argument helpers shared with the scenario parser.
std::uint64_t parse_value(std::size_t line, std::string_view text, const Symbols& symbols);
DomainId parse_domain(std::size_t line, std::string_view text, const Symbols& symbols);
ResourceId parse_resource(std::size_t line, std::string_view text, const Symbols& symbols);
std::string format_domain(DomainId domain);

}  // namespace smon
