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

// The registered invariant set. Each invariant has a state part (checked on
// every reachable state) and possibly a transition part (checked on every
// step, given the state before and after).

#pragma once

#include <array>

#include "smon/action.hpp"

namespace smon {

namespace invariant {
inline constexpr std::string_view kOwnershipPartition = "ownership-partition";
inline constexpr std::string_view kCleanBeforeReuse = "clean-before-reuse";
inline constexpr std::string_view kSealMonotonicity = "seal-monotonicity";
inline constexpr std::string_view kAexConfidentiality = "aex-confidentiality";
inline constexpr std::string_view kThreadExclusivity = "thread-exclusivity";
inline constexpr std::string_view kMailAuthenticity = "mail-authenticity";
inline constexpr std::string_view kKeyConfinement = "key-confinement";

inline constexpr std::array<std::string_view, 7> kAll = {
    kOwnershipPartition, kCleanBeforeReuse, kSealMonotonicity, kAexConfidentiality,
    kThreadExclusivity,  kMailAuthenticity, kKeyConfinement,
};
}  // namespace invariant

struct InvariantViolation {
  std::string invariant;
  std::string detail;
};

std::vector<InvariantViolation> check_state(const SecurityMonitor& sm);
std::vector<InvariantViolation> check_transition(const SecurityMonitor& before, const SecurityMonitor& after,
                                                 const Action& action);

/// Enclaves whose final measurement is the configured signing measurement.
bool is_signing_enclave(const SecurityMonitor& sm, PhysAddr eid);

}  // namespace smon
