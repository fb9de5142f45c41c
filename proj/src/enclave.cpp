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

#include "smon/enclave.hpp"

namespace smon {

std::string_view to_string(EnclaveState state) {
  switch (state) {
    case EnclaveState::Loading: return "Loading";
    case EnclaveState::Initialized: return "Initialized";
    case EnclaveState::Deleted: return "Deleted";
  }
  return "unknown";
}

std::string_view to_string(ThreadState state) {
  switch (state) {
    case ThreadState::Created: return "Created";
    case ThreadState::Assigned: return "Assigned";
    case ThreadState::Scheduled: return "Scheduled";
    case ThreadState::Blocked: return "Blocked";
  }
  return "unknown";
}

std::string_view to_string(Mailbox::State state) {
  switch (state) {
    case Mailbox::State::Closed: return "Closed";
    case Mailbox::State::Accepting: return "Accepting";
    case Mailbox::State::Full: return "Full";
  }
  return "unknown";
}

}  // namespace smon
