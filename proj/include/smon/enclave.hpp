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

#pragma once

#include <set>

#include "smon/measurement.hpp"
#include "smon/types.hpp"

namespace smon {

inline constexpr std::size_t kMailboxMessageBytes = 512;
inline constexpr std::uint32_t kMaxMailboxes = 16;

// Footprint of the metadata structures in monitor memory. eids and tids are
// the physical addresses of these structures.
inline constexpr std::uint64_t kMetadataAlign = 64;
inline constexpr std::uint64_t kEnclaveHeaderBytes = 192;
inline constexpr std::uint64_t kMailboxBytes = 576;  // message + measurement + state, 64-aligned
inline constexpr std::uint64_t kThreadMetadataBytes = 576;  // two register files + bookkeeping
// Start of monitor memory holds the statically allocated resource metadata.
inline constexpr std::uint64_t kMonitorStaticBytes = 256;

constexpr std::uint64_t enclave_metadata_bytes(std::uint32_t mailbox_count) {
  return kEnclaveHeaderBytes + mailbox_count * kMailboxBytes;
}
constexpr PhysAddr mailbox_address(PhysAddr eid, std::uint32_t index) {
  return eid + kEnclaveHeaderBytes + index * kMailboxBytes;
}

enum class EnclaveState : std::uint8_t { Loading, Initialized, Deleted };
enum class ThreadState : std::uint8_t { Created, Assigned, Scheduled, Blocked };

std::string_view to_string(EnclaveState state);
std::string_view to_string(ThreadState state);

struct Mailbox {
  enum class State : std::uint8_t { Closed, Accepting, Full };

  State state = State::Closed;
  DomainId expected_sender;
  DomainId sender;
  Bytes message;
  Digest sender_measurement{};
};

std::string_view to_string(Mailbox::State state);

struct EnclaveMetadata {
  PhysAddr eid = 0;
  EnclaveState state = EnclaveState::Loading;
  VirtAddr ev_base = 0;
  std::uint64_t ev_size = 0;
  MeasurementState measurement;
  std::optional<Digest> final_measurement;
  std::set<PhysAddr> threads;
  std::vector<Mailbox> mailboxes;
  std::optional<std::uint64_t> load_cursor;  // highest physical page consumed
  std::vector<std::uint64_t> page_table_pages;
  std::set<VirtAddr> page_table_vaddrs;
  bool data_loaded = false;

  DomainId domain() const { return DomainId::enclave(eid); }
  std::uint64_t footprint() const { return enclave_metadata_bytes(static_cast<std::uint32_t>(mailboxes.size())); }
  bool in_evrange(VirtAddr va) const { return va >= ev_base && va - ev_base < ev_size; }
};

struct ThreadMetadata {
  PhysAddr tid = 0;
  std::optional<PhysAddr> owner;
  ThreadState state = ThreadState::Created;
  std::optional<CoreId> core;
  VirtAddr entry_point = 0;
  FaultHandlers fault_handlers;
  bool aex_present = false;
  RegisterFile aex_state{};
  VirtAddr aex_pc = 0;
  RegisterFile fault_state{};
  VirtAddr fault_pc = 0;
  bool in_fault_handler = false;
  // Domain whose register contents occupy the AEX/fault slots, if any.
  std::optional<DomainId> slot_writer;
};

}  // namespace smon
