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

// Monitor API requests. Every call is issued from a core; the caller's
// protection domain is whatever that core is executing when it traps.

#pragma once

#include <variant>

#include "smon/measurement.hpp"
#include "smon/resources.hpp"

namespace smon {

enum class FieldId : std::uint32_t { PublicKey = 1, SmCertificate = 2, DeviceCertificate = 3, SmMeasurement = 4 };

std::string_view to_string(FieldId field);
std::optional<FieldId> parse_field(std::string_view name);

namespace api {

// Untrusted OS.
struct CreateEnclave {
  PhysAddr eid = 0;
  VirtAddr ev_base = 0;
  std::uint64_t ev_size = 0;
  std::uint32_t mailbox_count = 0;
};
struct AllocatePageTable {
  PhysAddr eid = 0;
  VirtAddr vaddr = 0;
};
struct LoadPage {
  PhysAddr eid = 0;
  VirtAddr vaddr = 0;
  PhysAddr dest = 0;
  PhysAddr source = 0;
  std::uint8_t perms = 0;
};
struct MapShared {
  PhysAddr eid = 0;
  VirtAddr vaddr = 0;
  PhysAddr paddr = 0;
};
struct CreateThread {
  PhysAddr eid = 0;
  PhysAddr tid = 0;
  VirtAddr entry_point = 0;
  FaultHandlers handlers;
};
struct InitEnclave {
  PhysAddr eid = 0;
};
struct EnterEnclave {
  PhysAddr eid = 0;
  PhysAddr tid = 0;
};
struct DeleteEnclave {
  PhysAddr eid = 0;
};
struct CleanResource {
  ResourceId id;
};
struct GrantResource {
  ResourceId id;
  DomainId to;
};
struct CarveInterval {
  PhysAddr base = 0;
  std::uint64_t size = 0;
};
struct ReleaseInterval {
  PhysAddr base = 0;
};

// Any owner.
struct BlockResource {
  ResourceId id;
};

// Enclaves.
struct ExitEnclave {};
struct AcceptResource {
  ResourceId id;
};
struct AcceptThread {
  PhysAddr tid = 0;
  VirtAddr entry_point = 0;
  FaultHandlers handlers;
};
struct AcceptMail {
  std::uint32_t mailbox = 0;
  DomainId sender;
};
struct SendMail {
  PhysAddr recipient = 0;
  Bytes message;
};
struct GetMail {
  std::uint32_t mailbox = 0;
};
struct GetAttestationKey {};
struct GetAexState {};

// Anyone.
struct GetField {
  std::uint32_t field = 0;
};

}  // namespace api

using ApiCall = std::variant<api::CreateEnclave, api::AllocatePageTable, api::LoadPage, api::MapShared,
                             api::CreateThread, api::InitEnclave, api::EnterEnclave, api::DeleteEnclave,
                             api::CleanResource, api::GrantResource, api::CarveInterval, api::ReleaseInterval,
                             api::BlockResource, api::ExitEnclave, api::AcceptResource, api::AcceptThread,
                             api::AcceptMail, api::SendMail, api::GetMail, api::GetAttestationKey,
                             api::GetAexState, api::GetField>;

std::string_view api_name(const ApiCall& call);
/// Canonical argument encoding (used for trace digests).
Bytes encode_args(const ApiCall& call);
/// Human-readable one-line rendering, e.g. "block_resource region:0x2".
std::string describe(const ApiCall& call);

struct MailDelivery {
  Bytes message;
  DomainId sender;
  Digest sender_measurement{};
};

struct AexSnapshot {
  RegisterFile regs{};
  VirtAddr pc = 0;
};

using ApiPayload = std::variant<std::monostate, Digest, MailDelivery, Bytes, AexSnapshot>;

struct ApiResponse {
  Status status = Status::Ok;
  ApiPayload payload;

  bool ok() const { return status == Status::Ok; }
};

enum class EventKind : std::uint8_t { SmApiCall, Interrupt, PageFault, EnclaveFault, Exit };

std::string_view to_string(EventKind kind);

struct MachineEvent {
  EventKind kind = EventKind::Interrupt;
  std::optional<ApiCall> call;  // SmApiCall only
  VirtAddr fault_address = 0;   // PageFault only
  std::uint64_t cause = 0;
};

struct Disposition {
  enum class Kind : std::uint8_t { ApiHandled, DelegatedToOs, EnclaveHandler };

  Kind kind = Kind::DelegatedToOs;
  bool aex = false;
  ApiResponse response;
  VirtAddr handler = 0;  // EnclaveHandler only
};

std::string_view to_string(Disposition::Kind kind);

}  // namespace smon
