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

#include "smon/api.hpp"

#include <sstream>

namespace smon {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void put_handlers(Bytes& out, const FaultHandlers& handlers) {
  put_u64(out, handlers.size());
  for (const auto& [kind, va] : handlers) {
    put_u8(out, static_cast<std::uint8_t>(kind));
    put_u64(out, va);
  }
}

void put_resource(Bytes& out, const ResourceId& id) {
  put_u8(out, static_cast<std::uint8_t>(id.type));
  put_u64(out, id.rid);
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

std::string handlers_str(const FaultHandlers& handlers) {
  std::string out;
  for (const auto& [kind, va] : handlers) {
    out += kind == FaultKind::PageFault ? " pagefault=" : " fault=";
    out += hex(va);
  }
  return out;
}

}  // namespace

std::string_view to_string(FieldId field) {
  switch (field) {
    case FieldId::PublicKey: return "public_key";
    case FieldId::SmCertificate: return "sm_certificate";
    case FieldId::DeviceCertificate: return "device_certificate";
    case FieldId::SmMeasurement: return "sm_measurement";
  }
  return "unknown";
}

std::optional<FieldId> parse_field(std::string_view name) {
  for (auto f : {FieldId::PublicKey, FieldId::SmCertificate, FieldId::DeviceCertificate, FieldId::SmMeasurement}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

std::string_view api_name(const ApiCall& call) {
  return std::visit(overloaded{
                        [](const api::CreateEnclave&) { return "create_enclave"; },
                        [](const api::AllocatePageTable&) { return "allocate_page_table"; },
                        [](const api::LoadPage&) { return "load_page"; },
                        [](const api::MapShared&) { return "map_shared"; },
                        [](const api::CreateThread&) { return "create_thread"; },
                        [](const api::InitEnclave&) { return "init_enclave"; },
                        [](const api::EnterEnclave&) { return "enter_enclave"; },
                        [](const api::DeleteEnclave&) { return "delete_enclave"; },
                        [](const api::CleanResource&) { return "clean_resource"; },
                        [](const api::GrantResource&) { return "grant_resource"; },
                        [](const api::CarveInterval&) { return "carve_interval"; },
                        [](const api::ReleaseInterval&) { return "release_interval"; },
                        [](const api::BlockResource&) { return "block_resource"; },
                        [](const api::ExitEnclave&) { return "exit_enclave"; },
                        [](const api::AcceptResource&) { return "accept_resource"; },
                        [](const api::AcceptThread&) { return "accept_thread"; },
                        [](const api::AcceptMail&) { return "accept_mail"; },
                        [](const api::SendMail&) { return "send_mail"; },
                        [](const api::GetMail&) { return "get_mail"; },
                        [](const api::GetAttestationKey&) { return "get_attestation_key"; },
                        [](const api::GetAexState&) { return "get_aex_state"; },
                        [](const api::GetField&) { return "get_field"; },
                    },
                    call);
}

Bytes encode_args(const ApiCall& call) {
  Bytes out;
  put_u8(out, static_cast<std::uint8_t>(call.index()));
  std::visit(overloaded{
                 [&](const api::CreateEnclave& a) {
                   put_u64(out, a.eid);
                   put_u64(out, a.ev_base);
                   put_u64(out, a.ev_size);
                   put_u32(out, a.mailbox_count);
                 },
                 [&](const api::AllocatePageTable& a) {
                   put_u64(out, a.eid);
                   put_u64(out, a.vaddr);
                 },
                 [&](const api::LoadPage& a) {
                   put_u64(out, a.eid);
                   put_u64(out, a.vaddr);
                   put_u64(out, a.dest);
                   put_u64(out, a.source);
                   put_u8(out, a.perms);
                 },
                 [&](const api::MapShared& a) {
                   put_u64(out, a.eid);
                   put_u64(out, a.vaddr);
                   put_u64(out, a.paddr);
                 },
                 [&](const api::CreateThread& a) {
                   put_u64(out, a.eid);
                   put_u64(out, a.tid);
                   put_u64(out, a.entry_point);
                   put_handlers(out, a.handlers);
                 },
                 [&](const api::InitEnclave& a) { put_u64(out, a.eid); },
                 [&](const api::EnterEnclave& a) {
                   put_u64(out, a.eid);
                   put_u64(out, a.tid);
                 },
                 [&](const api::DeleteEnclave& a) { put_u64(out, a.eid); },
                 [&](const api::CleanResource& a) { put_resource(out, a.id); },
                 [&](const api::GrantResource& a) {
                   put_resource(out, a.id);
                   put_u64(out, a.to.raw());
                 },
                 [&](const api::CarveInterval& a) {
                   put_u64(out, a.base);
                   put_u64(out, a.size);
                 },
                 [&](const api::ReleaseInterval& a) { put_u64(out, a.base); },
                 [&](const api::BlockResource& a) { put_resource(out, a.id); },
                 [&](const api::ExitEnclave&) {},
                 [&](const api::AcceptResource& a) { put_resource(out, a.id); },
                 [&](const api::AcceptThread& a) {
                   put_u64(out, a.tid);
                   put_u64(out, a.entry_point);
                   put_handlers(out, a.handlers);
                 },
                 [&](const api::AcceptMail& a) {
                   put_u32(out, a.mailbox);
                   put_u64(out, a.sender.raw());
                 },
                 [&](const api::SendMail& a) {
                   put_u64(out, a.recipient);
                   put_u64(out, a.message.size());
                   put_bytes(out, a.message);
                 },
                 [&](const api::GetMail& a) { put_u32(out, a.mailbox); },
                 [&](const api::GetAttestationKey&) {},
                 [&](const api::GetAexState&) {},
                 [&](const api::GetField& a) { put_u32(out, a.field); },
             },
             call);
  return out;
}

std::string describe(const ApiCall& call) {
  std::string args = std::visit(
      overloaded{
          [](const api::CreateEnclave& a) {
            return " eid=" + hex(a.eid) + " base=" + hex(a.ev_base) + " size=" + hex(a.ev_size) +
                   " mailboxes=" + std::to_string(a.mailbox_count);
          },
          [](const api::AllocatePageTable& a) { return " eid=" + hex(a.eid) + " vaddr=" + hex(a.vaddr); },
          [](const api::LoadPage& a) {
            return " eid=" + hex(a.eid) + " vaddr=" + hex(a.vaddr) + " dest=" + hex(a.dest) + " src=" + hex(a.source) +
                   " perms=" + perms_str(a.perms);
          },
          [](const api::MapShared& a) {
            return " eid=" + hex(a.eid) + " vaddr=" + hex(a.vaddr) + " paddr=" + hex(a.paddr);
          },
          [](const api::CreateThread& a) {
            return " eid=" + hex(a.eid) + " tid=" + hex(a.tid) + " entry=" + hex(a.entry_point) +
                   handlers_str(a.handlers);
          },
          [](const api::InitEnclave& a) { return " eid=" + hex(a.eid); },
          [](const api::EnterEnclave& a) { return " eid=" + hex(a.eid) + " tid=" + hex(a.tid); },
          [](const api::DeleteEnclave& a) { return " eid=" + hex(a.eid); },
          [](const api::CleanResource& a) { return " " + a.id.str(); },
          [](const api::GrantResource& a) { return " " + a.id.str() + " to=" + a.to.str(); },
          [](const api::CarveInterval& a) { return " base=" + hex(a.base) + " size=" + hex(a.size); },
          [](const api::ReleaseInterval& a) { return " base=" + hex(a.base); },
          [](const api::BlockResource& a) { return " " + a.id.str(); },
          [](const api::ExitEnclave&) { return std::string(); },
          [](const api::AcceptResource& a) { return " " + a.id.str(); },
          [](const api::AcceptThread& a) {
            return " tid=" + hex(a.tid) + " entry=" + hex(a.entry_point) + handlers_str(a.handlers);
          },
          [](const api::AcceptMail& a) { return " mailbox=" + std::to_string(a.mailbox) + " from=" + a.sender.str(); },
          [](const api::SendMail& a) {
            return " to=" + hex(a.recipient) + " bytes=" + std::to_string(a.message.size());
          },
          [](const api::GetMail& a) { return " mailbox=" + std::to_string(a.mailbox); },
          [](const api::GetAttestationKey&) { return std::string(); },
          [](const api::GetAexState&) { return std::string(); },
          [](const api::GetField& a) { return " field=" + std::to_string(a.field); },
      },
      call);
  return std::string(api_name(call)) + args;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::SmApiCall: return "sm_api_call";
    case EventKind::Interrupt: return "interrupt";
    case EventKind::PageFault: return "page_fault";
    case EventKind::EnclaveFault: return "enclave_fault";
    case EventKind::Exit: return "exit";
  }
  return "unknown";
}

std::string_view to_string(Disposition::Kind kind) {
  switch (kind) {
    case Disposition::Kind::ApiHandled: return "api_handled";
    case Disposition::Kind::DelegatedToOs: return "delegated_to_os";
    case Disposition::Kind::EnclaveHandler: return "enclave_handler";
  }
  return "unknown";
}

}  // namespace smon
