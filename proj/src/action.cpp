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

#include "smon/action.hpp"

#include <sstream>

namespace smon {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

Word first_word(ByteView bytes) {
  Word v = 0;
  for (std::size_t i = 0; i < 8 && i < bytes.size(); ++i) v |= static_cast<Word>(bytes[i]) << (8 * i);
  return v;
}

std::string handlers_args(const FaultHandlers& handlers) {
  std::string out;
  for (const auto& [kind, va] : handlers) {
    out += (kind == FaultKind::PageFault ? " pagefault=" : " fault=") + hex(va);
  }
  return out;
}

struct Args {
  std::size_t line;
  std::map<std::string, std::string>& kv;
  const Symbols& symbols;

  const std::string& raw(const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ScenarioError(line, "missing argument " + key + "=");
    return it->second;
  }
  std::optional<std::string> take_raw(const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  }
  std::uint64_t u64(const std::string& key) {
    std::uint64_t v = parse_value(line, raw(key), symbols);
    kv.erase(key);
    return v;
  }
  std::uint32_t u32(const std::string& key) {
    std::uint64_t v = u64(key);
    if (v > 0xffffffffULL) throw ScenarioError(line, key + " out of range");
    return static_cast<std::uint32_t>(v);
  }
  DomainId domain(const std::string& key) {
    DomainId d = parse_domain(line, raw(key), symbols);
    kv.erase(key);
    return d;
  }
  ResourceId resource(const std::string& key) {
    ResourceId id = parse_resource(line, raw(key), symbols);
    kv.erase(key);
    return id;
  }
  FaultHandlers handlers() {
    FaultHandlers h;
    if (auto v = take_raw("pagefault")) h[FaultKind::PageFault] = parse_value(line, *v, symbols);
    if (auto v = take_raw("fault")) h[FaultKind::EnclaveFault] = parse_value(line, *v, symbols);
    return h;
  }
  Bytes bytes(const std::string& key) {
    std::string v = raw(key);
    kv.erase(key);
    if (v.rfind("text:", 0) == 0) return Bytes(v.begin() + 5, v.end());
    auto b = from_hex(v.rfind("0x", 0) == 0 ? v.substr(2) : v);
    if (!b) throw ScenarioError(line, "bad hex in " + key + "=");
    return *b;
  }
};

}  // namespace

Action Action::api(CoreId core, ApiCall call) {
  Action a;
  a.kind = Kind::Api;
  a.core = core;
  a.call = std::move(call);
  return a;
}

Action Action::event(Kind kind, CoreId core, std::uint64_t addr, std::uint64_t cause) {
  Action a;
  a.kind = kind;
  a.core = core;
  a.addr = addr;
  a.cause = cause;
  return a;
}

Action Action::access(Kind kind, CoreId core, std::uint64_t addr, Word value) {
  Action a;
  a.kind = kind;
  a.core = core;
  a.addr = addr;
  a.value = value;
  return a;
}

ActionResult apply_action(SecurityMonitor& sm, const Action& a) {
  ActionResult r;
  auto event = [&](EventKind kind) {
    MachineEvent ev;
    ev.kind = kind;
    ev.fault_address = a.addr;
    ev.cause = a.cause;
    Disposition d = sm.handle_event(a.core, ev);
    r.disposition = d.kind;
    r.aex = d.aex;
    r.status = d.response.status;
  };
  switch (a.kind) {
    case Action::Kind::Api: {
      MachineEvent ev;
      ev.kind = EventKind::SmApiCall;
      ev.call = a.call;
      Disposition d = sm.handle_event(a.core, ev);
      r.disposition = d.kind;
      r.status = d.response.status;
      r.payload = std::move(d.response.payload);
      if (const auto* mail = std::get_if<MailDelivery>(&r.payload)) {
        sm.set_register(a.core, kMailRegister, first_word(mail->message));
      }
      break;
    }
    case Action::Kind::Interrupt: event(EventKind::Interrupt); break;
    case Action::Kind::PageFault: event(EventKind::PageFault); break;
    case Action::Kind::EnclaveFault: event(EventKind::EnclaveFault); break;
    case Action::Kind::Read: {
      auto v = sm.load(a.core, a.addr);
      r.status = v.status();
      if (v) {
        r.value = *v;
        sm.set_register(a.core, kLoadRegister, *v);
      }
      break;
    }
    case Action::Kind::Write: r.status = sm.store(a.core, a.addr, a.value); break;
    case Action::Kind::DmaRead: {
      auto v = sm.dma_read(a.addr);
      r.status = v.status();
      if (v) r.value = *v;
      break;
    }
    case Action::Kind::DmaWrite: r.status = sm.dma_write(a.addr, a.value); break;
  }
  return r;
}

std::string verb_of(const Action& a) {
  switch (a.kind) {
    case Action::Kind::Api: return std::string(api_name(*a.call));
    case Action::Kind::Interrupt: return "interrupt";
    case Action::Kind::PageFault: return "page_fault";
    case Action::Kind::EnclaveFault: return "enclave_fault";
    case Action::Kind::Read: return "read";
    case Action::Kind::Write: return "write";
    case Action::Kind::DmaRead: return "dma_read";
    case Action::Kind::DmaWrite: return "dma_write";
  }
  return "unknown";
}

std::string format_domain(DomainId d) {
  if (d.is_os()) return "os";
  if (d.is_monitor()) return "sm";
  return hex(d.eid());
}

std::string format_action(const Action& a) {
  std::string out = "@" + std::to_string(a.core) + " " + verb_of(a);
  switch (a.kind) {
    case Action::Kind::Api:
      out += std::visit(
          overloaded{
              [](const api::CreateEnclave& c) {
                return " eid=" + hex(c.eid) + " base=" + hex(c.ev_base) + " size=" + hex(c.ev_size) +
                       " mailboxes=" + std::to_string(c.mailbox_count);
              },
              [](const api::AllocatePageTable& c) { return " eid=" + hex(c.eid) + " vaddr=" + hex(c.vaddr); },
              [](const api::LoadPage& c) {
                return " eid=" + hex(c.eid) + " vaddr=" + hex(c.vaddr) + " dest=" + hex(c.dest) +
                       " source=" + hex(c.source) + " perms=" + perms_str(c.perms);
              },
              [](const api::MapShared& c) {
                return " eid=" + hex(c.eid) + " vaddr=" + hex(c.vaddr) + " paddr=" + hex(c.paddr);
              },
              [](const api::CreateThread& c) {
                return " eid=" + hex(c.eid) + " tid=" + hex(c.tid) + " entry=" + hex(c.entry_point) +
                       handlers_args(c.handlers);
              },
              [](const api::InitEnclave& c) { return " eid=" + hex(c.eid); },
              [](const api::EnterEnclave& c) { return " eid=" + hex(c.eid) + " tid=" + hex(c.tid); },
              [](const api::DeleteEnclave& c) { return " eid=" + hex(c.eid); },
              [](const api::CleanResource& c) { return " id=" + c.id.str(); },
              [](const api::GrantResource& c) { return " id=" + c.id.str() + " to=" + format_domain(c.to); },
              [](const api::CarveInterval& c) { return " base=" + hex(c.base) + " size=" + hex(c.size); },
              [](const api::ReleaseInterval& c) { return " base=" + hex(c.base); },
              [](const api::BlockResource& c) { return " id=" + c.id.str(); },
              [](const api::ExitEnclave&) { return std::string(); },
              [](const api::AcceptResource& c) { return " id=" + c.id.str(); },
              [](const api::AcceptThread& c) {
                return " tid=" + hex(c.tid) + " entry=" + hex(c.entry_point) + handlers_args(c.handlers);
              },
              [](const api::AcceptMail& c) {
                return " mailbox=" + std::to_string(c.mailbox) + " sender=" + format_domain(c.sender);
              },
              [](const api::SendMail& c) { return " to=" + hex(c.recipient) + " msg=" + to_hex(c.message); },
              [](const api::GetMail& c) { return " mailbox=" + std::to_string(c.mailbox); },
              [](const api::GetAttestationKey&) { return std::string(); },
              [](const api::GetAexState&) { return std::string(); },
              [](const api::GetField& c) { return " field=" + std::to_string(c.field); },
          },
          *a.call);
      break;
    case Action::Kind::Interrupt: break;
    case Action::Kind::PageFault: out += " addr=" + hex(a.addr) + " cause=" + hex(a.cause); break;
    case Action::Kind::EnclaveFault: out += " cause=" + hex(a.cause); break;
    case Action::Kind::Read:
    case Action::Kind::DmaRead: out += " addr=" + hex(a.addr); break;
    case Action::Kind::Write:
    case Action::Kind::DmaWrite: out += " addr=" + hex(a.addr) + " value=" + hex(a.value); break;
  }
  return out;
}

std::uint64_t parse_value(std::size_t line, std::string_view text, const Symbols& symbols) {
  if (!text.empty() && text[0] == '$') {
    auto it = symbols.find(text.substr(1));
    if (it == symbols.end()) throw ScenarioError(line, "undeclared name '" + std::string(text) + "'");
    return it->second;
  }
  std::string s(text);
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 0);
  } catch (const std::exception&) {
    throw ScenarioError(line, "bad number '" + s + "'");
  }
  if (used != s.size() || s.empty() || s[0] == '-') throw ScenarioError(line, "bad number '" + s + "'");
  return v;
}

DomainId parse_domain(std::size_t line, std::string_view text, const Symbols& symbols) {
  if (text == "os") return DomainId::os();
  if (text == "sm") return DomainId::monitor();
  return DomainId::enclave(parse_value(line, text, symbols));
}

ResourceId parse_resource(std::size_t line, std::string_view text, const Symbols& symbols) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ScenarioError(line, "resource must be type:id, got '" + std::string(text) + "'");
  auto type = parse_resource_type(text.substr(0, colon));
  if (!type) throw ScenarioError(line, "unknown resource type in '" + std::string(text) + "'");
  return {*type, parse_value(line, text.substr(colon + 1), symbols)};
}

Action parse_action(std::size_t line, CoreId core, const std::string& verb, std::map<std::string, std::string>& kv,
                    const Symbols& symbols) {
  Args a{line, kv, symbols};
  auto api_action = [&](ApiCall call) { return Action::api(core, std::move(call)); };
  if (verb == "create_enclave") {
    api::CreateEnclave c;
    c.eid = a.u64("eid");
    c.ev_base = a.u64("base");
    c.ev_size = a.u64("size");
    c.mailbox_count = a.u32("mailboxes");
    return api_action(c);
  }
  if (verb == "allocate_page_table") {
    api::AllocatePageTable c;
    c.eid = a.u64("eid");
    c.vaddr = a.u64("vaddr");
    return api_action(c);
  }
  if (verb == "load_page") {
    api::LoadPage c;
    c.eid = a.u64("eid");
    c.vaddr = a.u64("vaddr");
    c.dest = a.u64("dest");
    c.source = a.u64("source");
    std::string p = a.raw("perms");
    auto perms = parse_perms(p);
    if (!perms) throw ScenarioError(line, "bad perms '" + p + "'");
    kv.erase("perms");
    c.perms = *perms;
    return api_action(c);
  }
  if (verb == "map_shared") {
    api::MapShared c;
    c.eid = a.u64("eid");
    c.vaddr = a.u64("vaddr");
    c.paddr = a.u64("paddr");
    return api_action(c);
  }
  if (verb == "create_thread") {
    api::CreateThread c;
    c.eid = a.u64("eid");
    c.tid = a.u64("tid");
    c.entry_point = a.u64("entry");
    c.handlers = a.handlers();
    return api_action(c);
  }
  if (verb == "init_enclave") return api_action(api::InitEnclave{a.u64("eid")});
  if (verb == "enter_enclave") {
    api::EnterEnclave c;
    c.eid = a.u64("eid");
    c.tid = a.u64("tid");
    return api_action(c);
  }
  if (verb == "delete_enclave") return api_action(api::DeleteEnclave{a.u64("eid")});
  if (verb == "clean_resource") return api_action(api::CleanResource{a.resource("id")});
  if (verb == "grant_resource") {
    api::GrantResource c;
    c.id = a.resource("id");
    c.to = a.domain("to");
    return api_action(c);
  }
  if (verb == "carve_interval") {
    api::CarveInterval c;
    c.base = a.u64("base");
    c.size = a.u64("size");
    return api_action(c);
  }
  if (verb == "release_interval") return api_action(api::ReleaseInterval{a.u64("base")});
  if (verb == "block_resource") return api_action(api::BlockResource{a.resource("id")});
  if (verb == "exit_enclave") return api_action(api::ExitEnclave{});
  if (verb == "accept_resource") return api_action(api::AcceptResource{a.resource("id")});
  if (verb == "accept_thread") {
    api::AcceptThread c;
    c.tid = a.u64("tid");
    c.entry_point = a.u64("entry");
    c.handlers = a.handlers();
    return api_action(c);
  }
  if (verb == "accept_mail") {
    api::AcceptMail c;
    c.mailbox = a.u32("mailbox");
    c.sender = a.domain("sender");
    return api_action(c);
  }
  if (verb == "send_mail") {
    api::SendMail c;
    c.recipient = a.u64("to");
    c.message = a.bytes("msg");
    return api_action(c);
  }
  if (verb == "get_mail") return api_action(api::GetMail{a.u32("mailbox")});
  if (verb == "get_attestation_key") return api_action(api::GetAttestationKey{});
  if (verb == "get_aex_state") return api_action(api::GetAexState{});
  if (verb == "get_field") {
    std::string f = a.raw("field");
    kv.erase("field");
    auto named = parse_field(f);
    return api_action(api::GetField{named ? static_cast<std::uint32_t>(*named)
                                          : static_cast<std::uint32_t>(parse_value(line, f, symbols))});
  }
  if (verb == "interrupt") return Action::event(Action::Kind::Interrupt, core);
  if (verb == "page_fault") {
    std::uint64_t addr = a.u64("addr");
    std::uint64_t cause = kv.count("cause") ? a.u64("cause") : 0;
    return Action::event(Action::Kind::PageFault, core, addr, cause);
  }
  if (verb == "enclave_fault") {
    std::uint64_t cause = kv.count("cause") ? a.u64("cause") : 0;
    return Action::event(Action::Kind::EnclaveFault, core, 0, cause);
  }
  if (verb == "read") return Action::access(Action::Kind::Read, core, a.u64("addr"));
  if (verb == "dma_read") return Action::access(Action::Kind::DmaRead, core, a.u64("addr"));
  if (verb == "write" || verb == "dma_write") {
    std::uint64_t addr = a.u64("addr");
    Word value = a.u64("value");
    return Action::access(verb == "write" ? Action::Kind::Write : Action::Kind::DmaWrite, core, addr, value);
  }
  throw ScenarioError(line, "unknown action '" + verb + "'");
}

}  // namespace smon
