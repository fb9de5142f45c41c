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

#include "smon/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "smon/identity.hpp"

namespace smon {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::uint64_t parse_number(std::size_t line, std::string_view text) {
  std::string s(text);
  if (s.empty()) throw ManifestError(line, "expected a number");
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 0);
  } catch (const std::exception&) {
    throw ManifestError(line, "bad number '" + s + "'");
  }
  if (used != s.size() || s[0] == '-') throw ManifestError(line, "bad number '" + s + "'");
  return v;
}

std::pair<std::string, std::string> key_value(std::size_t line, const std::string& tok) {
  auto eq = tok.find('=');
  if (eq == std::string::npos || eq == 0) throw ManifestError(line, "expected key=value, got '" + tok + "'");
  return {tok.substr(0, eq), tok.substr(eq + 1)};
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

Bytes read_binary(std::size_t line, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError(line, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint64_t capabilities_for(IsolationBackendKind backend) {
  std::uint64_t caps = capability::kDmaFiltering | capability::kCoreCleaning;
  if (backend == IsolationBackendKind::RegionBased) {
    caps |= capability::kRegionIsolation | capability::kCachePartitioning;
  } else {
    caps |= capability::kIntervalIsolation;
  }
  return caps;
}

}  // namespace

Manifest::Manifest() : sm_image_hash(crypto::sha3_256(default_sm_image())) {}

Manifest Manifest::parse(std::string_view text, const std::filesystem::path& base_dir) {
  Manifest m;
  bool have_evrange = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    auto toks = split_ws(raw);
    if (toks.empty()) continue;
    const std::string& verb = toks[0];
    auto need = [&](std::size_t n) {
      if (toks.size() < n) throw ManifestError(lineno, verb + ": missing arguments");
    };
    if (verb == "page_size") {
      need(2);
      m.page_size = parse_number(lineno, toks[1]);
      if (m.page_size < 64 || (m.page_size & (m.page_size - 1)) != 0) {
        throw ManifestError(lineno, "page_size must be a power of two >= 64");
      }
    } else if (verb == "platform") {
      for (std::size_t i = 1; i < toks.size(); ++i) {
        auto [k, v] = key_value(lineno, toks[i]);
        if (k == "backend") {
          if (v == "region") {
            m.backend = IsolationBackendKind::RegionBased;
          } else if (v == "interval") {
            m.backend = IsolationBackendKind::IntervalBased;
          } else {
            throw ManifestError(lineno, "unknown backend '" + v + "'");
          }
        } else if (k == "sm_image_hash") {
          auto h = fixed_from_hex<32>(v);
          if (!h) throw ManifestError(lineno, "sm_image_hash must be 64 hex characters");
          m.sm_image_hash = *h;
        } else {
          throw ManifestError(lineno, "unknown platform key '" + k + "'");
        }
      }
    } else if (verb == "evrange") {
      need(3);
      m.ev_base = parse_number(lineno, toks[1]);
      m.ev_size = parse_number(lineno, toks[2]);
      have_evrange = true;
    } else if (verb == "mailboxes") {
      need(2);
      std::uint64_t n = parse_number(lineno, toks[1]);
      if (n > 0xffffffffULL) throw ManifestError(lineno, "mailbox count out of range");
      m.mailboxes = static_cast<std::uint32_t>(n);
    } else if (verb == "page_table") {
      need(2);
      m.ops.emplace_back(manifest_op::PageTable{parse_number(lineno, toks[1])});
    } else if (verb == "load") {
      need(3);
      manifest_op::Load op;
      op.vaddr = parse_number(lineno, toks[1]);
      auto perms = parse_perms(toks[2]);
      if (!perms) throw ManifestError(lineno, "bad permissions '" + toks[2] + "'");
      op.perms = *perms;
      bool have_contents = false;
      std::optional<Digest> expected;
      for (std::size_t i = 3; i < toks.size(); ++i) {
        auto [k, v] = key_value(lineno, toks[i]);
        if (k == "page") {
          op.page = parse_number(lineno, v);
        } else if (k == "file") {
          std::filesystem::path p(v);
          if (p.is_relative()) p = base_dir / p;
          op.contents = read_binary(lineno, p);
          have_contents = true;
        } else if (k == "sha3") {
          expected = fixed_from_hex<32>(v);
          if (!expected) throw ManifestError(lineno, "sha3 must be 64 hex characters");
        } else if (k == "fill") {
          std::uint64_t b = parse_number(lineno, v);
          if (b > 0xff) throw ManifestError(lineno, "fill byte out of range");
          op.contents.assign(m.page_size, static_cast<std::uint8_t>(b));
          have_contents = true;
        } else if (k == "hex") {
          auto bytes = from_hex(v);
          if (!bytes) throw ManifestError(lineno, "bad hex contents");
          op.contents = std::move(*bytes);
          have_contents = true;
        } else {
          throw ManifestError(lineno, "unknown load key '" + k + "'");
        }
      }
      if (!have_contents) throw ManifestError(lineno, "load needs file=, fill= or hex=");
      if (expected && crypto::sha3_256(op.contents) != *expected) {
        throw ManifestError(lineno, "page contents do not match sha3");
      }
      if (op.contents.size() > m.page_size) throw ManifestError(lineno, "page contents exceed page_size");
      m.ops.emplace_back(std::move(op));
    } else if (verb == "thread") {
      manifest_op::Thread op;
      bool have_entry = false;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        auto [k, v] = key_value(lineno, toks[i]);
        if (k == "entry") {
          op.entry = parse_number(lineno, v);
          have_entry = true;
        } else if (k == "pagefault") {
          op.handlers[FaultKind::PageFault] = parse_number(lineno, v);
        } else if (k == "fault") {
          op.handlers[FaultKind::EnclaveFault] = parse_number(lineno, v);
        } else {
          throw ManifestError(lineno, "unknown thread key '" + k + "'");
        }
      }
      if (!have_entry) throw ManifestError(lineno, "thread needs entry=");
      m.ops.emplace_back(std::move(op));
    } else {
      throw ManifestError(lineno, "unknown directive '" + verb + "'");
    }
  }
  if (!have_evrange) throw ManifestError(lineno, "missing evrange");
  return m;
}

Manifest Manifest::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError(0, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

std::string Manifest::to_text() const {
  std::ostringstream out;
  out << "page_size " << page_size << "\n";
  out << "platform backend=" << to_string(backend) << " sm_image_hash=" << to_hex(sm_image_hash) << "\n";
  out << "evrange " << hex64(ev_base) << " " << hex64(ev_size) << "\n";
  out << "mailboxes " << mailboxes << "\n";
  for (const ManifestOp& op : ops) {
    std::visit(overloaded{
                   [&](const manifest_op::PageTable& o) { out << "page_table " << hex64(o.vaddr) << "\n"; },
                   [&](const manifest_op::Load& o) {
                     out << "load " << hex64(o.vaddr) << " " << perms_str(o.perms);
                     if (o.page) out << " page=" << *o.page;
                     out << " hex=" << to_hex(o.contents) << "\n";
                   },
                   [&](const manifest_op::Thread& o) {
                     out << "thread entry=" << hex64(o.entry);
                     for (const auto& [kind, va] : o.handlers) {
                       out << (kind == FaultKind::PageFault ? " pagefault=" : " fault=") << hex64(va);
                     }
                     out << "\n";
                   },
               },
               op);
  }
  return out.str();
}

std::uint64_t Manifest::capabilities() const { return capabilities_for(backend); }

std::uint64_t Manifest::pages_needed() const {
  std::uint64_t next = 0;
  std::uint64_t highest = 0;
  for (const ManifestOp& op : ops) {
    std::uint64_t idx = next;
    if (const auto* load = std::get_if<manifest_op::Load>(&op); load && load->page) idx = *load->page;
    if (std::holds_alternative<manifest_op::Thread>(op)) continue;
    highest = std::max(highest, idx + 1);
    next = std::max(next, idx + 1);
  }
  return highest;
}

std::size_t Manifest::thread_count() const {
  return static_cast<std::size_t>(
      std::count_if(ops.begin(), ops.end(), [](const ManifestOp& op) { return std::holds_alternative<manifest_op::Thread>(op); }));
}

std::string rule_id(Status status) {
  switch (status) {
    case Status::AliasViolation: return "alias";
    case Status::OrderViolation: return "order";
    case Status::TablesFirstViolation: return "tables-first";
    default: break;
  }
  std::string out;
  for (char c : to_string(status)) {
    if (std::isupper(static_cast<unsigned char>(c)) && !out.empty()) out += '-';
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

MeasureOutcome measure_manifest(const Manifest& m) {
  auto violation = [](Status s, std::size_t index) { return MeasureOutcome{RuleViolation{rule_id(s), index}}; };
  std::uint64_t page = m.page_size;
  auto in_evrange = [&](VirtAddr va) { return va >= m.ev_base && va - m.ev_base < m.ev_size; };
  if (m.mailboxes > kMaxMailboxes || m.ev_size == 0 || m.ev_base % page != 0 || m.ev_size % page != 0 ||
      m.ev_base + m.ev_size < m.ev_base) {
    return violation(Status::BadArgument, 0);
  }
  MeasurementState state;
  state.extend(CreateRecord{m.ev_base, m.ev_size, m.mailboxes, m.sm_image_hash, m.capabilities()});

  std::optional<std::uint64_t> cursor;
  std::set<VirtAddr> table_vaddrs;
  std::set<VirtAddr> data_vaddrs;
  bool data_loaded = false;
  std::size_t threads = 0;
  for (std::size_t i = 0; i < m.ops.size(); ++i) {
    std::size_t index = i + 1;
    const ManifestOp& op = m.ops[i];
    if (const auto* pt = std::get_if<manifest_op::PageTable>(&op)) {
      if (pt->vaddr % page != 0 || !in_evrange(pt->vaddr)) return violation(Status::BadArgument, index);
      if (data_loaded) return violation(Status::TablesFirstViolation, index);
      if (!table_vaddrs.insert(pt->vaddr).second) return violation(Status::AliasViolation, index);
      cursor = cursor ? *cursor + 1 : 0;
      state.extend(PageTableRecord{pt->vaddr});
    } else if (const auto* load = std::get_if<manifest_op::Load>(&op)) {
      if (load->vaddr % page != 0 || !in_evrange(load->vaddr)) return violation(Status::BadArgument, index);
      if (load->perms == 0 || load->perms > perm::kAll) return violation(Status::BadArgument, index);
      if (load->contents.size() > page) return violation(Status::BadArgument, index);
      if (table_vaddrs.empty()) return violation(Status::TablesFirstViolation, index);
      if (data_vaddrs.count(load->vaddr) != 0) return violation(Status::AliasViolation, index);
      std::uint64_t idx = load->page.value_or(cursor ? *cursor + 1 : 0);
      if (cursor && idx <= *cursor) return violation(Status::OrderViolation, index);
      data_vaddrs.insert(load->vaddr);
      cursor = idx;
      data_loaded = true;
      Bytes contents = load->contents;
      contents.resize(page, 0);
      state.extend(LoadPageRecord{load->vaddr, load->perms, std::move(contents)});
    } else {
      const auto& th = std::get<manifest_op::Thread>(op);
      if (!in_evrange(th.entry)) return violation(Status::BadArgument, index);
      for (const auto& [kind, va] : th.handlers) {
        if (!in_evrange(va)) return violation(Status::BadArgument, index);
      }
      ++threads;
      state.extend(ThreadRecord{th.entry, th.handlers});
    }
  }
  if (threads == 0) return violation(Status::NoThreads, m.ops.size() + 1);
  return state.finalize();
}

std::vector<ResourceId> reserve_os_memory(SecurityMonitor& sm, CoreId os_core, std::uint64_t pages,
                                          const std::vector<ResourceId>& avoid) {
  const Machine& machine = sm.machine();
  const MachineConfig& mc = machine.config();
  auto avoided = [&](const ResourceId& id) { return std::find(avoid.begin(), avoid.end(), id) != avoid.end(); };
  std::vector<ResourceId> out;
  if (mc.backend == IsolationBackendKind::RegionBased) {
    std::uint64_t got = 0;
    for (std::uint32_t r = 0; r < mc.region_count && got < std::max<std::uint64_t>(pages, 1); ++r) {
      ResourceId id{ResourceType::MemoryRegion, r};
      const ResourceRecord* rec = sm.resources().find(id);
      if (avoided(id) || rec == nullptr || !rec->owner.is_os()) continue;
      if (rec->state != ResourceState::Owned && rec->state != ResourceState::Clean) continue;
      out.push_back(id);
      got += mc.pages_per_region();
    }
    if (got < pages) throw std::runtime_error("not enough free OS regions for the enclave");
    return out;
  }
  std::uint64_t bytes = std::max<std::uint64_t>(pages, 1) * mc.page_size;
  PhysAddr candidate = mc.monitor_bytes();
  for (const auto& [base, iv] : machine.backend().intervals()) {
    if (candidate + bytes <= base) break;
    candidate = std::max(candidate, base + iv.size);
  }
  if (candidate + bytes > mc.phys_memory_bytes) throw std::runtime_error("no free physical range for an interval");
  ApiResponse r = sm.call(os_core, api::CarveInterval{candidate, bytes});
  if (!r.ok()) throw std::runtime_error("carve_interval failed: " + std::string(to_string(r.status)));
  out.push_back({ResourceType::MemoryInterval, candidate});
  return out;
}

LiveLoad load_manifest(SecurityMonitor& sm, CoreId os_core, const Manifest& m, const LoadPlacement& placement) {
  const Machine& machine = sm.machine();
  if (m.page_size != machine.page_size()) throw std::runtime_error("manifest page_size does not match the machine");
  if (m.backend != machine.backend().kind()) throw std::runtime_error("manifest backend does not match the machine");
  if (m.sm_image_hash != sm.sm_identity().sm_image_hash) {
    throw std::runtime_error("manifest sm_image_hash does not match the monitor");
  }
  LiveLoad result;
  auto fail = [&](Status s, std::size_t index) {
    result.outcome = RuleViolation{rule_id(s), index};
    return result;
  };
  auto call = [&](const ApiCall& c) { return sm.call(os_core, c); };

  auto eid = placement.eid ? placement.eid : sm.free_metadata_slot(enclave_metadata_bytes(m.mailboxes));
  if (!eid) throw std::runtime_error("no free monitor slot for enclave metadata");
  result.eid = *eid;
  std::vector<ResourceId> memory = placement.memory;
  if (memory.empty()) memory = reserve_os_memory(sm, os_core, m.pages_needed());

  std::optional<PhysAddr> staging = placement.staging;
  if (!staging) {
    for (std::uint64_t ppn = machine.config().page_count(); ppn-- > 0;) {
      PhysAddr p = machine.page_base(ppn);
      auto owner_res = sm.memory_resource_of(p);
      bool in_memory = owner_res && std::find(memory.begin(), memory.end(), *owner_res) != memory.end();
      if (!in_memory && machine.backend().owner_of(p).is_os()) {
        staging = p;
        break;
      }
    }
    if (!staging) throw std::runtime_error("no OS page available for staging");
  }

  ApiResponse r = call(api::CreateEnclave{*eid, m.ev_base, m.ev_size, m.mailboxes});
  if (!r.ok()) return fail(r.status, 0);
  DomainId domain = DomainId::enclave(*eid);
  for (const ResourceId& id : memory) {
    const ResourceRecord* rec = sm.resources().find(id);
    if (rec == nullptr) throw std::runtime_error("unknown memory resource " + id.str());
    if (rec->state == ResourceState::Owned) {
      if (!(r = call(api::BlockResource{id})).ok() || !(r = call(api::CleanResource{id})).ok()) {
        throw std::runtime_error("cannot reclaim " + id.str() + ": " + std::string(to_string(r.status)));
      }
    }
    if (!(r = call(api::GrantResource{id, domain})).ok()) {
      throw std::runtime_error("cannot grant " + id.str() + ": " + std::string(to_string(r.status)));
    }
  }
  std::vector<std::uint64_t> owned = sm.pages_owned_by(domain);
  auto cursor_index = [&]() -> std::optional<std::uint64_t> {
    const EnclaveMetadata* e = sm.enclave(*eid);
    if (e == nullptr || !e->load_cursor) return std::nullopt;
    auto it = std::find(owned.begin(), owned.end(), *e->load_cursor);
    return static_cast<std::uint64_t>(it - owned.begin());
  };

  std::size_t thread_no = 0;
  for (std::size_t i = 0; i < m.ops.size(); ++i) {
    std::size_t index = i + 1;
    const ManifestOp& op = m.ops[i];
    if (const auto* pt = std::get_if<manifest_op::PageTable>(&op)) {
      r = call(api::AllocatePageTable{*eid, pt->vaddr});
    } else if (const auto* load = std::get_if<manifest_op::Load>(&op)) {
      auto cur = cursor_index();
      std::uint64_t idx = load->page.value_or(cur ? *cur + 1 : 0);
      if (idx >= owned.size()) return fail(Status::OutOfEnclaveMemory, index);
      if (Status s = sm.store_page(os_core, *staging, load->contents); s != Status::Ok) {
        throw std::runtime_error("cannot write staging page: " + std::string(to_string(s)));
      }
      r = call(api::LoadPage{*eid, load->vaddr, machine.page_base(owned[idx]), *staging, load->perms});
    } else {
      const auto& th = std::get<manifest_op::Thread>(op);
      std::optional<PhysAddr> tid;
      if (thread_no < placement.tids.size()) {
        tid = placement.tids[thread_no];
      } else {
        tid = sm.free_metadata_slot(kThreadMetadataBytes);
      }
      if (!tid) throw std::runtime_error("no free monitor slot for thread metadata");
      r = call(api::CreateThread{*eid, *tid, th.entry, th.handlers});
      if (r.ok()) result.tids.push_back(*tid);
      ++thread_no;
    }
    if (!r.ok()) return fail(r.status, index);
  }
  if (!placement.init) {
    result.outcome = Digest{};
    return result;
  }
  r = call(api::InitEnclave{*eid});
  if (!r.ok()) return fail(r.status, m.ops.size() + 1);
  result.outcome = std::get<Digest>(r.payload);
  return result;
}

}  // namespace smon
