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

#include <random>
#include <string>

#include <openssl/evp.h>

#include "smon/manifest.hpp"

namespace smon::testing {

inline Bytes hex_bytes(std::string_view text) {
  auto b = from_hex(text);
  if (!b) throw std::invalid_argument("bad hex in test");
  return *b;
}

template <std::size_t N>
std::array<std::uint8_t, N> hex_array(std::string_view text) {
  auto b = fixed_from_hex<N>(text);
  if (!b) throw std::invalid_argument("bad hex in test");
  return *b;
}

// SHA3-256 through OpenSSL, independent of the library's sponge.
inline Digest openssl_sha3(ByteView data) {
  Digest out{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha3_256(), nullptr);
  return out;
}

// Hand encoder for the measurement stream, written from the documented layout.
class OracleStream {
 public:
  OracleStream() { raw("smon-enclave-v1"); }

  void create(std::uint64_t base, std::uint64_t size, std::uint64_t mailboxes, const Digest& image,
              std::uint64_t caps) {
    Bytes body;
    le(body, base);
    le(body, size);
    le(body, mailboxes);
    body.insert(body.end(), image.begin(), image.end());
    le(body, caps);
    record(1, body);
  }
  void page_table(std::uint64_t vaddr) {
    Bytes body;
    le(body, vaddr);
    record(2, body);
  }
  void load(std::uint64_t vaddr, std::uint8_t perms, const Bytes& page) {
    Bytes body;
    le(body, vaddr);
    body.push_back(perms);
    le(body, page.size());
    body.insert(body.end(), page.begin(), page.end());
    record(3, body);
  }
  void thread(std::uint64_t entry, const std::map<FaultKind, VirtAddr>& handlers) {
    Bytes body;
    le(body, entry);
    le(body, handlers.size());
    for (const auto& [k, v] : handlers) {
      body.push_back(static_cast<std::uint8_t>(k));
      le(body, v);
    }
    record(4, body);
  }
  Digest digest() const { return openssl_sha3(bytes_); }

 private:
  static void le(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void record(std::uint8_t tag, const Bytes& body) {
    bytes_.push_back(tag);
    le(bytes_, body.size());
    bytes_.insert(bytes_.end(), body.begin(), body.end());
  }
  Bytes bytes_;
};

inline constexpr std::uint64_t kRegionCaps = 1 | 4 | 8 | 16;
inline constexpr std::uint64_t kIntervalCaps = 2 | 8 | 16;

// Oracle digest of a valid manifest.
inline Digest oracle_digest(const Manifest& m) {
  OracleStream s;
  s.create(m.ev_base, m.ev_size, m.mailboxes, m.sm_image_hash,
           m.backend == IsolationBackendKind::RegionBased ? kRegionCaps : kIntervalCaps);
  for (const ManifestOp& op : m.ops) {
    if (const auto* pt = std::get_if<manifest_op::PageTable>(&op)) {
      s.page_table(pt->vaddr);
    } else if (const auto* ld = std::get_if<manifest_op::Load>(&op)) {
      Bytes page = ld->contents;
      page.resize(m.page_size, 0);
      s.load(ld->vaddr, ld->perms, page);
    } else {
      const auto& th = std::get<manifest_op::Thread>(op);
      s.thread(th.entry, th.handlers);
    }
  }
  return s.digest();
}

enum class Breakage { None, Alias, Order, TablesFirst };

inline std::string expected_rule(Breakage b) {
  switch (b) {
    case Breakage::Alias: return "alias";
    case Breakage::Order: return "order";
    case Breakage::TablesFirst: return "tables-first";
    case Breakage::None: break;
  }
  return "";
}

// Random manifests for a 16-page region; at most 12 pages consumed.
inline Manifest random_manifest(std::mt19937_64& rng, Breakage breakage = Breakage::None) {
  auto pick = [&](std::uint64_t lo, std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng); };
  Manifest m;
  const std::uint64_t page = m.page_size;
  m.ev_base = 0x400000 + pick(0, 15) * 0x100000;
  m.ev_size = 32 * page;
  m.mailboxes = static_cast<std::uint32_t>(pick(0, 3));

  std::vector<std::uint64_t> slots(32);
  for (std::uint64_t i = 0; i < 32; ++i) slots[i] = i;
  std::shuffle(slots.begin(), slots.end(), rng);
  std::size_t next_slot = 0;
  auto vaddr = [&] { return m.ev_base + slots[next_slot++] * page; };

  std::uint64_t tables = pick(1, 2);
  std::uint64_t loads = pick(1, 6);
  std::vector<ManifestOp> table_ops, load_ops;
  for (std::uint64_t i = 0; i < tables; ++i) table_ops.push_back(manifest_op::PageTable{vaddr()});
  std::uint64_t cursor = tables - 1;
  for (std::uint64_t i = 0; i < loads; ++i) {
    manifest_op::Load ld;
    ld.vaddr = vaddr();
    ld.perms = static_cast<std::uint8_t>(pick(1, 7));
    if (pick(0, 1)) {
      ld.page = cursor + 1 + pick(0, 1);
      cursor = *ld.page;
    } else {
      ++cursor;
    }
    std::uint64_t len = pick(0, 3) == 0 ? page : pick(0, 96);
    for (std::uint64_t b = 0; b < len; ++b) ld.contents.push_back(static_cast<std::uint8_t>(rng()));
    load_ops.push_back(ld);
  }
  for (auto& op : table_ops) m.ops.push_back(op);
  for (auto& op : load_ops) m.ops.push_back(op);
  std::uint64_t threads = pick(1, 2);
  for (std::uint64_t i = 0; i < threads; ++i) {
    manifest_op::Thread th;
    th.entry = m.ev_base + pick(0, m.ev_size - 1);
    if (pick(0, 1)) th.handlers[FaultKind::PageFault] = m.ev_base + pick(0, m.ev_size - 1);
    if (pick(0, 1)) th.handlers[FaultKind::EnclaveFault] = m.ev_base + pick(0, m.ev_size - 1);
    // Threads may appear anywhere after the tables.
    auto pos = m.ops.begin() + static_cast<std::ptrdiff_t>(pick(tables, m.ops.size()));
    m.ops.insert(pos, th);
  }

  auto load_index = [&](std::size_t nth) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < m.ops.size(); ++i) {
      if (std::holds_alternative<manifest_op::Load>(m.ops[i]) && seen++ == nth) return i;
    }
    return m.ops.size();
  };
  switch (breakage) {
    case Breakage::None:
      break;
    case Breakage::Alias: {
      if (loads >= 2 && pick(0, 1)) {
        std::get<manifest_op::Load>(m.ops[load_index(loads - 1)]).vaddr =
            std::get<manifest_op::Load>(m.ops[load_index(0)]).vaddr;
      } else {
        manifest_op::Load dup = std::get<manifest_op::Load>(m.ops[load_index(0)]);
        dup.page.reset();
        m.ops.insert(m.ops.begin() + static_cast<std::ptrdiff_t>(load_index(loads - 1) + 1), dup);
      }
      break;
    }
    case Breakage::Order: {
      // A later load names a page at or below one already consumed.
      manifest_op::Load extra;
      extra.vaddr = vaddr();
      extra.perms = perm::kRead;
      extra.page = pick(0, cursor);
      m.ops.insert(m.ops.begin() + static_cast<std::ptrdiff_t>(load_index(loads - 1) + 1), extra);
      break;
    }
    case Breakage::TablesFirst: {
      if (pick(0, 1)) {
        // data before any table
        std::size_t first = load_index(0);
        ManifestOp ld = m.ops[first];
        m.ops.erase(m.ops.begin() + static_cast<std::ptrdiff_t>(first));
        m.ops.insert(m.ops.begin(), ld);
      } else {
        m.ops.insert(m.ops.begin() + static_cast<std::ptrdiff_t>(load_index(0) + 1), manifest_op::PageTable{vaddr()});
      }
      break;
    }
  }
  return m;
}

}  // namespace smon::testing
