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

// Enclave measurement chain.
//
// Normative byte layout (all integers little-endian):
//
//   stream   := "smon-enclave-v1" record*
//   record   := tag:u8 body_len:u64 body
//
//   tag 0x01 Create         ev_base:u64 ev_size:u64 mailbox_count:u64
//                           sm_image_hash:[32] capabilities:u64
//   tag 0x02 PageTableAlloc vaddr:u64
//   tag 0x03 LoadPage       vaddr:u64 perms:u8 content_len:u64 content
//   tag 0x04 CreateThread   entry:u64 handler_count:u64 (kind:u8 vaddr:u64)*
//                           handlers sorted by kind
//
// No physical address is ever part of a record, so two loads of the same
// image into different physical memory produce the same digest.

#pragma once

#include <map>
#include <variant>

#include "smon/crypto.hpp"
#include "smon/types.hpp"

namespace smon {

inline constexpr std::string_view kMeasurementDomain = "smon-enclave-v1";

enum class RecordTag : std::uint8_t { Create = 0x01, PageTableAlloc = 0x02, LoadPage = 0x03, CreateThread = 0x04 };

/// Platform capability bits folded into the Create record.
namespace capability {
inline constexpr std::uint64_t kRegionIsolation = 1u << 0;
inline constexpr std::uint64_t kIntervalIsolation = 1u << 1;
inline constexpr std::uint64_t kCachePartitioning = 1u << 2;
inline constexpr std::uint64_t kDmaFiltering = 1u << 3;
inline constexpr std::uint64_t kCoreCleaning = 1u << 4;
}  // namespace capability

using FaultHandlers = std::map<FaultKind, VirtAddr>;

struct CreateRecord {
  VirtAddr ev_base = 0;
  std::uint64_t ev_size = 0;
  std::uint64_t mailbox_count = 0;
  Digest sm_image_hash{};
  std::uint64_t capabilities = 0;
};

struct PageTableRecord {
  VirtAddr vaddr = 0;
};

struct LoadPageRecord {
  VirtAddr vaddr = 0;
  std::uint8_t perms = 0;
  Bytes contents;
};

struct ThreadRecord {
  VirtAddr entry = 0;
  FaultHandlers handlers;
};

using MeasurementRecord = std::variant<CreateRecord, PageTableRecord, LoadPageRecord, ThreadRecord>;

/// tag || body_len || body.
Bytes encode_record(const MeasurementRecord& record);

class MeasurementState {
 public:
  /// Fresh state with the domain-separation prefix absorbed.
  MeasurementState();

  void extend(const MeasurementRecord& record);
  /// The state is spent afterwards; further use throws std::logic_error.
  Digest finalize();
  bool finalized() const { return hash_.finalized(); }

  void serialize(Bytes& out) const { hash_.serialize(out); }

 private:
  crypto::Sha3_256 hash_;
};

}  // namespace smon
