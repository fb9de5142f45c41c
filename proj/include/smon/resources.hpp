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

#include <map>
#include <vector>

#include "smon/types.hpp"

namespace smon {

enum class ResourceType : std::uint8_t { Core, MemoryRegion, MemoryInterval, Thread, MailboxSlot };

std::string_view to_string(ResourceType type);
std::optional<ResourceType> parse_resource_type(std::string_view name);

/// (type, rid) addressing: rid is the region index, interval base, core
/// index, thread metadata address, or mailbox address inside enclave metadata.
struct ResourceId {
  ResourceType type = ResourceType::MemoryRegion;
  std::uint64_t rid = 0;

  auto operator<=>(const ResourceId&) const = default;
  std::string str() const;
};

enum class ResourceState : std::uint8_t { Owned, Blocked, Clean, Offered };

std::string_view to_string(ResourceState state);

struct ResourceRecord {
  ResourceId id;
  DomainId owner;
  ResourceState state = ResourceState::Owned;
  DomainId offered_to;  // meaningful only in Offered

  bool operator==(const ResourceRecord&) const = default;
};

/// Edges of the generic resource lifecycle.
enum class ResourceEdge : std::uint8_t { Block, Clean, Offer, Accept, Reclaim };

std::string_view to_string(ResourceEdge edge);

/// The lifecycle diagram as a pure function: the successor state of an
/// edge, or WrongState/NotOffered when the diagram has no such edge.
Result<ResourceState> next_resource_state(ResourceState from, ResourceEdge edge);

class ResourceMap {
 public:
  ResourceRecord* find(const ResourceId& id);
  const ResourceRecord* find(const ResourceId& id) const;
  void insert(ResourceRecord record);
  void erase(const ResourceId& id) { records_.erase(id); }

  const std::map<ResourceId, ResourceRecord>& records() const { return records_; }
  std::vector<ResourceId> owned_by(DomainId domain) const;
  std::size_t size() const { return records_.size(); }

  void serialize(Bytes& out) const;

 private:
  std::map<ResourceId, ResourceRecord> records_;
};

}  // namespace smon
