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

#include "smon/resources.hpp"

#include <cstdio>

namespace smon {

std::string_view to_string(ResourceType type) {
  switch (type) {
    case ResourceType::Core: return "core";
    case ResourceType::MemoryRegion: return "region";
    case ResourceType::MemoryInterval: return "interval";
    case ResourceType::Thread: return "thread";
    case ResourceType::MailboxSlot: return "mailbox";
  }
  return "unknown";
}

std::optional<ResourceType> parse_resource_type(std::string_view name) {
  for (auto t : {ResourceType::Core, ResourceType::MemoryRegion, ResourceType::MemoryInterval, ResourceType::Thread,
                 ResourceType::MailboxSlot}) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

std::string ResourceId::str() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s:0x%llx", std::string(to_string(type)).c_str(),
                static_cast<unsigned long long>(rid));
  return buf;
}

std::string_view to_string(ResourceState state) {
  switch (state) {
    case ResourceState::Owned: return "Owned";
    case ResourceState::Blocked: return "Blocked";
    case ResourceState::Clean: return "Clean";
    case ResourceState::Offered: return "Offered";
  }
  return "unknown";
}

std::string_view to_string(ResourceEdge edge) {
  switch (edge) {
    case ResourceEdge::Block: return "block";
    case ResourceEdge::Clean: return "clean";
    case ResourceEdge::Offer: return "offer";
    case ResourceEdge::Accept: return "accept";
    case ResourceEdge::Reclaim: return "reclaim";
  }
  return "unknown";
}

Result<ResourceState> next_resource_state(ResourceState from, ResourceEdge edge) {
  switch (edge) {
    case ResourceEdge::Block:
      if (from == ResourceState::Owned) return ResourceState::Blocked;
      break;
    case ResourceEdge::Clean:
      if (from == ResourceState::Blocked) return ResourceState::Clean;
      break;
    case ResourceEdge::Offer:
      if (from == ResourceState::Clean) return ResourceState::Offered;
      break;
    case ResourceEdge::Reclaim:
      if (from == ResourceState::Clean) return ResourceState::Owned;
      break;
    case ResourceEdge::Accept:
      if (from == ResourceState::Offered) return ResourceState::Owned;
      return Status::NotOffered;
  }
  return Status::WrongState;
}

ResourceRecord* ResourceMap::find(const ResourceId& id) {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

const ResourceRecord* ResourceMap::find(const ResourceId& id) const {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

void ResourceMap::insert(ResourceRecord record) { records_[record.id] = record; }

std::vector<ResourceId> ResourceMap::owned_by(DomainId domain) const {
  std::vector<ResourceId> out;
  for (const auto& [id, rec] : records_) {
    if (rec.owner == domain) out.push_back(id);
  }
  return out;
}

void ResourceMap::serialize(Bytes& out) const {
  put_u64(out, records_.size());
  for (const auto& [id, rec] : records_) {
    put_u8(out, static_cast<std::uint8_t>(id.type));
    put_u64(out, id.rid);
    put_u64(out, rec.owner.raw());
    put_u8(out, static_cast<std::uint8_t>(rec.state));
    put_u64(out, rec.state == ResourceState::Offered ? rec.offered_to.raw() : 0);
  }
}

}  // namespace smon
