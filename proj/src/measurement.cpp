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

#include "smon/measurement.hpp"

namespace smon {

namespace {

struct BodyEncoder {
  Bytes& out;

  RecordTag operator()(const CreateRecord& r) const {
    put_u64(out, r.ev_base);
    put_u64(out, r.ev_size);
    put_u64(out, r.mailbox_count);
    put_bytes(out, r.sm_image_hash);
    put_u64(out, r.capabilities);
    return RecordTag::Create;
  }
  RecordTag operator()(const PageTableRecord& r) const {
    put_u64(out, r.vaddr);
    return RecordTag::PageTableAlloc;
  }
  RecordTag operator()(const LoadPageRecord& r) const {
    put_u64(out, r.vaddr);
    put_u8(out, r.perms);
    put_u64(out, r.contents.size());
    put_bytes(out, r.contents);
    return RecordTag::LoadPage;
  }
  RecordTag operator()(const ThreadRecord& r) const {
    put_u64(out, r.entry);
    put_u64(out, r.handlers.size());
    for (const auto& [kind, vaddr] : r.handlers) {
      put_u8(out, static_cast<std::uint8_t>(kind));
      put_u64(out, vaddr);
    }
    return RecordTag::CreateThread;
  }
};

}  // namespace

Bytes encode_record(const MeasurementRecord& record) {
  Bytes body;
  RecordTag tag = std::visit(BodyEncoder{body}, record);
  Bytes out;
  out.reserve(body.size() + 9);
  put_u8(out, static_cast<std::uint8_t>(tag));
  put_u64(out, body.size());
  put_bytes(out, body);
  return out;
}

MeasurementState::MeasurementState() { hash_.update(kMeasurementDomain); }

void MeasurementState::extend(const MeasurementRecord& record) { hash_.update(encode_record(record)); }

Digest MeasurementState::finalize() { return hash_.finalize(); }

}  // namespace smon
