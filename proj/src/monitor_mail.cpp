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

#include "smon/monitor.hpp"

namespace smon {

namespace {

bool mailbox_usable(const ResourceMap& resources, PhysAddr eid, std::uint32_t index) {
  const ResourceRecord* rec = resources.find({ResourceType::MailboxSlot, mailbox_address(eid, index)});
  return rec != nullptr && rec->state == ResourceState::Owned;
}

}  // namespace

Status SecurityMonitor::accept_mail(DomainId caller, const api::AcceptMail& a) {
  if (!caller.is_enclave()) return Status::NotEnclave;
  EnclaveMetadata& e = enclaves_.at(caller.eid());
  if (a.mailbox >= e.mailboxes.size()) return Status::NoSuchMailbox;
  if (!mailbox_usable(resources_, e.eid, a.mailbox)) return Status::WrongState;
  Mailbox& mb = e.mailboxes[a.mailbox];
  mb = Mailbox{};
  mb.state = Mailbox::State::Accepting;
  mb.expected_sender = a.sender;
  return Status::Ok;
}

Status SecurityMonitor::send_mail(DomainId caller, const api::SendMail& a) {
  if (!caller.is_enclave()) return Status::NotEnclave;
  if (a.message.size() > kMailboxMessageBytes) return Status::MessageTooLarge;
  auto it = enclaves_.find(a.recipient);
  if (it == enclaves_.end() || it->second.state != EnclaveState::Initialized) return Status::NoSuchEnclave;
  EnclaveMetadata& r = it->second;
  const EnclaveMetadata& sender = enclaves_.at(caller.eid());
  for (std::uint32_t i = 0; i < r.mailboxes.size(); ++i) {
    Mailbox& mb = r.mailboxes[i];
    if (mb.state != Mailbox::State::Accepting || !mailbox_usable(resources_, r.eid, i)) continue;
    if (mb.expected_sender != caller && !mutated(mutation::kSkipMailSenderCheck)) continue;
    mb.state = Mailbox::State::Full;
    mb.sender = caller;
    mb.message = a.message;
    mb.sender_measurement = sender.final_measurement.value_or(Digest{});
    return Status::Ok;
  }
  return Status::NotAccepting;
}

Result<MailDelivery> SecurityMonitor::get_mail(DomainId caller, const api::GetMail& a) {
  if (!caller.is_enclave()) return Status::NotEnclave;
  EnclaveMetadata& e = enclaves_.at(caller.eid());
  if (a.mailbox >= e.mailboxes.size()) return Status::NoSuchMailbox;
  Mailbox& mb = e.mailboxes[a.mailbox];
  if (mb.state != Mailbox::State::Full) return Status::Empty;
  MailDelivery out{std::move(mb.message), mb.sender, mb.sender_measurement};
  mb = Mailbox{};
  return out;
}

Status SecurityMonitor::get_attestation_key(DomainId caller) {
  if (!caller.is_enclave()) return Status::NotEnclave;
  EnclaveMetadata& e = enclaves_.at(caller.eid());
  bool signing = config_.signing_enclave_measurement && e.final_measurement == config_.signing_enclave_measurement;
  if (!signing && !mutated(mutation::kSkipSigningEnclaveCheck)) return Status::NotSigningEnclave;
  for (std::uint32_t i = 0; i < e.mailboxes.size(); ++i) {
    Mailbox& mb = e.mailboxes[i];
    if (mb.state != Mailbox::State::Accepting || !mb.expected_sender.is_monitor()) continue;
    if (!mailbox_usable(resources_, e.eid, i)) continue;
    mb.state = Mailbox::State::Full;
    mb.sender = DomainId::monitor();
    mb.message.assign(sm_.secret_key.begin(), sm_.secret_key.end());
    mb.sender_measurement = Digest{};
    return Status::Ok;
  }
  return Status::NotAccepting;
}

Result<Bytes> SecurityMonitor::get_field(const api::GetField& a) const {
  switch (static_cast<FieldId>(a.field)) {
    case FieldId::PublicKey: return Bytes(sm_.public_key.begin(), sm_.public_key.end());
    case FieldId::SmCertificate: return sm_.certificate.serialize();
    case FieldId::DeviceCertificate: return device_.certificate.serialize();
    case FieldId::SmMeasurement: return Bytes(sm_.sm_image_hash.begin(), sm_.sm_image_hash.end());
  }
  return Status::NoSuchField;
}

}  // namespace smon
