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

#include "smon/attestation.hpp"

namespace smon {

namespace {

constexpr std::uint8_t kRequestTag = 0x51;
constexpr std::uint8_t kReplyTag = 0x52;

void put_field(Bytes& out, ByteView field) {
  put_u32(out, static_cast<std::uint32_t>(field.size()));
  put_bytes(out, field);
}

std::optional<Bytes> read_field(ByteReader& in) {
  auto len = in.u32();
  if (!len) return std::nullopt;
  return in.bytes(*len);
}

template <std::size_t N>
bool read_fixed(ByteReader& in, std::array<std::uint8_t, N>& out) {
  auto field = read_field(in);
  if (!field || field->size() != N) return false;
  std::copy(field->begin(), field->end(), out.begin());
  return true;
}

template <std::size_t N>
bool take(ByteReader& in, std::array<std::uint8_t, N>& out) {
  auto bytes = in.bytes(N);
  if (!bytes) return false;
  std::copy(bytes->begin(), bytes->end(), out.begin());
  return true;
}

ByteView text_bytes(std::string_view s) { return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}; }

}  // namespace

Bytes AttestationBundle::serialize() const {
  Bytes out;
  put_field(out, measurement);
  put_field(out, nonce);
  put_field(out, channel_binding);
  put_field(out, signature);
  put_field(out, sm_certificate.serialize());
  put_field(out, device_certificate.serialize());
  return out;
}

std::optional<AttestationBundle> AttestationBundle::parse(ByteView data) {
  ByteReader in(data);
  AttestationBundle b;
  if (!read_fixed(in, b.measurement) || !read_fixed(in, b.nonce) || !read_fixed(in, b.channel_binding) ||
      !read_fixed(in, b.signature)) {
    return std::nullopt;
  }
  auto sm = read_field(in);
  auto dev = read_field(in);
  if (!sm || !dev || !in.done()) return std::nullopt;
  auto sm_cert = SmCertificate::parse(*sm);
  auto dev_cert = DeviceCertificate::parse(*dev);
  if (!sm_cert || !dev_cert) return std::nullopt;
  b.sm_certificate = *sm_cert;
  b.device_certificate = *dev_cert;
  return b;
}

Bytes attestation_payload(const Digest& nonce, const Digest& channel_binding, const Digest& measurement) {
  Bytes out;
  put_bytes(out, nonce);
  put_bytes(out, channel_binding);
  put_bytes(out, measurement);
  return out;
}

std::string_view to_string(VerifyReason reason) {
  switch (reason) {
    case VerifyReason::Ok: return "ok";
    case VerifyReason::Malformed: return "malformed";
    case VerifyReason::DeviceKey: return "device-key";
    case VerifyReason::DeviceCertificate: return "device-certificate";
    case VerifyReason::SmCertificate: return "sm-certificate";
    case VerifyReason::Nonce: return "nonce";
    case VerifyReason::Measurement: return "measurement";
    case VerifyReason::ChannelBinding: return "channel-binding";
    case VerifyReason::Signature: return "signature";
  }
  return "unknown";
}

VerifyReason verify_attestation(const AttestationBundle& b, const VerifyExpectations& expect) {
  if (b.device_certificate.device_key != expect.device_key) return VerifyReason::DeviceKey;
  if (!b.device_certificate.verify()) return VerifyReason::DeviceCertificate;
  if (!b.sm_certificate.verify(b.device_certificate.device_key)) return VerifyReason::SmCertificate;
  if (b.nonce != expect.nonce) return VerifyReason::Nonce;
  if (b.measurement != expect.measurement) return VerifyReason::Measurement;
  if (expect.channel_binding && b.channel_binding != *expect.channel_binding) return VerifyReason::ChannelBinding;
  if (!crypto::ed25519_verify(b.sm_certificate.sm_key, attestation_payload(b.nonce, b.channel_binding, b.measurement),
                              b.signature)) {
    return VerifyReason::Signature;
  }
  return VerifyReason::Ok;
}

VerifyReason verify_attestation(ByteView serialized, const VerifyExpectations& expect) {
  auto bundle = AttestationBundle::parse(serialized);
  if (!bundle) return VerifyReason::Malformed;
  return verify_attestation(*bundle, expect);
}

Digest channel_binding(const crypto::PublicKey& verifier_public, const crypto::PublicKey& enclave_public) {
  crypto::Sha3_256 h;
  h.update(std::string_view("smon-channel-binding-v1"));
  h.update(verifier_public);
  h.update(enclave_public);
  return h.finalize();
}

std::optional<Digest> derive_channel_key(const crypto::Seed& local_secret, const crypto::PublicKey& remote_public,
                                         const Digest& binding) {
  auto shared = crypto::x25519(local_secret, remote_public);
  if (!shared) return std::nullopt;
  Bytes okm = crypto::hkdf_sha3(*shared, binding, text_bytes("smon-channel-key-v1"), 32);
  Digest key{};
  std::copy(okm.begin(), okm.end(), key.begin());
  return key;
}

Bytes AttestationRequest::encode() const {
  Bytes out;
  put_u8(out, kRequestTag);
  put_bytes(out, nonce);
  put_bytes(out, channel_binding);
  put_bytes(out, target_measurement);
  return out;
}

std::optional<AttestationRequest> AttestationRequest::decode(ByteView data) {
  ByteReader in(data);
  AttestationRequest r;
  if (in.u8() != kRequestTag) return std::nullopt;
  if (!take(in, r.nonce) || !take(in, r.channel_binding) || !take(in, r.target_measurement) || !in.done()) {
    return std::nullopt;
  }
  return r;
}

Bytes AttestationReply::encode() const {
  Bytes out;
  put_u8(out, kReplyTag);
  put_bytes(out, nonce);
  put_bytes(out, signature);
  return out;
}

std::optional<AttestationReply> AttestationReply::decode(ByteView data) {
  ByteReader in(data);
  AttestationReply r;
  if (in.u8() != kReplyTag) return std::nullopt;
  if (!take(in, r.nonce) || !take(in, r.signature) || !in.done()) return std::nullopt;
  return r;
}

namespace signing_enclave {

Status fetch_key(SecurityMonitor& sm, CoreId core, std::uint32_t mailbox, VirtAddr key_vaddr) {
  ApiResponse r = sm.call(core, api::AcceptMail{mailbox, DomainId::monitor()});
  if (!r.ok()) return r.status;
  r = sm.call(core, api::GetAttestationKey{});
  if (!r.ok()) return r.status;
  r = sm.call(core, api::GetMail{mailbox});
  if (!r.ok()) return r.status;
  const auto& mail = std::get<MailDelivery>(r.payload);
  if (!mail.sender.is_monitor() || mail.message.size() != 32) return Status::BadArgument;
  for (int w = 0; w < 4; ++w) {
    Word v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<Word>(mail.message[w * 8 + i]) << (8 * i);
    if (Status s = sm.store(core, key_vaddr + 8 * w, v); s != Status::Ok) return s;
  }
  return Status::Ok;
}

std::string_view to_string(ServeResult result) {
  switch (result) {
    case ServeResult::Replied: return "replied";
    case ServeResult::NoRequest: return "no-request";
    case ServeResult::Malformed: return "malformed";
    case ServeResult::WrongTarget: return "wrong-target";
    case ServeResult::NoKey: return "no-key";
    case ServeResult::ReplyRejected: return "reply-rejected";
  }
  return "unknown";
}

ServeResult serve(SecurityMonitor& sm, CoreId core, std::uint32_t mailbox, VirtAddr key_vaddr) {
  ApiResponse r = sm.call(core, api::GetMail{mailbox});
  if (!r.ok()) return ServeResult::NoRequest;
  const auto& mail = std::get<MailDelivery>(r.payload);
  auto request = AttestationRequest::decode(mail.message);
  if (!request || !mail.sender.is_enclave()) return ServeResult::Malformed;
  // Only the requester's own measurement is attested.
  if (request->target_measurement != mail.sender_measurement) return ServeResult::WrongTarget;
  crypto::Seed key{};
  bool present = false;
  for (int w = 0; w < 4; ++w) {
    auto v = sm.load(core, key_vaddr + 8 * w);
    if (!v) return ServeResult::NoKey;
    for (int i = 0; i < 8; ++i) key[w * 8 + i] = static_cast<std::uint8_t>(*v >> (8 * i));
    present = present || *v != 0;
  }
  if (!present) return ServeResult::NoKey;
  AttestationReply reply;
  reply.nonce = request->nonce;
  reply.signature = crypto::ed25519_sign(
      key, attestation_payload(request->nonce, request->channel_binding, request->target_measurement));
  r = sm.call(core, api::SendMail{mail.sender.eid(), reply.encode()});
  return r.ok() ? ServeResult::Replied : ServeResult::ReplyRejected;
}

}  // namespace signing_enclave

}  // namespace smon
