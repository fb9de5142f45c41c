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

// Remote attestation: the bundle a verifier checks offline, the request and
// reply messages exchanged with the signing enclave, and the routines the
// signing enclave runs.
//
// Bundle wire format, fields in this order, each as len:u32 (LE) || bytes:
//
//   measurement      32
//   nonce            32
//   channel_binding  32
//   signature        64   Ed25519 over nonce || channel_binding || measurement
//   sm_certificate   140  (sm_key, sm_image_hash, signature), each length-prefixed
//   device_cert      140  (device_key, manufacturer_key, signature), each length-prefixed

#pragma once

#include "smon/identity.hpp"
#include "smon/monitor.hpp"

namespace smon {

struct AttestationBundle {
  Digest measurement{};
  Digest nonce{};
  Digest channel_binding{};
  crypto::Signature signature{};
  SmCertificate sm_certificate;
  DeviceCertificate device_certificate;

  Bytes serialize() const;
  static std::optional<AttestationBundle> parse(ByteView data);

  bool operator==(const AttestationBundle&) const = default;
};

Bytes attestation_payload(const Digest& nonce, const Digest& channel_binding, const Digest& measurement);

/// Verifier outcome; every failure names the first link that did not hold.
enum class VerifyReason : std::uint8_t {
  Ok,
  Malformed,
  DeviceKey,
  DeviceCertificate,
  SmCertificate,
  Nonce,
  Measurement,
  ChannelBinding,
  Signature,
};

std::string_view to_string(VerifyReason reason);

struct VerifyExpectations {
  Digest nonce{};
  Digest measurement{};
  crypto::PublicKey device_key{};
  std::optional<Digest> channel_binding;
};

VerifyReason verify_attestation(const AttestationBundle& bundle, const VerifyExpectations& expect);
VerifyReason verify_attestation(ByteView serialized, const VerifyExpectations& expect);

/// Hash of the key-agreement public values carried in the signed payload.
Digest channel_binding(const crypto::PublicKey& verifier_public, const crypto::PublicKey& enclave_public);
/// Session key for the channel: X25519, then HKDF salted with the binding.
std::optional<Digest> derive_channel_key(const crypto::Seed& local_secret, const crypto::PublicKey& remote_public,
                                         const Digest& binding);

struct AttestationRequest {
  Digest nonce{};
  Digest channel_binding{};
  Digest target_measurement{};

  Bytes encode() const;
  static std::optional<AttestationRequest> decode(ByteView data);
};

struct AttestationReply {
  Digest nonce{};
  crypto::Signature signature{};

  Bytes encode() const;
  static std::optional<AttestationReply> decode(ByteView data);
};

/// Routines executed by the signing enclave. `core` must be running it.
namespace signing_enclave {

/// Arms `mailbox` for the monitor, asks for the attestation key, and keeps
/// it in enclave-private memory at key_vaddr.
Status fetch_key(SecurityMonitor& sm, CoreId core, std::uint32_t mailbox, VirtAddr key_vaddr);

enum class ServeResult : std::uint8_t { Replied, NoRequest, Malformed, WrongTarget, NoKey, ReplyRejected };
std::string_view to_string(ServeResult result);

/// Takes one request from `mailbox`, signs it with the cached key, and
/// mails the reply to the requester. Malformed requests get no reply.
ServeResult serve(SecurityMonitor& sm, CoreId core, std::uint32_t mailbox, VirtAddr key_vaddr);

}  // namespace signing_enclave

}  // namespace smon
