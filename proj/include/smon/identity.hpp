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

// Device PKI and secure-boot key derivation. The chain is
// manufacturer -> device -> monitor: the manufacturer certifies the device
// key, and the device key certifies the monitor's attestation key together
// with the hash of the monitor image it was derived for.

#pragma once

#include "smon/crypto.hpp"

namespace smon {

struct DeviceCertificate {
  crypto::PublicKey device_key{};
  crypto::PublicKey manufacturer_key{};
  crypto::Signature signature{};

  Bytes signed_payload() const;
  bool verify() const;
  Bytes serialize() const;
  static std::optional<DeviceCertificate> parse(ByteView data);

  bool operator==(const DeviceCertificate&) const = default;
};

struct SmCertificate {
  crypto::PublicKey sm_key{};
  Digest sm_image_hash{};
  crypto::Signature signature{};

  Bytes signed_payload() const;
  bool verify(const crypto::PublicKey& device_key) const;
  Bytes serialize() const;
  static std::optional<SmCertificate> parse(ByteView data);

  bool operator==(const SmCertificate&) const = default;
};

class Manufacturer {
 public:
  explicit Manufacturer(const crypto::Seed& seed);

  const crypto::PublicKey& public_key() const { return public_key_; }
  DeviceCertificate certify(const crypto::PublicKey& device_key) const;

 private:
  crypto::Seed seed_;
  crypto::PublicKey public_key_;
};

/// Simulated fuses plus the manufacturer certificate for the derived key.
struct DeviceIdentity {
  crypto::Seed root_secret{};
  crypto::PublicKey public_key{};
  DeviceCertificate certificate;

  static DeviceIdentity provision(const crypto::Seed& root_secret, const Manufacturer& manufacturer);
  /// Signing key derived from the root secret; only the boot path uses it.
  crypto::Seed signing_seed() const;
};

struct SmIdentity {
  Digest sm_image_hash{};
  crypto::Seed secret_key{};
  crypto::PublicKey public_key{};
  SmCertificate certificate;
};

/// Measures the monitor image and derives its attestation keypair from
/// (device root secret, image hash); the device key certifies the result.
SmIdentity derive_sm_identity(const DeviceIdentity& device, ByteView sm_image);

/// Deterministic device used by scenarios and tests: seeds are expanded from
/// a label so a whole fleet can be recreated from names.
DeviceIdentity simulated_device(std::string_view label, const Manufacturer& manufacturer);
Manufacturer simulated_manufacturer(std::string_view label = "smon-manufacturer");

/// Built-in monitor image used when a configuration does not supply one.
Bytes default_sm_image();

}  // namespace smon
