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

#include "smon/identity.hpp"

#include <algorithm>

namespace smon {

namespace {

constexpr std::string_view kDeviceCertTag = "smon-device-cert-v1";
constexpr std::string_view kSmCertTag = "smon-sm-cert-v1";

ByteView text_bytes(std::string_view s) { return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}; }

crypto::Seed to_seed(const Bytes& b) {
  crypto::Seed s{};
  std::copy_n(b.begin(), s.size(), s.begin());
  return s;
}

template <std::size_t N>
void put_field(Bytes& out, const std::array<std::uint8_t, N>& field) {
  put_u32(out, N);
  put_bytes(out, field);
}

template <std::size_t N>
bool read_field(ByteReader& in, std::array<std::uint8_t, N>& field) {
  auto len = in.u32();
  if (!len || *len != N) return false;
  auto bytes = in.bytes(N);
  if (!bytes) return false;
  std::copy(bytes->begin(), bytes->end(), field.begin());
  return true;
}

}  // namespace

Bytes DeviceCertificate::signed_payload() const {
  Bytes out;
  put_bytes(out, text_bytes(kDeviceCertTag));
  put_bytes(out, device_key);
  put_bytes(out, manufacturer_key);
  return out;
}

bool DeviceCertificate::verify() const {
  return crypto::ed25519_verify(manufacturer_key, signed_payload(), signature);
}

Bytes DeviceCertificate::serialize() const {
  Bytes out;
  put_field(out, device_key);
  put_field(out, manufacturer_key);
  put_field(out, signature);
  return out;
}

std::optional<DeviceCertificate> DeviceCertificate::parse(ByteView data) {
  ByteReader in(data);
  DeviceCertificate c;
  if (!read_field(in, c.device_key) || !read_field(in, c.manufacturer_key) || !read_field(in, c.signature) ||
      !in.done()) {
    return std::nullopt;
  }
  return c;
}

Bytes SmCertificate::signed_payload() const {
  Bytes out;
  put_bytes(out, text_bytes(kSmCertTag));
  put_bytes(out, sm_key);
  put_bytes(out, sm_image_hash);
  return out;
}

bool SmCertificate::verify(const crypto::PublicKey& device_key) const {
  return crypto::ed25519_verify(device_key, signed_payload(), signature);
}

Bytes SmCertificate::serialize() const {
  Bytes out;
  put_field(out, sm_key);
  put_field(out, sm_image_hash);
  put_field(out, signature);
  return out;
}

std::optional<SmCertificate> SmCertificate::parse(ByteView data) {
  ByteReader in(data);
  SmCertificate c;
  if (!read_field(in, c.sm_key) || !read_field(in, c.sm_image_hash) || !read_field(in, c.signature) || !in.done()) {
    return std::nullopt;
  }
  return c;
}

Manufacturer::Manufacturer(const crypto::Seed& seed) : seed_(seed), public_key_(crypto::ed25519_public_key(seed)) {}

DeviceCertificate Manufacturer::certify(const crypto::PublicKey& device_key) const {
  DeviceCertificate cert;
  cert.device_key = device_key;
  cert.manufacturer_key = public_key_;
  cert.signature = crypto::ed25519_sign(seed_, cert.signed_payload());
  return cert;
}

DeviceIdentity DeviceIdentity::provision(const crypto::Seed& root_secret, const Manufacturer& manufacturer) {
  DeviceIdentity device;
  device.root_secret = root_secret;
  device.public_key = crypto::ed25519_public_key(device.signing_seed());
  device.certificate = manufacturer.certify(device.public_key);
  return device;
}

crypto::Seed DeviceIdentity::signing_seed() const {
  return to_seed(crypto::hkdf_sha3(root_secret, {}, text_bytes("smon-device-signing-key"), 32));
}

SmIdentity derive_sm_identity(const DeviceIdentity& device, ByteView sm_image) {
  SmIdentity id;
  id.sm_image_hash = crypto::sha3_256(sm_image);
  id.secret_key = to_seed(crypto::hkdf_sha3(device.root_secret, id.sm_image_hash, text_bytes("smon-sm-attestation-key"), 32));
  id.public_key = crypto::ed25519_public_key(id.secret_key);
  id.certificate.sm_key = id.public_key;
  id.certificate.sm_image_hash = id.sm_image_hash;
  id.certificate.signature = crypto::ed25519_sign(device.signing_seed(), id.certificate.signed_payload());
  return id;
}

DeviceIdentity simulated_device(std::string_view label, const Manufacturer& manufacturer) {
  crypto::Sha3_256 h;
  h.update(std::string_view("smon-device-fuse:"));
  h.update(label);
  return DeviceIdentity::provision(h.finalize(), manufacturer);
}

Manufacturer simulated_manufacturer(std::string_view label) {
  crypto::Sha3_256 h;
  h.update(std::string_view("smon-manufacturer-seed:"));
  h.update(label);
  return Manufacturer(h.finalize());
}

Bytes default_sm_image() {
  std::string_view text = "smon reference security monitor image v1";
  return Bytes(text.begin(), text.end());
}

}  // namespace smon
