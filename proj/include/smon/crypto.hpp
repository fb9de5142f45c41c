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

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "smon/types.hpp"

namespace smon::crypto {

/// Incremental SHA3-256 (FIPS 202). The sponge is a plain value so that a
/// partially absorbed measurement can be copied and serialized.
class Sha3_256 {
 public:
  static constexpr std::size_t kRate = 136;

  Sha3_256() = default;

  Sha3_256& update(ByteView data);
  Sha3_256& update(std::string_view text);
  Digest finalize();

  bool finalized() const { return finalized_; }

  /// Canonical snapshot of the sponge (lanes, buffer fill, flag).
  void serialize(Bytes& out) const;

 private:
  void absorb_block(const std::uint8_t* block);

  std::array<std::uint64_t, 25> lanes_{};
  std::array<std::uint8_t, kRate> buffer_{};
  std::size_t buffered_ = 0;
  bool finalized_ = false;
};

Digest sha3_256(ByteView data);
Digest sha3_256(std::string_view text);

using Seed = std::array<std::uint8_t, 32>;
using PublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

/// Ed25519 (RFC 8032). Secret keys are 32-byte seeds.
PublicKey ed25519_public_key(const Seed& seed);
Signature ed25519_sign(const Seed& seed, ByteView message);
/// Never throws; malformed keys or signatures verify false.
bool ed25519_verify(const PublicKey& key, ByteView message, const Signature& signature);

/// X25519 (RFC 7748).
PublicKey x25519_public_key(const Seed& secret);
/// Rejects low-order remote points (all-zero shared secret).
std::optional<Digest> x25519(const Seed& local_secret, const PublicKey& remote_public);

/// HKDF over SHA3-256.
Bytes hkdf_sha3(ByteView ikm, ByteView salt, ByteView info, std::size_t length);

/// ChaCha20-Poly1305 with a 12-byte nonce; ciphertext carries the 16-byte tag.
Bytes aead_seal(const Digest& key, std::uint64_t counter, ByteView plaintext, ByteView aad);
std::optional<Bytes> aead_open(const Digest& key, std::uint64_t counter, ByteView ciphertext, ByteView aad);

/// Trusted entropy source. Simulation mode expands a scenario seed with a
/// SHA3 counter construction so every run is reproducible; live mode draws
/// from the system generator.
class Entropy {
 public:
  static Entropy seeded(std::uint64_t seed);
  static Entropy system();

  void fill(std::span<std::uint8_t> out);
  Bytes bytes(std::size_t n);
  template <std::size_t N>
  std::array<std::uint8_t, N> array() {
    std::array<std::uint8_t, N> out{};
    fill(out);
    return out;
  }
  std::uint64_t next_u64();

  bool deterministic() const { return deterministic_; }

 private:
  Entropy(bool deterministic, std::uint64_t seed) : deterministic_(deterministic), seed_(seed) {}

  bool deterministic_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  Digest block_{};
  std::size_t used_ = sizeof(Digest);
};

}  // namespace smon::crypto
