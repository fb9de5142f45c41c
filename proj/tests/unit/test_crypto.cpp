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

#include <random>

#include <sodium.h>

#include "doctest.h"
#include "smon/crypto.hpp"
#include "support.hpp"

using namespace smon;
using smon::testing::hex_array;
using smon::testing::hex_bytes;

TEST_CASE("sha3-256 known answers") {
  CHECK(to_hex(crypto::sha3_256(std::string_view(""))) ==
        "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a");
  CHECK(to_hex(crypto::sha3_256(std::string_view("abc"))) ==
        "3a985da74fe225b2045c172d6bd390bd855f086e3e9d525b46bfe24511431532");
  CHECK(to_hex(crypto::sha3_256(std::string_view("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
        "41c0dba2a9d6240849100376a8235e2c82e1b9998a999e21db32dd97496d3376");
  Bytes a3(200, 0xa3);
  CHECK(to_hex(crypto::sha3_256(a3)) == "79f38adec5c20307a98ef76e8324afbfd46cfd81b22e3973c65fa1bd9de31787");
}

TEST_CASE("sha3-256 agrees with openssl on every length around the rate") {
  std::mt19937_64 rng(1);
  for (std::size_t len = 0; len < 3 * crypto::Sha3_256::kRate + 5; ++len) {
    Bytes data(len);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    REQUIRE(crypto::sha3_256(data) == testing::openssl_sha3(data));
  }
}

TEST_CASE("incremental absorption matches one shot for any split") {
  std::mt19937_64 rng(2);
  Bytes data(500);
  for (auto& b : data) b = static_cast<std::uint8_t>(rng());
  Digest whole = testing::openssl_sha3(data);
  for (std::size_t cut = 0; cut <= data.size(); cut += 17) {
    crypto::Sha3_256 h;
    h.update(ByteView(data).first(cut));
    crypto::Sha3_256 copy = h;
    h.update(ByteView(data).subspan(cut));
    copy.update(ByteView(data).subspan(cut));
    CHECK(h.finalize() == whole);
    CHECK(copy.finalize() == whole);
  }
}

TEST_CASE("ed25519 test vectors") {
  struct Vector {
    const char* seed;
    const char* pub;
    const char* msg;
    const char* sig;
  };
  const Vector vectors[] = {
      {"9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
       "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a", "",
       "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"},
      {"4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
       "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c", "72",
       "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00"},
      {"c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7",
       "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025", "af82",
       "6291d657deec24024827e69c3abe01a30ce548a284743a445e3680d7db5ac3ac18ff9b538d16f290ae67f760984dc6594a7c15e9716ed28dc027beceea1ec40a"},
  };
  for (const Vector& v : vectors) {
    auto seed = hex_array<32>(v.seed);
    Bytes msg = hex_bytes(v.msg);
    CHECK(to_hex(crypto::ed25519_public_key(seed)) == v.pub);
    auto sig = crypto::ed25519_sign(seed, msg);
    CHECK(to_hex(sig) == v.sig);
    CHECK(crypto::ed25519_verify(hex_array<32>(v.pub), msg, sig));
    sig[5] ^= 1;
    CHECK_FALSE(crypto::ed25519_verify(hex_array<32>(v.pub), msg, sig));
  }
}

TEST_CASE("ed25519 agrees with libsodium") {
  REQUIRE(sodium_init() >= 0);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    crypto::Seed seed{};
    for (auto& b : seed) b = static_cast<std::uint8_t>(rng());
    Bytes msg(static_cast<std::size_t>(rng() % 200));
    for (auto& b : msg) b = static_cast<std::uint8_t>(rng());
    unsigned char pk[crypto_sign_PUBLICKEYBYTES], sk[crypto_sign_SECRETKEYBYTES], sig[crypto_sign_BYTES];
    crypto_sign_seed_keypair(pk, sk, seed.data());
    crypto_sign_detached(sig, nullptr, msg.data(), msg.size(), sk);
    auto ours = crypto::ed25519_sign(seed, msg);
    CHECK(std::equal(ours.begin(), ours.end(), sig));
    auto pub = crypto::ed25519_public_key(seed);
    CHECK(std::equal(pub.begin(), pub.end(), pk));
  }
}

TEST_CASE("x25519 test vectors") {
  CHECK(to_hex(*crypto::x25519(hex_array<32>("a546e36bf0527c9d3b16154b82465edd62144c0ac1fc5a18506a2244ba449ac4"),
                               hex_array<32>("e6db6867583030db3594c1a424b15f7c726624ec26b3353b10a903a6d0ab1c4c"))) ==
        "c3da55379de9c6908e94ea4df28d084f32eccf03491c71f754b4075577a28552");
  CHECK(to_hex(*crypto::x25519(hex_array<32>("4b66e9d4d1b4673c5ad22691957d6af5c11b6421e0ea01d42ca4169e7918ba0d"),
                               hex_array<32>("e5210f12786811d3f4b7959d0538ae2c31dbe7106fc03c3efc4cd549c715a493"))) ==
        "95cbde9476e8907d7aade45cb4b873f88b595a68799fa152e6f8f7647aac7957");
  auto alice = hex_array<32>("77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a");
  auto bob = hex_array<32>("5dab087e624a8a4b79e17f8b83800ee66f3bb1292618b6fd1c2f8b27ff88e0eb");
  CHECK(to_hex(crypto::x25519_public_key(alice)) == "8520f0098930a754748b7ddcb43ef75a0dbf3a0d26381af4eba4a98eaa9b4e6a");
  CHECK(to_hex(crypto::x25519_public_key(bob)) == "de9edb7d7b7dc1b4d35b61c2ece435373f8343c85b78674dadfc7e146f882b4f");
  auto ab = crypto::x25519(alice, crypto::x25519_public_key(bob));
  auto ba = crypto::x25519(bob, crypto::x25519_public_key(alice));
  REQUIRE(ab);
  CHECK(*ab == *ba);
  CHECK(to_hex(*ab) == "4a5d9d5ba4ce2de1728e3bf480350f25e07e21c947d19e3376f09b3c1e161742");
}

TEST_CASE("x25519 agrees with libsodium and rejects low-order points") {
  REQUIRE(sodium_init() >= 0);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    crypto::Seed a{}, b{};
    for (auto& x : a) x = static_cast<std::uint8_t>(rng());
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    auto pb = crypto::x25519_public_key(b);
    unsigned char expect[crypto_scalarmult_BYTES];
    REQUIRE(crypto_scalarmult(expect, a.data(), pb.data()) == 0);
    auto ours = crypto::x25519(a, pb);
    REQUIRE(ours);
    CHECK(std::equal(ours->begin(), ours->end(), expect));
  }
  crypto::Seed a{};
  a[0] = 9;
  CHECK_FALSE(crypto::x25519(a, crypto::PublicKey{}).has_value());
  // different remote keys give different secrets
  crypto::Seed r1{}, r2{};
  r1[5] = 1;
  r2[5] = 2;
  CHECK(*crypto::x25519(a, crypto::x25519_public_key(r1)) != *crypto::x25519(a, crypto::x25519_public_key(r2)));
}

TEST_CASE("aead matches libsodium chacha20-poly1305 ietf and detects tampering") {
  REQUIRE(sodium_init() >= 0);
  Digest key{};
  for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<std::uint8_t>(i * 7);
  Bytes msg{'s', 'e', 'c', 'r', 'e', 't'};
  Bytes aad{1, 2, 3};
  Bytes sealed = crypto::aead_seal(key, 5, msg, aad);
  REQUIRE(sealed.size() == msg.size() + 16);
  // The counter occupies the last 8 nonce bytes, little-endian.
  unsigned char nonce[12] = {0, 0, 0, 0, 5, 0, 0, 0, 0, 0, 0, 0};
  Bytes out(msg.size());
  unsigned long long outlen = 0;
  int rc = crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &outlen, nullptr, sealed.data(), sealed.size(),
                                                     aad.data(), aad.size(), nonce, key.data());
  CHECK(rc == 0);
  CHECK(out == msg);
  CHECK(crypto::aead_open(key, 5, sealed, aad) == msg);
  sealed[0] ^= 1;
  CHECK_FALSE(crypto::aead_open(key, 5, sealed, aad).has_value());
}

TEST_CASE("seeded entropy is reproducible") {
  auto a = crypto::Entropy::seeded(9);
  auto b = crypto::Entropy::seeded(9);
  auto c = crypto::Entropy::seeded(10);
  Bytes x = a.bytes(100);
  CHECK(x == b.bytes(100));
  CHECK(x != c.bytes(100));
}
