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

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <openssl/params.h>
#include <openssl/rand.h>

#include <memory>
#include <stdexcept>

#include "smon/crypto.hpp"

namespace smon::crypto {

namespace {

struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct PkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
struct KdfDeleter {
  void operator()(EVP_KDF* p) const { EVP_KDF_free(p); }
};
struct KdfCtxDeleter {
  void operator()(EVP_KDF_CTX* p) const { EVP_KDF_CTX_free(p); }
};

using Pkey = std::unique_ptr<EVP_PKEY, PkeyDeleter>;

[[noreturn]] void fail(const char* what) { throw std::runtime_error(std::string("openssl: ") + what); }

Pkey private_key(int type, const Seed& seed) {
  Pkey key(EVP_PKEY_new_raw_private_key(type, nullptr, seed.data(), seed.size()));
  if (!key) fail("raw private key");
  return key;
}

PublicKey raw_public(EVP_PKEY* key) {
  PublicKey out{};
  std::size_t len = out.size();
  if (EVP_PKEY_get_raw_public_key(key, out.data(), &len) != 1 || len != out.size()) fail("raw public key");
  return out;
}

std::array<std::uint8_t, 12> aead_nonce(std::uint64_t counter) {
  std::array<std::uint8_t, 12> nonce{};
  for (int i = 0; i < 8; ++i) nonce[4 + i] = static_cast<std::uint8_t>(counter >> (8 * i));
  return nonce;
}

}  // namespace

PublicKey ed25519_public_key(const Seed& seed) {
  Pkey key = private_key(EVP_PKEY_ED25519, seed);
  return raw_public(key.get());
}

Signature ed25519_sign(const Seed& seed, ByteView message) {
  Pkey key = private_key(EVP_PKEY_ED25519, seed);
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) fail("sign init");
  Signature sig{};
  std::size_t len = sig.size();
  if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1 || len != sig.size()) {
    fail("sign");
  }
  return sig;
}

bool ed25519_verify(const PublicKey& key, ByteView message, const Signature& signature) {
  Pkey pkey(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, key.data(), key.size()));
  if (!pkey) return false;
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1) return false;
  return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(), message.size()) == 1;
}

PublicKey x25519_public_key(const Seed& secret) {
  Pkey key = private_key(EVP_PKEY_X25519, secret);
  return raw_public(key.get());
}

std::optional<Digest> x25519(const Seed& local_secret, const PublicKey& remote_public) {
  Pkey local = private_key(EVP_PKEY_X25519, local_secret);
  Pkey remote(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, remote_public.data(), remote_public.size()));
  if (!remote) return std::nullopt;
  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter> ctx(EVP_PKEY_CTX_new(local.get(), nullptr));
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) != 1) return std::nullopt;
  if (EVP_PKEY_derive_set_peer(ctx.get(), remote.get()) != 1) return std::nullopt;
  Digest shared{};
  std::size_t len = shared.size();
  // OpenSSL refuses to derive from low-order points, which yield all zeros.
  if (EVP_PKEY_derive(ctx.get(), shared.data(), &len) != 1 || len != shared.size()) return std::nullopt;
  Digest zero{};
  if (shared == zero) return std::nullopt;
  return shared;
}

Bytes hkdf_sha3(ByteView ikm, ByteView salt, ByteView info, std::size_t length) {
  std::unique_ptr<EVP_KDF, KdfDeleter> kdf(EVP_KDF_fetch(nullptr, "HKDF", nullptr));
  if (!kdf) fail("HKDF fetch");
  std::unique_ptr<EVP_KDF_CTX, KdfCtxDeleter> ctx(EVP_KDF_CTX_new(kdf.get()));
  if (!ctx) fail("HKDF ctx");
  char digest_name[] = "SHA3-256";
  // OpenSSL rejects null octet-string params even for zero length.
  static const std::uint8_t kEmpty = 0;
  auto ptr = [](ByteView v) { return const_cast<std::uint8_t*>(v.empty() ? &kEmpty : v.data()); };
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, digest_name, 0),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_KEY, ptr(ikm), ikm.size()),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_SALT, ptr(salt), salt.size()),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_INFO, ptr(info), info.size()),
      OSSL_PARAM_construct_end(),
  };
  Bytes out(length);
  if (EVP_KDF_derive(ctx.get(), out.data(), out.size(), params) != 1) fail("HKDF derive");
  return out;
}

Bytes aead_seal(const Digest& key, std::uint64_t counter, ByteView plaintext, ByteView aad) {
  std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
  auto nonce = aead_nonce(counter);
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_chacha20_poly1305(), nullptr, key.data(), nonce.data()) != 1) {
    fail("aead init");
  }
  int len = 0;
  if (!aad.empty() && EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    fail("aead aad");
  }
  Bytes out(plaintext.size() + 16);
  int written = 0;
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), out.data(), &written, plaintext.data(), static_cast<int>(plaintext.size())) != 1) {
    fail("aead update");
  }
  int tail = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + written, &tail) != 1) fail("aead final");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_GET_TAG, 16, out.data() + plaintext.size()) != 1) fail("aead tag");
  return out;
}

std::optional<Bytes> aead_open(const Digest& key, std::uint64_t counter, ByteView ciphertext, ByteView aad) {
  if (ciphertext.size() < 16) return std::nullopt;
  std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
  auto nonce = aead_nonce(counter);
  if (!ctx || EVP_DecryptInit_ex(ctx.get(), EVP_chacha20_poly1305(), nullptr, key.data(), nonce.data()) != 1) {
    return std::nullopt;
  }
  int len = 0;
  if (!aad.empty() && EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    return std::nullopt;
  }
  std::size_t body = ciphertext.size() - 16;
  Bytes out(body);
  int written = 0;
  if (body > 0 &&
      EVP_DecryptUpdate(ctx.get(), out.data(), &written, ciphertext.data(), static_cast<int>(body)) != 1) {
    return std::nullopt;
  }
  Bytes tag(ciphertext.begin() + static_cast<std::ptrdiff_t>(body), ciphertext.end());
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG, 16, tag.data()) != 1) return std::nullopt;
  int tail = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + written, &tail) != 1) return std::nullopt;
  return out;
}

Entropy Entropy::seeded(std::uint64_t seed) { return Entropy(true, seed); }

Entropy Entropy::system() { return Entropy(false, 0); }

void Entropy::fill(std::span<std::uint8_t> out) {
  if (!deterministic_) {
    if (!out.empty() && RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) fail("RAND_bytes");
    return;
  }
  for (auto& byte : out) {
    if (used_ == block_.size()) {
      Sha3_256 h;
      Bytes input;
      h.update(std::string_view("smon-entropy"));
      put_u64(input, seed_);
      put_u64(input, counter_++);
      h.update(input);
      block_ = h.finalize();
      used_ = 0;
    }
    byte = block_[used_++];
  }
}

Bytes Entropy::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

std::uint64_t Entropy::next_u64() {
  auto raw = array<8>();
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
  return v;
}

}  // namespace smon::crypto
