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

#include "doctest.h"
#include "smon/attestation.hpp"
#include "smon/scenario.hpp"

using namespace smon;

namespace {

const std::filesystem::path kScenarios = SMON_SCENARIO_DIR;

struct Attested {
  AttestationBundle bundle;
  VerifyExpectations expect;
};

Attested attest(const std::string& device_label = "smon-device-0") {
  Scenario sc = Scenario::load_file(kScenarios / "remote-attestation.scn");
  sc.monitor.device_label = device_label;
  RunOptions opt;
  opt.artifact_dir = std::filesystem::temp_directory_path() / "smon-attest-test";
  RunResult r = run_scenario(sc, opt);
  REQUIRE(r.passed);
  REQUIRE(r.bundle);
  REQUIRE(r.expectations);
  return {*r.bundle, *r.expectations};
}

}  // namespace

TEST_CASE("the remote flow yields a bundle that verifies") {
  Attested a = attest();
  CHECK(verify_attestation(a.bundle, a.expect) == VerifyReason::Ok);
  auto round = AttestationBundle::parse(a.bundle.serialize());
  REQUIRE(round);
  CHECK(*round == a.bundle);
}

TEST_CASE("the same seed reproduces identical attestation bytes") {
  CHECK(attest().bundle.serialize() == attest().bundle.serialize());
}

TEST_CASE("each substituted field is caught by the right check") {
  Attested a = attest();
  auto reason = [&](auto mutate) {
    AttestationBundle b = a.bundle;
    mutate(b);
    return verify_attestation(b, a.expect);
  };
  CHECK(reason([](auto& b) { b.measurement[0] ^= 1; }) == VerifyReason::Measurement);
  CHECK(reason([](auto& b) { b.nonce[31] ^= 1; }) == VerifyReason::Nonce);
  CHECK(reason([](auto& b) { b.channel_binding[4] ^= 1; }) == VerifyReason::ChannelBinding);
  CHECK(reason([](auto& b) { b.signature[10] ^= 1; }) == VerifyReason::Signature);
  CHECK(reason([](auto& b) { b.sm_certificate.sm_key[0] ^= 1; }) == VerifyReason::SmCertificate);
  CHECK(reason([](auto& b) { b.sm_certificate.sm_image_hash[0] ^= 1; }) == VerifyReason::SmCertificate);
  CHECK(reason([](auto& b) { b.sm_certificate.signature[0] ^= 1; }) == VerifyReason::SmCertificate);
  CHECK(reason([](auto& b) { b.device_certificate.device_key[0] ^= 1; }) == VerifyReason::DeviceKey);
  CHECK(reason([](auto& b) { b.device_certificate.manufacturer_key[0] ^= 1; }) == VerifyReason::DeviceCertificate);
  CHECK(reason([](auto& b) { b.device_certificate.signature[0] ^= 1; }) == VerifyReason::DeviceCertificate);

  VerifyExpectations wrong = a.expect;
  wrong.nonce[0] ^= 1;
  CHECK(verify_attestation(a.bundle, wrong) == VerifyReason::Nonce);
  Bytes raw = a.bundle.serialize();
  raw.pop_back();
  CHECK(verify_attestation(raw, a.expect) == VerifyReason::Malformed);
}

TEST_CASE("a bundle from another device fails against this device's key") {
  Attested here = attest();
  Attested there = attest("smon-device-1");
  CHECK(here.expect.device_key != there.expect.device_key);
  VerifyExpectations crossed = here.expect;
  crossed.nonce = there.bundle.nonce;
  crossed.channel_binding = there.bundle.channel_binding;
  CHECK(verify_attestation(there.bundle, crossed) == VerifyReason::DeviceKey);
}

TEST_CASE("request and reply messages round trip") {
  AttestationRequest q;
  q.nonce[0] = 1;
  q.channel_binding[1] = 2;
  q.target_measurement[2] = 3;
  auto q2 = AttestationRequest::decode(q.encode());
  REQUIRE(q2);
  CHECK(q2->nonce == q.nonce);
  CHECK(q2->target_measurement == q.target_measurement);
  CHECK_FALSE(AttestationRequest::decode(Bytes{1, 2, 3}).has_value());
}

TEST_CASE("channel keys agree on both sides") {
  crypto::Seed a{}, b{};
  a[5] = 1;
  b[5] = 2;
  auto pa = crypto::x25519_public_key(a);
  auto pb = crypto::x25519_public_key(b);
  Digest bind = channel_binding(pa, pb);
  CHECK(derive_channel_key(a, pb, bind) == derive_channel_key(b, pa, bind));
  CHECK(derive_channel_key(a, pb, bind) != derive_channel_key(a, pb, channel_binding(pb, pa)));
}
