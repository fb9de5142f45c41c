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

#include <fstream>

#include "doctest.h"
#include "smon/identity.hpp"
#include "support.hpp"

using namespace smon;

namespace {

const std::filesystem::path kManifests = std::filesystem::path(SMON_SCENARIO_DIR) / "manifests";

Manifest two_loads() {
  return Manifest::parse(
      "evrange 0x400000 0x10000\n"
      "mailboxes 1\n"
      "page_table 0x400000\n"
      "load 0x401000 rx hex=aabb\n"
      "load 0x402000 rw fill=0x01\n"
      "thread entry=0x401000\n");
}

}  // namespace

TEST_CASE("the chain matches a hand-encoded record stream") {
  Manifest m = two_loads();
  testing::OracleStream s;
  s.create(0x400000, 0x10000, 1, crypto::sha3_256(default_sm_image()), testing::kRegionCaps);
  s.page_table(0x400000);
  Bytes code(4096, 0);
  code[0] = 0xaa;
  code[1] = 0xbb;
  s.load(0x401000, perm::kRead | perm::kExecute, code);
  s.load(0x402000, perm::kRead | perm::kWrite, Bytes(4096, 0x01));
  s.thread(0x401000, {});
  auto got = measure_manifest(m);
  REQUIRE(std::holds_alternative<Digest>(got));
  CHECK(std::get<Digest>(got) == s.digest());
}

TEST_CASE("record encodings are tag, length and body") {
  Bytes r = encode_record(PageTableRecord{0x1000});
  CHECK(to_hex(r) == "02080000000000000000100000000000" "00");
  ThreadRecord t{0x10, {{FaultKind::EnclaveFault, 0x30}, {FaultKind::PageFault, 0x20}}};
  // handlers come out sorted by kind
  CHECK(to_hex(encode_record(t)) ==
        "04" "2200000000000000" "1000000000000000" "0200000000000000" "01" "2000000000000000" "02" "3000000000000000");
}

TEST_CASE("swapping two loads changes the digest") {
  Manifest a = two_loads();
  Manifest b = a;
  std::swap(b.ops[1], b.ops[2]);
  auto da = measure_manifest(a);
  auto db = measure_manifest(b);
  REQUIRE(std::holds_alternative<Digest>(da));
  REQUIRE(std::holds_alternative<Digest>(db));
  CHECK(std::get<Digest>(da) != std::get<Digest>(db));
  CHECK(std::get<Digest>(db) == testing::oracle_digest(b));
}

TEST_CASE("rule violations are named") {
  auto rule = [](const std::string& text) {
    auto out = measure_manifest(Manifest::parse(text));
    REQUIRE(std::holds_alternative<RuleViolation>(out));
    return std::get<RuleViolation>(out);
  };
  const std::string head = "evrange 0x400000 0x10000\n";
  CHECK(rule(head + "page_table 0x400000\nload 0x402000 r page=3 fill=1\nload 0x401000 r page=2 fill=1\nthread entry=0x401000\n") ==
        RuleViolation{"order", 3});
  CHECK(rule(head + "page_table 0x400000\nload 0x401000 r fill=1\nload 0x401000 r fill=1\nthread entry=0x401000\n") ==
        RuleViolation{"alias", 3});
  CHECK(rule(head + "load 0x401000 r fill=1\npage_table 0x400000\nthread entry=0x401000\n").rule == "tables-first");
  CHECK(rule(head + "page_table 0x400000\nload 0x401000 r fill=1\npage_table 0x403000\nthread entry=0x401000\n").rule ==
        "tables-first");
  CHECK(rule(head + "page_table 0x400000\nload 0x401000 r fill=1\n") == RuleViolation{"no-threads", 3});
}

TEST_CASE("manifest files: parse errors, content files and round trip") {
  CHECK_THROWS_AS(Manifest::parse("page_table 0x400000\n"), ManifestError);
  CHECK_THROWS_AS(Manifest::parse("evrange 0x400000 0x10000\nload 0x401000 q hex=00\n"), ManifestError);
  CHECK_THROWS_AS(Manifest::parse("evrange 0x400000 0x10000\nbogus 1\n"), ManifestError);

  auto dir = std::filesystem::temp_directory_path() / "smon-manifest-test";
  std::filesystem::create_directories(dir);
  Bytes blob{1, 2, 3, 4, 5};
  std::ofstream(dir / "blob.bin", std::ios::binary).write(reinterpret_cast<const char*>(blob.data()), 5);
  std::string digest = to_hex(testing::openssl_sha3(blob));
  std::string base = "evrange 0x400000 0x10000\npage_table 0x400000\nthread entry=0x401000\n";
  Manifest ok = Manifest::parse(base + "load 0x401000 rx file=blob.bin sha3=" + digest + "\n", dir);
  CHECK(std::get<manifest_op::Load>(ok.ops[2]).contents == blob);
  std::string wrong(64, '0');
  CHECK_THROWS_AS(Manifest::parse(base + "load 0x401000 rx file=blob.bin sha3=" + wrong + "\n", dir), ManifestError);

  Manifest again = Manifest::parse(ok.to_text());
  CHECK(std::get<Digest>(measure_manifest(again)) == std::get<Digest>(measure_manifest(ok)));
}

TEST_CASE("bundled manifests measure to the oracle digest") {
  for (const char* name : {"app.manifest", "peer.manifest", "signer.manifest"}) {
    Manifest m = Manifest::load_file(kManifests / name);
    auto got = measure_manifest(m);
    REQUIRE(std::holds_alternative<Digest>(got));
    CHECK(std::get<Digest>(got) == testing::oracle_digest(m));
  }
}

TEST_CASE("live loads equal the offline measurement in any placement") {
  Manifest m = Manifest::load_file(kManifests / "app.manifest");
  Digest offline = std::get<Digest>(measure_manifest(m));
  for (std::uint64_t r : {2, 4, 7}) {
    SecurityMonitor sm{MonitorConfig{}};
    LiveLoad live = load_manifest(sm, 0, m, LoadPlacement{{}, {{ResourceType::MemoryRegion, r}}, {}, {}, true});
    REQUIRE(std::holds_alternative<Digest>(live.outcome));
    CHECK(std::get<Digest>(live.outcome) == offline);
    CHECK(sm.enclave(live.eid)->final_measurement == offline);
  }
}

TEST_CASE("the monitor identity depends on every bit of its image") {
  auto manufacturer = simulated_manufacturer();
  auto device = simulated_device("unit", manufacturer);
  Bytes image = default_sm_image();
  SmIdentity a = derive_sm_identity(device, image);
  image[3] ^= 0x10;
  SmIdentity b = derive_sm_identity(device, image);
  CHECK(a.public_key != b.public_key);
  CHECK(a.certificate.sm_image_hash != b.certificate.sm_image_hash);
  CHECK(a.certificate.sm_image_hash == testing::openssl_sha3(default_sm_image()));
  CHECK(a.certificate.verify(device.public_key));
  CHECK(b.certificate.verify(device.public_key));
  CHECK(device.certificate.verify());
  CHECK(derive_sm_identity(device, default_sm_image()).public_key == a.public_key);
}
