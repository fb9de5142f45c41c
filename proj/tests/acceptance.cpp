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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "smon/concurrency.hpp"
#include "smon/scenario.hpp"
#include "support.hpp"

using namespace smon;

namespace {

const std::filesystem::path kScenarios = SMON_SCENARIO_DIR;
const std::filesystem::path kManifests = kScenarios / "manifests";

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

int failures = 0;

void report(int n, const std::string& title, Verdict& v) {
  std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << n << ": " << title << "  [" << v.detail.str() << "]"
            << std::endl;
  if (!v.pass) ++failures;
}

ResourceId region(std::uint64_t r) { return {ResourceType::MemoryRegion, r}; }

MonitorConfig desk(std::uint32_t cores) {
  MonitorConfig c;
  c.machine.core_count = cores;
  return c;
}

// ---------------------------------------------------------------------------

void criterion1() {
  Verdict v;
  Scenario sc = Scenario::load_file(kScenarios / "explore-minimal.scn");
  const MachineConfig& mc = sc.monitor.machine;
  v.require(mc.core_count == 2 && mc.region_count == 4, "minimal machine shape");
  v.require(sc.enclaves.size() <= 2 && sc.explore.max_depth >= 6, "config bounds");
  SecurityMonitor root = setup_state(sc);
  v.require(root.threads().size() <= 2, "at most two threads");

  auto t0 = std::chrono::steady_clock::now();
  ExplorationReport r = explore(root, sc.alphabet, sc.explore);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(r.violation_count == 0, "unmutated monitor has a violation");
  v.require(!r.budget_exceeded, "budget exceeded");
  v.require(r.depth >= 6, "depth reached");
  v.require(secs < 300, "time limit");
  v.detail << "depth " << r.depth << ", " << r.states << " states, " << r.violation_count << " violations, " << secs
           << " s; mutations:";

  int found = 0;
  for (const auto& named : mutation::kAll) {
    Scenario m = sc;
    m.monitor.mutations = named.bit;
    ExploreOptions opt = m.explore;
    opt.max_depth = 6;
    ExplorationReport mr = explore(setup_state(m), m.alphabet, opt);
    if (mr.violation_count > 0 && mr.violations.front().path.size() <= 6) {
      ++found;
      v.detail << " " << named.name << "->" << mr.violations.front().invariant << "@"
               << mr.violations.front().path.size();
    } else {
      v.detail << " " << named.name << "->none";
    }
  }
  v.require(found >= 5, "fewer than five mutations caught");
  report(1, "bounded exploration, 0 violations; mutations caught at depth <= 6", v);
}

// ---------------------------------------------------------------------------

void criterion2() {
  Verdict v;
  std::mt19937_64 rng(2026);
  const SecurityMonitor base{desk(2)};
  int valid = 0, invalid = 0;
  for (int i = 0; i < 60; ++i) {
    Manifest m = testing::random_manifest(rng);
    auto offline = measure_manifest(m);
    SecurityMonitor sm(base);
    LiveLoad live = load_manifest(sm, 0, m, LoadPlacement{{}, {region(2)}, {}, {}, true});
    bool ok = std::holds_alternative<Digest>(offline) && std::holds_alternative<Digest>(live.outcome) &&
              std::get<Digest>(offline) == std::get<Digest>(live.outcome) &&
              std::get<Digest>(offline) == testing::oracle_digest(m);
    v.require(ok, "valid manifest " + std::to_string(i) + " digests differ");
    valid += ok;
  }
  const testing::Breakage kinds[] = {testing::Breakage::Alias, testing::Breakage::Order, testing::Breakage::TablesFirst};
  for (int i = 0; i < 60; ++i) {
    testing::Breakage b = kinds[i % 3];
    Manifest m = testing::random_manifest(rng, b);
    auto offline = measure_manifest(m);
    SecurityMonitor sm(base);
    LiveLoad live = load_manifest(sm, 0, m, LoadPlacement{{}, {region(2)}, {}, {}, true});
    bool ok = std::holds_alternative<RuleViolation>(offline) && std::holds_alternative<RuleViolation>(live.outcome);
    if (ok) {
      const auto& a = std::get<RuleViolation>(offline);
      const auto& c = std::get<RuleViolation>(live.outcome);
      ok = a.rule == testing::expected_rule(b) && a == c;
    }
    v.require(ok, "invalid manifest " + std::to_string(i) + " (" + testing::expected_rule(b) + ")");
    invalid += ok;
  }
  v.detail << valid << "/60 valid agree, " << invalid << "/60 invalid rejected with the same rule";
  report(2, "live init digest equals offline digest; invalid manifests rejected alike", v);
}

// ---------------------------------------------------------------------------

void criterion3() {
  Verdict v;
  std::mt19937_64 rng(77);
  Manifest filler = Manifest::load_file(kManifests / "peer.manifest");
  int agreed = 0;
  for (int i = 0; i < 20; ++i) {
    Manifest m = testing::random_manifest(rng);
    std::set<Digest> digests;
    std::set<PhysAddr> eids;
    struct Where {
      std::uint64_t region;
      std::optional<PhysAddr> staging;
      int fillers;  // other enclaves loaded first, shifting metadata slots
    };
    for (const Where& w : {Where{2, std::nullopt, 0}, Where{5, 0x70000, 1}, Where{7, 0x10000, 2}}) {
      SecurityMonitor sm{desk(2)};
      for (int f = 0; f < w.fillers; ++f) {
        load_manifest(sm, 0, filler, LoadPlacement{{}, {region(static_cast<std::uint64_t>(3 + f))}, {}, {}, true});
      }
      LiveLoad live = load_manifest(sm, 0, m, LoadPlacement{{}, {region(w.region)}, w.staging, {}, true});
      if (!std::holds_alternative<Digest>(live.outcome)) {
        v.require(false, "placement failed");
        continue;
      }
      digests.insert(std::get<Digest>(live.outcome));
      eids.insert(live.eid);
    }
    bool ok = digests.size() == 1 && eids.size() == 3 && *digests.begin() == testing::oracle_digest(m);
    v.require(ok, "manifest " + std::to_string(i) + " gave " + std::to_string(digests.size()) + " digests");
    agreed += ok;
  }
  v.detail << agreed << "/20 manifests gave one digest across 3 placements (regions, metadata slots, staging)";
  report(3, "measurement is placement independent", v);
}

// ---------------------------------------------------------------------------

void criterion4() {
  Verdict v;
  SecurityMonitor base{desk(3)};
  LiveLoad e = load_manifest(base, 0, Manifest::load_file(kManifests / "app.manifest"),
                             LoadPlacement{{}, {region(3)}, {}, {}, true});
  if (!std::holds_alternative<Digest>(e.outcome)) {
    v.require(false, "setup load");
    report(4, "AEX", v);
    return;
  }
  const PhysAddr tid = e.tids.at(0);
  std::mt19937_64 rng(4);
  auto pick = [&](std::uint64_t lo, std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng); };
  std::uint64_t transitions = 0, reentries = 0;

  for (int s = 0; s < 1000 && v.pass; ++s) {
    SecurityMonitor sm(base);
    std::optional<CoreId> running;
    std::optional<AexSnapshot> expected;
    int steps = static_cast<int>(pick(3, 12));
    for (int k = 0; k < steps; ++k) {
      if (!running) {
        CoreId c = static_cast<CoreId>(pick(1, 2));
        if (sm.call(c, api::EnterEnclave{e.eid, tid}).status != Status::Ok) {
          v.require(false, "enter failed");
          break;
        }
        running = c;
        if (expected) {
          ++reentries;
          ApiResponse got = sm.call(c, api::GetAexState{});
          bool same = got.ok() && std::get<AexSnapshot>(got.payload).regs == expected->regs &&
                      std::get<AexSnapshot>(got.payload).pc == expected->pc;
          v.require(same, "scenario " + std::to_string(s) + ": saved state changed");
        }
        continue;
      }
      CoreId c = *running;
      switch (pick(0, 4)) {
        case 0:
        case 1: {
          // the enclave computes: new register contents, maybe a store
          for (std::size_t r = 1; r < kRegisterCount; ++r) {
            if (pick(0, 1)) sm.set_register(c, r, rng());
          }
          sm.set_pc(c, 0x401000 + pick(0, 0xfff));
          if (pick(0, 1)) apply_action(sm, Action::access(Action::Kind::Write, c, 0x402000 + 8 * pick(0, 15), rng()));
          break;
        }
        case 2:
        case 3: {
          AexSnapshot before{sm.machine().core(c).regs, sm.machine().core(c).pc};
          Action::Kind kind = pick(0, 3) ? Action::Kind::Interrupt : Action::Kind::PageFault;
          ActionResult r = apply_action(sm, Action::event(kind, c, 0x9000000));
          if (r.aex) {
            ++transitions;
            const CoreState& core = sm.machine().core(c);
            v.require(core.domain.is_os() && core.regs == RegisterFile{} && core.pc == 0,
                      "scenario " + std::to_string(s) + ": OS saw enclave registers after AEX");
            expected = before;
            running.reset();
          }
          break;
        }
        default: {
          if (sm.call(c, api::ExitEnclave{}).status == Status::Ok) {
            ++transitions;
            const CoreState& core = sm.machine().core(c);
            v.require(core.domain.is_os() && core.regs == RegisterFile{},
                      "scenario " + std::to_string(s) + ": OS saw enclave registers after exit");
            running.reset();
            expected.reset();
          }
          break;
        }
      }
    }
  }
  v.detail << "1000 scenarios, " << transitions << " enclave->OS transitions, " << reentries
           << " re-entries compared";
  v.require(transitions >= 1000 && reentries >= 500, "too few transitions exercised");
  report(4, "registers zero after enclave->OS transitions; aex_state identical on re-entry", v);
}

// ---------------------------------------------------------------------------

struct Cli {
  int code = -1;
  std::string out;
};

Cli run_cli(const std::string& args) {
  std::string cmd = std::string(SMON_CLI_PATH) + " " + args + " 2>/dev/null";
  Cli r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[256];
  while (fgets(buf, sizeof buf, p)) r.out += buf;
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  while (!r.out.empty() && r.out.back() == '\n') r.out.pop_back();
  return r;
}

void criterion5() {
  Verdict v;
  auto work = std::filesystem::temp_directory_path() / "smon-acceptance-c5";
  std::filesystem::create_directories(work);
  RunOptions opt;
  opt.artifact_dir = work;
  RunResult local = run_scenario(Scenario::load_file(kScenarios / "local-attestation.scn"), opt);
  v.require(local.passed, "local attestation flow: " + local.failure);
  RunResult remote = run_scenario(Scenario::load_file(kScenarios / "remote-attestation.scn"), opt);
  v.require(remote.passed && remote.bundle && remote.expectations, "remote attestation flow: " + remote.failure);
  if (!v.pass) {
    report(5, "attestation flows and bundle tampering", v);
    return;
  }
  const AttestationBundle& good = *remote.bundle;
  const VerifyExpectations& ex = *remote.expectations;
  std::string common = " --nonce " + to_hex(ex.nonce) + " --measurement " + to_hex(ex.measurement) +
                       " --device-key " + to_hex(ex.device_key) + " --binding " + to_hex(good.channel_binding);

  auto write = [&](const AttestationBundle& b, const std::string& name) {
    auto path = work / name;
    Bytes data = b.serialize();
    std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(data.data()),
                                                static_cast<std::streamsize>(data.size()));
    return path.string();
  };
  Cli ok = run_cli("verify " + write(good, "good.bundle") + common);
  v.require(ok.code == 0 && ok.out == "ok", "unmodified bundle: " + ok.out);

  struct Field {
    const char* name;
    std::span<std::uint8_t> (*bytes)(AttestationBundle&);
    VerifyReason reason;
  };
  const Field fields[] = {
      {"measurement", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.measurement); }, VerifyReason::Measurement},
      {"nonce", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.nonce); }, VerifyReason::Nonce},
      {"channel_binding", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.channel_binding); },
       VerifyReason::ChannelBinding},
      {"signature", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.signature); }, VerifyReason::Signature},
      {"sm_key", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.sm_certificate.sm_key); },
       VerifyReason::SmCertificate},
      {"sm_image_hash", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.sm_certificate.sm_image_hash); },
       VerifyReason::SmCertificate},
      {"sm_signature", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.sm_certificate.signature); },
       VerifyReason::SmCertificate},
      {"device_key", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.device_certificate.device_key); },
       VerifyReason::DeviceKey},
      {"manufacturer_key",
       [](AttestationBundle& b) { return std::span<std::uint8_t>(b.device_certificate.manufacturer_key); },
       VerifyReason::DeviceCertificate},
      {"device_signature", [](AttestationBundle& b) { return std::span<std::uint8_t>(b.device_certificate.signature); },
       VerifyReason::DeviceCertificate},
  };
  std::mt19937_64 rng(5);
  int total = 0, correct = 0;
  for (const Field& f : fields) {
    for (int i = 0; i < 21; ++i) {
      AttestationBundle bad = good;
      auto bytes = f.bytes(bad);
      std::size_t at = rng() % bytes.size();
      std::uint8_t flip = static_cast<std::uint8_t>(1u << (rng() % 8));
      if (i % 3 == 2) flip = static_cast<std::uint8_t>(rng() | 1);
      bytes[at] ^= flip;
      Cli r = run_cli("verify " + write(bad, "bad.bundle") + common);
      bool right = r.code == 1 && r.out == to_string(f.reason);
      ++total;
      correct += right;
      v.require(right, std::string(f.name) + " mutation gave '" + r.out + "' exit " + std::to_string(r.code));
    }
  }
  v.detail << "local and remote flows pass; " << correct << "/" << total << " single-field mutations rejected with the expected reason";
  v.require(total >= 200, "fewer than 200 mutations");
  report(5, "attestation flows succeed; tampered bundles fail verify with the right reason", v);
}

// ---------------------------------------------------------------------------

void criterion6() {
  Verdict v;
  RunResult races = run_scenario(Scenario::load_file(kScenarios / "races.scn"));
  v.require(races.passed, "races.scn: " + races.failure);

  SecurityMonitor root{desk(3)};
  LiveLoad e = load_manifest(root, 0, Manifest::load_file(kManifests / "app.manifest"),
                             LoadPlacement{{}, {region(2)}, {}, {}, true});
  v.require(std::holds_alternative<Digest>(e.outcome), "setup");
  root.call(0, api::BlockResource{region(5)});
  root.call(0, api::BlockResource{region(6)});
  root.call(0, api::CleanResource{region(6)});
  PhysAddr slot = root.free_metadata_slot(4096).value_or(0);
  DomainId enc = DomainId::enclave(e.eid);

  struct Triple {
    const char* name;
    std::vector<RaceCall> calls;
  };
  auto same = [](ApiCall c) { return std::vector<RaceCall>{{0, c}, {1, c}, {2, c}}; };
  std::vector<Triple> triples = {
      {"block", same(api::BlockResource{region(4)})},
      {"clean", same(api::CleanResource{region(5)})},
      {"grant", same(api::GrantResource{region(6), enc})},
      {"create", same(api::CreateEnclave{slot, 0x400000, 0x10000, 0})},
      {"delete", same(api::DeleteEnclave{e.eid})},
      {"mixed", {{0, api::BlockResource{region(4)}}, {1, api::CleanResource{region(4)}}, {2, api::GrantResource{region(4), enc}}}},
  };
  std::size_t schedules = 0;
  for (const Triple& t : triples) {
    SerializabilityReport rep = check_serializability(root, t.calls);
    v.require(rep.ok(), std::string(t.name) + ": " + (rep.failures.empty() ? "" : rep.failures.front()));
    schedules += rep.schedules;
    if (std::string(t.name) == "mixed") continue;
    // identical conflicting calls: exactly one succeeds in every schedule
    for (const Schedule& s : all_schedules(3)) {
      SecurityMonitor sm(root);
      RaceOutcome out = run_interleaved(sm, t.calls, s);
      auto winners = std::count(out.statuses.begin(), out.statuses.end(), Status::Ok);
      v.require(winners == 1, std::string(t.name) + " had " + std::to_string(winners) + " winners");
    }
  }
  v.detail << "races.scn passes; " << schedules << " schedules over " << triples.size()
           << " scripts serializable; identical conflicting calls have one winner";
  report(6, "all interleavings serializable, conflicting calls have exactly one winner", v);
}

// ---------------------------------------------------------------------------

void criterion7() {
  Verdict v;
  MachineConfig prod = MachineConfig::production_regions();
  v.require(prod.region_count == 64 && prod.region_size == 32ULL << 20, "production shape");
  v.require(machine_preset("production").region_count == 64, "production preset");
  MonitorConfig pc;
  pc.machine = prod;
  SecurityMonitor big(pc);
  Manifest app = Manifest::load_file(kManifests / "app.manifest");
  LiveLoad live = load_manifest(big, 0, app, LoadPlacement{{}, {region(40)}, {}, {}, true});
  v.require(std::holds_alternative<Digest>(live.outcome) &&
                std::get<Digest>(live.outcome) == std::get<Digest>(measure_manifest(app)),
            "load on the production machine");
  auto range = big.memory_range(region(63));
  v.require(range && range->first == 63 * (32ULL << 20) && range->second == 32ULL << 20, "region 63 range");

  MonitorConfig ic;
  ic.machine = MachineConfig::interval_based(64ULL << 20, 4096, 64 * 1024, 2);
  SecurityMonitor iv(ic);
  std::mt19937_64 rng(7);
  PhysAddr cursor = 1ULL << 20;
  int carved = 0;
  for (int i = 0; i < 40; ++i) {
    std::uint64_t pages = 1 + rng() % 97;
    PhysAddr base = cursor + (rng() % 5) * 4096;
    Status s = iv.call(0, api::CarveInterval{base, pages * 4096}).status;
    auto r = iv.memory_range({ResourceType::MemoryInterval, base});
    bool ok = s == Status::Ok && r && r->second == pages * 4096;
    v.require(ok, "carve of " + std::to_string(pages) + " pages");
    carved += ok;
    cursor = base + pages * 4096;
  }
  v.require(iv.call(0, api::CarveInterval{cursor + 100, 4096}).status != Status::Ok, "misaligned base accepted");
  v.require(iv.call(0, api::CarveInterval{cursor, 4096 + 8}).status != Status::Ok, "misaligned size accepted");
  v.require(iv.call(0, api::CarveInterval{cursor - 4096, 8192}).status != Status::Ok, "overlap accepted");

  Manifest im = app;
  im.backend = IsolationBackendKind::IntervalBased;
  auto mem = reserve_os_memory(iv, 0, im.pages_needed());
  LiveLoad ilive = load_manifest(iv, 0, im, LoadPlacement{{}, mem, {}, {}, true});
  v.require(std::holds_alternative<Digest>(ilive.outcome) &&
                std::get<Digest>(ilive.outcome) == testing::oracle_digest(im),
            "enclave in an exactly-sized interval");
  v.detail << "64 x 32 MiB machine runs an enclave; " << carved << "/40 random page-aligned intervals carved; "
           << "misaligned and overlapping intervals refused";
  report(7, "production configuration and interval backend", v);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << 7 - failures << "/7" << std::endl;
  return failures ? 1 : 0;
}
