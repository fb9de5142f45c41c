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
#include "smon/action.hpp"
#include "smon/invariants.hpp"
#include "support.hpp"

using namespace smon;

namespace {

const std::filesystem::path kManifests = std::filesystem::path(SMON_SCENARIO_DIR) / "manifests";

ResourceId region(std::uint64_t r) { return {ResourceType::MemoryRegion, r}; }

struct Bench {
  SecurityMonitor sm{MonitorConfig{}};
  LiveLoad e1;

  explicit Bench(std::uint64_t r = 3) {
    e1 = load_manifest(sm, 0, Manifest::load_file(kManifests / "app.manifest"), LoadPlacement{{}, {region(r)}, {}, {}, true});
    REQUIRE(std::holds_alternative<Digest>(e1.outcome));
  }
  LiveLoad load(const std::string& file, std::uint64_t r, bool init = true) {
    return load_manifest(sm, 0, Manifest::load_file(kManifests / file), LoadPlacement{{}, {region(r)}, {}, {}, init});
  }
  Status os(const ApiCall& c, CoreId core = 0) { return sm.call(core, c).status; }
  std::pair<DomainId, ResourceState> owner(const ResourceId& id) { return *sm.owner_of(id); }
};

}  // namespace

TEST_CASE("resource edges match the four-state diagram exactly") {
  using S = ResourceState;
  using E = ResourceEdge;
  const std::map<std::pair<S, E>, S> allowed{{{S::Owned, E::Block}, S::Blocked},
                                             {{S::Blocked, E::Clean}, S::Clean},
                                             {{S::Clean, E::Offer}, S::Offered},
                                             {{S::Clean, E::Reclaim}, S::Owned},
                                             {{S::Offered, E::Accept}, S::Owned}};
  int edges = 0;
  for (S s : {S::Owned, S::Blocked, S::Clean, S::Offered}) {
    for (E e : {E::Block, E::Clean, E::Offer, E::Accept, E::Reclaim}) {
      auto got = next_resource_state(s, e);
      auto it = allowed.find({s, e});
      CAPTURE(to_string(s));
      CAPTURE(to_string(e));
      if (it != allowed.end()) {
        REQUIRE(got.ok());
        CHECK(*got == it->second);
        ++edges;
      } else {
        CHECK_FALSE(got.ok());
      }
    }
  }
  CHECK(edges == 5);
  CHECK(next_resource_state(S::Blocked, E::Block).status() == Status::WrongState);
}

TEST_CASE("block, clean and grant from the OS") {
  Bench b;
  CHECK(b.os(api::BlockResource{region(2)}) == Status::Ok);
  CHECK(b.owner(region(2)) == std::pair{DomainId::os(), ResourceState::Blocked});
  CHECK(b.os(api::BlockResource{region(2)}) == Status::WrongState);
  CHECK(b.os(api::CleanResource{region(4)}) == Status::WrongState);
  CHECK(b.os(api::CleanResource{region(2)}) == Status::Ok);
  CHECK(b.owner(region(2)).second == ResourceState::Clean);
  CHECK(b.os(api::GrantResource{region(2), DomainId::enclave(b.e1.eid)}) == Status::Ok);
  CHECK(b.owner(region(2)).second == ResourceState::Offered);
  // the OS cannot block or clean memory it offered away, nor enclave memory
  CHECK(b.os(api::BlockResource{region(3)}) == Status::NotOwner);
  CHECK(b.os(api::CleanResource{region(3)}) == Status::WrongState);
}

TEST_CASE("offers reach only their addressee, and never a deleted enclave") {
  Bench b;
  LiveLoad e2 = b.load("peer.manifest", 5);
  REQUIRE(std::holds_alternative<Digest>(e2.outcome));
  REQUIRE(b.os(api::BlockResource{region(2)}) == Status::Ok);
  REQUIRE(b.os(api::CleanResource{region(2)}) == Status::Ok);
  REQUIRE(b.os(api::GrantResource{region(2), DomainId::enclave(e2.eid)}) == Status::Ok);
  REQUIRE(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 1) == Status::Ok);
  CHECK(b.os(api::AcceptResource{region(2)}, 1) == Status::NotOffered);
  REQUIRE(b.os(api::ExitEnclave{}, 1) == Status::Ok);

  REQUIRE(b.os(api::DeleteEnclave{e2.eid}) == Status::Ok);
  REQUIRE(b.os(api::BlockResource{region(6)}) == Status::Ok);
  REQUIRE(b.os(api::CleanResource{region(6)}) == Status::Ok);
  CHECK(b.os(api::GrantResource{region(6), DomainId::enclave(e2.eid)}) == Status::NoSuchDomain);
}

TEST_CASE("a region changes owners without breaking any invariant") {
  Bench b;
  LiveLoad e2 = b.load("peer.manifest", 5);
  // E1 takes region 2, then gives it up to E2 through the OS.
  auto step = [&](const ApiCall& c, CoreId core) {
    SecurityMonitor before(b.sm);
    Action a = Action::api(core, c);
    ActionResult r = apply_action(b.sm, a);
    REQUIRE(r.status == Status::Ok);
    CHECK(check_state(b.sm).empty());
    CHECK(check_transition(before, b.sm, a).empty());
  };
  step(api::BlockResource{region(2)}, 0);
  step(api::CleanResource{region(2)}, 0);
  step(api::GrantResource{region(2), DomainId::enclave(b.e1.eid)}, 0);
  step(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 0);
  step(api::AcceptResource{region(2)}, 0);
  CHECK(b.owner(region(2)) == std::pair{DomainId::enclave(b.e1.eid), ResourceState::Owned});
  step(api::BlockResource{region(2)}, 0);
  step(api::ExitEnclave{}, 0);
  step(api::CleanResource{region(2)}, 0);
  step(api::GrantResource{region(2), DomainId::enclave(e2.eid)}, 0);
  step(api::EnterEnclave{e2.eid, e2.tids[0]}, 1);
  step(api::AcceptResource{region(2)}, 1);
  CHECK(b.owner(region(2)) == std::pair{DomainId::enclave(e2.eid), ResourceState::Owned});
}

TEST_CASE("cleaning a core drops the departing enclave's translations") {
  Bench b;
  REQUIRE(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 1) == Status::Ok);
  for (VirtAddr va : {0x401000, 0x402000, 0x403000}) REQUIRE(b.sm.load(1, va).ok());
  auto count = [&] {
    return std::count_if(b.sm.machine().tlb(1).begin(), b.sm.machine().tlb(1).end(),
                         [&](const TlbEntry& e) { return e.domain == DomainId::enclave(b.e1.eid); });
  };
  CHECK(count() == 3);
  REQUIRE(b.os(api::ExitEnclave{}, 1) == Status::Ok);
  CHECK(count() == 0);
}

TEST_CASE("a stale translation misses after the region is cleaned") {
  Bench b;
  PhysAddr page = 0x40000;  // region 4
  REQUIRE(b.sm.load(0, page).ok());
  REQUIRE(b.os(api::BlockResource{region(4)}) == Status::Ok);
  REQUIRE(b.os(api::CleanResource{region(4)}) == Status::Ok);
  REQUIRE(b.os(api::GrantResource{region(4), DomainId::enclave(b.e1.eid)}) == Status::Ok);
  REQUIRE(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 1) == Status::Ok);
  REQUIRE(b.os(api::AcceptResource{region(4)}, 1) == Status::Ok);
  CHECK(b.sm.load(0, page).status() == Status::AccessDenied);
}

TEST_CASE("deleted enclave memory is denied until cleaned, then reads zero") {
  Bench b;
  REQUIRE(b.os(api::DeleteEnclave{b.e1.eid}) == Status::Ok);
  CHECK(b.sm.load(0, 0x32000).status() == Status::AccessDenied);
  REQUIRE(b.os(api::CleanResource{region(3)}) == Status::Ok);
  auto v = b.sm.load(0, 0x32000);
  REQUIRE(v.ok());
  CHECK(*v == 0);
}

TEST_CASE("the lifecycle refuses out-of-order calls") {
  Bench b;
  LiveLoad e2 = b.load("peer.manifest", 5, false);
  CHECK(b.os(api::EnterEnclave{e2.eid, e2.tids[0]}) == Status::WrongState);
  CHECK(b.os(api::InitEnclave{b.e1.eid}) == Status::WrongState);
  CHECK(b.os(api::AllocatePageTable{b.e1.eid, 0x404000}) == Status::WrongState);
  REQUIRE(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 1) == Status::Ok);
  CHECK(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 0) == Status::ThreadBusy);
  CHECK(b.os(api::DeleteEnclave{b.e1.eid}) == Status::ThreadsScheduled);
  CHECK(b.os(api::ExitEnclave{}) == Status::NotInEnclave);
}

TEST_CASE("interrupts save enclave registers and hand the OS a clean core") {
  Bench b;
  REQUIRE(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 1) == Status::Ok);
  RegisterFile regs{};
  for (std::size_t i = 1; i < regs.size(); ++i) {
    regs[i] = 0x1111111111111111ULL * (i % 15 + 1);
    b.sm.set_register(1, i, regs[i]);
  }
  b.sm.set_pc(1, 0x401234);
  ActionResult r = apply_action(b.sm, Action::event(Action::Kind::Interrupt, 1));
  CHECK(r.aex);
  const CoreState& c = b.sm.machine().core(1);
  CHECK(c.domain.is_os());
  CHECK(c.regs == RegisterFile{});
  CHECK(c.pc == 0);

  // another enclave runs on the same core in between
  LiveLoad e2 = b.load("peer.manifest", 5);
  REQUIRE(b.os(api::EnterEnclave{e2.eid, e2.tids[0]}, 1) == Status::Ok);
  b.sm.set_register(1, 5, 0xdead);
  REQUIRE(b.os(api::ExitEnclave{}, 1) == Status::Ok);

  REQUIRE(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 1) == Status::Ok);
  ApiResponse snap = b.sm.call(1, api::GetAexState{});
  REQUIRE(snap.ok());
  const auto& s = std::get<AexSnapshot>(snap.payload);
  CHECK(s.regs == regs);
  CHECK(s.pc == 0x401234);
}

TEST_CASE("a recycled thread carries no saved state") {
  Bench b;
  REQUIRE(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 1) == Status::Ok);
  b.sm.set_register(1, 7, 77);
  apply_action(b.sm, Action::event(Action::Kind::Interrupt, 1));
  REQUIRE(b.os(api::DeleteEnclave{b.e1.eid}) == Status::Ok);
  ResourceId t{ResourceType::Thread, b.e1.tids[0]};
  REQUIRE(b.os(api::CleanResource{t}) == Status::Ok);
  LiveLoad e2 = b.load("peer.manifest", 5);
  REQUIRE(b.os(api::GrantResource{t, DomainId::enclave(e2.eid)}) == Status::Ok);
  REQUIRE(b.os(api::EnterEnclave{e2.eid, e2.tids[0]}, 1) == Status::Ok);
  REQUIRE(b.os(api::AcceptThread{b.e1.tids[0], 0x401000, {}}, 1) == Status::Ok);
  const ThreadMetadata* tm = b.sm.thread(b.e1.tids[0]);
  REQUIRE(tm != nullptr);
  CHECK(tm->aex_state == RegisterFile{});
}

TEST_CASE("mail carries the sender's measurement") {
  Bench b;
  LiveLoad e2 = b.load("peer.manifest", 5);
  REQUIRE(b.os(api::EnterEnclave{b.e1.eid, b.e1.tids[0]}, 0) == Status::Ok);
  REQUIRE(b.os(api::EnterEnclave{e2.eid, e2.tids[0]}, 1) == Status::Ok);
  Bytes hello{'h', 'i'};
  CHECK(b.os(api::SendMail{e2.eid, hello}, 0) == Status::NotAccepting);
  REQUIRE(b.os(api::AcceptMail{0, DomainId::enclave(b.e1.eid)}, 1) == Status::Ok);
  REQUIRE(b.os(api::SendMail{e2.eid, hello}, 0) == Status::Ok);
  CHECK(b.os(api::SendMail{e2.eid, hello}, 0) == Status::NotAccepting);
  ApiResponse got = b.sm.call(1, api::GetMail{0});
  REQUIRE(got.ok());
  const auto& mail = std::get<MailDelivery>(got.payload);
  CHECK(mail.message == hello);
  CHECK(mail.sender == DomainId::enclave(b.e1.eid));
  CHECK(mail.sender_measurement == testing::oracle_digest(Manifest::load_file(kManifests / "app.manifest")));
  CHECK(b.sm.call(1, api::GetMail{0}).status == Status::Empty);
}

TEST_CASE("the OS cannot use mailboxes") {
  Bench b;
  CHECK(b.os(api::AcceptMail{0, DomainId::os()}) == Status::NotEnclave);
  CHECK(b.os(api::SendMail{b.e1.eid, {}}) == Status::NotEnclave);
  CHECK(b.os(api::GetAttestationKey{}) == Status::NotEnclave);
}

TEST_CASE("public fields are readable by anyone") {
  Bench b;
  for (std::uint32_t f = 1; f <= 4; ++f) CHECK(b.sm.call(0, api::GetField{f}).ok());
  CHECK(b.sm.call(0, api::GetField{9}).status == Status::NoSuchField);
}
