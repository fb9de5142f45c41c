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
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "smon/concurrency.hpp"
#include "smon/scenario.hpp"

using namespace smon;

namespace {

const std::filesystem::path kScenarios = SMON_SCENARIO_DIR;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_file(const char* name, std::uint64_t seed = 0) {
  Scenario sc = Scenario::load_file(kScenarios / name);
  RunOptions opt;
  opt.artifact_dir = std::filesystem::temp_directory_path() / "smon-harness-test";
  if (seed) {
    opt.seed = seed;
    opt.override_seed = true;
  }
  return run_scenario(sc, opt);
}

}  // namespace

TEST_CASE("bundled scenarios pass") {
  for (const char* name : {"local-attestation.scn", "remote-attestation.scn", "adversarial-os.scn", "races.scn"}) {
    CAPTURE(name);
    RunResult r = run_file(name);
    CHECK_MESSAGE(r.passed, r.failure);
    CHECK_FALSE(r.trace.empty());
  }
}

TEST_CASE("malformed scenarios are rejected with a line number") {
  CHECK_THROWS_AS(Scenario::parse("seed 1\nE9 read addr=0x1000\n"), ScenarioError);
  CHECK_THROWS_AS(Scenario::parse("machine preset=desk cores=\n"), ScenarioError);
  CHECK_THROWS_AS(Scenario::parse("os block_resource id=region:3 bogus=1\n"), ScenarioError);
  CHECK_THROWS_AS(Scenario::parse("os block_res"), ScenarioError);
  CHECK_THROWS_AS(Scenario::parse("race\nos block_resource id=region:3\n"), ScenarioError);
  try {
    Scenario::parse("seed 1\n\n# c\nE9 read addr=0x1000\n");
    FAIL("no error");
  } catch (const ScenarioError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("a failed expectation stops the run") {
  Scenario sc = Scenario::parse("os block_resource id=region:3 expect=NotOwner\nos read addr=0x30000\n");
  RunResult r = run_scenario(sc);
  CHECK_FALSE(r.passed);
  REQUIRE(r.failed_event);
  CHECK(*r.failed_event == 0);
  CHECK(r.trace.size() == 1);
}

TEST_CASE("traces are deterministic JSON lines") {
  RunResult a = run_file("remote-attestation.scn");
  RunResult b = run_file("remote-attestation.scn");
  CHECK(a.trace_jsonl() == b.trace_jsonl());
  RunResult c = run_file("remote-attestation.scn", 99);
  CHECK(a.trace_jsonl() != c.trace_jsonl());

  std::istringstream lines(a.trace_jsonl());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["index"].get<std::size_t>() == n++);
    for (const char* key : {"actor", "api", "args", "result", "state"}) CHECK(j.contains(key));
    CHECK(j["state"].get<std::string>().size() == 64);
  }
  CHECK(n == a.trace.size());
}

TEST_CASE("schedules of three calls") {
  auto all = all_schedules(3);
  CHECK(all.size() == 90);
  for (const Schedule& s : all) CHECK_NOTHROW(validate_schedule(s, 3));
  CHECK(serial_schedule(2) == Schedule{0, 0, 1, 1});
  CHECK_THROWS_AS(validate_schedule({0, 1, 1}, 2), std::invalid_argument);
}

TEST_CASE("exploration at depth zero visits only the root") {
  Scenario sc = Scenario::load_file(kScenarios / "explore-minimal.scn");
  SecurityMonitor root = setup_state(sc);
  ExploreOptions opt = sc.explore;
  opt.max_depth = 0;
  ExplorationReport r = explore(root, sc.alphabet, opt);
  CHECK(r.states == 1);
  CHECK(r.ok());
}

TEST_CASE("a skipped scrub is found and its counterexample replays") {
  Scenario sc = Scenario::load_file(kScenarios / "explore-minimal.scn");
  sc.monitor.mutations = mutation::kSkipScrubOnClean;
  ExploreOptions opt = sc.explore;
  opt.stop_at_first = true;
  ExplorationReport r = explore(setup_state(sc), sc.alphabet, opt);
  REQUIRE(r.violation_count > 0);
  const Counterexample& cex = r.violations.front();
  CHECK(cex.path.size() <= 6);

  Scenario replay = Scenario::parse(counterexample_scenario(sc, cex), kScenarios);
  RunResult rr = run_scenario(replay);
  CHECK_FALSE(rr.passed);
  CHECK(rr.failure.find(cex.invariant) != std::string::npos);

  // without the mutation the same path is harmless
  replay.monitor.mutations = 0;
  RunResult clean = run_scenario(replay);
  CHECK(clean.failure.find(cex.invariant) == std::string::npos);
}

TEST_CASE("the budget bounds exploration") {
  Scenario sc = Scenario::load_file(kScenarios / "explore-minimal.scn");
  ExploreOptions opt = sc.explore;
  opt.budget = 50;
  ExplorationReport r = explore(setup_state(sc), sc.alphabet, opt);
  CHECK(r.budget_exceeded);
  CHECK(r.transitions <= 50);
}
