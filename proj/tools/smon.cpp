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
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "smon/scenario.hpp"

namespace {

using namespace smon;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kMalformed = 2;
constexpr int kBudget = 3;

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& trace_out,
            const std::string& artifacts, std::uint64_t stress_calls) {
  Scenario sc;
  try {
    sc = Scenario::load_file(path);
  } catch (const ScenarioError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kMalformed;
  }
  RunOptions opt;
  if (seed) {
    opt.seed = *seed;
    opt.override_seed = true;
  }
  opt.artifact_dir = artifacts;
  opt.stress_calls = stress_calls;
  RunResult r;
  try {
    r = run_scenario(sc, opt);
  } catch (const ScenarioError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kMalformed;
  }
  if (!trace_out.empty()) {
    std::ofstream out(trace_out, std::ios::binary);
    out << r.trace_jsonl();
    if (!out) {
      std::cerr << "cannot write " << trace_out << "\n";
      return kMalformed;
    }
  }
  for (const std::string& n : r.notes) std::cout << n << "\n";
  if (!r.passed) {
    std::cout << "FAIL at event " << r.failed_event.value_or(0) << ": " << r.failure << "\n";
    return kFailed;
  }
  std::cout << "PASS " << r.trace.size() << " events\n";
  return kOk;
}

int cmd_measure(const std::string& path) {
  Manifest m;
  try {
    m = Manifest::load_file(path);
  } catch (const ManifestError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kMalformed;
  }
  MeasureOutcome out = measure_manifest(m);
  if (const auto* v = std::get_if<RuleViolation>(&out)) {
    std::cout << v->rule << "\n";
    std::cerr << "rejected: rule " << v->rule << " at step " << v->op_index << "\n";
    return kMalformed;
  }
  std::cout << to_hex(std::get<Digest>(out)) << "\n";
  return kOk;
}

template <std::size_t N>
bool hex_arg(const std::string& name, const std::string& text, std::array<std::uint8_t, N>& out) {
  auto v = fixed_from_hex<N>(text);
  if (!v) {
    std::cerr << "--" << name << " must be " << 2 * N << " hex characters\n";
    return false;
  }
  out = *v;
  return true;
}

int cmd_verify(const std::string& path, const std::string& nonce, const std::string& measurement,
               const std::string& device_key, const std::string& binding) {
  VerifyExpectations ex;
  if (!hex_arg("nonce", nonce, ex.nonce) || !hex_arg("measurement", measurement, ex.measurement) ||
      !hex_arg("device-key", device_key, ex.device_key)) {
    return kMalformed;
  }
  if (!binding.empty()) {
    Digest b{};
    if (!hex_arg("binding", binding, b)) return kMalformed;
    ex.channel_binding = b;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot open " << path << "\n";
    return kMalformed;
  }
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  VerifyReason why = verify_attestation(data, ex);
  std::cout << to_string(why) << "\n";
  if (why == VerifyReason::Malformed) return kMalformed;
  return why == VerifyReason::Ok ? kOk : kFailed;
}

int cmd_explore(const std::string& config, std::optional<std::size_t> depth, std::optional<std::uint64_t> budget,
                const std::vector<std::string>& mutations, const std::string& out_dir, bool first) {
  Scenario sc;
  try {
    sc = Scenario::load_file(config);
    for (const std::string& name : mutations) {
      auto bit = mutation::parse(name);
      if (!bit) throw ScenarioError(0, "unknown mutation " + name);
      sc.monitor.mutations |= *bit;
    }
  } catch (const ScenarioError& e) {
    std::cerr << config << ": " << e.what() << "\n";
    return kMalformed;
  }
  ExploreOptions opt = sc.explore;
  if (depth) opt.max_depth = *depth;
  if (budget) opt.budget = *budget;
  opt.stop_at_first = first;
  SecurityMonitor root = [&] {
    try {
      return setup_state(sc);
    } catch (const std::runtime_error& e) {
      std::cerr << config << ": " << e.what() << "\n";
      std::exit(kMalformed);
    }
  }();
  ExplorationReport rep = explore(root, sc.alphabet, opt);
  std::cout << "states " << rep.states << "\n"
            << "transitions " << rep.transitions << "\n"
            << "depth " << rep.depth << " of " << opt.max_depth << "\n"
            << "violations " << rep.violation_count << "\n"
            << "seconds " << rep.seconds << "\n";
  if (rep.budget_exceeded) {
    std::cout << "budget of " << opt.budget << " transitions exceeded\n";
    return kBudget;
  }
  if (rep.violations.empty()) return kOk;
  std::filesystem::create_directories(out_dir);
  for (const Counterexample& c : rep.violations) {
    std::filesystem::path file = std::filesystem::path(out_dir) / (c.invariant + ".scn");
    std::ofstream(file) << counterexample_scenario(sc, c);
    std::cout << "counterexample " << c.invariant << " depth " << c.path.size() << " -> " << file.string() << "\n"
              << "  " << c.detail << "\n";
  }
  return kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smon: security monitor simulator"};
  app.require_subcommand(1);

  std::string scenario, trace_out, artifacts;
  std::optional<std::uint64_t> seed;
  std::uint64_t stress_calls = 0;
  bool stress = false;
  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("scenario", scenario)->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--trace-out", trace_out, "write the JSON-lines trace here");
  run->add_option("--artifacts", artifacts, "directory for files the scenario writes");
  run->add_flag("--stress", stress, "afterwards, drive the monitor from concurrent callers");
  run->add_option("--stress-calls", stress_calls, "calls per OS core in stress mode")->default_val(2000);

  std::string manifest;
  auto* measure = app.add_subcommand("measure", "measure an enclave manifest offline");
  measure->add_option("manifest", manifest)->required();

  std::string bundle, nonce, measurement, device_key, binding;
  auto* verify = app.add_subcommand("verify", "verify an attestation bundle");
  verify->add_option("bundle", bundle)->required();
  verify->add_option("--nonce", nonce)->required();
  verify->add_option("--measurement", measurement)->required();
  verify->add_option("--device-key", device_key)->required();
  verify->add_option("--binding", binding, "expected channel binding");

  std::string config, out_dir = "counterexamples";
  std::optional<std::size_t> depth;
  std::optional<std::uint64_t> budget;
  std::vector<std::string> mutations;
  bool first = false;
  auto* exp = app.add_subcommand("explore", "exhaustively explore from a configuration");
  exp->add_option("--config", config)->required();
  exp->add_option("--depth", depth);
  exp->add_option("--budget", budget, "transition cap");
  exp->add_option("--out-dir", out_dir, "where counterexample scenarios go");
  exp->add_flag("--first", first, "stop at the first violation");
  exp->add_option("--mutation", mutations)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kMalformed;
  }
  if (*run) return cmd_run(scenario, seed, trace_out, artifacts, stress ? stress_calls : 0);
  if (*measure) return cmd_measure(manifest);
  if (*verify) return cmd_verify(bundle, nonce, measurement, device_key, binding);
  return cmd_explore(config, depth, budget, mutations, out_dir, first);
}
