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

#include "smon/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "smon/concurrency.hpp"

namespace smon {

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::map<std::string, std::string> key_values(std::size_t line, const std::vector<std::string>& toks,
                                              std::size_t from) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = from; i < toks.size(); ++i) {
    auto eq = toks[i].find('=');
    if (eq == std::string::npos || eq == 0) throw ScenarioError(line, "expected key=value, got '" + toks[i] + "'");
    if (!kv.emplace(toks[i].substr(0, eq), toks[i].substr(eq + 1)).second) {
      throw ScenarioError(line, "duplicate key " + toks[i].substr(0, eq));
    }
  }
  return kv;
}

std::uint64_t number(std::size_t line, const std::string& text) { return parse_value(line, text, Symbols{}); }

bool yes_no(std::size_t line, const std::string& v) {
  if (v == "yes" || v == "true" || v == "1") return true;
  if (v == "no" || v == "false" || v == "0") return false;
  throw ScenarioError(line, "expected yes or no, got '" + v + "'");
}

std::vector<std::uint64_t> number_list(std::size_t line, const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const std::string& part : split(v, ',')) out.push_back(number(line, part));
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

bool is_reserved(std::string_view s) {
  return s == "os" || s == "remote" || s == "sm" || s == "race" || s == "end" || s == "machine" || s == "monitor" ||
         s == "seed" || s == "enclave" || s == "check" || s == "explore";
}

// Verbs handled by the runner itself rather than parse_action.
const std::set<std::string>& macro_verbs() {
  static const std::set<std::string> verbs{"load",  "enter",          "fetch_key", "serve", "request_attestation",
                                           "collect_attestation", "challenge", "verify", "channel"};
  return verbs;
}

std::string lower_kebab(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isupper(static_cast<unsigned char>(c)) && !out.empty()) out += '-';
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool expectation_met(const std::string& expect, const std::string& result) {
  return expect == result || lower_kebab(expect) == lower_kebab(result);
}

Symbols static_symbols(const Scenario& sc) {
  Symbols s;
  for (const EnclaveDecl& e : sc.enclaves) {
    s[e.name] = 0;
    for (std::size_t t = 0; t < e.manifest.thread_count(); ++t) s[e.name + ".t" + std::to_string(t)] = 0;
    for (std::uint32_t m = 0; m < e.manifest.mailboxes; ++m) s[e.name + ".mb" + std::to_string(m)] = 0;
  }
  return s;
}

void check_references(const Step& step, const Symbols& symbols) {
  for (const auto& [k, v] : step.args) {
    for (std::size_t pos = v.find('$'); pos != std::string::npos; pos = v.find('$', pos + 1)) {
      std::size_t end = pos + 1;
      while (end < v.size() && (std::isalnum(static_cast<unsigned char>(v[end])) || v[end] == '_' || v[end] == '.')) ++end;
      std::string name = v.substr(pos + 1, end - pos - 1);
      if (symbols.count(name) == 0) throw ScenarioError(step.line, "undeclared name '$" + name + "'");
    }
  }
}

}  // namespace

MachineConfig machine_preset(std::string_view name) {
  if (name == "desk") return MachineConfig::desk_scale();
  if (name == "production") return MachineConfig::production_regions();
  if (name == "interval") return MachineConfig::interval_based(8 * 64 * 1024, 4096, 64 * 1024);
  throw std::invalid_argument("unknown machine preset '" + std::string(name) + "'");
}

const EnclaveDecl* Scenario::find_enclave(std::string_view name) const {
  for (const EnclaveDecl& e : enclaves) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::string Scenario::header_text() const {
  const MachineConfig& m = monitor.machine;
  std::ostringstream out;
  if (m.backend == IsolationBackendKind::RegionBased) {
    out << "machine preset=desk cores=" << m.core_count << " regions=" << m.region_count
        << " region_size=" << hex(m.region_size) << " page_size=" << hex(m.page_size)
        << " monitor_regions=" << m.monitor_regions << "\n";
  } else {
    out << "machine preset=interval cores=" << m.core_count << " memory=" << hex(m.phys_memory_bytes)
        << " page_size=" << hex(m.page_size) << " monitor_bytes=" << hex(m.monitor_interval_bytes) << "\n";
  }
  out << "monitor post_init_accept=" << (monitor.allow_post_init_accept ? "yes" : "no");
  if (monitor.signing_enclave_measurement) out << " signing=" << to_hex(*monitor.signing_enclave_measurement);
  std::string muts;
  for (const auto& named : mutation::kAll) {
    if (monitor.mutations & named.bit) muts += (muts.empty() ? "" : ",") + std::string(named.name);
  }
  if (!muts.empty()) out << " mutation=" << muts;
  out << "\nseed " << seed << "\n";
  for (const EnclaveDecl& e : enclaves) out << "enclave " << e.name << " manifest=" << e.path.string() << "\n";
  return out.str();
}

Scenario Scenario::parse(std::string_view text, const std::filesystem::path& base_dir) {
  Scenario sc;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  bool machine_seen = false;
  std::optional<std::pair<std::size_t, std::string>> signing_name;
  Step* race = nullptr;
  auto absolute = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? std::filesystem::absolute(base_dir / path) : path;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    auto toks = tokens_of(raw);
    if (toks.empty()) continue;
    const std::string& head = toks[0];

    if (head == "machine") {
      if (!sc.steps.empty() || machine_seen) throw ScenarioError(lineno, "machine must come first and only once");
      machine_seen = true;
      auto kv = key_values(lineno, toks, 1);
      MachineConfig m;
      try {
        m = machine_preset(kv.count("preset") ? kv.at("preset") : "desk");
      } catch (const std::invalid_argument& e) {
        throw ScenarioError(lineno, e.what());
      }
      kv.erase("preset");
      bool memory_given = kv.count("memory") != 0;
      for (const auto& [k, v] : kv) {
        std::uint64_t n = number(lineno, v);
        if (k == "cores") m.core_count = static_cast<std::uint32_t>(n);
        else if (k == "regions") m.region_count = static_cast<std::uint32_t>(n);
        else if (k == "region_size") m.region_size = n;
        else if (k == "page_size") m.page_size = n;
        else if (k == "memory") m.phys_memory_bytes = n;
        else if (k == "monitor_regions") m.monitor_regions = static_cast<std::uint32_t>(n);
        else if (k == "monitor_bytes") m.monitor_interval_bytes = n;
        else throw ScenarioError(lineno, "unknown machine key " + k);
      }
      if (m.backend == IsolationBackendKind::RegionBased && !memory_given) {
        m.phys_memory_bytes = m.region_count * m.region_size;
      }
      try {
        m.validate();
      } catch (const std::invalid_argument& e) {
        throw ScenarioError(lineno, e.what());
      }
      sc.monitor.machine = m;
    } else if (head == "monitor") {
      for (const auto& [k, v] : key_values(lineno, toks, 1)) {
        if (k == "post_init_accept") {
          sc.monitor.allow_post_init_accept = yes_no(lineno, v);
        } else if (k == "signing") {
          if (auto d = fixed_from_hex<32>(v)) {
            sc.monitor.signing_enclave_measurement = *d;
          } else {
            signing_name = {lineno, v};
          }
        } else if (k == "mutation") {
          for (const std::string& name : split(v, ',')) {
            auto bit = mutation::parse(name);
            if (!bit) throw ScenarioError(lineno, "unknown mutation " + name);
            sc.monitor.mutations |= *bit;
          }
        } else {
          throw ScenarioError(lineno, "unknown monitor key " + k);
        }
      }
    } else if (head == "seed") {
      if (toks.size() != 2) throw ScenarioError(lineno, "seed takes one number");
      sc.seed = number(lineno, toks[1]);
    } else if (head == "enclave") {
      if (toks.size() < 3 || !is_identifier(toks[1]) || is_reserved(toks[1])) {
        throw ScenarioError(lineno, "enclave NAME manifest=PATH");
      }
      if (sc.find_enclave(toks[1])) throw ScenarioError(lineno, "enclave " + toks[1] + " declared twice");
      auto kv = key_values(lineno, toks, 2);
      if (kv.size() != 1 || !kv.count("manifest")) throw ScenarioError(lineno, "enclave NAME manifest=PATH");
      EnclaveDecl decl{toks[1], absolute(kv.at("manifest")), {}};
      try {
        decl.manifest = Manifest::load_file(decl.path);
      } catch (const ManifestError& e) {
        throw ScenarioError(lineno, decl.path.string() + ": " + e.what());
      }
      sc.enclaves.push_back(std::move(decl));
    } else if (head == "check") {
      if (toks.size() != 2 || toks[1] != "invariants") throw ScenarioError(lineno, "expected 'check invariants'");
      sc.check_invariants = true;
    } else if (head == "explore") {
      sc.explore_section = true;
      for (const auto& [k, v] : key_values(lineno, toks, 1)) {
        if (k == "depth") sc.explore.max_depth = number(lineno, v);
        else if (k == "budget") sc.explore.budget = number(lineno, v);
        else if (k == "eid_slots") sc.alphabet.eid_slots = number_list(lineno, v);
        else if (k == "tid_slots") sc.alphabet.tid_slots = number_list(lineno, v);
        else if (k == "ev_base") sc.alphabet.ev_base = number(lineno, v);
        else if (k == "ev_size") sc.alphabet.ev_size = number(lineno, v);
        else if (k == "mailboxes") sc.alphabet.mailboxes = static_cast<std::uint32_t>(number(lineno, v));
        else if (k == "probes") sc.alphabet.probe_pages = number_list(lineno, v);
        else throw ScenarioError(lineno, "unknown explore key " + k);
      }
    } else if (head == "race") {
      if (race) throw ScenarioError(lineno, "race blocks do not nest");
      Step s;
      s.line = lineno;
      s.verb = "race";
      for (const auto& [k, v] : key_values(lineno, toks, 1)) {
        if (k == "schedule") {
          std::vector<std::size_t> sched;
          for (auto n : number_list(lineno, v)) sched.push_back(static_cast<std::size_t>(n));
          s.schedule = sched;
        } else if (k == "winners") {
          s.winners = number(lineno, v);
        } else if (k == "check") {
          if (v != "all") throw ScenarioError(lineno, "check=all is the only race check");
          s.check_all = true;
        } else {
          throw ScenarioError(lineno, "unknown race key " + k);
        }
      }
      sc.steps.push_back(std::move(s));
      race = &sc.steps.back();
    } else if (head == "end") {
      if (!race) throw ScenarioError(lineno, "end without race");
      if (race->members.empty()) throw ScenarioError(lineno, "empty race");
      if (race->schedule) {
        try {
          validate_schedule(*race->schedule, race->members.size());
        } catch (const std::invalid_argument& e) {
          throw ScenarioError(race->line, e.what());
        }
      }
      race = nullptr;
    } else {
      Step s;
      s.line = lineno;
      if (head[0] == '@') {
        s.core = static_cast<CoreId>(number(lineno, head.substr(1)));
      } else {
        auto at = head.find('@');
        s.actor = head.substr(0, at);
        if (at != std::string::npos) s.core = static_cast<CoreId>(number(lineno, head.substr(at + 1)));
        if (s.actor != "os" && s.actor != "remote" && !sc.find_enclave(s.actor)) {
          throw ScenarioError(lineno, "undeclared actor '" + s.actor + "'");
        }
        if (s.core && s.actor != "os") throw ScenarioError(lineno, "only the OS picks its core with @");
      }
      if (toks.size() < 2) throw ScenarioError(lineno, "missing action");
      s.verb = toks[1];
      std::vector<std::string> rest(toks.begin() + 2, toks.end());
      std::size_t from = 0;
      if (s.actor == "os" && (s.verb == "load" || s.verb == "enter")) {
        if (rest.empty() || !sc.find_enclave(rest[0])) {
          throw ScenarioError(lineno, "os " + s.verb + " needs a declared enclave name");
        }
        s.args["name"] = rest[0];
        from = 1;
      }
      auto kv = key_values(lineno, rest, from);
      if (auto it = kv.find("expect"); it != kv.end()) {
        s.expect = it->second;
        kv.erase(it);
      }
      s.args.insert(kv.begin(), kv.end());
      if (race) {
        if (s.actor == "remote" || macro_verbs().count(s.verb)) {
          throw ScenarioError(lineno, "race members must be monitor calls");
        }
        race->members.push_back(std::move(s));
      } else {
        sc.steps.push_back(std::move(s));
      }
    }
  }
  if (race) throw ScenarioError(lineno, "race block starting at line " + std::to_string(race->line) + " has no end");
  if (signing_name) {
    const EnclaveDecl* d = sc.find_enclave(signing_name->second);
    if (!d) throw ScenarioError(signing_name->first, "signing names no declared enclave");
    auto digest = measure_manifest(d->manifest);
    if (!std::holds_alternative<Digest>(digest)) {
      throw ScenarioError(signing_name->first, "signing enclave manifest does not measure");
    }
    sc.monitor.signing_enclave_measurement = std::get<Digest>(digest);
  }

  // Static checks: names, verbs and arguments of every raw action.
  Symbols symbols = static_symbols(sc);
  auto check = [&](const Step& s) {
    check_references(s, symbols);
    bool raw = s.actor.empty() || ((s.actor == "os" || sc.find_enclave(s.actor)) && !macro_verbs().count(s.verb));
    if (s.actor == "remote") {
      if (s.verb != "challenge" && s.verb != "verify" && s.verb != "channel") {
        throw ScenarioError(s.line, "unknown remote action '" + s.verb + "'");
      }
    } else if (raw) {
      auto kv = s.args;
      for (const char* extra : {"expect_sender", "expect_measurement", "expect_text", "expect_value"}) kv.erase(extra);
      parse_action(s.line, 0, s.verb, kv, symbols);
      if (!kv.empty()) throw ScenarioError(s.line, "unknown argument " + kv.begin()->first + "=");
    }
  };
  for (const Step& s : sc.steps) {
    if (s.verb == "race" && s.actor.empty() && !s.core) {
      for (const Step& m : s.members) check(m);
    } else {
      check(s);
    }
  }
  return sc;
}

Scenario Scenario::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(0, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

std::string TraceEvent::json() const {
  nlohmann::ordered_json j;
  j["index"] = index;
  j["actor"] = actor;
  if (core) {
    j["core"] = *core;
  } else {
    j["core"] = nullptr;
  }
  j["api"] = api;
  j["args"] = to_hex(args);
  j["result"] = result;
  j["state"] = to_hex(state);
  return j.dump();
}

std::string RunResult::trace_jsonl() const {
  std::string out;
  for (const TraceEvent& e : trace) out += e.json() + "\n";
  return out;
}

namespace {

struct AssertionFailed {
  std::string what;
};

class Runner {
 public:
  Runner(const Scenario& sc, const RunOptions& opt)
      : sc_(sc),
        opt_(opt),
        sm_(sc.monitor),
        rng_(crypto::Entropy::seeded(opt.override_seed ? opt.seed : sc.seed)) {}

  RunResult run() {
    try {
      for (const Step& s : sc_.steps) {
        if (s.verb == "race" && s.actor.empty() && !s.core) {
          race(s);
        } else {
          step(s);
        }
      }
      if (opt_.stress_calls > 0) stress_pass();
    } catch (const AssertionFailed& f) {
      result_.passed = false;
      result_.failure = f.what;
      result_.failed_event = result_.trace.empty() ? 0 : result_.trace.size() - 1;
    }
    return std::move(result_);
  }

  SecurityMonitor& monitor() { return sm_; }

 private:
  [[noreturn]] void fail(const Step& s, const std::string& what) {
    throw AssertionFailed{"line " + std::to_string(s.line) + ": " + what};
  }

  void emit(const Step& s, std::optional<CoreId> core, const std::string& api, ByteView args, const std::string& res) {
    TraceEvent e;
    e.index = result_.trace.size();
    e.actor = s.actor.empty() ? "core" : s.actor;
    e.core = core;
    e.api = api;
    e.args = crypto::sha3_256(args);
    e.result = res;
    e.state = sm_.state_hash();
    result_.trace.push_back(e);
  }

  void expect(const Step& s, const std::string& res, const std::string& fallback = "ok") {
    std::string want = s.expect.value_or(fallback);
    if (!expectation_met(want, res)) fail(s, s.verb + " returned " + res + ", expected " + want);
  }

  std::string status_text(Status st) { return st == Status::Ok ? "ok" : std::string(to_string(st)); }

  const EnclaveDecl& decl(const Step& s, const std::string& name) {
    const EnclaveDecl* d = sc_.find_enclave(name);
    if (!d) fail(s, "unknown enclave " + name);
    return *d;
  }

  PhysAddr eid_of(const Step& s, const std::string& name) {
    auto it = symbols_.find(name);
    if (it == symbols_.end()) fail(s, name + " has not been loaded");
    return it->second;
  }

  CoreId os_core(const Step& s) {
    if (s.core) return *s.core;
    for (CoreId c = 0; c < sm_.machine().core_count(); ++c) {
      if (sm_.machine().core(c).domain.is_os()) return c;
    }
    fail(s, "no core is running the OS");
  }

  CoreId core_running(const Step& s, const std::string& name) {
    DomainId d = DomainId::enclave(eid_of(s, name));
    for (CoreId c = 0; c < sm_.machine().core_count(); ++c) {
      if (sm_.machine().core(c).domain == d) return c;
    }
    fail(s, name + " is not running on any core");
  }

  DomainId domain_arg(const Step& s, const std::string& v) {
    if (sc_.find_enclave(v)) return DomainId::enclave(eid_of(s, v));
    return parse_domain(s.line, v, symbols_);
  }

  Digest measurement_arg(const Step& s, const std::string& v) {
    if (v.rfind("measure:", 0) == 0) {
      auto m = measure_manifest(decl(s, v.substr(8)).manifest);
      if (!std::holds_alternative<Digest>(m)) fail(s, v.substr(8) + " does not measure");
      return std::get<Digest>(m);
    }
    if (sc_.find_enclave(v)) {
      const EnclaveMetadata* e = sm_.enclave(eid_of(s, v));
      if (!e || !e->final_measurement) fail(s, v + " has no final measurement");
      return *e->final_measurement;
    }
    auto d = fixed_from_hex<32>(v);
    if (!d) throw ScenarioError(s.line, "measurement must be NAME, measure:NAME or 64 hex");
    return *d;
  }

  Action to_action(const Step& s, CoreId core) {
    auto kv = s.args;
    for (const char* extra : {"expect_sender", "expect_measurement", "expect_text", "expect_value"}) kv.erase(extra);
    return parse_action(s.line, core, s.verb, kv, symbols_);
  }

  void run_action(const Step& s, const Action& a) {
    std::optional<SecurityMonitor> before;
    if (sc_.check_invariants) before.emplace(sm_);
    ActionResult r = apply_action(sm_, a);
    std::string text = format_action(a);
    emit(s, a.core, verb_of(a), ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
         status_text(r.status));
    expect(s, status_text(r.status));
    if (r.status == Status::Ok) extra_assertions(s, r);
    if (before) {
      auto found = check_transition(*before, sm_, a);
      auto state = check_state(sm_);
      found.insert(found.end(), state.begin(), state.end());
      if (!found.empty()) fail(s, "invariant " + found.front().invariant + " violated: " + found.front().detail);
    }
  }

  void extra_assertions(const Step& s, const ActionResult& r) {
    if (auto it = s.args.find("expect_value"); it != s.args.end()) {
      Word want = parse_value(s.line, it->second, symbols_);
      if (!r.value || *r.value != want) fail(s, "read " + (r.value ? hex(*r.value) : "nothing") + ", expected " + hex(want));
    }
    const auto* mail = std::get_if<MailDelivery>(&r.payload);
    if (auto it = s.args.find("expect_sender"); it != s.args.end()) {
      DomainId want = domain_arg(s, it->second);
      if (!mail || mail->sender != want) fail(s, "mail is not from " + want.str());
    }
    if (auto it = s.args.find("expect_measurement"); it != s.args.end()) {
      Digest want = measurement_arg(s, it->second);
      if (!mail || mail->sender_measurement != want) fail(s, "sender measurement does not match " + it->second);
      result_.notes.push_back("line " + std::to_string(s.line) + ": sender measurement " +
                              to_hex(mail->sender_measurement) + " validated");
    }
    if (auto it = s.args.find("expect_text"); it != s.args.end()) {
      if (!mail || std::string(mail->message.begin(), mail->message.end()) != it->second) {
        fail(s, "message text differs");
      }
    }
  }

  void step(const Step& s) {
    if (s.actor == "remote") return remote(s);
    if (s.actor == "os" && s.verb == "load") return load(s);
    if (s.actor == "os" && s.verb == "enter") {
      const std::string& name = s.args.at("name");
      std::size_t thread = s.args.count("thread") ? parse_value(s.line, s.args.at("thread"), symbols_) : 0;
      if (!s.args.count("core")) throw ScenarioError(s.line, "enter needs core=");
      CoreId core = static_cast<CoreId>(parse_value(s.line, s.args.at("core"), symbols_));
      PhysAddr eid = eid_of(s, name);
      auto tid = symbols_.find(name + ".t" + std::to_string(thread));
      if (tid == symbols_.end()) fail(s, name + " has no thread " + std::to_string(thread));
      return run_action(s, Action::api(core, api::EnterEnclave{eid, tid->second}));
    }
    if (s.actor.empty()) return run_action(s, to_action(s, *s.core));
    if (s.actor == "os") return run_action(s, to_action(s, os_core(s)));
    // Enclave actor.
    if (s.verb == "fetch_key" || s.verb == "serve") return signing(s);
    if (s.verb == "request_attestation") return request_attestation(s);
    if (s.verb == "collect_attestation") return collect_attestation(s);
    run_action(s, to_action(s, core_running(s, s.actor)));
  }

  void load(const Step& s) {
    const std::string& name = s.args.at("name");
    const EnclaveDecl& d = decl(s, name);
    LoadPlacement p;
    if (auto it = s.args.find("eid"); it != s.args.end()) p.eid = parse_value(s.line, it->second, symbols_);
    if (auto it = s.args.find("staging"); it != s.args.end()) p.staging = parse_value(s.line, it->second, symbols_);
    if (auto it = s.args.find("memory"); it != s.args.end()) {
      for (const std::string& r : split(it->second, ',')) p.memory.push_back(parse_resource(s.line, r, symbols_));
    }
    if (auto it = s.args.find("tids"); it != s.args.end()) {
      for (const std::string& t : split(it->second, ',')) p.tids.push_back(parse_value(s.line, t, symbols_));
    }
    if (auto it = s.args.find("init"); it != s.args.end()) p.init = yes_no(s.line, it->second);
    for (const auto& [k, v] : s.args) {
      if (k != "name" && k != "eid" && k != "staging" && k != "memory" && k != "tids" && k != "init") {
        throw ScenarioError(s.line, "unknown load argument " + k + "=");
      }
    }
    LiveLoad live;
    try {
      live = load_manifest(sm_, os_core(s), d.manifest, p);
    } catch (const std::runtime_error& e) {
      fail(s, std::string("load: ") + e.what());
    }
    symbols_[name] = live.eid;
    for (std::size_t i = 0; i < live.tids.size(); ++i) symbols_[name + ".t" + std::to_string(i)] = live.tids[i];
    for (std::uint32_t i = 0; i < d.manifest.mailboxes; ++i) {
      symbols_[name + ".mb" + std::to_string(i)] = mailbox_address(live.eid, i);
    }
    std::string res = "ok";
    if (const auto* v = std::get_if<RuleViolation>(&live.outcome)) res = v->rule;
    std::string text = d.manifest.to_text();
    emit(s, os_core(s), "load_manifest", ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), res);
    expect(s, res);
    if (const auto* digest = std::get_if<Digest>(&live.outcome); digest && p.init) {
      auto offline = measure_manifest(d.manifest);
      if (!std::holds_alternative<Digest>(offline) || std::get<Digest>(offline) != *digest) {
        fail(s, "live measurement of " + name + " differs from the offline measurement");
      }
      result_.notes.push_back(name + " measured " + to_hex(*digest));
    }
    if (sc_.check_invariants) {
      auto found = check_state(sm_);
      if (!found.empty()) fail(s, "invariant " + found.front().invariant + " violated: " + found.front().detail);
    }
  }

  void signing(const Step& s) {
    CoreId core = core_running(s, s.actor);
    auto mailbox = static_cast<std::uint32_t>(parse_value(s.line, s.args.at("mailbox"), symbols_));
    VirtAddr key = parse_value(s.line, s.args.at("key"), symbols_);
    Bytes args;
    put_u32(args, mailbox);
    put_u64(args, key);
    std::string res;
    if (s.verb == "fetch_key") {
      res = status_text(signing_enclave::fetch_key(sm_, core, mailbox, key));
    } else {
      res = std::string(signing_enclave::to_string(signing_enclave::serve(sm_, core, mailbox, key)));
    }
    emit(s, core, s.verb, args, res);
    expect(s, res, s.verb == "serve" ? "replied" : "ok");
  }

  struct Party {
    crypto::Seed secret{};
    crypto::PublicKey pub{};
  };

  void request_attestation(const Step& s) {
    if (!challenged_) fail(s, "no remote challenge is outstanding");
    CoreId core = core_running(s, s.actor);
    PhysAddr signer = eid_of(s, s.args.at("signer"));
    auto mailbox = static_cast<std::uint32_t>(parse_value(s.line, s.args.at("mailbox"), symbols_));
    Party& me = parties_[s.actor];
    me.secret = rng_.array<32>();
    me.pub = crypto::x25519_public_key(me.secret);
    const EnclaveMetadata* e = sm_.enclave(eid_of(s, s.actor));
    if (!e || !e->final_measurement) fail(s, s.actor + " is not sealed");
    AttestationRequest req;
    req.nonce = nonce_;
    req.channel_binding = channel_binding(verifier_.pub, me.pub);
    req.target_measurement = *e->final_measurement;
    Bytes msg = req.encode();
    ApiResponse r = sm_.call(core, api::AcceptMail{mailbox, DomainId::enclave(signer)});
    if (r.ok()) r = sm_.call(core, api::SendMail{signer, msg});
    emit(s, core, "request_attestation", msg, status_text(r.status));
    expect(s, status_text(r.status));
    attester_ = s.actor;
    signer_ = signer;
  }

  void collect_attestation(const Step& s) {
    CoreId core = core_running(s, s.actor);
    auto mailbox = static_cast<std::uint32_t>(parse_value(s.line, s.args.at("mailbox"), symbols_));
    std::string res = "ok";
    AttestationBundle b;
    ApiResponse r = sm_.call(core, api::GetMail{mailbox});
    if (!r.ok()) {
      res = status_text(r.status);
    } else {
      const auto& mail = std::get<MailDelivery>(r.payload);
      auto reply = AttestationReply::decode(mail.message);
      ApiResponse smc = sm_.call(core, api::GetField{static_cast<std::uint32_t>(FieldId::SmCertificate)});
      ApiResponse dev = sm_.call(core, api::GetField{static_cast<std::uint32_t>(FieldId::DeviceCertificate)});
      const EnclaveMetadata* e = sm_.enclave(eid_of(s, s.actor));
      if (mail.sender != DomainId::enclave(signer_)) {
        res = "wrong-signer";
      } else if (!reply || reply->nonce != nonce_) {
        res = "bad-reply";
      } else if (!smc.ok() || !dev.ok() || !e || !e->final_measurement) {
        res = "no-certificates";
      } else {
        auto sm_cert = SmCertificate::parse(std::get<Bytes>(smc.payload));
        auto dev_cert = DeviceCertificate::parse(std::get<Bytes>(dev.payload));
        if (!sm_cert || !dev_cert) {
          res = "no-certificates";
        } else {
          b.measurement = *e->final_measurement;
          b.nonce = nonce_;
          b.channel_binding = channel_binding(verifier_.pub, parties_[s.actor].pub);
          b.signature = reply->signature;
          b.sm_certificate = *sm_cert;
          b.device_certificate = *dev_cert;
          result_.bundle = b;
        }
      }
    }
    Bytes serialized = res == "ok" ? b.serialize() : Bytes{};
    emit(s, core, "collect_attestation", serialized, res);
    expect(s, res);
    if (res == "ok") {
      if (auto it = s.args.find("out"); it != s.args.end()) write_bundle(s, it->second, serialized);
    }
  }

  void write_bundle(const Step& s, const std::string& file, const Bytes& serialized) {
    std::filesystem::path path = opt_.artifact_dir.empty() ? std::filesystem::path(file) : opt_.artifact_dir / file;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(serialized.data()), static_cast<std::streamsize>(serialized.size()));
    if (!out) fail(s, "cannot write " + path.string());
    nlohmann::ordered_json j;
    j["nonce"] = to_hex(nonce_);
    j["measurement"] = to_hex(result_.bundle->measurement);
    j["device_key"] = to_hex(sm_.device().public_key);
    j["channel_binding"] = to_hex(result_.bundle->channel_binding);
    std::ofstream side(path.string() + ".json");
    side << j.dump(2) << "\n";
    result_.notes.push_back("bundle written to " + path.string());
  }

  void remote(const Step& s) {
    std::string res = "ok";
    Bytes args(s.verb.begin(), s.verb.end());
    if (s.verb == "challenge") {
      nonce_ = rng_.array<32>();
      verifier_.secret = rng_.array<32>();
      verifier_.pub = crypto::x25519_public_key(verifier_.secret);
      challenged_ = true;
      put_bytes(args, nonce_);
    } else if (s.verb == "verify") {
      if (!result_.bundle) fail(s, "no bundle has been collected");
      VerifyExpectations ex;
      ex.nonce = nonce_;
      ex.device_key = sm_.device().public_key;
      ex.measurement = measurement_arg(s, s.args.count("measurement") ? s.args.at("measurement") : "measure:" + attester_);
      ex.channel_binding = channel_binding(verifier_.pub, parties_[attester_].pub);
      result_.expectations = ex;
      VerifyReason why = verify_attestation(result_.bundle->serialize(), ex);
      res = std::string(to_string(why));
      result_.notes.push_back("remote verifier: " + res);
    } else if (s.verb == "channel") {
      if (!result_.bundle) fail(s, "no attested enclave");
      const Party& enclave = parties_[attester_];
      Digest binding = channel_binding(verifier_.pub, enclave.pub);
      auto k_remote = derive_channel_key(verifier_.secret, enclave.pub, binding);
      auto k_enclave = derive_channel_key(enclave.secret, verifier_.pub, binding);
      if (!k_remote || !k_enclave || *k_remote != *k_enclave) {
        res = "key-mismatch";
      } else {
        Bytes hello{'h', 'e', 'l', 'l', 'o'};
        auto opened = crypto::aead_open(*k_enclave, 0, crypto::aead_seal(*k_remote, 0, hello, binding), binding);
        if (!opened || *opened != hello) res = "aead-failure";
      }
    } else {
      throw ScenarioError(s.line, "unknown remote action '" + s.verb + "'");
    }
    emit(s, std::nullopt, "remote_" + s.verb, args, res);
    expect(s, res);
  }

  void race(const Step& s) {
    std::vector<RaceCall> calls;
    std::vector<Step> members = s.members;
    for (const Step& m : members) {
      CoreId core = m.actor.empty() ? *m.core : (m.actor == "os" ? os_core(m) : core_running(m, m.actor));
      Action a = to_action(m, core);
      if (a.kind != Action::Kind::Api) fail(m, "race members must be monitor calls");
      calls.push_back({core, *a.call});
    }
    if (s.check_all) {
      SerializabilityReport rep = check_serializability(sm_, calls);
      result_.notes.push_back("line " + std::to_string(s.line) + ": " + std::to_string(rep.serializable) + "/" +
                              std::to_string(rep.schedules) + " schedules serializable, " +
                              std::to_string(rep.exclusion_ok) + " with exact conflict exclusion");
      if (!rep.ok()) fail(s, "race is not atomic: " + rep.failures.front());
    }
    Schedule schedule = s.schedule.value_or(serial_schedule(calls.size()));
    RaceOutcome out = run_interleaved(sm_, calls, schedule);
    std::size_t winners = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      std::string res = status_text(out.statuses[i]);
      Bytes args = encode_args(calls[i].call);
      emit(members[i], calls[i].core, std::string(api_name(calls[i].call)), args, res);
      expect(members[i], res);
      if (out.statuses[i] == Status::Ok) ++winners;
    }
    if (s.winners && winners != *s.winners) {
      fail(s, std::to_string(winners) + " racing calls succeeded, expected " + std::to_string(*s.winners));
    }
    if (sc_.check_invariants) {
      auto found = check_state(sm_);
      if (!found.empty()) fail(s, "invariant " + found.front().invariant + " violated: " + found.front().detail);
    }
  }

  void stress_pass() {
    StressReport rep = stress(sm_, opt_.stress_calls, opt_.override_seed ? opt_.seed : sc_.seed);
    result_.notes.push_back("stress: " + std::to_string(rep.calls) + " calls, " + std::to_string(rep.committed) +
                            " committed, " + std::to_string(rep.refused) + " refused as concurrent, serial replay " +
                            (rep.replay_matches ? "matches" : "differs"));
    if (!rep.ok()) throw AssertionFailed{"stress: " + rep.failures.front()};
    auto found = check_state(sm_);
    if (!found.empty()) throw AssertionFailed{"stress: invariant " + found.front().invariant + " violated: " + found.front().detail};
  }

  const Scenario& sc_;
  RunOptions opt_;
  SecurityMonitor sm_;
  crypto::Entropy rng_;
  Symbols symbols_;
  RunResult result_;
  bool challenged_ = false;
  Digest nonce_{};
  Party verifier_;
  std::map<std::string, Party> parties_;
  std::string attester_;
  PhysAddr signer_ = 0;
};

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  Runner runner(scenario, options);
  return runner.run();
}

SecurityMonitor setup_state(const Scenario& scenario) {
  Runner runner(scenario, {});
  RunResult r = runner.run();
  if (!r.passed) throw std::runtime_error("setup failed: " + r.failure);
  return SecurityMonitor(runner.monitor());
}

std::string counterexample_scenario(const Scenario& scenario, const Counterexample& cex) {
  std::ostringstream out;
  out << "# counterexample: " << cex.invariant << "\n# " << cex.detail << "\n";
  out << scenario.header_text();
  out << "check invariants\n";
  out << "# setup\n";
  Scenario copy = scenario;
  // Steps are re-emitted from their parsed form.
  auto emit_step = [&](const Step& s, const std::string& indent) {
    out << indent;
    if (s.actor.empty()) {
      out << "@" << *s.core;
    } else {
      out << s.actor;
      if (s.core) out << "@" << *s.core;
    }
    out << " " << s.verb;
    if (auto it = s.args.find("name"); it != s.args.end()) out << " " << it->second;
    for (const auto& [k, v] : s.args) {
      if (k != "name") out << " " << k << "=" << v;
    }
    if (s.expect) out << " expect=" << *s.expect;
    out << "\n";
  };
  for (const Step& s : copy.steps) {
    if (s.verb == "race" && s.actor.empty() && !s.core) {
      out << "race";
      if (s.schedule) {
        out << " schedule=";
        for (std::size_t i = 0; i < s.schedule->size(); ++i) out << (i ? "," : "") << (*s.schedule)[i];
      }
      if (s.winners) out << " winners=" << *s.winners;
      out << "\n";
      for (const Step& m : s.members) emit_step(m, "  ");
      out << "end\n";
    } else {
      emit_step(s, "");
    }
  }
  out << "# path\n";
  for (std::size_t i = 0; i < cex.path.size(); ++i) {
    Status st = i < cex.statuses.size() ? cex.statuses[i] : Status::Ok;
    out << format_action(cex.path[i]) << " expect=" << (st == Status::Ok ? "ok" : std::string(to_string(st))) << "\n";
  }
  return out.str();
}

}  // namespace smon
