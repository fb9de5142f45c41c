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

// Enclave image manifests, the offline measurement oracle, and the loader
// that replays a manifest against a live monitor.
//
//   # comment
//   page_size 4096
//   platform backend=region sm_image_hash=<64 hex>
//   evrange 0x400000 0x10000
//   mailboxes 2
//   page_table 0x400000
//   load 0x401000 rx page=3 file=code.bin sha3=<64 hex>
//   load 0x402000 rw fill=0xab
//   load 0x403000 r hex=deadbeef
//   thread entry=0x401000 pagefault=0x401100 fault=0x401200
//
// page=N is an index into the enclave's own physical pages (ascending);
// omitted, it is the page after the last one consumed. Page tables consume
// pages the same way. Contents shorter than a page are zero-padded.

#pragma once

#include <filesystem>
#include <stdexcept>

#include "smon/monitor.hpp"

namespace smon {

class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace manifest_op {
struct PageTable {
  VirtAddr vaddr = 0;
};
struct Load {
  VirtAddr vaddr = 0;
  std::uint8_t perms = 0;
  std::optional<std::uint64_t> page;
  Bytes contents;
};
struct Thread {
  VirtAddr entry = 0;
  FaultHandlers handlers;
};
}  // namespace manifest_op

using ManifestOp = std::variant<manifest_op::PageTable, manifest_op::Load, manifest_op::Thread>;

struct Manifest {
  std::uint64_t page_size = 4096;
  IsolationBackendKind backend = IsolationBackendKind::RegionBased;
  Digest sm_image_hash{};
  VirtAddr ev_base = 0;
  std::uint64_t ev_size = 0;
  std::uint32_t mailboxes = 0;
  std::vector<ManifestOp> ops;

  Manifest();

  /// Throws ManifestError. Relative file= paths resolve against base_dir.
  static Manifest parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static Manifest load_file(const std::filesystem::path& path);
  /// Self-contained text form (contents inlined as hex).
  std::string to_text() const;

  std::uint64_t capabilities() const;
  /// Number of enclave physical pages the manifest consumes.
  std::uint64_t pages_needed() const;
  std::size_t thread_count() const;
};

/// A loading rule the manifest breaks, with the step that broke it:
/// 0 is the create, i + 1 is ops[i], ops.size() + 1 is the final seal.
struct RuleViolation {
  std::string rule;
  std::size_t op_index = 0;

  bool operator==(const RuleViolation&) const = default;
};

/// Stable rule identifier for a monitor status ("alias", "order",
/// "tables-first", ...).
std::string rule_id(Status status);

using MeasureOutcome = std::variant<Digest, RuleViolation>;

/// Offline oracle: replays the manifest's measured operations and the
/// monitor's admission checks without any machine.
MeasureOutcome measure_manifest(const Manifest& manifest);

/// Where and how a manifest is materialized on a live monitor.
struct LoadPlacement {
  std::optional<PhysAddr> eid;
  std::vector<ResourceId> memory;  // OS-owned regions/intervals handed to the enclave
  std::optional<PhysAddr> staging;  // OS page used as the copy source
  std::vector<PhysAddr> tids;       // defaults to free monitor slots
  bool init = true;
};

struct LiveLoad {
  MeasureOutcome outcome;
  PhysAddr eid = 0;
  std::vector<PhysAddr> tids;
};

/// Issues create/grant/allocate/load/thread/init calls as the OS on
/// os_core. Violations report the rule of the first failing call.
/// Throws std::runtime_error when the placement itself is unusable.
LiveLoad load_manifest(SecurityMonitor& sm, CoreId os_core, const Manifest& manifest, const LoadPlacement& placement);

/// OS-owned memory resources covering at least `pages` pages: whole regions
/// under RegionBased, a freshly carved interval of exactly that size under
/// IntervalBased. Resources in `avoid` are skipped.
std::vector<ResourceId> reserve_os_memory(SecurityMonitor& sm, CoreId os_core, std::uint64_t pages,
                                          const std::vector<ResourceId>& avoid = {});

}  // namespace smon
