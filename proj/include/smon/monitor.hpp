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

#pragma once

#include <map>
#include <mutex>
#include <set>

#include "smon/api.hpp"
#include "smon/enclave.hpp"
#include "smon/identity.hpp"
#include "smon/machine.hpp"
#include "smon/resources.hpp"

namespace smon {

/// Test-only switches that disable individual monitor checks. Production
/// configurations leave the mask at zero.
namespace mutation {
inline constexpr std::uint32_t kSkipScrubOnClean = 1u << 0;
inline constexpr std::uint32_t kSkipAexCoreClean = 1u << 1;
inline constexpr std::uint32_t kSkipTlbShootdown = 1u << 2;
inline constexpr std::uint32_t kSkipTlbFlushOnCoreClean = 1u << 3;
inline constexpr std::uint32_t kSkipSealCheck = 1u << 4;
inline constexpr std::uint32_t kSkipMailSenderCheck = 1u << 5;
inline constexpr std::uint32_t kSkipSigningEnclaveCheck = 1u << 6;
inline constexpr std::uint32_t kSkipThreadBusyCheck = 1u << 7;
inline constexpr std::uint32_t kSkipBlockOwnerCheck = 1u << 8;

struct Named {
  std::string_view name;
  std::uint32_t bit;
};
inline constexpr Named kAll[] = {
    {"skip-scrub-on-clean", kSkipScrubOnClean},
    {"skip-aex-core-clean", kSkipAexCoreClean},
    {"skip-tlb-shootdown", kSkipTlbShootdown},
    {"skip-tlb-flush-on-core-clean", kSkipTlbFlushOnCoreClean},
    {"skip-seal-check", kSkipSealCheck},
    {"skip-mail-sender-check", kSkipMailSenderCheck},
    {"skip-signing-enclave-check", kSkipSigningEnclaveCheck},
    {"skip-thread-busy-check", kSkipThreadBusyCheck},
    {"skip-block-owner-check", kSkipBlockOwnerCheck},
};
std::optional<std::uint32_t> parse(std::string_view name);
}  // namespace mutation

struct MonitorConfig {
  MachineConfig machine = MachineConfig::desk_scale();
  bool allow_post_init_accept = true;
  Bytes sm_image = default_sm_image();
  std::string device_label = "smon-device-0";
  std::string manufacturer_label = "smon-manufacturer";
  /// Hard-coded measurement of the signing enclave; unset disables the key API.
  std::optional<Digest> signing_enclave_measurement;
  std::uint32_t mutations = 0;
};

/// Lock key used for the per-resource transaction guards. Guards are taken
/// in ascending order, which is the canonical order: enclaves before their
/// threads, then cores, memory, and mailboxes.
struct GuardKey {
  enum class Class : std::uint8_t { Enclave = 0, Thread = 1, Core = 2, Region = 3, Interval = 4, Mailbox = 5 };

  Class cls = Class::Enclave;
  std::uint64_t id = 0;

  auto operator<=>(const GuardKey&) const = default;
};

/// An API call whose guards are held. Produced by begin(), consumed by commit().
struct Transaction {
  CoreId core = 0;
  DomainId caller;
  ApiCall call;
  std::vector<GuardKey> guards;
};

/// A committed call, in commit order.
struct JournalEntry {
  CoreId core = 0;
  ApiCall call;
  Status status = Status::Ok;
};

class SecurityMonitor {
 public:
  explicit SecurityMonitor(MonitorConfig config);
  /// Copies all state; the copy starts with no held guards.
  SecurityMonitor(const SecurityMonitor& other);
  SecurityMonitor& operator=(const SecurityMonitor&) = delete;

  // --- API entry points ---------------------------------------------------

  /// Trap into the monitor from `core`: begin + commit.
  ApiResponse call(CoreId core, const ApiCall& request);
  /// First half of a transaction: acquires every guard the call needs or
  /// fails with ConcurrentCall, having changed nothing.
  Result<Transaction> begin(CoreId core, const ApiCall& request);
  /// Second half: validates and applies atomically, then releases the guards.
  ApiResponse commit(Transaction txn);
  /// Drops the guards of a transaction without applying it.
  void abort(Transaction txn);

  /// Machine event dispatch (API traps, interrupts, faults, exits).
  Disposition handle_event(CoreId core, const MachineEvent& event);

  // --- Simulated hardware actions -------------------------------------------

  /// Program-visible memory accesses from whatever runs on the core.
  Result<Word> load(CoreId core, VirtAddr vaddr);
  Status store(CoreId core, VirtAddr vaddr, Word value);
  /// Whole-page write through the core's translation (page-aligned vaddr).
  Status store_page(CoreId core, VirtAddr vaddr, ByteView contents);
  Result<Word> dma_read(PhysAddr paddr);
  Status dma_write(PhysAddr paddr, Word value);
  void set_register(CoreId core, std::size_t index, Word value);
  void set_pc(CoreId core, VirtAddr pc);

  // --- Introspection ------------------------------------------------------

  const MonitorConfig& config() const { return config_; }
  const Machine& machine() const { return machine_; }
  const ResourceMap& resources() const { return resources_; }
  const std::map<PhysAddr, EnclaveMetadata>& enclaves() const { return enclaves_; }
  const std::map<PhysAddr, ThreadMetadata>& threads() const { return threads_; }
  const EnclaveMetadata* enclave(PhysAddr eid) const;
  const ThreadMetadata* thread(PhysAddr tid) const;
  Result<std::pair<DomainId, ResourceState>> owner_of(const ResourceId& id) const;
  const SmIdentity& sm_identity() const { return sm_; }
  const DeviceIdentity& device() const { return device_; }
  std::uint64_t capabilities() const;

  /// Resource id of the memory unit containing paddr (region or interval).
  std::optional<ResourceId> memory_resource_of(PhysAddr paddr) const;
  /// Physical byte range covered by a memory resource.
  std::optional<std::pair<PhysAddr, std::uint64_t>> memory_range(const ResourceId& id) const;
  /// Pages the backend assigns to the domain, ascending.
  std::vector<std::uint64_t> pages_owned_by(DomainId domain) const;
  /// Lowest free, aligned slot of `bytes` in monitor memory.
  std::optional<PhysAddr> free_metadata_slot(std::uint64_t bytes) const;

  /// Records every dispatched call in commit order while enabled.
  void set_journal(bool enabled);
  std::vector<JournalEntry> take_journal();

  /// Canonical byte image of all monitor and machine state.
  Bytes serialize() const;
  Digest state_hash() const;

 private:
  using Guard = std::unique_lock<std::mutex>;

  std::vector<GuardKey> guards_for(CoreId core, DomainId caller, const ApiCall& request) const;
  ApiResponse dispatch(CoreId core, DomainId caller, const ApiCall& request);
  bool mutated(std::uint32_t bit) const { return (config_.mutations & bit) != 0; }

  // Resource lifecycle.
  Status block_resource(DomainId caller, const ResourceId& id);
  Status clean_resource(DomainId caller, const ResourceId& id);
  Status grant_resource(DomainId caller, const ResourceId& id, DomainId to);
  Status accept_resource(DomainId caller, const ResourceId& id);
  Status accept_thread(DomainId caller, const api::AcceptThread& a);
  Status carve_interval(DomainId caller, PhysAddr base, std::uint64_t size);
  Status release_interval(DomainId caller, PhysAddr base);
  void assign_memory(const ResourceId& id, DomainId owner);
  void scrub_memory(const ResourceId& id, DomainId former_owner);
  void scrub_thread(ThreadMetadata& t);
  void reclaim_enclave_slot(PhysAddr eid);

  // Enclave lifecycle.
  Status create_enclave(DomainId caller, const api::CreateEnclave& a);
  Status allocate_page_table(DomainId caller, const api::AllocatePageTable& a);
  Status load_page(DomainId caller, const api::LoadPage& a);
  Status map_shared(DomainId caller, const api::MapShared& a);
  Status create_thread(DomainId caller, const api::CreateThread& a);
  Result<Digest> init_enclave(DomainId caller, const api::InitEnclave& a);
  Status enter_enclave(CoreId core, DomainId caller, const api::EnterEnclave& a);
  Status exit_enclave(CoreId core, DomainId caller);
  Status delete_enclave(DomainId caller, const api::DeleteEnclave& a);
  Result<AexSnapshot> get_aex_state(CoreId core, DomainId caller);
  void aex(CoreId core);
  bool metadata_slot_free(PhysAddr base, std::uint64_t bytes) const;
  Status check_loading(DomainId caller, PhysAddr eid, EnclaveMetadata*& out);

  // Mail and attestation.
  Status accept_mail(DomainId caller, const api::AcceptMail& a);
  Status send_mail(DomainId caller, const api::SendMail& a);
  Result<MailDelivery> get_mail(DomainId caller, const api::GetMail& a);
  Status get_attestation_key(DomainId caller);
  Result<Bytes> get_field(const api::GetField& a) const;

  Disposition handle_event_locked(CoreId core, const MachineEvent& event);

  MonitorConfig config_;
  Machine machine_;
  DeviceIdentity device_;
  SmIdentity sm_;
  ResourceMap resources_;
  std::map<PhysAddr, EnclaveMetadata> enclaves_;
  std::map<PhysAddr, ThreadMetadata> threads_;

  mutable std::mutex mutex_;
  std::set<GuardKey> held_;
  bool journal_enabled_ = false;
  std::vector<JournalEntry> journal_;
};

std::string_view to_string(GuardKey::Class cls);

}  // namespace smon
