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

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace smon {

using PhysAddr = std::uint64_t;
using VirtAddr = std::uint64_t;
using Word = std::uint64_t;
using CoreId = std::uint32_t;
using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::size_t kRegisterCount = 32;
using RegisterFile = std::array<Word, kRegisterCount>;

/// Identity of a resource owner. An enclave is named by the physical address
/// of its metadata structure; the monitor and the untrusted OS are reserved
/// values that can never be a valid (aligned) metadata address.
class DomainId {
 public:
  enum class Kind : std::uint8_t { SecurityMonitor, UntrustedOS, Enclave };

  constexpr DomainId() = default;

  static constexpr DomainId monitor() { return DomainId(kMonitorRaw); }
  static constexpr DomainId os() { return DomainId(kOsRaw); }
  static constexpr DomainId enclave(PhysAddr eid) { return DomainId(eid); }
  static constexpr DomainId from_raw(std::uint64_t raw) { return DomainId(raw); }

  constexpr Kind kind() const {
    if (raw_ == kMonitorRaw) return Kind::SecurityMonitor;
    if (raw_ == kOsRaw) return Kind::UntrustedOS;
    return Kind::Enclave;
  }
  constexpr bool is_enclave() const { return kind() == Kind::Enclave; }
  constexpr bool is_os() const { return raw_ == kOsRaw; }
  constexpr bool is_monitor() const { return raw_ == kMonitorRaw; }
  constexpr PhysAddr eid() const { return raw_; }
  constexpr std::uint64_t raw() const { return raw_; }

  constexpr auto operator<=>(const DomainId&) const = default;

  std::string str() const;

 private:
  static constexpr std::uint64_t kMonitorRaw = ~std::uint64_t{0};
  static constexpr std::uint64_t kOsRaw = ~std::uint64_t{0} - 1;

  constexpr explicit DomainId(std::uint64_t raw) : raw_(raw) {}

  std::uint64_t raw_ = kOsRaw;
};

enum class AccessKind : std::uint8_t { Read, Write, Execute, Dma };

/// Synchronous events an enclave may register handlers for.
enum class FaultKind : std::uint8_t { PageFault = 1, EnclaveFault = 2 };

namespace perm {
inline constexpr std::uint8_t kRead = 1;
inline constexpr std::uint8_t kWrite = 2;
inline constexpr std::uint8_t kExecute = 4;
inline constexpr std::uint8_t kAll = 7;
}  // namespace perm

std::string perms_str(std::uint8_t perms);
std::optional<std::uint8_t> parse_perms(std::string_view text);

/// Result code shared by every monitor API call and machine operation.
enum class Status : std::uint8_t {
  Ok,
  ConcurrentCall,
  NotOwner,
  NotOS,
  NotEnclave,
  WrongState,
  NoSuchDomain,
  NoSuchResource,
  NoSuchEnclave,
  NoSuchThread,
  NotOffered,
  BadAddress,
  BadArgument,
  AliasViolation,
  OrderViolation,
  TablesFirstViolation,
  OutOfEnclaveMemory,
  NoThreads,
  ThreadBusy,
  CoreBusy,
  NotInEnclave,
  ThreadsScheduled,
  NoSuchMailbox,
  NotAccepting,
  MessageTooLarge,
  Empty,
  NotSigningEnclave,
  NoSuchField,
  AddressOutOfRange,
  PageFault,
  AccessDenied,
};

std::string_view to_string(Status status);
std::optional<Status> parse_status(std::string_view name);

/// Value-or-status return type for calls that produce data.
template <class T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Status status) : value_(status) {       // NOLINT(google-explicit-constructor)
    if (status == Status::Ok) throw std::logic_error("Result: Ok status without a value");
  }

  bool ok() const { return std::holds_alternative<T>(value_); }
  explicit operator bool() const { return ok(); }

  Status status() const { return ok() ? Status::Ok : std::get<Status>(value_); }

  const T& value() const& {
    if (!ok()) throw std::logic_error("Result::value on error: " + std::string(to_string(status())));
    return std::get<T>(value_);
  }
  T& value() & {
    if (!ok()) throw std::logic_error("Result::value on error: " + std::string(to_string(status())));
    return std::get<T>(value_);
  }
  T&& value() && { return std::move(value()); }

  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, Status> value_;
};

std::string to_hex(ByteView bytes);
std::optional<Bytes> from_hex(std::string_view text);

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> fixed_from_hex(std::string_view text) {
  auto bytes = from_hex(text);
  if (!bytes || bytes->size() != N) return std::nullopt;
  std::array<std::uint8_t, N> out{};
  std::copy(bytes->begin(), bytes->end(), out.begin());
  return out;
}

/// Little-endian append helpers for canonical encodings.
inline void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }
inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_bytes(Bytes& out, ByteView v) { out.insert(out.end(), v.begin(), v.end()); }

/// Bounds-checked little-endian reader; every accessor returns nullopt on underrun.
class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::optional<std::uint8_t> u8();
  std::optional<std::uint32_t> u32();
  std::optional<std::uint64_t> u64();
  std::optional<Bytes> bytes(std::size_t n);
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace smon
