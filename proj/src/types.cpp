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

#include "smon/types.hpp"

#include <algorithm>
#include <cstdio>

namespace smon {

namespace {

constexpr std::pair<Status, std::string_view> kStatusNames[] = {
    {Status::Ok, "ok"},
    {Status::ConcurrentCall, "ConcurrentCall"},
    {Status::NotOwner, "NotOwner"},
    {Status::NotOS, "NotOS"},
    {Status::NotEnclave, "NotEnclave"},
    {Status::WrongState, "WrongState"},
    {Status::NoSuchDomain, "NoSuchDomain"},
    {Status::NoSuchResource, "NoSuchResource"},
    {Status::NoSuchEnclave, "NoSuchEnclave"},
    {Status::NoSuchThread, "NoSuchThread"},
    {Status::NotOffered, "NotOffered"},
    {Status::BadAddress, "BadAddress"},
    {Status::BadArgument, "BadArgument"},
    {Status::AliasViolation, "AliasViolation"},
    {Status::OrderViolation, "OrderViolation"},
    {Status::TablesFirstViolation, "TablesFirstViolation"},
    {Status::OutOfEnclaveMemory, "OutOfEnclaveMemory"},
    {Status::NoThreads, "NoThreads"},
    {Status::ThreadBusy, "ThreadBusy"},
    {Status::CoreBusy, "CoreBusy"},
    {Status::NotInEnclave, "NotInEnclave"},
    {Status::ThreadsScheduled, "ThreadsScheduled"},
    {Status::NoSuchMailbox, "NoSuchMailbox"},
    {Status::NotAccepting, "NotAccepting"},
    {Status::MessageTooLarge, "MessageTooLarge"},
    {Status::Empty, "Empty"},
    {Status::NotSigningEnclave, "NotSigningEnclave"},
    {Status::NoSuchField, "NoSuchField"},
    {Status::AddressOutOfRange, "AddressOutOfRange"},
    {Status::PageFault, "PageFault"},
    {Status::AccessDenied, "AccessDenied"},
};

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string DomainId::str() const {
  switch (kind()) {
    case Kind::SecurityMonitor:
      return "sm";
    case Kind::UntrustedOS:
      return "os";
    case Kind::Enclave:
      break;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "enclave@0x%llx", static_cast<unsigned long long>(raw_));
  return buf;
}

std::string perms_str(std::uint8_t perms) {
  std::string out;
  out += (perms & perm::kRead) ? 'r' : '-';
  out += (perms & perm::kWrite) ? 'w' : '-';
  out += (perms & perm::kExecute) ? 'x' : '-';
  return out;
}

std::optional<std::uint8_t> parse_perms(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::uint8_t perms = 0;
  for (char c : text) {
    switch (c) {
      case 'r': perms |= perm::kRead; break;
      case 'w': perms |= perm::kWrite; break;
      case 'x': perms |= perm::kExecute; break;
      case '-': break;
      default: return std::nullopt;
    }
  }
  return perms;
}

std::string_view to_string(Status status) {
  for (const auto& [s, name] : kStatusNames) {
    if (s == status) return name;
  }
  return "unknown";
}

std::optional<Status> parse_status(std::string_view name) {
  for (const auto& [s, n] : kStatusNames) {
    if (n == name) return s;
  }
  if (name == "Ok" || name == "OK") return Status::Ok;
  return std::nullopt;
}

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

std::optional<Bytes> from_hex(std::string_view text) {
  if (text.starts_with("0x") || text.starts_with("0X")) text.remove_prefix(2);
  if (text.size() % 2 != 0) return std::nullopt;
  Bytes out;
  out.reserve(text.size() / 2);
  for (std::size_t i = 0; i < text.size(); i += 2) {
    int hi = hex_value(text[i]);
    int lo = hex_value(text[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::optional<std::uint8_t> ByteReader::u8() {
  if (remaining() < 1) return std::nullopt;
  return data_[pos_++];
}

std::optional<std::uint32_t> ByteReader::u32() {
  if (remaining() < 4) return std::nullopt;
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::optional<std::uint64_t> ByteReader::u64() {
  if (remaining() < 8) return std::nullopt;
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

std::optional<Bytes> ByteReader::bytes(std::size_t n) {
  if (remaining() < n) return std::nullopt;
  Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
            data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

}  // namespace smon
