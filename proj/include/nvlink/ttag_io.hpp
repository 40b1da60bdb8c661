#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "nvlink/timetags.hpp"

namespace nvlink {

// TTAG binary container, version 1, little-endian throughout.
//
//   header (24 bytes):
//     0   4  magic "TTAG"
//     4   2  format version, u16 (= 1)
//     6   2  channel count, u16
//     8   8  acquisition duration in ps, u64
//    16   8  record count, u64
//   records (16 bytes each):
//     0   8  timestamp in ps, u64
//     8   1  channel, u8
//     9   7  reserved, must be zero
//
// Records are sorted by timestamp (ties by channel); the reader rejects
// violations with the byte offset of the offending record.
inline constexpr std::uint16_t kTtagVersion = 1;
inline constexpr std::size_t kTtagHeaderSize = 24;
inline constexpr std::size_t kTtagRecordSize = 16;

// Channel count stored in the header: highest channel + 1, at least 2.
std::uint16_t ttag_channel_count(const TimeTagStream& stream);

// Serialize to bytes / parse from bytes (parse throws DataError with offsets).
std::string ttag_to_bytes(const TimeTagStream& stream);
TimeTagStream ttag_from_bytes(std::span<const std::byte> bytes, const std::string& origin);

// File variants; writes are atomic (temp file + rename).
void write_ttag(const std::string& path, const TimeTagStream& stream);
TimeTagStream read_ttag(const std::string& path);

// Atomic whole-file write used for every artifact the toolkit produces.
void atomic_write_file(const std::string& path, const std::string& contents);

// FNV-1a 64-bit over a byte string; stable content fingerprint for manifests.
std::uint64_t fnv1a64(std::span<const std::byte> bytes);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace nvlink
