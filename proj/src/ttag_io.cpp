#include "nvlink/ttag_io.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "nvlink/errors.hpp"

namespace nvlink {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(std::span<const std::byte> b, std::size_t at) {
    return static_cast<std::uint16_t>(std::to_integer<unsigned>(b[at]) |
                                      (std::to_integer<unsigned>(b[at + 1]) << 8));
}

std::uint64_t get_u64(std::span<const std::byte> b, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | std::to_integer<std::uint64_t>(b[at + static_cast<std::size_t>(i)]);
    return v;
}

}  // namespace

std::uint16_t ttag_channel_count(const TimeTagStream& stream) {
    std::uint8_t max_ch = 1;
    for (const auto& tag : stream.tags) max_ch = std::max(max_ch, tag.channel);
    return static_cast<std::uint16_t>(max_ch + 1);
}

std::string ttag_to_bytes(const TimeTagStream& stream) {
    if (!stream.sorted()) throw DataError("ttag: stream must be sorted before writing");
    std::string out;
    out.reserve(kTtagHeaderSize + kTtagRecordSize * stream.tags.size());
    out += "TTAG";
    put_u16(out, kTtagVersion);
    put_u16(out, ttag_channel_count(stream));
    put_u64(out, stream.duration_ps);
    put_u64(out, stream.tags.size());
    for (const auto& tag : stream.tags) {
        put_u64(out, tag.t_ps);
        out.push_back(static_cast<char>(tag.channel));
        out.append(7, '\0');
    }
    return out;
}

TimeTagStream ttag_from_bytes(std::span<const std::byte> bytes, const std::string& origin) {
    auto fail = [&](const std::string& what, std::size_t offset) -> void {
        throw DataError(origin + ": " + what + " at byte offset " + std::to_string(offset));
    };
    if (bytes.size() < kTtagHeaderSize) fail("truncated header", bytes.size());
    if (std::memcmp(bytes.data(), "TTAG", 4) != 0) fail("bad magic", 0);
    const std::uint16_t version = get_u16(bytes, 4);
    if (version != kTtagVersion)
        fail("unsupported version " + std::to_string(version), 4);
    const std::uint16_t channel_count = get_u16(bytes, 6);
    TimeTagStream stream;
    stream.duration_ps = get_u64(bytes, 8);
    const std::uint64_t count = get_u64(bytes, 16);
    const std::size_t expected = kTtagHeaderSize + kTtagRecordSize * count;
    if (bytes.size() != expected)
        fail("record count mismatch: header says " + std::to_string(count) + " records (" +
                 std::to_string(expected) + " bytes), file has " + std::to_string(bytes.size()),
             16);

    stream.tags.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::size_t at = kTtagHeaderSize + kTtagRecordSize * i;
        TimeTag tag;
        tag.t_ps = get_u64(bytes, at);
        tag.channel = std::to_integer<std::uint8_t>(bytes[at + 8]);
        for (std::size_t r = 9; r < 16; ++r)
            if (std::to_integer<unsigned>(bytes[at + r]) != 0)
                fail("nonzero reserved byte", at + r);
        if (tag.channel >= channel_count) fail("channel beyond header channel count", at + 8);
        if (!stream.tags.empty() && tag_less(tag, stream.tags.back()))
            fail("records not sorted", at);
        stream.tags.push_back(tag);
    }
    return stream;
}

void atomic_write_file(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open for writing: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError("short write: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw DataError("cannot rename " + tmp.string() + " -> " + target.string() + ": " +
                        ec.message());
    }
}

void write_ttag(const std::string& path, const TimeTagStream& stream) {
    atomic_write_file(path, ttag_to_bytes(stream));
}

TimeTagStream read_ttag(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open TTAG file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ttag_from_bytes(std::as_bytes(std::span(buf.data(), buf.size())), path);
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto b : bytes) {
        h ^= std::to_integer<std::uint64_t>(b);
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(std::as_bytes(std::span(s.data(), s.size())));
}

}  // namespace nvlink
