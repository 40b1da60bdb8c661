#pragma once

#include <cstdint>
#include <vector>

namespace nvlink {

inline constexpr std::uint8_t kChannelA = 0;
inline constexpr std::uint8_t kChannelB = 1;
inline constexpr std::uint8_t kChannelSync = 2;

// One detection record: integer picoseconds from acquisition start.
struct TimeTag {
    std::uint64_t t_ps = 0;
    std::uint8_t channel = 0;

    friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

// Ordering: by timestamp, ties broken by channel.
inline bool tag_less(const TimeTag& a, const TimeTag& b) {
    if (a.t_ps != b.t_ps) return a.t_ps < b.t_ps;
    return a.channel < b.channel;
}

struct TimeTagStream {
    std::vector<TimeTag> tags;
    std::uint64_t duration_ps = 0;

    bool sorted() const;
    // Acquisition time in seconds: the declared duration, or the tag span
    // when no duration was recorded.
    double acquisition_s() const;
};

// Sorted merge of two sorted streams; ties keep timestamp/channel order with
// the first stream's tags ahead of the second's. Rejects unsorted input.
TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b);

}  // namespace nvlink
