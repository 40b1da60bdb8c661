#include "nvlink/timetags.hpp"

#include <algorithm>

#include "nvlink/errors.hpp"

namespace nvlink {

bool TimeTagStream::sorted() const {
    return std::is_sorted(tags.begin(), tags.end(), tag_less);
}

double TimeTagStream::acquisition_s() const {
    if (duration_ps > 0) return static_cast<double>(duration_ps) * 1e-12;
    if (tags.size() < 2) return 0.0;
    return static_cast<double>(tags.back().t_ps - tags.front().t_ps) * 1e-12;
}

TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b) {
    if (!a.sorted() || !b.sorted())
        throw DataError("merge_streams: inputs must be sorted by (timestamp, channel)");
    TimeTagStream out;
    out.tags.resize(a.tags.size() + b.tags.size());
    std::merge(a.tags.begin(), a.tags.end(), b.tags.begin(), b.tags.end(), out.tags.begin(),
               tag_less);
    out.duration_ps = std::max(a.duration_ps, b.duration_ps);
    return out;
}

}  // namespace nvlink
