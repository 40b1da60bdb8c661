#include "nvlink/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "nvlink/errors.hpp"

namespace nvlink {

namespace {

std::vector<std::int64_t> channel_times(const TimeTagStream& stream, int ch) {
    std::vector<std::int64_t> t;
    for (const auto& tag : stream.tags)
        if (tag.channel == ch) t.push_back(static_cast<std::int64_t>(tag.t_ps));
    return t;
}

CorrelationHistogram make_histogram(std::int64_t bin_width_ps, std::int64_t lag_min_ps,
                                    std::int64_t lag_max_ps) {
    if (bin_width_ps <= 0) throw ConfigError("correlate: bin width must be > 0");
    if (lag_max_ps <= lag_min_ps) throw ConfigError("correlate: lag window must be non-empty");
    if ((lag_max_ps - lag_min_ps) % bin_width_ps != 0)
        throw ConfigError("correlate: lag window must be divisible by the bin width");
    CorrelationHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.lag_min_ps = lag_min_ps;
    h.lag_max_ps = lag_max_ps;
    h.counts.assign(static_cast<std::size_t>((lag_max_ps - lag_min_ps) / bin_width_ps), 0);
    return h;
}

void normalize(CorrelationHistogram& h, const TimeTagStream& stream, std::size_t n_a,
               std::size_t n_b) {
    h.acquisition_s = stream.acquisition_s();
    h.rate_a_cps = h.acquisition_s > 0.0 ? static_cast<double>(n_a) / h.acquisition_s : 0.0;
    h.rate_b_cps = h.acquisition_s > 0.0 ? static_cast<double>(n_b) / h.acquisition_s : 0.0;
    h.norm_denominator = h.rate_a_cps * h.rate_b_cps * h.acquisition_s *
                         (static_cast<double>(h.bin_width_ps) * 1e-12);
    h.normalization_valid = h.norm_denominator > 0.0;
    h.g2.resize(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        h.g2[i] = h.normalization_valid
                      ? static_cast<double>(h.counts[i]) / h.norm_denominator
                      : std::numeric_limits<double>::quiet_NaN();
}

// Bin all in-window pairs for ch_a tags with indices [a_begin, a_end).
void sweep_block(const std::vector<std::int64_t>& ta, const std::vector<std::int64_t>& tb,
                 bool same_channel, std::size_t a_begin, std::size_t a_end,
                 std::int64_t lag_min, std::int64_t lag_max, std::int64_t bin_width,
                 std::vector<std::uint64_t>& counts) {
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = a_begin; i < a_end; ++i) {
        const std::int64_t t = ta[i];
        // First partner with t_b - t_a >= lag_min, first with t_b - t_a >= lag_max.
        if (i == a_begin) {
            lo = static_cast<std::size_t>(
                std::lower_bound(tb.begin(), tb.end(), t + lag_min) - tb.begin());
            hi = static_cast<std::size_t>(
                std::lower_bound(tb.begin(), tb.end(), t + lag_max) - tb.begin());
        } else {
            while (lo < tb.size() && tb[lo] - t < lag_min) ++lo;
            if (hi < lo) hi = lo;
            while (hi < tb.size() && tb[hi] - t < lag_max) ++hi;
        }
        for (std::size_t j = lo; j < hi; ++j) {
            if (same_channel && j == i) continue;  // a tag never pairs with itself
            const std::int64_t dt = tb[j] - t;
            ++counts[static_cast<std::size_t>((dt - lag_min) / bin_width)];
        }
    }
}

}  // namespace

double CorrelationHistogram::g2_sigma(std::size_t i) const {
    if (!normalization_valid) return std::numeric_limits<double>::quiet_NaN();
    const double n = counts[i] > 0 ? static_cast<double>(counts[i]) : 1.0;
    return std::sqrt(n) / norm_denominator * error_scale;
}

CorrelationHistogram cross_correlate(const TimeTagStream& stream, int ch_a, int ch_b,
                                     std::int64_t bin_width_ps, std::int64_t lag_min_ps,
                                     std::int64_t lag_max_ps, int threads) {
    if (!stream.sorted()) throw DataError("cross_correlate: stream must be sorted");
    CorrelationHistogram h = make_histogram(bin_width_ps, lag_min_ps, lag_max_ps);
    const auto ta = channel_times(stream, ch_a);
    const auto tb = channel_times(stream, ch_b);
    const bool same = ch_a == ch_b;

    if (threads < 1) threads = 1;
    const std::size_t min_block = 4096;
    const std::size_t n_blocks =
        std::min<std::size_t>(static_cast<std::size_t>(threads),
                              std::max<std::size_t>(1, ta.size() / min_block));
    if (n_blocks <= 1) {
        sweep_block(ta, tb, same, 0, ta.size(), lag_min_ps, lag_max_ps, bin_width_ps, h.counts);
    } else {
        // Contiguous shards of the ch_a tags; partial histograms add exactly.
        std::vector<std::vector<std::uint64_t>> partial(
            n_blocks, std::vector<std::uint64_t>(h.counts.size(), 0));
        std::vector<std::thread> workers;
        const std::size_t step = (ta.size() + n_blocks - 1) / n_blocks;
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t begin = b * step;
            const std::size_t end = std::min(ta.size(), begin + step);
            if (begin >= end) continue;
            workers.emplace_back([&, b, begin, end] {
                sweep_block(ta, tb, same, begin, end, lag_min_ps, lag_max_ps, bin_width_ps,
                            partial[b]);
            });
        }
        for (auto& w : workers) w.join();
        for (const auto& p : partial)
            for (std::size_t i = 0; i < h.counts.size(); ++i) h.counts[i] += p[i];
    }

    normalize(h, stream, ta.size(), tb.size());
    return h;
}

CorrelationHistogram brute_force_correlate(const TimeTagStream& stream, int ch_a, int ch_b,
                                           std::int64_t bin_width_ps, std::int64_t lag_min_ps,
                                           std::int64_t lag_max_ps) {
    if (stream.tags.size() > 100000)
        throw ConfigError("brute_force_correlate: oracle limited to 1e5 tags, got " +
                          std::to_string(stream.tags.size()));
    if (!stream.sorted()) throw DataError("brute_force_correlate: stream must be sorted");
    CorrelationHistogram h = make_histogram(bin_width_ps, lag_min_ps, lag_max_ps);
    const auto ta = channel_times(stream, ch_a);
    const auto tb = channel_times(stream, ch_b);
    const bool same = ch_a == ch_b;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        for (std::size_t j = 0; j < tb.size(); ++j) {
            if (same && i == j) continue;
            const std::int64_t dt = tb[j] - ta[i];
            if (dt < lag_min_ps || dt >= lag_max_ps) continue;
            ++h.counts[static_cast<std::size_t>((dt - lag_min_ps) / bin_width_ps)];
        }
    }
    normalize(h, stream, ta.size(), tb.size());
    return h;
}

LifetimeHistogram lifetime_histogram(const TimeTagStream& stream, int sync_ch, int det_ch,
                                     std::int64_t bin_width_ps, std::int64_t range_ps) {
    if (bin_width_ps <= 0) throw ConfigError("lifetime_histogram: bin width must be > 0");
    if (range_ps <= 0 || range_ps % bin_width_ps != 0)
        throw ConfigError("lifetime_histogram: range must be a positive multiple of the bin width");
    if (!stream.sorted()) throw DataError("lifetime_histogram: stream must be sorted");

    LifetimeHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.range_ps = range_ps;
    h.counts.assign(static_cast<std::size_t>(range_ps / bin_width_ps), 0);

    bool have_sync = false;
    std::uint64_t last_sync = 0;
    for (const auto& tag : stream.tags) {
        if (tag.channel == sync_ch) {
            last_sync = tag.t_ps;
            have_sync = true;
            ++h.sync_count;
        } else if (tag.channel == det_ch && have_sync) {
            const std::uint64_t delay = tag.t_ps - last_sync;
            if (delay < static_cast<std::uint64_t>(range_ps))
                ++h.counts[static_cast<std::size_t>(delay / bin_width_ps)];
        }
    }
    if (h.sync_count == 0) throw DataError("lifetime_histogram: no sync tags on channel " +
                                           std::to_string(sync_ch));
    return h;
}

IntensityTrace intensity_trace(const TimeTagStream& stream, int ch, double bin_s) {
    if (bin_s <= 0.0) throw ConfigError("intensity_trace: bin duration must be > 0");
    IntensityTrace trace;
    trace.bin_s = bin_s;
    trace.start_s = 0.0;
    const double total_s = stream.acquisition_s();
    const std::size_t n_bins = static_cast<std::size_t>(total_s / bin_s + 1e-9);
    trace.counts.assign(n_bins, 0);
    if (n_bins == 0) return trace;
    const double bin_ps = bin_s * 1e12;
    for (const auto& tag : stream.tags) {
        if (tag.channel != ch) continue;
        const auto idx = static_cast<std::size_t>(static_cast<double>(tag.t_ps) / bin_ps);
        if (idx < n_bins) ++trace.counts[idx];
    }
    return trace;
}

CountRateHistogram count_rate_histogram(const IntensityTrace& trace,
                                        std::uint64_t bin_width_counts) {
    if (bin_width_counts == 0) throw ConfigError("count_rate_histogram: bin width must be > 0");
    CountRateHistogram h;
    h.bin_width_counts = bin_width_counts;
    if (trace.counts.empty()) return h;
    const auto [mn, mx] = std::minmax_element(trace.counts.begin(), trace.counts.end());
    h.min_count = (*mn / bin_width_counts) * bin_width_counts;
    const std::size_t n_bins =
        static_cast<std::size_t>((*mx - h.min_count) / bin_width_counts) + 1;
    h.occupancy.assign(n_bins, 0);
    for (const auto c : trace.counts)
        ++h.occupancy[static_cast<std::size_t>((c - h.min_count) / bin_width_counts)];
    return h;
}

bool CountRateModes::bimodal(double n_sigma, double min_fraction) const {
    if (n_low == 0 || n_high == 0) return false;
    const double total = static_cast<double>(n_low + n_high);
    if (n_low < min_fraction * total || n_high < min_fraction * total) return false;
    const double gap = mean_high - mean_low;
    const double sigma_low = std::sqrt(std::max(mean_low, 1.0));
    const double sigma_high = std::sqrt(std::max(mean_high, 1.0));
    return gap > n_sigma * sigma_low && gap > n_sigma * sigma_high;
}

CountRateModes split_count_rate_modes(const IntensityTrace& trace) {
    CountRateModes modes;
    if (trace.counts.empty()) return modes;
    const auto [mn, mx] = std::minmax_element(trace.counts.begin(), trace.counts.end());
    double c_low = static_cast<double>(*mn);
    double c_high = static_cast<double>(*mx);
    // Lloyd iterations on the 1-D values; converges in a handful of steps.
    for (int iter = 0; iter < 64; ++iter) {
        double sum_low = 0.0, sum_high = 0.0;
        std::size_t n_low = 0, n_high = 0;
        const double split = 0.5 * (c_low + c_high);
        for (const auto c : trace.counts) {
            const double v = static_cast<double>(c);
            if (v <= split) {
                sum_low += v;
                ++n_low;
            } else {
                sum_high += v;
                ++n_high;
            }
        }
        const double new_low = n_low > 0 ? sum_low / static_cast<double>(n_low) : c_low;
        const double new_high = n_high > 0 ? sum_high / static_cast<double>(n_high) : c_high;
        const bool done = new_low == c_low && new_high == c_high;
        c_low = new_low;
        c_high = new_high;
        modes.mean_low = c_low;
        modes.mean_high = c_high;
        modes.n_low = n_low;
        modes.n_high = n_high;
        if (done) break;
    }
    return modes;
}

}  // namespace nvlink
