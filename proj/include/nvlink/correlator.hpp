#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nvlink/timetags.hpp"

namespace nvlink {

// Binned coincidence histogram between two channels. Bins are half-open
// [lower, upper) with lag 0 on a bin boundary, so refining the bin width by
// an integer factor nests exactly.
//
// Normalization per bin: g2 = counts / (rate_a * rate_b * T * bin_width_s),
// with channel rates measured over the full acquisition. No background or
// dark-count correction happens here; raw statistics stay auditable.
struct CorrelationHistogram {
    std::int64_t bin_width_ps = 0;
    std::int64_t lag_min_ps = 0;
    std::int64_t lag_max_ps = 0;
    std::vector<std::uint64_t> counts;
    std::vector<double> g2;
    double acquisition_s = 0.0;
    double rate_a_cps = 0.0;
    double rate_b_cps = 0.0;
    bool normalization_valid = false;
    double norm_denominator = 0.0;  // counts -> g2 divisor
    double error_scale = 1.0;       // per-bin g2 sigma multiplier (background correction)

    std::size_t bin_count() const { return counts.size(); }
    std::int64_t lag_lower_ps(std::size_t i) const {
        return lag_min_ps + static_cast<std::int64_t>(i) * bin_width_ps;
    }
    double lag_center_ns(std::size_t i) const {
        return (static_cast<double>(lag_lower_ps(i)) + 0.5 * static_cast<double>(bin_width_ps)) *
               1e-3;
    }
    // 1-sigma uncertainty of the normalized value in bin i (Poisson counts,
    // unit floor on empty bins).
    double g2_sigma(std::size_t i) const;
};

// Full pair correlation: every tag on ch_a against all ch_b tags within the
// lag window, binned by t_b - t_a. Sliding two-pointer sweep, O(N + pairs);
// a single streaming pass over each channel. `threads` > 1 shards the ch_a
// tags into contiguous blocks whose partial histograms are summed; the result
// is bit-identical to the sequential path.
CorrelationHistogram cross_correlate(const TimeTagStream& stream, int ch_a, int ch_b,
                                     std::int64_t bin_width_ps, std::int64_t lag_min_ps,
                                     std::int64_t lag_max_ps, int threads = 1);

// O(N^2) reference with the identical contract, for verification. Refuses
// streams beyond 1e5 tags.
CorrelationHistogram brute_force_correlate(const TimeTagStream& stream, int ch_a, int ch_b,
                                           std::int64_t bin_width_ps, std::int64_t lag_min_ps,
                                           std::int64_t lag_max_ps);

// Detection delays relative to the most recent sync tag, binned half-open
// from zero. Detections before the first sync are dropped.
struct LifetimeHistogram {
    std::int64_t bin_width_ps = 0;
    std::int64_t range_ps = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t sync_count = 0;

    std::size_t bin_count() const { return counts.size(); }
    double delay_center_ns(std::size_t i) const {
        return (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_ps) * 1e-3;
    }
};

LifetimeHistogram lifetime_histogram(const TimeTagStream& stream, int sync_ch, int det_ch,
                                     std::int64_t bin_width_ps, std::int64_t range_ps);

// Occupancy of fixed-duration wall-clock bins on one channel. Bins start at
// t = 0; a trailing partial bin is dropped.
struct IntensityTrace {
    double bin_s = 1.0;
    double start_s = 0.0;
    std::vector<std::uint64_t> counts;
};

IntensityTrace intensity_trace(const TimeTagStream& stream, int ch, double bin_s);

// Histogram of trace values (counts per bin), bucketed by a fixed width.
struct CountRateHistogram {
    std::uint64_t bin_width_counts = 1;
    std::uint64_t min_count = 0;
    std::vector<std::uint64_t> occupancy;
};

CountRateHistogram count_rate_histogram(const IntensityTrace& trace,
                                        std::uint64_t bin_width_counts);

// Two-cluster split of the trace values (1-D k-means). The trace is bimodal
// in the blinking sense when the cluster means sit further apart than
// n_sigma times the Poisson width of each and both clusters hold a
// non-negligible share of the bins.
struct CountRateModes {
    double mean_low = 0.0;
    double mean_high = 0.0;
    std::size_t n_low = 0;
    std::size_t n_high = 0;

    bool bimodal(double n_sigma = 3.0, double min_fraction = 0.05) const;
};

CountRateModes split_count_rate_modes(const IntensityTrace& trace);

}  // namespace nvlink
