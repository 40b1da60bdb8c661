#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "nvlink/correlator.hpp"
#include "nvlink/errors.hpp"
#include "nvlink/rng.hpp"
#include "nvlink/timetags.hpp"

using namespace nvlink;

namespace {

TimeTagStream poisson_stream(Rng& rng, double rate_a, double rate_b, double duration_s) {
    TimeTagStream s;
    s.duration_ps = static_cast<std::uint64_t>(duration_s * 1e12);
    for (int ch = 0; ch < 2; ++ch) {
        const double rate = ch == 0 ? rate_a : rate_b;
        double t = rng.exponential(rate);
        while (t < duration_s) {
            s.tags.push_back({static_cast<std::uint64_t>(std::llround(t * 1e12)),
                              static_cast<std::uint8_t>(ch)});
            t += rng.exponential(rate);
        }
    }
    std::sort(s.tags.begin(), s.tags.end(), tag_less);
    return s;
}

TimeTagStream random_stream(Rng& rng, std::size_t n_tags, std::uint64_t span_ps) {
    TimeTagStream s;
    s.duration_ps = span_ps;
    for (std::size_t i = 0; i < n_tags; ++i) {
        const auto t = static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(span_ps));
        const auto ch = static_cast<std::uint8_t>(rng.next_u64() % 2);
        s.tags.push_back({t, ch});
    }
    std::sort(s.tags.begin(), s.tags.end(), tag_less);
    return s;
}

}  // namespace

TEST_CASE("two-tag exact pair placement") {
    TimeTagStream s;
    s.duration_ps = 100000;
    s.tags = {{0, 0}, {5000, 1}, {10000, 0}};
    const auto h = cross_correlate(s, 0, 1, 1000, -20000, 20000);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < h.bin_count(); ++i) {
        total += h.counts[i];
        if (h.lag_lower_ps(i) == 5000) CHECK(h.counts[i] == 1);   // pair (0, 5000)
        if (h.lag_lower_ps(i) == -5000) CHECK(h.counts[i] == 1);  // pair (10000, 5000)
    }
    CHECK(total == 2);
}

TEST_CASE("independent poisson streams normalize to one") {
    Rng rng(101);
    const TimeTagStream s = poisson_stream(rng, 3000.0, 3000.0, 100.0);
    const auto h = cross_correlate(s, 0, 1, 10'000'000, -100'000'000, 100'000'000);
    REQUIRE(h.normalization_valid);
    double mean = 0.0;
    for (std::size_t i = 0; i < h.bin_count(); ++i) {
        CHECK(h.g2[i] == doctest::Approx(1.0).epsilon(0.05));
        mean += h.g2[i];
    }
    mean /= static_cast<double>(h.bin_count());
    // Mean normalized value within 3 sigma of 1.
    const double sigma_mean = 1.0 / std::sqrt(static_cast<double>(
                                   h.norm_denominator * static_cast<double>(h.bin_count())));
    CHECK(std::abs(mean - 1.0) < 3.0 * sigma_mean);
}

TEST_CASE("oracle equivalence on fuzzed streams") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 200 + static_cast<std::size_t>(rng.uniform() * 1800);
        const std::uint64_t span = 1'000'000 + rng.next_u64() % 100'000'000;
        const TimeTagStream s = random_stream(rng, n, span);
        const std::int64_t bin = 100 + static_cast<std::int64_t>(rng.uniform() * 5000);
        const std::int64_t half_bins = 1 + static_cast<std::int64_t>(rng.uniform() * 50);
        const std::int64_t window = bin * half_bins;
        const auto fast = cross_correlate(s, 0, 1, bin, -window, window);
        const auto slow = brute_force_correlate(s, 0, 1, bin, -window, window);
        REQUIRE(fast.counts == slow.counts);
    }
    // Same-channel autocorrelation also matches (self pairs excluded).
    const TimeTagStream s = random_stream(rng, 1500, 50'000'000);
    const auto fast = cross_correlate(s, 0, 0, 500, -10000, 10000);
    const auto slow = brute_force_correlate(s, 0, 0, 500, -10000, 10000);
    CHECK(fast.counts == slow.counts);
}

TEST_CASE("oracle refuses oversized streams") {
    TimeTagStream s;
    s.tags.resize(100001);
    for (std::size_t i = 0; i < s.tags.size(); ++i) s.tags[i] = {i, 0};
    s.duration_ps = s.tags.size();
    CHECK_THROWS_AS(brute_force_correlate(s, 0, 1, 10, -100, 100), ConfigError);
}

TEST_CASE("bin refinement nests exactly") {
    Rng rng(7);
    const TimeTagStream s = random_stream(rng, 3000, 10'000'000);
    const auto coarse = cross_correlate(s, 0, 1, 1000, -50000, 50000);
    const auto fine = cross_correlate(s, 0, 1, 200, -50000, 50000);
    std::uint64_t coarse_total = 0, fine_total = 0;
    for (std::size_t i = 0; i < coarse.bin_count(); ++i) {
        std::uint64_t sum = 0;
        for (std::size_t j = 0; j < 5; ++j) sum += fine.counts[5 * i + j];
        CHECK(sum == coarse.counts[i]);
        coarse_total += coarse.counts[i];
    }
    for (const auto c : fine.counts) fine_total += c;
    CHECK(coarse_total == fine_total);
}

TEST_CASE("time-shift invariance") {
    Rng rng(99);
    TimeTagStream s = random_stream(rng, 2000, 5'000'000);
    const auto base = cross_correlate(s, 0, 1, 500, -20000, 20000);
    TimeTagStream shifted = s;
    for (auto& tag : shifted.tags) tag.t_ps += 777'777'777;
    shifted.duration_ps += 777'777'777;
    const auto moved = cross_correlate(shifted, 0, 1, 500, -20000, 20000);
    CHECK(base.counts == moved.counts);
}

TEST_CASE("channel swap mirrors the histogram") {
    // Timestamps constructed so no pair lag lands on a bin boundary.
    Rng rng(5);
    TimeTagStream s;
    s.duration_ps = 2'000'000'000;
    for (int i = 0; i < 1500; ++i) {
        const std::uint64_t base = rng.next_u64() % 1'999'000'000;
        s.tags.push_back({(base / 1000) * 1000, 0});
        const std::uint64_t base2 = rng.next_u64() % 1'999'000'000;
        s.tags.push_back({(base2 / 1000) * 1000 + 137, 1});
    }
    std::sort(s.tags.begin(), s.tags.end(), tag_less);
    const auto ab = cross_correlate(s, 0, 1, 500, -40000, 40000);
    const auto ba = cross_correlate(s, 1, 0, 500, -40000, 40000);
    const std::size_t n = ab.bin_count();
    for (std::size_t i = 0; i < n; ++i) CHECK(ab.counts[i] == ba.counts[n - 1 - i]);
}

TEST_CASE("histogram total counts all in-window pairs") {
    Rng rng(31);
    const TimeTagStream s = random_stream(rng, 1000, 3'000'000);
    const auto h = cross_correlate(s, 0, 1, 250, -10000, 10000);
    std::uint64_t pairs = 0;
    for (const auto& a : s.tags) {
        if (a.channel != 0) continue;
        for (const auto& b : s.tags) {
            if (b.channel != 1) continue;
            const auto dt = static_cast<std::int64_t>(b.t_ps) - static_cast<std::int64_t>(a.t_ps);
            if (dt >= -10000 && dt < 10000) ++pairs;
        }
    }
    std::uint64_t total = 0;
    for (const auto c : h.counts) total += c;
    CHECK(total == pairs);
}

TEST_CASE("sharded correlation equals sequential bit-exactly") {
    Rng rng(55);
    const TimeTagStream s = random_stream(rng, 60000, 2'000'000'000);
    const auto seq = cross_correlate(s, 0, 1, 1000, -1'000'000, 1'000'000, 1);
    for (const int threads : {2, 3, 8}) {
        const auto par = cross_correlate(s, 0, 1, 1000, -1'000'000, 1'000'000, threads);
        CHECK(par.counts == seq.counts);
    }
}

TEST_CASE("empty channel yields flagged zero histogram") {
    TimeTagStream s;
    s.duration_ps = 1'000'000;
    s.tags = {{10, 0}, {20, 0}, {400, 0}};
    const auto h = cross_correlate(s, 0, 1, 100, -1000, 1000);
    CHECK_FALSE(h.normalization_valid);
    CHECK(h.rate_b_cps == 0.0);
    for (const auto c : h.counts) CHECK(c == 0);
    for (const auto g : h.g2) CHECK(std::isnan(g));
}

TEST_CASE("invalid correlation parameters are rejected") {
    TimeTagStream s;
    s.tags = {{0, 0}, {10, 1}};
    s.duration_ps = 100;
    CHECK_THROWS_AS(cross_correlate(s, 0, 1, 0, -100, 100), ConfigError);
    CHECK_THROWS_AS(cross_correlate(s, 0, 1, 100, 100, -100), ConfigError);
    CHECK_THROWS_AS(cross_correlate(s, 0, 1, 300, -100, 100), ConfigError);
    TimeTagStream unsorted;
    unsorted.tags = {{10, 0}, {0, 1}};
    unsorted.duration_ps = 100;
    CHECK_THROWS_AS(cross_correlate(unsorted, 0, 1, 10, -100, 100), DataError);
}

TEST_CASE("lifetime histogram binning and errors") {
    TimeTagStream s;
    s.duration_ps = 1'000'000;
    s.tags = {{500, 0},      // before the first sync: dropped
              {1000, 2},     // sync
              {8000, 0},     // 7 ns after sync
              {101000, 2},   // second sync
              {103000, 0}};  // 2 ns after second sync
    std::sort(s.tags.begin(), s.tags.end(), tag_less);
    const auto h = lifetime_histogram(s, 2, 0, 1000, 100000);
    CHECK(h.sync_count == 2);
    CHECK(h.counts[7] == 1);
    CHECK(h.counts[2] == 1);
    std::uint64_t total = 0;
    for (const auto c : h.counts) total += c;
    CHECK(total == 2);

    TimeTagStream no_sync;
    no_sync.tags = {{10, 0}};
    no_sync.duration_ps = 100;
    CHECK_THROWS_AS(lifetime_histogram(no_sync, 2, 0, 1000, 100000), DataError);
}

TEST_CASE("intensity trace and count-rate histogram") {
    Rng rng(77);
    TimeTagStream s = poisson_stream(rng, 5000.0, 0.0, 100.0);
    const auto trace = intensity_trace(s, 0, 1.0);
    CHECK(trace.counts.size() == 100);

    const auto modes = split_count_rate_modes(trace);
    CHECK_FALSE(modes.bimodal());  // constant-rate stream is unimodal

    const auto hist = count_rate_histogram(trace, 50);
    std::uint64_t occupants = 0;
    for (const auto o : hist.occupancy) occupants += o;
    CHECK(occupants == 100);

    CHECK_THROWS_AS(intensity_trace(s, 0, 0.0), ConfigError);
    CHECK_THROWS_AS(count_rate_histogram(trace, 0), ConfigError);
}

TEST_CASE("telegraph-style trace splits into two modes") {
    // Synthetic alternation: 30 bins near 4000, 10 near 1000, repeated.
    Rng rng(13);
    IntensityTrace trace;
    trace.bin_s = 1.0;
    for (int block = 0; block < 8; ++block) {
        for (int i = 0; i < 30; ++i)
            trace.counts.push_back(static_cast<std::uint64_t>(
                4000.0 + std::llround(rng.normal() * 63.0)));
        for (int i = 0; i < 10; ++i)
            trace.counts.push_back(static_cast<std::uint64_t>(
                1000.0 + std::llround(rng.normal() * 32.0)));
    }
    const auto modes = split_count_rate_modes(trace);
    CHECK(modes.bimodal());
    CHECK(modes.mean_low == doctest::Approx(1000.0).epsilon(0.05));
    CHECK(modes.mean_high == doctest::Approx(4000.0).epsilon(0.05));
}

TEST_CASE("merge streams") {
    TimeTagStream a;
    a.tags = {{10, 0}, {30, 1}};
    a.duration_ps = 100;
    TimeTagStream empty;
    const auto same = merge_streams(a, empty);
    CHECK(same.tags == a.tags);

    TimeTagStream b;
    b.tags = {{20, 0}, {30, 0}};
    b.duration_ps = 120;
    const auto ab = merge_streams(a, b);
    CHECK(ab.tags.size() == 4);
    CHECK(ab.sorted());
    CHECK(ab.duration_ps == 120);
    // Disjoint timestamps commute.
    const auto ba = merge_streams(b, a);
    CHECK(ab.tags == ba.tags);

    TimeTagStream unsorted;
    unsorted.tags = {{50, 0}, {10, 0}};
    CHECK_THROWS_AS(merge_streams(a, unsorted), DataError);
}
