#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "nvlink/correlator.hpp"
#include "nvlink/errors.hpp"
#include "nvlink/montecarlo.hpp"
#include "nvlink/rng.hpp"

using namespace nvlink;

namespace {

// Clean bench config: ideal chain, no background, no detector artifacts.
SimConfig bench_config() {
    SimConfig cfg;
    cfg.mode = SimMode::cw;
    cfg.emitter.tau_rad_ns = 10.0;
    cfg.emitter.k_es_hz = 0.0;
    cfg.emitter.k_sg_hz = 0.0;
    cfg.emitter.eta_q = 1.0;
    cfg.emitter.p_sat_mw = 1.8;
    cfg.budget.eta_q = 1.0;
    cfg.budget.eta_wg = 1.0;
    cfg.budget.eta_grating = 1.0;
    cfg.budget.eta_det = 1.0;
    cfg.background_enabled = false;
    for (auto& d : cfg.detectors) {
        d.dark_rate_cps = 0.0;
        d.efficiency = 1.0;
    }
    return cfg;
}

std::array<std::uint64_t, 3> channel_counts(const TimeTagStream& s) {
    std::array<std::uint64_t, 3> n{0, 0, 0};
    for (const auto& tag : s.tags)
        if (tag.channel < 3) ++n[tag.channel];
    return n;
}

}  // namespace

TEST_CASE("zero duration produces an empty stream") {
    SimConfig cfg = bench_config();
    cfg.duration_s = 0.0;
    const TimeTagStream s = simulate(cfg);
    CHECK(s.tags.empty());
    CHECK(s.duration_ps == 0);
}

TEST_CASE("identical config and seed reproduce bit-identical streams") {
    SimConfig cfg = bench_config();
    cfg.duration_s = 0.05;
    cfg.pump_mw = 0.18;
    cfg.background_enabled = true;
    cfg.pump_mw = 0.18;
    cfg.detectors[0].jitter_sigma_ps = 120.0;
    cfg.detectors[0].dark_rate_cps = 500.0;
    cfg.rng_seed = 42;
    const TimeTagStream a = simulate(cfg);
    const TimeTagStream b = simulate(cfg);
    CHECK(a.tags == b.tags);
    CHECK(a.duration_ps == b.duration_ps);

    cfg.rng_seed = 43;
    const TimeTagStream c = simulate(cfg);
    CHECK(a.tags != c.tags);
}

TEST_CASE("two-level renewal: mean interval is pump dwell plus lifetime") {
    SimConfig cfg = bench_config();
    cfg.pump_mw = 0.18;       // k_exc = 1e7
    cfg.split_ratio = 1.0;    // every photon on channel A
    cfg.duration_s = 0.115;   // ~1e6 photons at 110 ns spacing
    cfg.rng_seed = 7;
    const TimeTagStream s = simulate(cfg);
    REQUIRE(s.tags.size() > 900000);
    double sum = 0.0;
    for (std::size_t i = 1; i < s.tags.size(); ++i)
        sum += static_cast<double>(s.tags[i].t_ps - s.tags[i - 1].t_ps);
    const double mean_ns = sum / static_cast<double>(s.tags.size() - 1) * 1e-3;
    CHECK(mean_ns == doctest::Approx(110.0).epsilon(0.01));
}

TEST_CASE("per-channel rates match the analytic ledger at the device operating point") {
    SimConfig cfg;  // device defaults everywhere
    cfg.mode = SimMode::cw;
    cfg.pump_mw = 6.0;
    cfg.emitter.n_emitters = 1;
    // Steady emission: telegraph dwells (~10 s) would dominate a short run.
    cfg.emitter.blink_off_rate_hz = 0.0;
    cfg.duration_s = 4.5;
    cfg.rng_seed = 12345;
    const RateLedger ledger = expected_rates(cfg);
    const TimeTagStream s = simulate(cfg);
    const auto n = channel_counts(s);
    for (int c = 0; c < 2; ++c) {
        const double observed = static_cast<double>(n[c]) / cfg.duration_s;
        const double expected = ledger.channel_cps[c];
        const double se = std::sqrt(expected * cfg.duration_s) / cfg.duration_s;
        CHECK(std::abs(observed - expected) < std::max(0.03 * expected, 3.0 * se));
    }
}

TEST_CASE("rates track the ledger across randomized configurations") {
    Rng rig(2718);
    for (int trial = 0; trial < 6; ++trial) {
        SimConfig cfg = bench_config();
        cfg.pump_mw = 0.02 + 0.15 * rig.uniform();
        cfg.emitter.k_es_hz = rig.uniform() < 0.5 ? 0.0 : 1e6;
        cfg.emitter.k_sg_hz = cfg.emitter.k_es_hz > 0.0 ? 4e6 : 0.0;
        cfg.emitter.eta_q = 0.3 + 0.7 * rig.uniform();
        cfg.budget.eta_det = 0.3 + 0.7 * rig.uniform();
        cfg.split_ratio = 0.3 + 0.4 * rig.uniform();
        cfg.background_enabled = true;
        cfg.noise.r_fibre_eta_det_hz_per_mw = 1e11 * (1.0 + 20.0 * rig.uniform());
        cfg.detectors[0].dark_rate_cps = 400.0;
        cfg.detectors[1].dark_rate_cps = 250.0;
        cfg.duration_s = 2.0;
        cfg.rng_seed = 1000 + static_cast<std::uint64_t>(trial);
        const RateLedger ledger = expected_rates(cfg);
        const TimeTagStream s = simulate(cfg);
        const auto n = channel_counts(s);
        for (int c = 0; c < 2; ++c) {
            const double expected = ledger.channel_cps[c] * cfg.duration_s;
            const double se = std::sqrt(std::max(expected, 1.0));
            CHECK(std::abs(static_cast<double>(n[c]) - expected) < 3.5 * se);
        }
    }
}

TEST_CASE("halving the detector efficiency halves the emitter counts") {
    SimConfig cfg = bench_config();
    cfg.pump_mw = 0.09;  // k_exc = 5e6
    cfg.budget.eta_det = 0.8;
    cfg.duration_s = 1.0;
    cfg.rng_seed = 5;
    const auto full = channel_counts(simulate(cfg));
    cfg.budget.eta_det = 0.4;
    cfg.rng_seed = 6;
    const auto half = channel_counts(simulate(cfg));
    const double n_full = static_cast<double>(full[0] + full[1]);
    const double n_half = static_cast<double>(half[0] + half[1]);
    CHECK(n_half == doctest::Approx(0.5 * n_full).epsilon(0.02));
}

TEST_CASE("dead time enforces a minimum same-channel separation") {
    SimConfig cfg = bench_config();
    cfg.pump_mw = 1.8;
    cfg.duration_s = 0.01;
    cfg.detectors[0].dead_time_ns = 100.0;
    cfg.detectors[1].dead_time_ns = 40.0;
    cfg.detectors[0].jitter_sigma_ps = 50.0;
    cfg.detectors[1].jitter_sigma_ps = 50.0;
    cfg.rng_seed = 9;
    const TimeTagStream s = simulate(cfg);
    REQUIRE(s.sorted());
    std::array<std::uint64_t, 2> last{0, 0};
    std::array<bool, 2> seen{false, false};
    for (const auto& tag : s.tags) {
        if (tag.channel > 1) continue;
        if (seen[tag.channel]) {
            const std::uint64_t gap = tag.t_ps - last[tag.channel];
            const std::uint64_t dead =
                static_cast<std::uint64_t>(cfg.detectors[tag.channel].dead_time_ns * 1e3);
            CHECK(gap >= dead);
        }
        last[tag.channel] = tag.t_ps;
        seen[tag.channel] = true;
    }
}

TEST_CASE("pulsed mode: sync tags, exponential delays, per-pulse statistics") {
    SimConfig cfg = bench_config();
    cfg.mode = SimMode::pulsed;
    cfg.pulsed.pulse_count = 0;
    const TimeTagStream empty = simulate(cfg);
    CHECK(empty.tags.empty());

    cfg.pulsed.pulse_count = 400000;
    cfg.pulsed.rep_period_ns = 1000.0;
    cfg.pulsed.p_excitation = 0.5;
    cfg.split_ratio = 1.0;
    cfg.rng_seed = 21;
    const TimeTagStream s = simulate(cfg);
    const auto n = channel_counts(s);
    CHECK(n[2] == cfg.pulsed.pulse_count);
    const double expected = static_cast<double>(cfg.pulsed.pulse_count) * 0.5;
    CHECK(static_cast<double>(n[0]) ==
          doctest::Approx(expected).epsilon(3.0 / std::sqrt(expected)));

    // Mean delay from the sync equals tau_rad within 2 %.
    double sum_delay = 0.0;
    std::uint64_t count = 0, last_sync = 0;
    bool have_sync = false;
    for (const auto& tag : s.tags) {
        if (tag.channel == kChannelSync) {
            last_sync = tag.t_ps;
            have_sync = true;
        } else if (tag.channel == kChannelA && have_sync) {
            sum_delay += static_cast<double>(tag.t_ps - last_sync);
            ++count;
        }
    }
    const double mean_delay_ns = sum_delay / static_cast<double>(count) * 1e-3;
    CHECK(mean_delay_ns == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("memory cap rejects oversize runs up front") {
    SimConfig cfg = bench_config();
    cfg.pump_mw = 18.0;
    cfg.duration_s = 1e6;
    cfg.memory_cap_tags = 1000;
    CHECK_THROWS_AS(simulate(cfg), ConfigError);
}

TEST_CASE("telegraph blinking: bimodal high-power trace, unimodal below threshold") {
    SimConfig cfg = bench_config();
    // Two-level emitter with a weak detection chain, so only detected photons
    // and telegraph exits are realized; rates stay laptop friendly.
    cfg.emitter.eta_q = 1.0;
    cfg.budget.eta_det = 1e-4;
    cfg.emitter.p_sat_mw = 1.8;
    cfg.pump_mw = 3.6;  // 2x p_sat: telegraph active, 30 s / 10 s dwells
    cfg.duration_s = 150.0;
    cfg.rng_seed = 77;
    const TimeTagStream blinking = simulate(cfg);
    const auto trace = intensity_trace(blinking, 0, 1.0);
    CHECK(split_count_rate_modes(trace).bimodal());

    cfg.pump_mw = 1.8;  // below the 1.5x threshold: no telegraph
    cfg.rng_seed = 78;
    const TimeTagStream steady = simulate(cfg);
    const auto trace2 = intensity_trace(steady, 0, 1.0);
    CHECK_FALSE(split_count_rate_modes(trace2).bimodal());
}

TEST_CASE("merged independent emitters halve the dip") {
    SimConfig cfg = bench_config();
    cfg.pump_mw = 0.0036;  // k_exc = 2e5
    cfg.budget.eta_det = 0.5;
    cfg.duration_s = 20.0;
    cfg.delay_b_ns = 48.0;
    cfg.rng_seed = 301;
    const TimeTagStream one = simulate(cfg);
    cfg.rng_seed = 302;
    const TimeTagStream two = simulate(cfg);
    const TimeTagStream merged = merge_streams(one, two);

    const auto h = cross_correlate(merged, 0, 1, 2000, -400000, 400000);
    // Average the normalized dip neighbourhood against the far baseline.
    double dip_min = 1e9;
    for (std::size_t i = 0; i < h.bin_count(); ++i) {
        const double lag = h.lag_center_ns(i);
        if (lag > 40.0 && lag < 56.0) dip_min = std::min(dip_min, h.g2[i]);
    }
    CHECK(dip_min == doctest::Approx(0.5).epsilon(0.25));
}

TEST_CASE("sync channel is excluded from detector effects") {
    SimConfig cfg = bench_config();
    cfg.mode = SimMode::pulsed;
    cfg.pulsed.pulse_count = 1000;
    cfg.pulsed.rep_period_ns = 1000.0;
    cfg.pulsed.p_excitation = 0.2;
    cfg.detectors[0].jitter_sigma_ps = 300.0;
    cfg.detectors[1].jitter_sigma_ps = 300.0;
    cfg.rng_seed = 2;
    const TimeTagStream s = simulate(cfg);
    std::uint64_t k = 0;
    for (const auto& tag : s.tags)
        if (tag.channel == kChannelSync) {
            CHECK(tag.t_ps == k * 1'000'000);
            ++k;
        }
    CHECK(k == 1000);
}
