#pragma once

#include <array>
#include <cstdint>

#include "nvlink/emitter.hpp"
#include "nvlink/linkbudget.hpp"
#include "nvlink/timetags.hpp"

namespace nvlink {

struct DetectorParams {
    double efficiency = 1.0;      // extra thinning on top of the budget's eta_det
    double dark_rate_cps = 350.0;
    double dead_time_ns = 0.0;    // non-paralyzable
    double jitter_sigma_ps = 0.0; // Gaussian, per tag

    void validate() const;
};

enum class SimMode { cw, pulsed };

struct PulsedParams {
    std::uint64_t pulse_count = 0;
    double rep_period_ns = 1000.0;  // 1 MHz default repetition
    double p_excitation = 0.1;      // per-pulse excitation probability, direct setting
    double tau_bg_ns = 2.0;         // pump-induced background decay; 0 = uniform in period
};

// Full description of one acquisition. The emitter block is authoritative for
// the emission physics (tau_rad, eta_q); the budget block contributes the
// optical chain eta_wg * eta_grating * eta_det. Background rates come from the
// noise block per grating output and are generated independently per channel.
struct SimConfig {
    SimMode mode = SimMode::cw;
    double duration_s = 1.0;  // CW acquisitions
    PulsedParams pulsed;
    double pump_mw = 1.0;
    EmitterParams emitter;
    LinkBudget budget;
    NoiseBudget noise;
    bool background_enabled = true;
    double split_ratio = 0.5;   // probability a waveguide photon exits channel A
    double delay_b_ns = 0.0;    // inserted optical delay on channel B
    std::array<DetectorParams, 2> detectors;
    std::uint64_t rng_seed = 0;
    std::uint64_t memory_cap_tags = 50'000'000;

    void validate() const;
    double duration_total_s() const;
    // Combined survival probability of an emitted photon up to the channel
    // split: eta_q * eta_wg * eta_grating * eta_det.
    double detection_probability() const;
};

// Closed-form bookkeeping of the configured acquisition; the analytic oracle
// for the empirical rates and the basis of the up-front memory-cap check.
struct RateLedger {
    double signal_total_cps = 0.0;            // detected emitter photons, both channels
    std::array<double, 2> background_cps{};   // pump-induced, per channel
    std::array<double, 2> dark_cps{};
    std::array<double, 2> channel_cps{};      // everything, per channel
    double sync_cps = 0.0;
    double blink_duty = 1.0;                  // bright fraction of the telegraph
    double sigma = 1.0;                       // S/(S+N) on channel A
    double expected_tags = 0.0;
};

RateLedger expected_rates(const SimConfig& config);

// Generate the time-tag stream for the configured acquisition. Identical
// (config, seed) pairs produce bit-identical streams. Throws ConfigError when
// the expected tag count exceeds the memory cap.
TimeTagStream simulate(const SimConfig& config);
TimeTagStream simulate_cw(const SimConfig& config);
TimeTagStream simulate_pulsed(const SimConfig& config);

}  // namespace nvlink
