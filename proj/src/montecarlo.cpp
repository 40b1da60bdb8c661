#include "nvlink/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "nvlink/errors.hpp"
#include "nvlink/rng.hpp"

namespace nvlink {

namespace {

// RNG stream ids per subsystem, so toggling one never reshuffles another.
constexpr std::uint64_t kStreamEmitter = 0x100;
constexpr std::uint64_t kStreamTelegraph = 0x200;
constexpr std::uint64_t kStreamBackground = 0x300;  // + channel
constexpr std::uint64_t kStreamDark = 0x400;        // + channel
constexpr std::uint64_t kStreamJitter = 0x500;      // + channel

std::uint64_t to_ps(double t_s) {
    return static_cast<std::uint64_t>(std::llround(t_s * 1e12));
}

// Bright/dark telegraph trajectory. Toggle times are precomputed lazily in
// order; emission queries must come with non-decreasing times.
class Telegraph {
public:
    Telegraph(bool active, double on_to_off_hz, double off_to_on_hz, Rng rng)
        : active_(active), k_off_(on_to_off_hz), k_on_(off_to_on_hz), rng_(rng) {
        if (!active_) return;
        // Stationary initial state.
        const double p_bright = k_on_ / (k_on_ + k_off_);
        bright_ = rng_.uniform() < p_bright;
        next_toggle_s_ = rng_.exponential(bright_ ? k_off_ : k_on_);
    }

    bool bright_at(double t_s) {
        if (!active_) return true;
        while (t_s >= next_toggle_s_) {
            bright_ = !bright_;
            next_toggle_s_ += rng_.exponential(bright_ ? k_off_ : k_on_);
        }
        return bright_;
    }

    double duty() const {
        if (!active_) return 1.0;
        return k_on_ / (k_on_ + k_off_);
    }

private:
    bool active_;
    double k_off_;
    double k_on_;
    Rng rng_;
    bool bright_ = true;
    double next_toggle_s_ = 0.0;
};

struct RoutingProbabilities {
    double to_a = 0.0;   // radiative decay detected on channel A
    double to_ab = 0.0;  // ... on A or B
};

RoutingProbabilities routing(const SimConfig& cfg) {
    const double p_det = cfg.detection_probability();
    RoutingProbabilities r;
    r.to_a = p_det * cfg.split_ratio * cfg.detectors[0].efficiency;
    r.to_ab = r.to_a + p_det * (1.0 - cfg.split_ratio) * cfg.detectors[1].efficiency;
    return r;
}

// Continuous-time jump process of one emitter over [0, horizon).
// Ground -> excited at k_exc; excited decays at k_rad + k_es and branches
// radiative/shelving; shelving returns at k_sg; radiative decays route
// through the efficiency chain.
//
// Only shelving visits and detected photons are observable, and the emitter
// sits in the ground state right after either, so the pump cycles in between
// are aggregated exactly: the cycle count to the next such exit event is
// geometric, and the summed ground/excited dwell over those cycles is a pair
// of Gamma variates. This preserves the law of the detected point process
// while skipping the (possibly vast) number of undetected cycles.
void run_emitter_cw(const SimConfig& cfg, int emitter_index, double horizon_s,
                    Telegraph& telegraph, std::vector<TimeTag>& out_a,
                    std::vector<TimeTag>& out_b) {
    Rng rng = Rng::derive(cfg.rng_seed, kStreamEmitter + static_cast<std::uint64_t>(emitter_index));
    const double k_exc = excitation_rate(cfg.pump_mw, cfg.emitter);
    if (k_exc <= 0.0) return;
    const double k_rad = cfg.emitter.radiative_rate_hz();
    const double k_es = cfg.emitter.k_es_hz;
    const double k_sg = cfg.emitter.k_sg_hz;
    const double k_excited = k_rad + k_es;
    const double p_radiative = k_rad / k_excited;
    const auto route = routing(cfg);
    const double delay_b_s = cfg.delay_b_ns * 1e-9;

    const double p_shelve = 1.0 - p_radiative;
    const double p_detect = p_radiative * route.to_ab;
    const double p_exit = p_shelve + p_detect;
    if (p_exit <= 0.0) return;  // nothing observable will ever happen
    const double detect_given_exit = p_detect / p_exit;

    double t = 0.0;
    for (;;) {
        const double cycles = static_cast<double>(rng.geometric(p_exit));
        t += rng.gamma(cycles, k_exc) + rng.gamma(cycles, k_excited);
        if (t >= horizon_s) return;
        if (rng.uniform() < detect_given_exit) {
            if (telegraph.bright_at(t)) {
                if (rng.uniform() * route.to_ab < route.to_a)
                    out_a.push_back({to_ps(t), kChannelA});
                else
                    out_b.push_back({to_ps(t + delay_b_s), kChannelB});
            }
        } else {
            t += rng.exponential(k_sg);  // shelving dwell
            if (t >= horizon_s) return;
        }
    }
}

// Homogeneous Poisson arrivals on one channel.
void poisson_tags(Rng& rng, double rate_cps, double horizon_s, double offset_s,
                  std::uint8_t channel, std::vector<TimeTag>& out) {
    if (rate_cps <= 0.0) return;
    double t = rng.exponential(rate_cps);
    while (t < horizon_s) {
        out.push_back({to_ps(t + offset_s), channel});
        t += rng.exponential(rate_cps);
    }
}

// Per-channel detector effects: Gaussian jitter then re-sort, then
// non-paralyzable dead time, mirroring the detector-then-electronics chain.
void apply_detector_effects(const SimConfig& cfg, int channel, std::vector<TimeTag>& tags) {
    const DetectorParams& det = cfg.detectors[static_cast<std::size_t>(channel)];
    if (det.jitter_sigma_ps > 0.0) {
        Rng rng = Rng::derive(cfg.rng_seed, kStreamJitter + static_cast<std::uint64_t>(channel));
        std::vector<TimeTag> jittered;
        jittered.reserve(tags.size());
        for (const auto& tag : tags) {
            const double shift = rng.normal() * det.jitter_sigma_ps;
            const double t = static_cast<double>(tag.t_ps) + shift;
            if (t < 0.0) continue;
            jittered.push_back({static_cast<std::uint64_t>(std::llround(t)), tag.channel});
        }
        tags = std::move(jittered);
        std::sort(tags.begin(), tags.end(), tag_less);
    }
    if (det.dead_time_ns > 0.0) {
        const auto dead_ps = static_cast<std::uint64_t>(std::llround(det.dead_time_ns * 1e3));
        std::vector<TimeTag> alive;
        alive.reserve(tags.size());
        bool first = true;
        std::uint64_t last = 0;
        for (const auto& tag : tags) {
            if (first || tag.t_ps - last >= dead_ps) {
                alive.push_back(tag);
                last = tag.t_ps;
                first = false;
            }
        }
        tags = std::move(alive);
    }
}

TimeTagStream assemble(const SimConfig& cfg, std::vector<TimeTag> ch_a, std::vector<TimeTag> ch_b,
                       std::vector<TimeTag> sync, double duration_s) {
    std::sort(ch_a.begin(), ch_a.end(), tag_less);
    std::sort(ch_b.begin(), ch_b.end(), tag_less);
    apply_detector_effects(cfg, 0, ch_a);
    apply_detector_effects(cfg, 1, ch_b);

    TimeTagStream stream;
    stream.duration_ps = to_ps(duration_s);
    stream.tags.reserve(ch_a.size() + ch_b.size() + sync.size());
    stream.tags.insert(stream.tags.end(), ch_a.begin(), ch_a.end());
    stream.tags.insert(stream.tags.end(), ch_b.begin(), ch_b.end());
    stream.tags.insert(stream.tags.end(), sync.begin(), sync.end());
    std::sort(stream.tags.begin(), stream.tags.end(), tag_less);
    return stream;
}

}  // namespace

void DetectorParams::validate() const {
    if (efficiency < 0.0 || efficiency > 1.0)
        throw ConfigError("detector: efficiency must be in [0, 1]");
    if (dark_rate_cps < 0.0) throw ConfigError("detector: dark rate must be >= 0");
    if (dead_time_ns < 0.0) throw ConfigError("detector: dead time must be >= 0");
    if (jitter_sigma_ps < 0.0) throw ConfigError("detector: jitter sigma must be >= 0");
}

void SimConfig::validate() const {
    emitter.validate();
    budget.validate();
    noise.validate();
    for (const auto& d : detectors) d.validate();
    if (pump_mw < 0.0) throw ConfigError("sim: pump power must be >= 0");
    if (split_ratio < 0.0 || split_ratio > 1.0)
        throw ConfigError("sim: split_ratio must be in [0, 1]");
    if (delay_b_ns < 0.0) throw ConfigError("sim: delay_b_ns must be >= 0");
    if (mode == SimMode::cw) {
        if (duration_s < 0.0) throw ConfigError("sim: duration_s must be >= 0");
    } else {
        if (pulsed.rep_period_ns <= 0.0) throw ConfigError("sim: rep_period_ns must be > 0");
        if (pulsed.p_excitation < 0.0 || pulsed.p_excitation > 1.0)
            throw ConfigError("sim: p_excitation must be in [0, 1]");
        if (pulsed.tau_bg_ns < 0.0) throw ConfigError("sim: tau_bg_ns must be >= 0");
        if (pulsed.rep_period_ns < 5.0 * emitter.tau_rad_ns)
            std::cerr << "nvlink: warning: repetition period (" << pulsed.rep_period_ns
                      << " ns) is short against tau_rad (" << emitter.tau_rad_ns
                      << " ns); decays will pile into following periods\n";
    }
}

double SimConfig::duration_total_s() const {
    if (mode == SimMode::cw) return duration_s;
    return static_cast<double>(pulsed.pulse_count) * pulsed.rep_period_ns * 1e-9;
}

double SimConfig::detection_probability() const {
    return emitter.eta_q * budget.eta_wg * budget.eta_grating * budget.eta_det;
}

RateLedger expected_rates(const SimConfig& config) {
    config.validate();
    RateLedger ledger;

    double emission_rate = 0.0;  // detected-photon rate before the split, per emitter set
    if (config.mode == SimMode::cw) {
        const double p_e = excited_state_population(config.emitter, config.pump_mw);
        emission_rate = p_e * config.emitter.radiative_rate_hz() *
                        config.detection_probability() *
                        static_cast<double>(config.emitter.n_emitters);
        if (config.emitter.blinking_active(config.pump_mw)) {
            const double k_off = config.emitter.blink_off_rate_at(config.pump_mw);
            ledger.blink_duty = config.emitter.blink_on_rate_hz /
                                (config.emitter.blink_on_rate_hz + k_off);
            emission_rate *= ledger.blink_duty;
        }
    } else {
        const double pulse_rate = 1e9 / config.pulsed.rep_period_ns;
        emission_rate = pulse_rate * config.pulsed.p_excitation *
                        config.detection_probability() *
                        static_cast<double>(config.emitter.n_emitters);
        ledger.sync_cps = pulse_rate;
    }
    ledger.signal_total_cps = emission_rate * (config.split_ratio * config.detectors[0].efficiency +
                                               (1.0 - config.split_ratio) *
                                                   config.detectors[1].efficiency);

    const double bg =
        config.background_enabled ? noise_rates(config.pump_mw, config.noise).total() : 0.0;
    for (int c = 0; c < 2; ++c) {
        const double split = c == 0 ? config.split_ratio : 1.0 - config.split_ratio;
        const double signal = emission_rate * split * config.detectors[c].efficiency;
        ledger.background_cps[c] = bg * config.detectors[c].efficiency;
        ledger.dark_cps[c] = config.detectors[c].dark_rate_cps;
        ledger.channel_cps[c] = signal + ledger.background_cps[c] + ledger.dark_cps[c];
    }
    {
        const double s = emission_rate * config.split_ratio * config.detectors[0].efficiency;
        const double n = ledger.background_cps[0] + ledger.dark_cps[0];
        ledger.sigma = (s + n) > 0.0 ? s / (s + n) : 1.0;
    }
    const double t = config.duration_total_s();
    ledger.expected_tags = (ledger.channel_cps[0] + ledger.channel_cps[1]) * t +
                           ledger.sync_cps * t;
    return ledger;
}

TimeTagStream simulate_cw(const SimConfig& config) {
    config.validate();
    if (config.mode != SimMode::cw) throw ConfigError("simulate_cw: config mode is not cw");
    const RateLedger ledger = expected_rates(config);
    if (ledger.expected_tags > static_cast<double>(config.memory_cap_tags))
        throw ConfigError("simulate: expected tag count " +
                          std::to_string(static_cast<std::uint64_t>(ledger.expected_tags)) +
                          " exceeds the memory cap of " +
                          std::to_string(config.memory_cap_tags));

    const double horizon = config.duration_s;
    std::vector<TimeTag> ch_a;
    std::vector<TimeTag> ch_b;
    ch_a.reserve(static_cast<std::size_t>(ledger.channel_cps[0] * horizon * 1.1) + 16);
    ch_b.reserve(static_cast<std::size_t>(ledger.channel_cps[1] * horizon * 1.1) + 16);

    const bool blinking = config.emitter.blinking_active(config.pump_mw);
    const double k_off = config.emitter.blink_off_rate_at(config.pump_mw);
    for (int i = 0; i < config.emitter.n_emitters; ++i) {
        Telegraph telegraph(blinking, k_off, config.emitter.blink_on_rate_hz,
                            Rng::derive(config.rng_seed,
                                        kStreamTelegraph + static_cast<std::uint64_t>(i)));
        run_emitter_cw(config, i, horizon, telegraph, ch_a, ch_b);
    }

    if (config.background_enabled) {
        const NoiseRates bg = noise_rates(config.pump_mw, config.noise);
        for (int c = 0; c < 2; ++c) {
            Rng rng = Rng::derive(config.rng_seed,
                                  kStreamBackground + static_cast<std::uint64_t>(c));
            // Optical background passes the channel-B delay line like any photon.
            const double offset = c == 1 ? config.delay_b_ns * 1e-9 : 0.0;
            poisson_tags(rng, bg.total() * config.detectors[c].efficiency, horizon, offset,
                         static_cast<std::uint8_t>(c), c == 0 ? ch_a : ch_b);
        }
    }
    for (int c = 0; c < 2; ++c) {
        Rng rng = Rng::derive(config.rng_seed, kStreamDark + static_cast<std::uint64_t>(c));
        poisson_tags(rng, config.detectors[c].dark_rate_cps, horizon, 0.0,
                     static_cast<std::uint8_t>(c), c == 0 ? ch_a : ch_b);
    }

    return assemble(config, std::move(ch_a), std::move(ch_b), {}, horizon);
}

TimeTagStream simulate_pulsed(const SimConfig& config) {
    config.validate();
    if (config.mode != SimMode::pulsed)
        throw ConfigError("simulate_pulsed: config mode is not pulsed");
    const RateLedger ledger = expected_rates(config);
    if (ledger.expected_tags > static_cast<double>(config.memory_cap_tags))
        throw ConfigError("simulate: expected tag count " +
                          std::to_string(static_cast<std::uint64_t>(ledger.expected_tags)) +
                          " exceeds the memory cap of " +
                          std::to_string(config.memory_cap_tags));

    const double period_s = config.pulsed.rep_period_ns * 1e-9;
    const double horizon = config.duration_total_s();
    const double tau_rad_s = config.emitter.tau_rad_ns * 1e-9;
    const double tau_bg_s = config.pulsed.tau_bg_ns * 1e-9;
    const auto route = routing(config);
    const double delay_b_s = config.delay_b_ns * 1e-9;

    std::vector<TimeTag> ch_a;
    std::vector<TimeTag> ch_b;
    std::vector<TimeTag> sync;
    sync.reserve(config.pulsed.pulse_count);

    // One sync tag per pulse; emitters respond independently per pulse with
    // an exponential emission delay. Shelving is not modelled under pulsed
    // drive; the per-pulse excitation probability is a direct setting.
    Rng emitter_rng = Rng::derive(config.rng_seed, kStreamEmitter);
    for (std::uint64_t k = 0; k < config.pulsed.pulse_count; ++k) {
        const double t_pulse = static_cast<double>(k) * period_s;
        sync.push_back({to_ps(t_pulse), kChannelSync});
        for (int i = 0; i < config.emitter.n_emitters; ++i) {
            if (emitter_rng.uniform() >= config.pulsed.p_excitation) continue;
            const double t = t_pulse + emitter_rng.exponential(1.0 / tau_rad_s);
            const double v = emitter_rng.uniform();
            if (v < route.to_a)
                ch_a.push_back({to_ps(t), kChannelA});
            else if (v < route.to_ab)
                ch_b.push_back({to_ps(t + delay_b_s), kChannelB});
        }
    }

    if (config.background_enabled) {
        const NoiseRates bg = noise_rates(config.pump_mw, config.noise);
        for (int c = 0; c < 2; ++c) {
            Rng rng = Rng::derive(config.rng_seed,
                                  kStreamBackground + static_cast<std::uint64_t>(c));
            const double rate = bg.total() * config.detectors[c].efficiency;
            const double mean_per_pulse = rate * period_s;
            const double offset = c == 1 ? delay_b_s : 0.0;
            auto& out = c == 0 ? ch_a : ch_b;
            for (std::uint64_t k = 0; k < config.pulsed.pulse_count; ++k) {
                const double t_pulse = static_cast<double>(k) * period_s;
                const std::uint64_t n = rng.poisson(mean_per_pulse);
                for (std::uint64_t m = 0; m < n; ++m) {
                    const double delay = tau_bg_s > 0.0 ? rng.exponential(1.0 / tau_bg_s)
                                                        : rng.uniform() * period_s;
                    out.push_back({to_ps(t_pulse + delay + offset),
                                   static_cast<std::uint8_t>(c)});
                }
            }
        }
    }
    for (int c = 0; c < 2; ++c) {
        Rng rng = Rng::derive(config.rng_seed, kStreamDark + static_cast<std::uint64_t>(c));
        poisson_tags(rng, config.detectors[c].dark_rate_cps, horizon, 0.0,
                     static_cast<std::uint8_t>(c), c == 0 ? ch_a : ch_b);
    }

    return assemble(config, std::move(ch_a), std::move(ch_b), std::move(sync), horizon);
}

TimeTagStream simulate(const SimConfig& config) {
    return config.mode == SimMode::cw ? simulate_cw(config) : simulate_pulsed(config);
}

}  // namespace nvlink
