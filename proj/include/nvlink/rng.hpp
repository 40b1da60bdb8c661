#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Deterministic random number generation. The algorithm identity is part of
// the reproducibility contract: identical (seed, stream id) pairs yield
// bit-identical draw sequences on every platform.
//
//   * core generator: xoshiro256++ (Blackman & Vigna)
//   * state expansion and stream derivation: splitmix64
//   * exponential: inversion, -log1p(-u)/rate
//   * normal: Box-Muller, cosine branch first
//
// Subsystems of a simulation (each emitter, each background channel, the
// telegraph, the jitter of each detector) derive independent streams from the
// run seed, so enabling one subsystem never perturbs the draws of another.

namespace nvlink {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& s : state_) s = sm.next();
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    // Independent stream for a named subsystem of the same run.
    static Rng derive(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(seed ^ (stream_id * 0x9E3779B97F4A7C15ULL + 0x6A09E667F3BCC909ULL));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Exponential waiting time; rate in any unit, result in its inverse.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // Standard normal deviate.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    // Poisson count: product method below mean 10, Hormann's PTRS
    // transformed rejection above (exact for all means).
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 10.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= 1.0 - uniform();
            } while (p > limit);
            return k - 1;
        }
        const double ln_mean = std::log(mean);
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::abs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * ln_mean - mean - std::lgamma(kf + 1.0))
                return static_cast<std::uint64_t>(kf);
        }
    }

    // Trials up to and including the first success, success probability p.
    std::uint64_t geometric(double p) {
        if (p >= 1.0) return 1;
        const double u = uniform();
        return 1 + static_cast<std::uint64_t>(std::log1p(-u) / std::log1p(-p));
    }

    // Gamma(shape, rate) for shape >= 1 by Marsaglia-Tsang squeeze.
    double gamma(double shape, double rate) {
        if (shape == 1.0) return exponential(rate);
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace nvlink
