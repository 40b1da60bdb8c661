#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>

#include "nvlink/errors.hpp"
#include "nvlink/linkbudget.hpp"
#include "nvlink/rng.hpp"

using namespace nvlink;

namespace {
const std::string kDataDir = NVLINK_DATA_DIR;
}

TEST_CASE("detected rate reproduces the device estimate") {
    LinkBudget b;  // defaults are the device values
    CHECK(detected_rate(b) == doctest::Approx(2646.0).epsilon(1e-9));

    LinkBudget unity;
    unity.eta_q = 1.0;
    unity.tau_rad_ns = 1e9;  // 1 s
    unity.eta_wg = 1.0;
    unity.eta_grating = 1.0;
    unity.eta_det = 1.0;
    CHECK(detected_rate(unity) == doctest::Approx(1.0).epsilon(1e-12));

    LinkBudget best;
    best.eta_q = 1.0;
    best.tau_rad_ns = 10.0;
    best.eta_wg = 0.28;
    best.eta_grating = 0.17;
    best.eta_det = 1.0;
    CHECK(detected_rate(best) == doctest::Approx(4.76e6).epsilon(1e-9));
}

TEST_CASE("detected rate is multiplicative in each efficiency") {
    LinkBudget b;
    const double base = detected_rate(b);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const double c = 0.05 + 0.9 * rng.uniform();
        LinkBudget s = b;
        switch (i % 4) {
            case 0: s.eta_q *= c; break;
            case 1: s.eta_wg *= c; break;
            case 2: s.eta_grating *= c; break;
            default: s.eta_det *= c; break;
        }
        CHECK(detected_rate(s) == doctest::Approx(base * c).epsilon(1e-12));
    }
}

TEST_CASE("purcell route for the radiative lifetime") {
    LinkBudget b;
    b.tau_rad_ns = 0.0;  // derive from F
    b.purcell_f = 1.2;
    b.tau_bulk_ns = 12.0;
    CHECK(b.effective_tau_rad_ns() == doctest::Approx(10.0));
    b.tau_rad_ns = 8.0;  // explicit value wins
    CHECK(b.effective_tau_rad_ns() == doctest::Approx(8.0));
}

TEST_CASE("spectral curve parsing") {
    const std::string good = "# comment\nwavelength_nm,value\n600,0.1\n610,0.2\n620,0.15\n";
    const SpectralCurve c = parse_spectral_curve(good, "inline");
    CHECK(c.samples.size() == 3);
    CHECK(c.value_at(605.0) == doctest::Approx(0.15));
    CHECK(c.value_at(599.0) == 0.0);
    CHECK(c.value_at(621.0) == 0.0);

    CHECK_THROWS_AS(parse_spectral_curve("wavelength_nm,value\n600,0.1\n", "x"), DataError);
    CHECK_THROWS_AS(parse_spectral_curve("wavelength_nm,value\n600,0.1\n590,0.2\n", "x"),
                    DataError);
    CHECK_THROWS_AS(parse_spectral_curve("wavelength_nm,value\n600,0.1\n610,-0.2\n", "x"),
                    DataError);
    CHECK_THROWS_AS(parse_spectral_curve("bad header\n600,0.1\n", "x"), DataError);
    CHECK_THROWS_AS(parse_spectral_curve("wavelength_nm,value\n600,abc\n610,0.2\n", "x"),
                    DataError);
}

TEST_CASE("spectral efficiency with a constant coupler") {
    SpectralCurve coupler;
    coupler.samples = {{500.0, 0.3}, {900.0, 0.3}};
    SpectralCurve emission;
    emission.samples = {{600.0, 0.1}, {650.0, 1.0}, {700.0, 0.6}, {800.0, 0.05}};
    CHECK(spectral_efficiency(coupler, emission) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("spectral efficiency of the shipped curves") {
    const SpectralCurve grating = load_spectral_curve(kDataDir + "/grating_coupler.csv");
    const SpectralCurve edge = load_spectral_curve(kDataDir + "/edge_coupler.csv");
    const SpectralCurve emission = load_spectral_curve(kDataDir + "/nv_pl_spectrum.csv");

    const double eta_grating = spectral_efficiency(grating, emission);
    CHECK(eta_grating == doctest::Approx(0.02).epsilon(0.25));  // 0.02 +- 0.005

    const double eta_edge = spectral_efficiency(edge, emission);
    const double ratio = eta_edge / eta_grating;
    CHECK(ratio > 25.0);
    CHECK(ratio < 45.0);

    // Bounded by the coupler maximum; invariant under emission rescaling.
    double coupler_max = 0.0;
    for (const auto& s : grating.samples) coupler_max = std::max(coupler_max, s.value);
    CHECK(eta_grating <= coupler_max);

    SpectralCurve scaled = emission;
    for (auto& s : scaled.samples) s.value *= 37.5;
    CHECK(spectral_efficiency(grating, scaled) == doctest::Approx(eta_grating).epsilon(1e-12));
}

TEST_CASE("spectral efficiency rejects disjoint ranges") {
    SpectralCurve coupler;
    coupler.samples = {{400.0, 0.2}, {450.0, 0.2}};
    SpectralCurve emission;
    emission.samples = {{600.0, 1.0}, {700.0, 1.0}};
    CHECK_THROWS_AS(spectral_efficiency(coupler, emission), DataError);
}

TEST_CASE("noise rates reproduce the measured ledger") {
    NoiseBudget nb;  // gamma = 3 defaults
    const NoiseRates zero = noise_rates(0.0, nb);
    CHECK(zero.total() == 0.0);

    const NoiseRates r = noise_rates(1.0, nb);
    CHECK(r.sin_direct_cps == doctest::Approx(8.0).epsilon(0.05));
    CHECK(r.sin_guided_cps == doctest::Approx(0.9).epsilon(0.05));
    CHECK(r.fibre_cps == doctest::Approx(156.0).epsilon(0.05));

    NoiseBudget no_scatter = nb;
    no_scatter.gamma = 1.0;
    const NoiseRates r1 = noise_rates(1.0, no_scatter);
    CHECK(r1.fibre_cps == doctest::Approx(52.0).epsilon(0.01));
    CHECK(r1.sin_direct_cps == doctest::Approx(r.sin_direct_cps).epsilon(1e-12));
    CHECK(r1.sin_guided_cps == doctest::Approx(r.sin_guided_cps / 3.0).epsilon(1e-12));
}

TEST_CASE("noise rates are homogeneous in pump and gamma") {
    NoiseBudget nb;
    Rng rng(17);
    for (int i = 0; i < 20; ++i) {
        const double p = 0.1 + 10.0 * rng.uniform();
        const double c = 0.5 + 4.0 * rng.uniform();
        const NoiseRates a = noise_rates(p, nb);
        const NoiseRates b = noise_rates(c * p, nb);
        CHECK(b.sin_direct_cps == doctest::Approx(c * a.sin_direct_cps).epsilon(1e-12));
        CHECK(b.sin_guided_cps == doctest::Approx(c * a.sin_guided_cps).epsilon(1e-12));
        CHECK(b.fibre_cps == doctest::Approx(c * a.fibre_cps).epsilon(1e-12));

        NoiseBudget scaled = nb;
        scaled.gamma = nb.gamma * (1.0 + rng.uniform());
        const NoiseRates g = noise_rates(p, scaled);
        const double factor = scaled.gamma / nb.gamma;
        CHECK(g.sin_direct_cps == doctest::Approx(a.sin_direct_cps).epsilon(1e-12));
        CHECK(g.sin_guided_cps == doctest::Approx(factor * a.sin_guided_cps).epsilon(1e-12));
        CHECK(g.fibre_cps == doctest::Approx(factor * a.fibre_cps).epsilon(1e-12));
    }
}

TEST_CASE("fibre noise fraction") {
    CHECK(fibre_noise_fraction({8.0, 0.9, 156.0}) == doctest::Approx(0.946).epsilon(0.001));
    CHECK(fibre_noise_fraction({0.0, 0.0, 42.0}) == doctest::Approx(1.0));
    CHECK(fibre_noise_fraction({8.0, 0.3, 52.0}) == doctest::Approx(0.862).epsilon(0.001));
    CHECK_THROWS_AS(fibre_noise_fraction({0.0, 0.0, 0.0}), ConfigError);

    Rng rng(23);
    for (int i = 0; i < 50; ++i) {
        const NoiseRates r{10.0 * rng.uniform(), 10.0 * rng.uniform(),
                           10.0 * rng.uniform() + 1e-6};
        const double f = fibre_noise_fraction(r);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
}

TEST_CASE("signal-to-noise ratio") {
    CHECK(snr(1000.0, 0.0) == doctest::Approx(1.0));
    CHECK(snr(0.0, 1000.0) == doctest::Approx(0.0));
    // Operating point: per-channel signal 948 against background+dark 1310.
    CHECK(snr(948.0, 1310.0) == doctest::Approx(0.42).epsilon(0.01));
    CHECK_THROWS_AS(snr(0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(snr(-1.0, 1.0), ConfigError);
}

TEST_CASE("bleaching anchors and monotonicity") {
    BleachState s;
    CHECK(bleach_factor(0.0, s) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(bleach_factor(50.0, s) == doctest::Approx(0.50).epsilon(0.10));
    CHECK(bleach_factor(1800.0, s) == doctest::Approx(0.10).epsilon(0.30));

    double prev = 2.0;
    for (double t = 0.0; t < 4000.0; t += 13.0) {
        const double v = bleach_factor(t, s);
        CHECK(v <= prev);
        CHECK(v >= s.floor - 1e-12);
        prev = v;
    }

    // Dose scaling: 25 s at 4 mW equals 50 s at the 2 mW reference.
    CHECK(bleach_factor(25.0, 4.0, s) == doctest::Approx(bleach_factor(50.0, s)).epsilon(1e-12));
    CHECK_THROWS_AS(bleach_factor(-1.0, s), ConfigError);
}
