#include "nvlink/linkbudget.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nvlink/errors.hpp"

namespace nvlink {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

double LinkBudget::effective_tau_rad_ns() const {
    if (tau_rad_ns > 0.0) return tau_rad_ns;
    return tau_bulk_ns / purcell_f;
}

void LinkBudget::validate() const {
    require(in_unit_interval(eta_q), "budget: eta_q must be in [0, 1]");
    require(in_unit_interval(eta_wg), "budget: eta_wg must be in [0, 1]");
    require(in_unit_interval(eta_grating), "budget: eta_grating must be in [0, 1]");
    require(in_unit_interval(eta_det), "budget: eta_det must be in [0, 1]");
    require(tau_rad_ns >= 0.0, "budget: tau_rad_ns must be >= 0");
    if (tau_rad_ns == 0.0) {
        require(purcell_f > 0.0, "budget: purcell_f must be > 0 when tau_rad_ns is derived");
        require(tau_bulk_ns > 0.0, "budget: tau_bulk_ns must be > 0 when tau_rad_ns is derived");
    }
    require(effective_tau_rad_ns() > 0.0, "budget: effective tau_rad must be > 0");
}

double detected_rate(const LinkBudget& budget) {
    budget.validate();
    const double tau_rad_s = budget.effective_tau_rad_ns() * 1e-9;
    return budget.eta_q * (1.0 / tau_rad_s) * budget.eta_wg * budget.eta_grating *
           budget.eta_det;
}

void SpectralCurve::validate() const {
    if (samples.size() < 2) throw DataError("spectral curve: need at least 2 samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].value < 0.0)
            throw DataError("spectral curve: negative value at sample " + std::to_string(i));
        if (i > 0 && samples[i].wavelength_nm <= samples[i - 1].wavelength_nm)
            throw DataError("spectral curve: wavelengths must be strictly increasing (sample " +
                            std::to_string(i) + ")");
    }
}

double SpectralCurve::value_at(double wavelength_nm) const {
    if (wavelength_nm < min_wavelength() || wavelength_nm > max_wavelength()) return 0.0;
    // Find the first sample at or beyond the query point.
    auto it = std::lower_bound(samples.begin(), samples.end(), wavelength_nm,
                               [](const Sample& s, double w) { return s.wavelength_nm < w; });
    if (it == samples.begin()) return it->value;
    if (it == samples.end()) return samples.back().value;
    const Sample& hi = *it;
    const Sample& lo = *(it - 1);
    const double f = (wavelength_nm - lo.wavelength_nm) / (hi.wavelength_nm - lo.wavelength_nm);
    return lo.value + f * (hi.value - lo.value);
}

SpectralCurve parse_spectral_curve(const std::string& text, const std::string& origin) {
    SpectralCurve curve;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "wavelength_nm,value")
                throw DataError(origin + ": expected header 'wavelength_nm,value' at line " +
                                std::to_string(line_no));
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError(origin + ": missing comma at line " + std::to_string(line_no));
        try {
            std::size_t used = 0;
            const double w = std::stod(line.substr(0, comma), &used);
            const double v = std::stod(line.substr(comma + 1), &used);
            curve.samples.push_back({w, v});
        } catch (const std::exception&) {
            throw DataError(origin + ": non-numeric row at line " + std::to_string(line_no));
        }
    }
    if (!header_seen) throw DataError(origin + ": empty curve file");
    curve.validate();
    return curve;
}

SpectralCurve load_spectral_curve(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open spectral curve file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_spectral_curve(buf.str(), path);
}

double spectral_efficiency(const SpectralCurve& coupler, const SpectralCurve& emission) {
    coupler.validate();
    emission.validate();
    if (coupler.max_wavelength() < emission.min_wavelength() ||
        coupler.min_wavelength() > emission.max_wavelength())
        throw DataError("spectral_efficiency: coupler and emission wavelength ranges are disjoint");

    // Union grid over the emission support; both integrals share it so that
    // uniform rescaling of the emission cancels exactly.
    std::vector<double> grid;
    grid.reserve(coupler.samples.size() + emission.samples.size());
    for (const auto& s : emission.samples) grid.push_back(s.wavelength_nm);
    for (const auto& s : coupler.samples)
        if (s.wavelength_nm >= emission.min_wavelength() &&
            s.wavelength_nm <= emission.max_wavelength())
            grid.push_back(s.wavelength_nm);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double dl = grid[i] - grid[i - 1];
        const double e0 = emission.value_at(grid[i - 1]);
        const double e1 = emission.value_at(grid[i]);
        const double p0 = coupler.value_at(grid[i - 1]) * e0;
        const double p1 = coupler.value_at(grid[i]) * e1;
        num += 0.5 * (p0 + p1) * dl;
        den += 0.5 * (e0 + e1) * dl;
    }
    if (den <= 0.0) throw DataError("spectral_efficiency: emission spectrum integrates to zero");
    return num / den;
}

void NoiseBudget::validate() const {
    require(alpha1_sin >= 0.0 && alpha2_sin >= 0.0, "noise: alpha responses must be >= 0");
    require(exposure_direct_wm_per_mw >= 0.0 && exposure_guided_wm_per_mw >= 0.0,
            "noise: exposure composites must be >= 0");
    require(gamma >= 1.0, "noise: gamma must be >= 1");
    require(in_unit_interval(eta_sc), "noise: eta_sc must be in [0, 1]");
    require(in_unit_interval(eta_wg_sin), "noise: eta_wg_sin must be in [0, 1]");
    require(in_unit_interval(eta_grating_sin), "noise: eta_grating_sin must be in [0, 1]");
    require(in_unit_interval(eta_grating_fibre), "noise: eta_grating_fibre must be in [0, 1]");
    require(in_unit_interval(eta_det), "noise: eta_det must be in [0, 1]");
    require(r_fibre_eta_det_hz_per_mw >= 0.0, "noise: fibre rate must be >= 0");
    require(dark_rate_cps >= 0.0, "noise: dark rate must be >= 0");
}

NoiseRates noise_rates(double pump_mw, const NoiseBudget& nb) {
    if (pump_mw < 0.0) throw ConfigError("noise_rates: pump power must be >= 0");
    nb.validate();
    NoiseRates r;
    const double sin_chain = nb.eta_wg_sin * nb.eta_grating_sin * nb.eta_det;
    r.sin_direct_cps = nb.alpha1_sin * nb.exposure_direct_wm_per_mw * pump_mw * sin_chain;
    r.sin_guided_cps = nb.alpha2_sin * nb.exposure_guided_wm_per_mw * nb.eta_sc * nb.gamma *
                       pump_mw * sin_chain;
    r.fibre_cps = nb.r_fibre_eta_det_hz_per_mw * pump_mw * nb.eta_sc * nb.gamma *
                  nb.eta_grating_fibre;
    return r;
}

double fibre_noise_fraction(const NoiseRates& rates) {
    const double total = rates.total();
    if (total <= 0.0)
        throw ConfigError("fibre_noise_fraction: at least one background rate must be > 0");
    return rates.fibre_cps / total;
}

double snr(double signal_cps, double noise_cps) {
    if (signal_cps < 0.0 || noise_cps < 0.0)
        throw ConfigError("snr: rates must be >= 0");
    const double total = signal_cps + noise_cps;
    if (total <= 0.0) throw ConfigError("snr: signal + noise must be > 0");
    return signal_cps / total;
}

void BleachState::validate() const {
    require(tau_fast_s > 0.0 && tau_slow_s > 0.0, "bleach: time constants must be > 0");
    require(amp_fast >= 0.0 && amp_slow >= 0.0, "bleach: amplitudes must be >= 0");
    require(floor > 0.0 && floor <= 1.0, "bleach: residual floor must be in (0, 1]");
    require(ref_power_mw > 0.0, "bleach: reference power must be > 0");
}

double bleach_factor(double t_exposure_s, const BleachState& state) {
    if (t_exposure_s < 0.0) throw ConfigError("bleach_factor: exposure time must be >= 0");
    state.validate();
    return state.amp_fast * std::exp(-t_exposure_s / state.tau_fast_s) +
           state.amp_slow * std::exp(-t_exposure_s / state.tau_slow_s) + state.floor;
}

double bleach_factor(double t_exposure_s, double pump_mw, const BleachState& state) {
    if (pump_mw < 0.0) throw ConfigError("bleach_factor: pump power must be >= 0");
    return bleach_factor(t_exposure_s * pump_mw / state.ref_power_mw, state);
}

}  // namespace nvlink
