#include "nvlink/config_json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "nvlink/errors.hpp"
#include "nvlink/ttag_io.hpp"

namespace nvlink {

namespace {

using nlohmann::json;

// Cursor over a JSON object that tracks its pointer path, enforces key
// whitelists, and reports violations as `/path/to/key: problem`.
class Cursor {
public:
    Cursor(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
        if (!node_->is_object()) throw ConfigError(where() + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_->contains(key);
    }

    double number(const std::string& key, double fallback) {
        seen_.insert(key);
        if (!node_->contains(key)) return fallback;
        const json& v = (*node_)[key];
        if (!v.is_number()) throw ConfigError(where() + "/" + key + ": expected a number");
        return v.get<double>();
    }

    std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
        seen_.insert(key);
        if (!node_->contains(key)) return fallback;
        const json& v = (*node_)[key];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ConfigError(where() + "/" + key + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    int integer(const std::string& key, int fallback) {
        seen_.insert(key);
        if (!node_->contains(key)) return fallback;
        const json& v = (*node_)[key];
        if (!v.is_number_integer()) throw ConfigError(where() + "/" + key + ": expected an integer");
        return v.get<int>();
    }

    bool boolean(const std::string& key, bool fallback) {
        seen_.insert(key);
        if (!node_->contains(key)) return fallback;
        const json& v = (*node_)[key];
        if (!v.is_boolean()) throw ConfigError(where() + "/" + key + ": expected a boolean");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        seen_.insert(key);
        if (!node_->contains(key)) return fallback;
        const json& v = (*node_)[key];
        if (!v.is_string()) throw ConfigError(where() + "/" + key + ": expected a string");
        return v.get<std::string>();
    }

    const json& child(const std::string& key) {
        seen_.insert(key);
        return (*node_)[key];
    }

    // Call once all expected keys have been touched.
    void reject_unknown() const {
        for (auto it = node_->begin(); it != node_->end(); ++it)
            if (!seen_.contains(it.key()))
                throw ConfigError(where() + "/" + it.key() + ": unknown key");
    }

    std::string where() const { return path_.empty() ? std::string("/") : path_; }
    const std::string& path() const { return path_; }

private:
    const json* node_;
    std::string path_;
    std::set<std::string> seen_;
};

EmitterParams parse_emitter(const json& node, const std::string& path) {
    Cursor c(node, path);
    EmitterParams e;
    e.k_exc_sat_hz = c.number("k_exc_sat_hz", e.k_exc_sat_hz);
    e.tau_rad_ns = c.number("tau_rad_ns", e.tau_rad_ns);
    e.k_es_hz = c.number("k_es_hz", e.k_es_hz);
    e.k_sg_hz = c.number("k_sg_hz", e.k_sg_hz);
    e.eta_q = c.number("eta_q", e.eta_q);
    e.n_emitters = c.integer("n_emitters", e.n_emitters);
    e.blink_on_rate_hz = c.number("blink_on_rate_hz", e.blink_on_rate_hz);
    e.blink_off_rate_hz = c.number("blink_off_rate_hz", e.blink_off_rate_hz);
    e.p_sat_mw = c.number("p_sat_mw", e.p_sat_mw);
    c.reject_unknown();
    return e;
}

LinkBudget parse_budget(const json& node, const std::string& path) {
    Cursor c(node, path);
    LinkBudget b;
    b.eta_q = c.number("eta_q", b.eta_q);
    b.tau_rad_ns = c.number("tau_rad_ns", b.tau_rad_ns);
    b.purcell_f = c.number("purcell_f", b.purcell_f);
    b.tau_bulk_ns = c.number("tau_bulk_ns", b.tau_bulk_ns);
    b.eta_wg = c.number("eta_wg", b.eta_wg);
    b.eta_grating = c.number("eta_grating", b.eta_grating);
    b.eta_det = c.number("eta_det", b.eta_det);
    c.reject_unknown();
    return b;
}

NoiseBudget parse_noise(const json& node, const std::string& path) {
    Cursor c(node, path);
    NoiseBudget n;
    n.alpha1_sin = c.number("alpha1_sin_hz_per_wm", n.alpha1_sin);
    n.alpha2_sin = c.number("alpha2_sin_hz_per_wm", n.alpha2_sin);
    n.exposure_direct_wm_per_mw = c.number("exposure_direct_wm_per_mw",
                                           n.exposure_direct_wm_per_mw);
    n.exposure_guided_wm_per_mw = c.number("exposure_guided_wm_per_mw",
                                           n.exposure_guided_wm_per_mw);
    n.eta_sc = c.number("eta_sc", n.eta_sc);
    n.gamma = c.number("gamma", n.gamma);
    n.eta_wg_sin = c.number("eta_wg_sin", n.eta_wg_sin);
    n.eta_grating_sin = c.number("eta_grating_sin", n.eta_grating_sin);
    n.eta_grating_fibre = c.number("eta_grating_fibre", n.eta_grating_fibre);
    n.r_fibre_eta_det_hz_per_mw = c.number("r_fibre_eta_det_hz_per_mw",
                                           n.r_fibre_eta_det_hz_per_mw);
    n.eta_det = c.number("eta_det", n.eta_det);
    n.dark_rate_cps = c.number("dark_rate_cps", n.dark_rate_cps);
    c.reject_unknown();
    return n;
}

DetectorParams parse_detector(const json& node, const std::string& path) {
    Cursor c(node, path);
    DetectorParams d;
    d.efficiency = c.number("efficiency", d.efficiency);
    d.dark_rate_cps = c.number("dark_rate_cps", d.dark_rate_cps);
    d.dead_time_ns = c.number("dead_time_ns", d.dead_time_ns);
    d.jitter_sigma_ps = c.number("jitter_sigma_ps", d.jitter_sigma_ps);
    c.reject_unknown();
    return d;
}

json emitter_to_json(const EmitterParams& e) {
    return json{{"k_exc_sat_hz", e.k_exc_sat_hz}, {"tau_rad_ns", e.tau_rad_ns},
                {"k_es_hz", e.k_es_hz},           {"k_sg_hz", e.k_sg_hz},
                {"eta_q", e.eta_q},               {"n_emitters", e.n_emitters},
                {"blink_on_rate_hz", e.blink_on_rate_hz},
                {"blink_off_rate_hz", e.blink_off_rate_hz},
                {"p_sat_mw", e.p_sat_mw}};
}

json budget_to_json(const LinkBudget& b) {
    return json{{"eta_q", b.eta_q},       {"tau_rad_ns", b.tau_rad_ns},
                {"purcell_f", b.purcell_f}, {"tau_bulk_ns", b.tau_bulk_ns},
                {"eta_wg", b.eta_wg},     {"eta_grating", b.eta_grating},
                {"eta_det", b.eta_det}};
}

json noise_to_json(const NoiseBudget& n) {
    return json{{"alpha1_sin_hz_per_wm", n.alpha1_sin},
                {"alpha2_sin_hz_per_wm", n.alpha2_sin},
                {"exposure_direct_wm_per_mw", n.exposure_direct_wm_per_mw},
                {"exposure_guided_wm_per_mw", n.exposure_guided_wm_per_mw},
                {"eta_sc", n.eta_sc},
                {"gamma", n.gamma},
                {"eta_wg_sin", n.eta_wg_sin},
                {"eta_grating_sin", n.eta_grating_sin},
                {"eta_grating_fibre", n.eta_grating_fibre},
                {"r_fibre_eta_det_hz_per_mw", n.r_fibre_eta_det_hz_per_mw},
                {"eta_det", n.eta_det},
                {"dark_rate_cps", n.dark_rate_cps}};
}

json detector_to_json(const DetectorParams& d) {
    return json{{"efficiency", d.efficiency},
                {"dark_rate_cps", d.dark_rate_cps},
                {"dead_time_ns", d.dead_time_ns},
                {"jitter_sigma_ps", d.jitter_sigma_ps}};
}

}  // namespace

SimConfig parse_run_config(const json& doc) {
    Cursor c(doc, "");
    SimConfig cfg;

    const std::string mode = c.text("mode", "cw");
    if (mode == "cw")
        cfg.mode = SimMode::cw;
    else if (mode == "pulsed")
        cfg.mode = SimMode::pulsed;
    else
        throw ConfigError("/mode: expected \"cw\" or \"pulsed\"");

    cfg.duration_s = c.number("duration_s", cfg.duration_s);
    cfg.pulsed.pulse_count = c.unsigned_int("pulse_count", cfg.pulsed.pulse_count);
    cfg.pulsed.rep_period_ns = c.number("rep_period_ns", cfg.pulsed.rep_period_ns);
    cfg.pulsed.p_excitation = c.number("p_excitation", cfg.pulsed.p_excitation);
    cfg.pulsed.tau_bg_ns = c.number("tau_bg_ns", cfg.pulsed.tau_bg_ns);
    cfg.pump_mw = c.number("pump_mw", cfg.pump_mw);
    cfg.background_enabled = c.boolean("background_enabled", cfg.background_enabled);
    cfg.split_ratio = c.number("split_ratio", cfg.split_ratio);
    cfg.delay_b_ns = c.number("delay_b_ns", cfg.delay_b_ns);
    cfg.rng_seed = c.unsigned_int("seed", cfg.rng_seed);
    cfg.memory_cap_tags = c.unsigned_int("memory_cap_tags", cfg.memory_cap_tags);

    if (c.has("emitter")) cfg.emitter = parse_emitter(c.child("emitter"), "/emitter");
    if (c.has("budget")) cfg.budget = parse_budget(c.child("budget"), "/budget");
    if (c.has("noise")) cfg.noise = parse_noise(c.child("noise"), "/noise");
    if (c.has("detectors")) {
        const json& arr = c.child("detectors");
        if (!arr.is_array() || arr.size() > 2)
            throw ConfigError("/detectors: expected an array of at most 2 objects");
        for (std::size_t i = 0; i < arr.size(); ++i)
            cfg.detectors[i] = parse_detector(arr[i], "/detectors/" + std::to_string(i));
    }
    if (c.has("spectra")) {
        Cursor s(c.child("spectra"), "/spectra");
        s.text("grating_csv", "");
        s.text("edge_csv", "");
        s.text("emission_csv", "");
        s.reject_unknown();
    }
    c.reject_unknown();

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

SimConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return parse_run_config(doc);
}

json config_to_json(const SimConfig& cfg) {
    json doc;
    doc["mode"] = cfg.mode == SimMode::cw ? "cw" : "pulsed";
    doc["seed"] = cfg.rng_seed;
    doc["duration_s"] = cfg.duration_s;
    doc["pulse_count"] = cfg.pulsed.pulse_count;
    doc["rep_period_ns"] = cfg.pulsed.rep_period_ns;
    doc["p_excitation"] = cfg.pulsed.p_excitation;
    doc["tau_bg_ns"] = cfg.pulsed.tau_bg_ns;
    doc["pump_mw"] = cfg.pump_mw;
    doc["background_enabled"] = cfg.background_enabled;
    doc["split_ratio"] = cfg.split_ratio;
    doc["delay_b_ns"] = cfg.delay_b_ns;
    doc["memory_cap_tags"] = cfg.memory_cap_tags;
    doc["emitter"] = emitter_to_json(cfg.emitter);
    doc["budget"] = budget_to_json(cfg.budget);
    doc["noise"] = noise_to_json(cfg.noise);
    doc["detectors"] = json::array({detector_to_json(cfg.detectors[0]),
                                    detector_to_json(cfg.detectors[1])});
    return doc;
}

SpectraPaths parse_spectra_paths(const std::string& config_path, const json& doc) {
    SpectraPaths out;
    if (!doc.is_object() || !doc.contains("spectra")) return out;
    Cursor s(doc["spectra"], "/spectra");
    const std::string grating = s.text("grating_csv", "");
    const std::string edge = s.text("edge_csv", "");
    const std::string emission = s.text("emission_csv", "");
    s.reject_unknown();
    const auto base = std::filesystem::path(config_path).parent_path();
    auto resolve = [&](const std::string& p) -> std::string {
        if (p.empty()) return {};
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    out.grating_csv = resolve(grating);
    out.edge_csv = resolve(edge);
    out.emission_csv = resolve(emission);
    return out;
}

json budget_report(const SimConfig& cfg, const SpectraPaths& spectra) {
    cfg.budget.validate();
    cfg.noise.validate();

    json rep;
    rep["pump_mw"] = cfg.pump_mw;
    rep["detected_rate_cps"] = detected_rate(cfg.budget);
    rep["chain"] = json{{"eta_q", cfg.budget.eta_q},
                        {"tau_rad_ns", cfg.budget.effective_tau_rad_ns()},
                        {"radiative_rate_hz", 1e9 / cfg.budget.effective_tau_rad_ns()},
                        {"eta_wg", cfg.budget.eta_wg},
                        {"eta_grating", cfg.budget.eta_grating},
                        {"eta_det", cfg.budget.eta_det}};

    const NoiseRates at_pump = noise_rates(cfg.pump_mw, cfg.noise);
    const NoiseRates at_1mw = noise_rates(1.0, cfg.noise);
    rep["noise_at_pump_cps"] = json{{"sin_direct", at_pump.sin_direct_cps},
                                    {"sin_guided", at_pump.sin_guided_cps},
                                    {"fibre", at_pump.fibre_cps},
                                    {"total", at_pump.total()}};
    rep["noise_per_mw_cps"] = json{{"sin_direct", at_1mw.sin_direct_cps},
                                   {"sin_guided", at_1mw.sin_guided_cps},
                                   {"fibre", at_1mw.fibre_cps},
                                   {"total", at_1mw.total()}};
    rep["gamma"] = cfg.noise.gamma;
    rep["dark_rate_cps"] = cfg.noise.dark_rate_cps;
    if (at_1mw.total() > 0.0) rep["fibre_noise_fraction"] = fibre_noise_fraction(at_1mw);

    // Per-channel signal at the configured pump, with the emitter block for
    // occupancy and multiplicity; sigma includes background and dark counts.
    const double p_e = excited_state_population(cfg.emitter, cfg.pump_mw);
    const double signal_total = p_e * cfg.emitter.radiative_rate_hz() *
                                cfg.detection_probability() *
                                static_cast<double>(cfg.emitter.n_emitters);
    const double s_ch = signal_total * cfg.split_ratio;
    const double n_ch = at_pump.total() + cfg.noise.dark_rate_cps;
    rep["signal_per_channel_cps"] = s_ch;
    rep["noise_per_channel_cps"] = n_ch;
    if (s_ch + n_ch > 0.0) rep["sigma"] = snr(s_ch, n_ch);

    if (spectra.present()) {
        const SpectralCurve grating = load_spectral_curve(spectra.grating_csv);
        const SpectralCurve emission = load_spectral_curve(spectra.emission_csv);
        const double eta_grating = spectral_efficiency(grating, emission);
        json spec;
        spec["eta_grating_spectral"] = eta_grating;
        if (!spectra.edge_csv.empty()) {
            const SpectralCurve edge = load_spectral_curve(spectra.edge_csv);
            const double eta_edge = spectral_efficiency(edge, emission);
            spec["eta_edge_spectral"] = eta_edge;
            if (eta_grating > 0.0) spec["edge_to_grating_flux_ratio"] = eta_edge / eta_grating;
        }
        rep["spectra"] = spec;
    }
    return rep;
}

std::string budget_table(const json& rep) {
    std::ostringstream out;
    auto line = [&](const std::string& k, double v, const std::string& unit) {
        out << "  " << k;
        for (std::size_t i = k.size(); i < 34; ++i) out << ' ';
        out << v << (unit.empty() ? "" : " " + unit) << "\n";
    };
    out << "photon budget\n";
    line("detected rate (saturated)", rep["detected_rate_cps"].get<double>(), "counts/s");
    const auto& chain = rep["chain"];
    line("  eta_q", chain["eta_q"].get<double>(), "");
    line("  1/tau_rad", chain["radiative_rate_hz"].get<double>(), "Hz");
    line("  eta_wg", chain["eta_wg"].get<double>(), "");
    line("  eta_grating", chain["eta_grating"].get<double>(), "");
    line("  eta_det", chain["eta_det"].get<double>(), "");
    out << "background per grating output @ " << rep["pump_mw"].get<double>() << " mW\n";
    const auto& noise = rep["noise_at_pump_cps"];
    line("  SiN direct", noise["sin_direct"].get<double>(), "counts/s");
    line("  SiN guided-pump", noise["sin_guided"].get<double>(), "counts/s");
    line("  fibre fluorescence", noise["fibre"].get<double>(), "counts/s");
    line("  total", noise["total"].get<double>(), "counts/s");
    if (rep.contains("fibre_noise_fraction"))
        line("fibre fraction of background", rep["fibre_noise_fraction"].get<double>(), "");
    line("detector dark rate", rep["dark_rate_cps"].get<double>(), "counts/s");
    if (rep.contains("sigma")) line("sigma = S/(S+N) per channel", rep["sigma"].get<double>(), "");
    if (rep.contains("spectra")) {
        const auto& spec = rep["spectra"];
        out << "spectrum-weighted couplers\n";
        line("  eta_grating", spec["eta_grating_spectral"].get<double>(), "");
        if (spec.contains("eta_edge_spectral")) {
            line("  eta_edge", spec["eta_edge_spectral"].get<double>(), "");
            line("  edge/grating flux ratio", spec["edge_to_grating_flux_ratio"].get<double>(),
                 "");
        }
    }
    return out.str();
}

json make_manifest(const SimConfig& config, const std::string& output_path,
                   std::uint64_t output_hash, std::uint64_t record_count,
                   std::uint64_t duration_ps, const RateLedger& ledger,
                   const json& observed) {
    json m;
    m["tool"] = "nvlink simulate";
    m["manifest_version"] = 1;
    m["seed"] = config.rng_seed;
    m["config"] = config_to_json(config);
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(m["config"].dump())));
    m["config_hash_fnv1a64"] = hash_hex;
    m["output"] = output_path;
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(output_hash));
    m["output_hash_fnv1a64"] = hash_hex;
    m["record_count"] = record_count;
    m["duration_ps"] = duration_ps;
    m["expected_rates"] = json{{"signal_total_cps", ledger.signal_total_cps},
                               {"channel_a_cps", ledger.channel_cps[0]},
                               {"channel_b_cps", ledger.channel_cps[1]},
                               {"background_a_cps", ledger.background_cps[0]},
                               {"background_b_cps", ledger.background_cps[1]},
                               {"dark_a_cps", ledger.dark_cps[0]},
                               {"dark_b_cps", ledger.dark_cps[1]},
                               {"sync_cps", ledger.sync_cps},
                               {"blink_duty", ledger.blink_duty},
                               {"sigma", ledger.sigma},
                               {"expected_tags", ledger.expected_tags}};
    m["observed"] = observed;
    return m;
}

template <typename P>
static json fit_common(const FitResult<P>& r) {
    json doc;
    doc["converged"] = r.converged;
    doc["iterations"] = r.iterations;
    doc["rss"] = r.rss;
    doc["flags"] = r.flags;
    return doc;
}

json fit_report(const FitResult<LifetimeParams>& r) {
    json doc = fit_common(r);
    doc["model"] = "lifetime";
    doc["params"] = json{{"i_1", r.params.i_1},       {"t_1_ns", r.params.t_1_ns},
                         {"i_2", r.params.i_2},       {"t_2_ns", r.params.t_2_ns},
                         {"i_bias", r.params.i_bias}, {"t_0_ns", r.params.t_0_ns}};
    doc["uncertainties"] = json{{"i_1", r.uncertainty.i_1},
                                {"t_1_ns", r.uncertainty.t_1_ns},
                                {"i_2", r.uncertainty.i_2},
                                {"t_2_ns", r.uncertainty.t_2_ns},
                                {"i_bias", r.uncertainty.i_bias},
                                {"t_0_ns", r.uncertainty.t_0_ns}};
    return doc;
}

json fit_report(const FitResult<SaturationParams>& r) {
    json doc = fit_common(r);
    doc["model"] = "saturation";
    doc["params"] = json{{"r_sat_cps", r.params.r_sat_cps},
                         {"p_sat_mw", r.params.p_sat_mw},
                         {"a_cps_per_mw", r.params.a_cps_per_mw},
                         {"b_cps", r.params.b_cps}};
    doc["uncertainties"] = json{{"r_sat_cps", r.uncertainty.r_sat_cps},
                                {"p_sat_mw", r.uncertainty.p_sat_mw},
                                {"a_cps_per_mw", r.uncertainty.a_cps_per_mw},
                                {"b_cps", r.uncertainty.b_cps}};
    return doc;
}

json fit_report(const G2FitResult& r, std::optional<double> sigma_applied) {
    json doc = fit_common(static_cast<const FitResult<G2Params>&>(r));
    doc["model"] = "g2";
    doc["params"] = json{{"p_ge", r.params.p_ge},
                         {"tau_ge_ns", r.params.tau_ge_ns},
                         {"p_s", r.params.p_s},
                         {"tau_s_ns", r.params.tau_s_ns},
                         {"tau_0_ns", r.params.tau_0_ns}};
    doc["uncertainties"] = json{{"p_ge", r.uncertainty.p_ge},
                                {"tau_ge_ns", r.uncertainty.tau_ge_ns},
                                {"p_s", r.uncertainty.p_s},
                                {"tau_s_ns", r.uncertainty.tau_s_ns},
                                {"tau_0_ns", r.uncertainty.tau_0_ns}};
    // When sigma was given the histogram was background-corrected bin-wise
    // before fitting, so the dip value is already in the corrected domain.
    doc["g2_at_dip"] = r.g2_at_dip;
    doc["g2_at_dip_err"] = r.g2_at_dip_err;
    if (sigma_applied) doc["sigma_applied"] = *sigma_applied;
    if (r.g2_at_dip < 1.0) {
        const EmitterCountEstimate est = estimate_emitter_count(r.g2_at_dip);
        doc["n_emitters_estimate"] = est.n;
        doc["n_emitters_residual"] = est.residual;
    }
    return doc;
}

}  // namespace nvlink
