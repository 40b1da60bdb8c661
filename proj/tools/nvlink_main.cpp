// nvlink: simulate and analyze time-tagged photon detection from a
// waveguide-coupled emitter. Subcommands tie the simulator, correlator,
// fitters and the photon/noise budget together over bit-exact file formats.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nvlink/config_json.hpp"
#include "nvlink/correlator.hpp"
#include "nvlink/errors.hpp"
#include "nvlink/fitters.hpp"
#include "nvlink/montecarlo.hpp"
#include "nvlink/ttag_io.hpp"

namespace {

using nlohmann::json;
using namespace nvlink;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNoConvergence = 4;

int resolve_threads(int requested) {
    int cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap < 1) cap = 1;
    if (const char* env = std::getenv("NVLINK_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed >= 1) cap = std::min(cap, parsed);
    }
    if (requested < 1) requested = 1;
    return std::min(requested, cap);
}

void emit(const std::string& out_path, const std::string& contents) {
    if (out_path.empty())
        std::cout << contents;
    else
        atomic_write_file(out_path, contents);
}

std::string correlation_csv(const CorrelationHistogram& h) {
    std::ostringstream out;
    out.precision(10);
    out << "# nvlink correlate\n";
    out << "# bin_width_ps=" << h.bin_width_ps << " lag_min_ps=" << h.lag_min_ps
        << " lag_max_ps=" << h.lag_max_ps << "\n";
    out << "# acquisition_s=" << h.acquisition_s << " rate_a_cps=" << h.rate_a_cps
        << " rate_b_cps=" << h.rate_b_cps << "\n";
    out << "lag_ps,counts,g2\n";
    for (std::size_t i = 0; i < h.bin_count(); ++i) {
        const std::int64_t center = h.lag_lower_ps(i) + h.bin_width_ps / 2;
        out << center << "," << h.counts[i] << ",";
        if (h.normalization_valid)
            out << h.g2[i];
        else
            out << "nan";
        out << "\n";
    }
    return out.str();
}

std::string lifetime_csv(const LifetimeHistogram& h) {
    std::ostringstream out;
    out << "# nvlink lifetime\n";
    out << "# bin_width_ps=" << h.bin_width_ps << " range_ps=" << h.range_ps
        << " sync_count=" << h.sync_count << "\n";
    out << "delay_ps,counts\n";
    for (std::size_t i = 0; i < h.bin_count(); ++i)
        out << h.bin_width_ps * static_cast<std::int64_t>(i) + h.bin_width_ps / 2 << ","
            << h.counts[i] << "\n";
    return out.str();
}

std::string trace_csv(const IntensityTrace& t) {
    std::ostringstream out;
    out.precision(10);
    out << "# nvlink trace\n";
    out << "# bin_s=" << t.bin_s << "\n";
    out << "t_s,counts\n";
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        out << t.start_s + static_cast<double>(i) * t.bin_s << "," << t.counts[i] << "\n";
    return out.str();
}

// Numeric CSV reader tolerant of '#' comments; enforces the expected header.
std::vector<std::vector<double>> read_csv(const std::string& path,
                                          const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    const std::size_t n_cols = 1 + static_cast<std::size_t>(std::count(
                                       expected_header.begin(), expected_header.end(), ','));
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != expected_header)
                throw DataError(path + ": expected header '" + expected_header + "', got '" +
                                line + "' at line " + std::to_string(line_no));
            header_seen = true;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError(path + ": non-numeric cell '" + cell + "' at line " +
                                std::to_string(line_no));
            }
        }
        if (row.size() != n_cols)
            throw DataError(path + ": expected " + std::to_string(n_cols) +
                            " columns at line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw DataError(path + ": missing header");
    if (rows.empty()) throw DataError(path + ": no data rows");
    return rows;
}

CorrelationHistogram histogram_from_csv(const std::string& path) {
    const auto rows = read_csv(path, "lag_ps,counts,g2");
    if (rows.size() < 2) throw DataError(path + ": need at least 2 bins");
    CorrelationHistogram h;
    const double width = rows[1][0] - rows[0][0];
    if (width <= 0.0) throw DataError(path + ": lag values must increase");
    h.bin_width_ps = static_cast<std::int64_t>(std::llround(width));
    h.lag_min_ps = static_cast<std::int64_t>(std::llround(rows[0][0])) - h.bin_width_ps / 2;
    h.lag_max_ps = h.lag_min_ps + h.bin_width_ps * static_cast<std::int64_t>(rows.size());
    for (const auto& r : rows) {
        h.counts.push_back(static_cast<std::uint64_t>(std::llround(r[1])));
        h.g2.push_back(r[2]);
    }
    // Recover the normalization from any counted bin so fit weights follow
    // Poisson statistics; synthetic histograms without counts fall back to
    // unit weights.
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        if (h.counts[i] > 0 && h.g2[i] > 0.0 && std::isfinite(h.g2[i])) {
            h.norm_denominator = static_cast<double>(h.counts[i]) / h.g2[i];
            h.normalization_valid = true;
            break;
        }
    }
    return h;
}

LifetimeHistogram lifetime_from_csv(const std::string& path) {
    const auto rows = read_csv(path, "delay_ps,counts");
    if (rows.size() < 2) throw DataError(path + ": need at least 2 bins");
    LifetimeHistogram h;
    const double width = rows[1][0] - rows[0][0];
    if (width <= 0.0) throw DataError(path + ": delay values must increase");
    h.bin_width_ps = static_cast<std::int64_t>(std::llround(width));
    h.range_ps = h.bin_width_ps * static_cast<std::int64_t>(rows.size());
    h.sync_count = 1;
    for (const auto& r : rows)
        h.counts.push_back(static_cast<std::uint64_t>(std::llround(r[1])));
    return h;
}

json observed_rates(const TimeTagStream& stream) {
    std::uint64_t n[3] = {0, 0, 0};
    for (const auto& tag : stream.tags)
        if (tag.channel < 3) ++n[tag.channel];
    const double t = stream.acquisition_s();
    json doc;
    doc["record_count"] = stream.tags.size();
    doc["channel_a_count"] = n[0];
    doc["channel_b_count"] = n[1];
    doc["sync_count"] = n[2];
    if (t > 0.0) {
        doc["channel_a_cps"] = static_cast<double>(n[0]) / t;
        doc["channel_b_cps"] = static_cast<double>(n[1]) / t;
    }
    return doc;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed, std::string manifest_path) {
    SimConfig config = load_run_config(config_path);
    if (seed) config.rng_seed = *seed;
    const RateLedger ledger = expected_rates(config);
    const TimeTagStream stream = simulate(config);
    const std::string bytes = ttag_to_bytes(stream);
    atomic_write_file(out_path, bytes);

    if (manifest_path.empty()) manifest_path = out_path + ".manifest.json";
    const json manifest =
        make_manifest(config, out_path, fnv1a64(bytes), stream.tags.size(),
                      stream.duration_ps, ledger, observed_rates(stream));
    atomic_write_file(manifest_path, manifest.dump(2) + "\n");
    std::cerr << "nvlink: wrote " << stream.tags.size() << " tags to " << out_path << "\n";
    return 0;
}

int cmd_repro(const std::string& manifest_path, const std::string& out_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path);
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("manifest " + manifest_path + ": " + e.what());
    }
    if (!manifest.contains("config") || !manifest.contains("output_hash_fnv1a64"))
        throw DataError("manifest " + manifest_path + ": missing config or output hash");

    const SimConfig config = parse_run_config(manifest["config"]);
    const TimeTagStream stream = simulate(config);
    const std::string bytes = ttag_to_bytes(stream);
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    const std::string recorded = manifest["output_hash_fnv1a64"].get<std::string>();
    if (!out_path.empty()) atomic_write_file(out_path, bytes);
    if (recorded != hash_hex) {
        std::cerr << "nvlink repro: MISMATCH: replay hash " << hash_hex
                  << " != recorded " << recorded << "\n";
        return kExitData;
    }
    std::cerr << "nvlink repro: ok (" << stream.tags.size() << " tags, hash " << hash_hex
              << ")\n";
    return 0;
}

int cmd_correlate(const std::string& in_path, int ch_a, int ch_b, std::int64_t bin_width_ps,
                  std::int64_t window_ps, const std::string& out_path, bool verify_oracle,
                  int threads) {
    const TimeTagStream stream = read_ttag(in_path);
    const CorrelationHistogram h = cross_correlate(stream, ch_a, ch_b, bin_width_ps,
                                                   -window_ps, window_ps,
                                                   resolve_threads(threads));
    if (verify_oracle) {
        const CorrelationHistogram ref =
            brute_force_correlate(stream, ch_a, ch_b, bin_width_ps, -window_ps, window_ps);
        if (ref.counts != h.counts) {
            std::cerr << "nvlink correlate: ORACLE MISMATCH against brute force\n";
            return 1;
        }
        std::cerr << "nvlink correlate: oracle check passed\n";
    }
    emit(out_path, correlation_csv(h));
    return 0;
}

int cmd_lifetime(const std::string& in_path, int sync_ch, int det_ch,
                 std::int64_t bin_width_ps, double range_ns, const std::string& out_path) {
    const TimeTagStream stream = read_ttag(in_path);
    const auto range_ps = static_cast<std::int64_t>(std::llround(range_ns * 1e3));
    const std::int64_t snapped = (range_ps / bin_width_ps) * bin_width_ps;
    const LifetimeHistogram h =
        lifetime_histogram(stream, sync_ch, det_ch, bin_width_ps,
                           snapped > 0 ? snapped : bin_width_ps);
    emit(out_path, lifetime_csv(h));
    return 0;
}

int cmd_trace(const std::string& in_path, int ch, double bin_s, const std::string& out_path) {
    const TimeTagStream stream = read_ttag(in_path);
    emit(out_path, trace_csv(intensity_trace(stream, ch, bin_s)));
    return 0;
}

int cmd_fit(const std::string& in_path, const std::string& model,
            std::optional<double> sigma, bool reduced, int max_iterations,
            const std::string& out_path) {
    FitOptions options;
    if (max_iterations > 0) options.max_iterations = max_iterations;

    json report;
    bool converged = true;
    if (model == "g2") {
        CorrelationHistogram h = histogram_from_csv(in_path);
        if (sigma) h = correct_background(h, *sigma);
        const G2FitResult r = fit_g2(h, options);
        converged = r.converged;
        report = fit_report(r, sigma);
    } else if (model == "lifetime") {
        const LifetimeHistogram h = lifetime_from_csv(in_path);
        const auto r = fit_biexponential(h, std::nullopt, options);
        converged = r.converged;
        report = fit_report(r);
    } else if (model == "saturation") {
        const auto rows = read_csv(in_path, "power_mw,rate_cps,rate_err");
        std::vector<SaturationPoint> points;
        for (const auto& row : rows) points.push_back({row[0], row[1], row[2]});
        const auto r = fit_saturation(points, reduced, options);
        converged = r.converged;
        report = fit_report(r);
    } else {
        throw ConfigError("fit: unknown model '" + model +
                          "' (expected lifetime, saturation or g2)");
    }
    emit(out_path, report.dump(2) + "\n");
    return converged ? 0 : kExitNoConvergence;
}

int cmd_budget(const std::string& config_path, std::optional<double> pump_override,
               bool as_json, const std::string& out_path) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + config_path + ": " + e.what());
    }
    SimConfig config = parse_run_config(doc);
    if (pump_override) config.pump_mw = *pump_override;
    const SpectraPaths spectra = parse_spectra_paths(config_path, doc);
    const json report = budget_report(config, spectra);
    if (as_json || !out_path.empty())
        emit(out_path, report.dump(2) + "\n");
    if (!as_json && out_path.empty()) std::cout << budget_table(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nvlink: waveguide single-photon emitter simulation and analysis"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a time-tag stream from a config");
    std::string sim_config, sim_out, sim_manifest;
    std::uint64_t sim_seed = 0;
    bool sim_seed_set = false;
    sim->add_option("--config", sim_config, "Run configuration JSON")->required();
    sim->add_option("--out", sim_out, "Output TTAG path")->required();
    auto* seed_opt = sim->add_option("--seed", sim_seed, "Override the config seed");
    sim->add_option("--manifest", sim_manifest, "Manifest path (default <out>.manifest.json)");

    // repro
    auto* rep = app.add_subcommand("repro", "Replay a manifest and verify the output hash");
    std::string rep_manifest, rep_out;
    rep->add_option("--manifest", rep_manifest, "Manifest JSON from a simulate run")->required();
    rep->add_option("--out", rep_out, "Optionally write the replayed TTAG here");

    // correlate
    auto* cor = app.add_subcommand("correlate", "Cross-correlation histogram of two channels");
    std::string cor_in, cor_out;
    int cor_a = 0, cor_b = 1, cor_threads = 1;
    std::int64_t cor_bin = 1000, cor_window = 500000;
    bool cor_verify = false;
    cor->add_option("--in", cor_in, "Input TTAG path")->required();
    cor->add_option("--ch-a", cor_a, "First channel (default 0)");
    cor->add_option("--ch-b", cor_b, "Second channel (default 1)");
    cor->add_option("--bin-width-ps", cor_bin, "Bin width in ps (default 1000)");
    cor->add_option("--window-ps", cor_window, "Half window in ps, lags in [-W, +W)");
    cor->add_option("--out", cor_out, "Output CSV path (default stdout)");
    cor->add_option("--threads", cor_threads, "Worker threads (capped by NVLINK_THREADS)");
    cor->add_flag("--verify-oracle", cor_verify, "Cross-check against the brute-force oracle");

    // lifetime
    auto* lif = app.add_subcommand("lifetime", "Delay histogram relative to sync tags");
    std::string lif_in, lif_out;
    int lif_sync = 2, lif_det = 0;
    std::int64_t lif_bin = 200;
    double lif_range = 1000.0;
    lif->add_option("--in", lif_in, "Input TTAG path")->required();
    lif->add_option("--sync-ch", lif_sync, "Sync channel (default 2)");
    lif->add_option("--det-ch", lif_det, "Detection channel (default 0)");
    lif->add_option("--bin-width-ps", lif_bin, "Bin width in ps (default 200)");
    lif->add_option("--range-ns", lif_range, "Histogram range from sync in ns");
    lif->add_option("--out", lif_out, "Output CSV path (default stdout)");

    // trace
    auto* tra = app.add_subcommand("trace", "Binned count-rate trace of one channel");
    std::string tra_in, tra_out;
    int tra_ch = 0;
    double tra_bin = 1.0;
    tra->add_option("--in", tra_in, "Input TTAG path")->required();
    tra->add_option("--ch", tra_ch, "Channel (default 0)");
    tra->add_option("--bin-s", tra_bin, "Bin duration in seconds (default 1)");
    tra->add_option("--out", tra_out, "Output CSV path (default stdout)");

    // fit
    auto* fit = app.add_subcommand("fit", "Nonlinear least-squares fit of a histogram CSV");
    std::string fit_in, fit_model, fit_out;
    double fit_sigma = 0.0;
    bool fit_sigma_set = false, fit_reduced = false;
    int fit_max_iter = 0;
    fit->add_option("--in", fit_in, "Histogram / points CSV")->required();
    fit->add_option("--model", fit_model, "lifetime | saturation | g2")->required();
    auto* sigma_opt =
        fit->add_option("--sigma", fit_sigma, "Background-correct a g2 histogram first");
    fit->add_flag("--reduced", fit_reduced, "Saturation model without linear/constant terms");
    fit->add_option("--max-iterations", fit_max_iter, "Iteration cap override");
    fit->add_option("--out", fit_out, "Report JSON path (default stdout)");

    // budget
    auto* bud = app.add_subcommand("budget", "Photon-rate and noise budget of a config");
    std::string bud_config, bud_out;
    double bud_pump = 0.0;
    bool bud_json = false, bud_pump_set = false;
    bud->add_option("--config", bud_config, "Run configuration JSON")->required();
    auto* pump_opt = bud->add_option("--pump-mw", bud_pump, "Override the config pump power");
    bud->add_flag("--json", bud_json, "Emit JSON instead of the table");
    bud->add_option("--out", bud_out, "Write the JSON report here");

    try {
        app.parse(argc, argv);
        sim_seed_set = seed_opt->count() > 0;
        fit_sigma_set = sigma_opt->count() > 0;
        bud_pump_set = pump_opt->count() > 0;

        if (sim->parsed())
            return cmd_simulate(sim_config, sim_out,
                                sim_seed_set ? std::optional<std::uint64_t>(sim_seed)
                                             : std::nullopt,
                                sim_manifest);
        if (rep->parsed()) return cmd_repro(rep_manifest, rep_out);
        if (cor->parsed())
            return cmd_correlate(cor_in, cor_a, cor_b, cor_bin, cor_window, cor_out,
                                 cor_verify, cor_threads);
        if (lif->parsed())
            return cmd_lifetime(lif_in, lif_sync, lif_det, lif_bin, lif_range, lif_out);
        if (tra->parsed()) return cmd_trace(tra_in, tra_ch, tra_bin, tra_out);
        if (fit->parsed())
            return cmd_fit(fit_in, fit_model,
                           fit_sigma_set ? std::optional<double>(fit_sigma) : std::nullopt,
                           fit_reduced, fit_max_iter, fit_out);
        if (bud->parsed())
            return cmd_budget(bud_config,
                              bud_pump_set ? std::optional<double>(bud_pump) : std::nullopt,
                              bud_json, bud_out);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "nvlink: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "nvlink: data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "nvlink: error: " << e.what() << "\n";
        return 1;
    }
}
