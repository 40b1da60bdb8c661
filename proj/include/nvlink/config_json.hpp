#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "nvlink/fitters.hpp"
#include "nvlink/montecarlo.hpp"

namespace nvlink {

// Parse a run configuration document. Unknown keys are rejected; violations
// throw ConfigError carrying the JSON pointer path of the offending node.
SimConfig parse_run_config(const nlohmann::json& doc);
SimConfig load_run_config(const std::string& path);

// Canonical JSON image of a configuration (keys sorted, explicit units in the
// names). parse(canonical(config)) == config, and its dump is the hashing
// ground truth for manifests.
nlohmann::json config_to_json(const SimConfig& config);

// Optional spectra block of a config file: paths to coupler/emission curves,
// resolved relative to the config file location.
struct SpectraPaths {
    std::string grating_csv;
    std::string edge_csv;
    std::string emission_csv;
    bool present() const { return !grating_csv.empty(); }
};
SpectraPaths parse_spectra_paths(const std::string& config_path, const nlohmann::json& doc);

// Eq-chain / noise / SNR report of a configuration at its pump power.
nlohmann::json budget_report(const SimConfig& config, const SpectraPaths& spectra);
std::string budget_table(const nlohmann::json& report);

// Run manifest: everything needed to replay and verify a simulation.
nlohmann::json make_manifest(const SimConfig& config, const std::string& output_path,
                             std::uint64_t output_hash, std::uint64_t record_count,
                             std::uint64_t duration_ps, const RateLedger& ledger,
                             const nlohmann::json& observed);

// Fit reports, parameter names matching the model symbols.
nlohmann::json fit_report(const FitResult<LifetimeParams>& r);
nlohmann::json fit_report(const FitResult<SaturationParams>& r);
nlohmann::json fit_report(const G2FitResult& r, std::optional<double> sigma);

}  // namespace nvlink
