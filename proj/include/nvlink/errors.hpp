#pragma once

#include <stdexcept>
#include <string>

namespace nvlink {

// Invalid configuration or parameters (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent data: files, streams, histograms (CLI exit code 3).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Two relaxation eigenvalues coincide; the bi-exponential decomposition of the
// three-level system does not exist at this rate set.
struct DegenerateRatesError : std::runtime_error {
    explicit DegenerateRatesError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nvlink
