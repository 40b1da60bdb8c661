#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvlink/correlator.hpp"
#include "nvlink/emitter.hpp"

namespace nvlink {

struct FitOptions {
    int max_iterations = 200;
    double param_tol = 1e-8;  // relative parameter change
};

template <typename P>
struct FitResult {
    P params{};
    P uncertainty{};  // 1-sigma, from the covariance of the linearized problem
    double rss = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> flags;

    bool has_flag(const std::string& f) const {
        for (const auto& x : flags)
            if (x == f) return true;
        return false;
    }
};

// Damped least squares on the decay model with Poisson weights
// (sigma = sqrt(counts), unit floor). The trigger offset t_0 is pinned at the
// histogram peak, or at the hint when given; it is not a free parameter of
// the descent. The slower constant is reported as t_1. Flags:
//   "effectively_single_exponential"  t_1 and t_2 within 5 %
//   "not_converged"                   iteration cap hit
FitResult<LifetimeParams> fit_biexponential(const LifetimeHistogram& hist,
                                            std::optional<double> t0_hint_ns = std::nullopt,
                                            const FitOptions& options = {});

struct SaturationPoint {
    double pump_mw = 0.0;
    double rate_cps = 0.0;
    double rate_err_cps = 0.0;  // <= 0 means unit weight
};

// Weighted fit of the saturation model. reduced_model drops the linear and
// constant background terms (a = b = 0). Flags: "p_sat_at_bound" when the
// saturation power pins to the positivity bound.
FitResult<SaturationParams> fit_saturation(std::span<const SaturationPoint> points,
                                           bool reduced_model = false,
                                           const FitOptions& options = {});

struct G2FitResult : FitResult<G2Params> {
    double g2_at_dip = 0.0;      // 1 - p_ge + p_s
    double g2_at_dip_err = 0.0;  // from the full parameter covariance
};

// Fit of the symmetrized dip model (p_ge, p_s, tau_ge, tau_s, tau_0) on a
// normalized correlation histogram. Per-bin weights come from the Poisson
// counts when the histogram carries a valid normalization, otherwise unit.
// Flags: "shallow_dip" (min bin >= 0.9), "two_level_collapse" (tau_s within
// 5 % of tau_ge).
G2FitResult fit_g2(const CorrelationHistogram& hist, const FitOptions& options = {});

// Invert the uncorrelated-background transformation at signal-to-noise ratio
// sigma: g2 = (g2_gb - 1 + sigma^2) / sigma^2. Exact algebraic inverse of
// background_degrade for sigma in (0, 1]; sigma = 0 is rejected.
double correct_background(double g2_gb, double sigma);

// Bin-wise histogram variant; per-bin uncertainties scale by 1/sigma^2.
CorrelationHistogram correct_background(CorrelationHistogram hist, double sigma);

struct EmitterCountEstimate {
    int n = 1;
    double residual = 0.0;  // distance of g2_zero from 1 - 1/n
};

// Nearest emitter count explaining a zero-delay correlation value < 1.
EmitterCountEstimate estimate_emitter_count(double g2_zero);

// Model functions with analytic gradients, exposed for verification against
// finite differences. Parameter layouts:
//   lifetime:   (i_1, t_1, i_2, t_2, i_bias), trigger offset fixed
//   saturation: (r_sat, p_sat, a, b)
//   g2:         (p_ge, tau_ge, p_s, tau_s, tau_0)
namespace models {
double lifetime(double t_ns, std::span<const double> theta, double t0_ns,
                std::span<double> grad);
double saturation(double pump_mw, std::span<const double> theta, std::span<double> grad);
double g2(double tau_ns, std::span<const double> theta, std::span<double> grad);
}  // namespace models

}  // namespace nvlink
