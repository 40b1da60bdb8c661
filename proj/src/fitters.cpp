#include "nvlink/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "nvlink/errors.hpp"

namespace nvlink {

namespace {

// ---------------------------------------------------------------------------
// Small dense linear algebra, enough for <= 6 parameters.

bool solve_symmetric(std::vector<double> a, std::vector<double> b, int n,
                     std::vector<double>& x) {
    // Gaussian elimination with partial pivoting on the n x n system.
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (std::abs(a[pivot * n + col]) < 1e-300) return false;
        if (pivot != col) {
            for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
        x[r] = s / a[r * n + r];
    }
    return true;
}

bool invert_symmetric(const std::vector<double>& a, int n, std::vector<double>& inv) {
    inv.assign(n * n, 0.0);
    std::vector<double> col;
    for (int k = 0; k < n; ++k) {
        std::vector<double> e(n, 0.0);
        e[k] = 1.0;
        if (!solve_symmetric(a, e, n, col)) return false;
        for (int r = 0; r < n; ++r) inv[r * n + k] = col[r];
    }
    return true;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt with box projection.

struct LmData {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma;
};

using PointModel = double (*)(double x, std::span<const double> theta, std::span<double> grad,
                              const void* ctx);

struct LmOutcome {
    std::vector<double> theta;
    std::vector<double> covariance;  // n x n, row major; empty when singular
    double rss = 0.0;
    bool converged = false;
    int iterations = 0;
};

double chi_square(const LmData& d, PointModel model, const void* ctx,
                  const std::vector<double>& theta) {
    double chi2 = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        const double f = model(d.x[i], theta, {}, ctx);
        const double r = (d.y[i] - f) / d.sigma[i];
        chi2 += r * r;
    }
    return chi2;
}

void build_normal_equations(const LmData& d, PointModel model, const void* ctx,
                            const std::vector<double>& theta, std::vector<double>& a,
                            std::vector<double>& g) {
    const int n = static_cast<int>(theta.size());
    a.assign(n * n, 0.0);
    g.assign(n, 0.0);
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        const double f = model(d.x[i], theta, grad, ctx);
        const double w = 1.0 / (d.sigma[i] * d.sigma[i]);
        const double r = d.y[i] - f;
        for (int j = 0; j < n; ++j) {
            g[j] += w * grad[j] * r;
            for (int k = j; k < n; ++k) a[j * n + k] += w * grad[j] * grad[k];
        }
    }
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < j; ++k) a[j * n + k] = a[k * n + j];
}

LmOutcome lm_fit(const LmData& d, PointModel model, const void* ctx,
                 std::vector<double> theta, const std::vector<double>& lo,
                 const std::vector<double>& hi, const FitOptions& options) {
    const int n = static_cast<int>(theta.size());
    for (int j = 0; j < n; ++j) theta[j] = std::clamp(theta[j], lo[j], hi[j]);

    LmOutcome out;
    double chi2 = chi_square(d, model, ctx, theta);
    double lambda = 1e-3;
    std::vector<double> a, g, step, cand(n);

    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        build_normal_equations(d, model, ctx, theta, a, g);
        bool accepted = false;
        double max_rel_change = 0.0;
        for (int attempt = 0; attempt < 24; ++attempt) {
            std::vector<double> damped = a;
            for (int j = 0; j < n; ++j) {
                const double diag = a[j * n + j];
                damped[j * n + j] = diag + lambda * (diag > 0.0 ? diag : 1.0);
            }
            if (!solve_symmetric(damped, g, n, step)) {
                lambda = std::min(lambda * 10.0, 1e14);
                continue;
            }
            max_rel_change = 0.0;
            for (int j = 0; j < n; ++j) {
                cand[j] = std::clamp(theta[j] + step[j], lo[j], hi[j]);
                const double change = std::abs(cand[j] - theta[j]);
                max_rel_change = std::max(
                    max_rel_change, change / (std::abs(theta[j]) + options.param_tol));
            }
            const double chi2_new = chi_square(d, model, ctx, cand);
            if (chi2_new <= chi2) {
                theta = cand;
                chi2 = chi2_new;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                break;
            }
            lambda = std::min(lambda * 5.0, 1e14);
        }
        if (!accepted) break;  // stalled; the projected step no longer improves
        if (max_rel_change < options.param_tol) {
            out.converged = true;
            ++iter;
            break;
        }
    }

    // A stall with an essentially zero proposed step is a boundary optimum.
    if (!out.converged && iter < options.max_iterations) {
        double rel = 0.0;
        for (int j = 0; j < n; ++j)
            rel = std::max(rel, std::abs(step.empty() ? 0.0 : step[j]) /
                                    (std::abs(theta[j]) + options.param_tol));
        if (rel < options.param_tol) out.converged = true;
    }

    out.theta = theta;
    out.rss = chi2;
    out.iterations = std::min(iter + 1, options.max_iterations);
    build_normal_equations(d, model, ctx, theta, a, g);
    if (!invert_symmetric(a, n, out.covariance)) out.covariance.clear();
    // Scale by the reduced chi-square: recovers the noise scale when the
    // supplied weights are only relative, and is ~1 for true Poisson weights.
    const double dof = static_cast<double>(d.x.size()) - static_cast<double>(n);
    if (!out.covariance.empty() && dof > 0.0)
        for (auto& v : out.covariance) v *= chi2 / dof;
    return out;
}

double covariance_sigma(const LmOutcome& o, int j) {
    if (o.covariance.empty()) return 0.0;
    const int n = static_cast<int>(o.theta.size());
    const double v = o.covariance[j * n + j];
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

// ---------------------------------------------------------------------------
// Model adapters for the generic engine.

double lifetime_adapter(double x, std::span<const double> theta, std::span<double> grad,
                        const void* ctx) {
    const double t0 = *static_cast<const double*>(ctx);
    return models::lifetime(x, theta, t0, grad);
}

double saturation_adapter(double x, std::span<const double> theta, std::span<double> grad,
                          const void* /*ctx*/) {
    if (theta.size() == 4) return models::saturation(x, theta, grad);
    // Reduced model: a = b = 0.
    const std::array<double, 4> full{theta[0], theta[1], 0.0, 0.0};
    if (grad.empty()) return models::saturation(x, full, {});
    std::array<double, 4> full_grad{};
    const double f = models::saturation(x, full, full_grad);
    grad[0] = full_grad[0];
    grad[1] = full_grad[1];
    return f;
}

double g2_adapter(double x, std::span<const double> theta, std::span<double> grad,
                  const void* /*ctx*/) {
    return models::g2(x, theta, grad);
}

}  // namespace

namespace models {

double lifetime(double t_ns, std::span<const double> theta, double t0_ns,
                std::span<double> grad) {
    const double i1 = theta[0], t1 = theta[1], i2 = theta[2], t2 = theta[3], bias = theta[4];
    if (t_ns < t0_ns) {
        if (!grad.empty()) {
            grad[0] = grad[1] = grad[2] = grad[3] = 0.0;
            grad[4] = 1.0;
        }
        return bias;
    }
    const double dt = t_ns - t0_ns;
    const double e1 = std::exp(-dt / t1);
    const double e2 = std::exp(-dt / t2);
    if (!grad.empty()) {
        grad[0] = e1;
        grad[1] = i1 * e1 * dt / (t1 * t1);
        grad[2] = e2;
        grad[3] = i2 * e2 * dt / (t2 * t2);
        grad[4] = 1.0;
    }
    return i1 * e1 + i2 * e2 + bias;
}

double saturation(double pump_mw, std::span<const double> theta, std::span<double> grad) {
    const double r_sat = theta[0], p_sat = theta[1], a = theta[2], b = theta[3];
    const double denom = p_sat + pump_mw;
    if (!grad.empty()) {
        grad[0] = pump_mw / denom;
        grad[1] = -r_sat * pump_mw / (denom * denom);
        grad[2] = pump_mw;
        grad[3] = 1.0;
    }
    return r_sat * pump_mw / denom + a * pump_mw + b;
}

double g2(double tau_ns, std::span<const double> theta, std::span<double> grad) {
    const double p_ge = theta[0], tau_ge = theta[1], p_s = theta[2], tau_s = theta[3],
                 tau_0 = theta[4];
    const double diff = tau_ns - tau_0;
    const double d = std::abs(diff);
    const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    const double e_ge = std::exp(-d / tau_ge);
    const double e_s = std::exp(-d / tau_s);
    if (!grad.empty()) {
        grad[0] = -e_ge;
        grad[1] = -p_ge * e_ge * d / (tau_ge * tau_ge);
        grad[2] = e_s;
        grad[3] = p_s * e_s * d / (tau_s * tau_s);
        grad[4] = sgn * (-p_ge * e_ge / tau_ge + p_s * e_s / tau_s);
    }
    return 1.0 - p_ge * e_ge + p_s * e_s;
}

}  // namespace models

// ---------------------------------------------------------------------------

FitResult<LifetimeParams> fit_biexponential(const LifetimeHistogram& hist,
                                            std::optional<double> t0_hint_ns,
                                            const FitOptions& options) {
    std::size_t non_empty = 0;
    for (const auto c : hist.counts)
        if (c > 0) ++non_empty;
    if (non_empty < 8)
        throw DataError("fit_biexponential: need at least 8 non-empty bins, got " +
                        std::to_string(non_empty));

    LmData data;
    data.x.reserve(hist.bin_count());
    for (std::size_t i = 0; i < hist.bin_count(); ++i) {
        data.x.push_back(hist.delay_center_ns(i));
        const double y = static_cast<double>(hist.counts[i]);
        data.y.push_back(y);
        data.sigma.push_back(std::sqrt(std::max(y, 1.0)));  // Poisson, unit floor
    }

    // Seed at the peak; pre-trigger bins estimate the dark floor.
    std::size_t peak = 0;
    for (std::size_t i = 1; i < hist.bin_count(); ++i)
        if (hist.counts[i] > hist.counts[peak]) peak = i;
    const double t0 = t0_hint_ns.value_or(data.x[peak]);

    double bias_seed = 0.0;
    std::size_t n_pre = 0;
    for (std::size_t i = 0; i < hist.bin_count(); ++i) {
        if (data.x[i] < t0) {
            bias_seed += data.y[i];
            ++n_pre;
        }
    }
    if (n_pre > 0) {
        bias_seed /= static_cast<double>(n_pre);
    } else {
        bias_seed = *std::min_element(data.y.begin(), data.y.end());
    }
    const double peak_val = data.y[peak];
    const double amp = std::max(peak_val - bias_seed, 1.0);
    const double bin_ns = static_cast<double>(hist.bin_width_ps) * 1e-3;
    double t1_seed = bin_ns;
    for (std::size_t i = peak; i < hist.bin_count(); ++i) {
        if (data.y[i] - bias_seed <= amp * 0.36787944117144233) {  // 1/e point
            t1_seed = std::max(data.x[i] - t0, bin_ns);
            break;
        }
    }

    std::vector<double> theta{0.8 * amp, t1_seed, 0.2 * amp, std::max(t1_seed / 4.0, bin_ns / 2.0),
                              std::max(bias_seed, 0.0)};
    const std::vector<double> lo{0.0, 1e-6, 0.0, 1e-6, 0.0};
    const std::vector<double> hi{1e18, 1e9, 1e18, 1e9, 1e18};

    const LmOutcome o = lm_fit(data, lifetime_adapter, &t0, theta, lo, hi, options);

    FitResult<LifetimeParams> result;
    result.rss = o.rss;
    result.converged = o.converged;
    result.iterations = o.iterations;
    if (!o.converged) result.flags.push_back("not_converged");

    // Report the slower constant as t_1.
    int a = 0, b = 2;
    if (o.theta[1] < o.theta[3]) std::swap(a, b);
    result.params.i_1 = o.theta[a];
    result.params.t_1_ns = o.theta[a + 1];
    result.params.i_2 = o.theta[b];
    result.params.t_2_ns = o.theta[b + 1];
    result.params.i_bias = o.theta[4];
    result.params.t_0_ns = t0;
    result.uncertainty.i_1 = covariance_sigma(o, a);
    result.uncertainty.t_1_ns = covariance_sigma(o, a + 1);
    result.uncertainty.i_2 = covariance_sigma(o, b);
    result.uncertainty.t_2_ns = covariance_sigma(o, b + 1);
    result.uncertainty.i_bias = covariance_sigma(o, 4);
    result.uncertainty.t_0_ns = 0.0;

    if (std::abs(result.params.t_1_ns - result.params.t_2_ns) <=
        0.05 * std::max(result.params.t_1_ns, result.params.t_2_ns))
        result.flags.push_back("effectively_single_exponential");
    return result;
}

FitResult<SaturationParams> fit_saturation(std::span<const SaturationPoint> points,
                                           bool reduced_model, const FitOptions& options) {
    if (points.size() < 2) throw DataError("fit_saturation: need at least 2 points");

    LmData data;
    double max_rate = 0.0, max_power = 0.0;
    for (const auto& p : points) {
        data.x.push_back(p.pump_mw);
        data.y.push_back(p.rate_cps);
        data.sigma.push_back(p.rate_err_cps > 0.0 ? p.rate_err_cps : 1.0);
        max_rate = std::max(max_rate, p.rate_cps);
        max_power = std::max(max_power, p.pump_mw);
    }

    // Distinct powers, and coverage of the knee, are a precondition worth a
    // warning rather than a refusal.
    std::vector<double> powers(data.x);
    std::sort(powers.begin(), powers.end());
    powers.erase(std::unique(powers.begin(), powers.end()), powers.end());
    if (powers.size() < 5)
        std::cerr << "nvlink: warning: saturation fit with fewer than 5 distinct powers\n";

    // Seed p_sat at the power nearest half the maximum rate.
    double p_half = max_power / 2.0;
    double best = std::numeric_limits<double>::max();
    for (const auto& p : points) {
        const double miss = std::abs(p.rate_cps - 0.5 * max_rate);
        if (miss < best) {
            best = miss;
            p_half = std::max(p.pump_mw, 1e-3);
        }
    }

    std::vector<double> theta;
    std::vector<double> lo, hi;
    if (reduced_model) {
        theta = {max_rate, p_half};
        lo = {0.0, 1e-9};
        hi = {1e18, 1e9};
    } else {
        theta = {max_rate, p_half, 0.0, 0.0};
        lo = {0.0, 1e-9, 0.0, 0.0};
        hi = {1e18, 1e9, 1e18, 1e18};
    }

    const LmOutcome o = lm_fit(data, saturation_adapter, nullptr, theta, lo, hi, options);

    FitResult<SaturationParams> result;
    result.rss = o.rss;
    result.converged = o.converged;
    result.iterations = o.iterations;
    if (!o.converged) result.flags.push_back("not_converged");
    result.params.r_sat_cps = o.theta[0];
    result.params.p_sat_mw = o.theta[1];
    result.uncertainty.r_sat_cps = covariance_sigma(o, 0);
    result.uncertainty.p_sat_mw = covariance_sigma(o, 1);
    if (!reduced_model) {
        result.params.a_cps_per_mw = o.theta[2];
        result.params.b_cps = o.theta[3];
        result.uncertainty.a_cps_per_mw = covariance_sigma(o, 2);
        result.uncertainty.b_cps = covariance_sigma(o, 3);
    }
    if (result.params.p_sat_mw <= 2e-9 || result.params.p_sat_mw >= 0.5e9)
        result.flags.push_back("p_sat_at_bound");
    return result;
}

G2FitResult fit_g2(const CorrelationHistogram& hist, const FitOptions& options) {
    if (hist.bin_count() < 8) throw DataError("fit_g2: need at least 8 bins");
    if (hist.g2.size() != hist.counts.size())
        throw DataError("fit_g2: histogram carries no normalized values");

    G2FitResult result;

    LmData data;
    data.x.reserve(hist.bin_count());
    double g_min = std::numeric_limits<double>::max();
    std::size_t dip = 0;
    for (std::size_t i = 0; i < hist.bin_count(); ++i) {
        data.x.push_back(hist.lag_center_ns(i));
        data.y.push_back(hist.g2[i]);
        const double s = hist.normalization_valid ? hist.g2_sigma(i) : 1.0;
        data.sigma.push_back(s > 0.0 ? s : 1.0);
        if (hist.g2[i] < g_min) {
            g_min = hist.g2[i];
            dip = i;
        }
    }
    if (!(g_min < 0.9)) {
        std::cerr << "nvlink: warning: no visible dip (minimum bin " << g_min << " >= 0.9)\n";
        result.flags.push_back("shallow_dip");
    }

    // Seeds: tau_0 at the minimum bin, tau_ge from the half-recovery width.
    const double tau0_seed = data.x[dip];
    const double depth = std::max(1.0 - g_min, 0.05);
    double tau_ge_seed = static_cast<double>(hist.bin_width_ps) * 1e-3;
    for (std::size_t i = dip; i < hist.bin_count(); ++i) {
        if (data.y[i] >= g_min + 0.5 * depth) {
            tau_ge_seed = std::max((data.x[i] - tau0_seed) / 0.6931471805599453, tau_ge_seed);
            break;
        }
    }

    std::vector<double> theta{std::clamp(depth, 0.05, 2.0), tau_ge_seed, 0.02,
                              10.0 * tau_ge_seed, tau0_seed};
    const std::vector<double> lo{0.0, 1e-3, 0.0, 1e-3,
                                 -std::numeric_limits<double>::infinity()};
    const std::vector<double> hi{10.0, 1e7, 10.0, 1e7,
                                 std::numeric_limits<double>::infinity()};

    const LmOutcome o = lm_fit(data, g2_adapter, nullptr, theta, lo, hi, options);

    result.rss = o.rss;
    result.converged = o.converged;
    result.iterations = o.iterations;
    if (!o.converged) result.flags.push_back("not_converged");
    result.params.p_ge = o.theta[0];
    result.params.tau_ge_ns = o.theta[1];
    result.params.p_s = o.theta[2];
    result.params.tau_s_ns = o.theta[3];
    result.params.tau_0_ns = o.theta[4];
    result.uncertainty.p_ge = covariance_sigma(o, 0);
    result.uncertainty.tau_ge_ns = covariance_sigma(o, 1);
    result.uncertainty.p_s = covariance_sigma(o, 2);
    result.uncertainty.tau_s_ns = covariance_sigma(o, 3);
    result.uncertainty.tau_0_ns = covariance_sigma(o, 4);

    result.g2_at_dip = 1.0 - result.params.p_ge + result.params.p_s;
    if (!o.covariance.empty()) {
        // var(1 - p_ge + p_s) needs the p_ge/p_s cross term.
        const int n = 5;
        const double v = o.covariance[0 * n + 0] + o.covariance[2 * n + 2] -
                         2.0 * o.covariance[0 * n + 2];
        result.g2_at_dip_err = v > 0.0 ? std::sqrt(v) : 0.0;
    }

    if (std::abs(result.params.tau_s_ns - result.params.tau_ge_ns) <=
        0.05 * std::max(result.params.tau_s_ns, result.params.tau_ge_ns))
        result.flags.push_back("two_level_collapse");
    return result;
}

double correct_background(double g2_gb, double sigma) {
    if (sigma <= 0.0 || sigma > 1.0)
        throw ConfigError("correct_background: sigma must be in (0, 1]");
    return (g2_gb - 1.0 + sigma * sigma) / (sigma * sigma);
}

CorrelationHistogram correct_background(CorrelationHistogram hist, double sigma) {
    if (sigma <= 0.0 || sigma > 1.0)
        throw ConfigError("correct_background: sigma must be in (0, 1]");
    for (auto& v : hist.g2) v = (v - 1.0 + sigma * sigma) / (sigma * sigma);
    hist.error_scale /= sigma * sigma;
    return hist;
}

EmitterCountEstimate estimate_emitter_count(double g2_zero) {
    if (g2_zero >= 1.0)
        throw ConfigError("estimate_emitter_count: g2(0) must be < 1");
    EmitterCountEstimate est;
    est.n = g2_zero <= 0.0
                ? 1
                : std::max(1, static_cast<int>(std::lround(1.0 / (1.0 - g2_zero))));
    est.residual = std::abs(g2_zero - (1.0 - 1.0 / static_cast<double>(est.n)));
    return est;
}

}  // namespace nvlink
