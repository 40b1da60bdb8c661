#pragma once

namespace nvlink {

// Pumped three-level emitter: ground / excited / shelving, with internal
// quantum efficiency and an optional slow bright/dark telegraph for emission
// intermittency under strong pumping.
//
// Unit conventions: lifetimes in ns, microscopic rates in Hz, pump power in
// mW. The pump enters through k_exc = k_exc_sat * P / p_sat_mw, where
// k_exc_sat defaults to 1/tau_rad so that the two-level reduction saturates
// with half-maximum emission exactly at p_sat_mw.
struct EmitterParams {
    double k_exc_sat_hz = 0.0;    // excitation rate at P = p_sat_mw; 0 = use 1/tau_rad
    double tau_rad_ns = 10.0;     // radiative excited-state lifetime
    double k_es_hz = 8.0e5;       // excited -> shelving
    double k_sg_hz = 5.38e6;      // shelving -> ground
    double eta_q = 0.07;          // internal quantum efficiency
    int n_emitters = 1;           // independent emitters at the site
    double blink_on_rate_hz = 0.1;        // dark -> bright (1 / mean dark dwell)
    double blink_off_rate_hz = 1.0 / 30;  // bright -> dark at the 2x p_sat reference
    double p_sat_mw = 1.8;        // saturation pump power

    double radiative_rate_hz() const { return 1e9 / tau_rad_ns; }
    double excitation_rate_at_sat_hz() const {
        return k_exc_sat_hz > 0.0 ? k_exc_sat_hz : radiative_rate_hz();
    }

    // The telegraph is absent below 1.5x p_sat; above, the bright -> dark rate
    // grows linearly in pump power and reaches blink_off_rate_hz at 2x p_sat.
    bool blinking_active(double pump_mw) const;
    double blink_off_rate_at(double pump_mw) const;

    void validate() const;  // throws ConfigError
};

// Antibunching-dip model parameters:
//   g2(tau) = 1 - p_ge * exp(-|tau - tau_0| / tau_ge) + p_s * exp(-|tau - tau_0| / tau_s)
struct G2Params {
    double p_ge = 1.0;       // ground/excited amplitude
    double p_s = 0.0;        // shelving-shoulder amplitude
    double tau_ge_ns = 10.0;
    double tau_s_ns = 100.0;
    double tau_0_ns = 0.0;   // inserted delay between the two detectors
};

// Time-resolved decay model: two exponentials over a constant dark-count floor.
//   I(t) = I_1 exp(-(t-t_0)/t_1) + I_2 exp(-(t-t_0)/t_2) + I_bias   for t >= t_0
struct LifetimeParams {
    double i_1 = 1.0;        // counts per bin
    double i_2 = 0.0;
    double i_bias = 0.0;
    double t_1_ns = 10.0;    // slow constant, by convention
    double t_2_ns = 2.0;     // fast constant
    double t_0_ns = 0.0;     // trigger offset
};

// Saturating emission rate over a linear background and constant offset:
//   R(P) = R_sat * P / (P_sat + P) + a * P + b
struct SaturationParams {
    double r_sat_cps = 2600.0;
    double p_sat_mw = 1.8;
    double a_cps_per_mw = 0.0;  // linear background slope
    double b_cps = 0.0;         // constant offset
};

// Pump-dependent excitation rate, Hz. Rejects negative power.
double excitation_rate(double pump_mw, const EmitterParams& params);

// Decay model evaluated at t (ns); returns the i_bias floor before the trigger.
double analytic_lifetime(double t_ns, const LifetimeParams& params);

// Saturation model evaluated at pump power P (mW).
double analytic_saturation(double pump_mw, const SaturationParams& params);

// Second-order correlation model, symmetric about tau_0.
double analytic_g2(double tau_ns, const G2Params& params);

// Zero-delay correlation of n independent identical emitters: 1 - 1/n.
double g2_zero_multi(int n_emitters);

// Uncorrelated-background transformation of a correlation value at
// signal-to-noise ratio sigma = S/(S+N):  g2_gb = 1 - sigma^2 + sigma^2 g2.
double background_degrade(double g2, double sigma);

// Steady-state excited-level occupation of the pumped three-level system.
double excited_state_population(const EmitterParams& params, double pump_mw);

// Map microscopic rates into the g2 model of Eq-form above via the
// eigen-decomposition of the three-state rate matrix. The fast eigenvalue
// gives tau_ge, the slow one tau_s; the amplitudes follow from the relaxation
// of the excited-level occupation after a detection (the emitter restarts in
// the ground state). Coinciding eigenvalues raise DegenerateRatesError.
G2Params rates_to_g2_params(const EmitterParams& params, double pump_mw);

}  // namespace nvlink
