#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "esrkit/lineshape.hpp"
#include "esrkit/lm.hpp"
#include "esrkit/spin_levels.hpp"

namespace esr {

// ---------------------------------------------------------------------------
// Measured traces
// ---------------------------------------------------------------------------

struct S21Trace {
    Eigen::VectorXd f_hz;     // strictly monotone
    Eigen::VectorXcd s21;
};

struct SweepTrace {
    Eigen::VectorXd b_tesla;  // strictly monotone
    Eigen::VectorXd f0_hz;    // resonance frequency per field point
    Eigen::VectorXd q_inv;    // total inverse quality factor per field point
};

struct SaturationCurve {
    Eigen::VectorXd p_drive_watt;  // strictly monotone
    Eigen::VectorXd qs_inv;        // spin-loss channel 1/Q_s
    double q = 0.0;                // loaded Q, converts drive to circulating power
    double q_ext = 0.0;            // external Q
    // circulating power P0 = 2 Q^2 P_drive / Q_ext
    Eigen::VectorXd p0_watt() const;
};

struct TemperatureSeries {
    Eigen::VectorXd t_kelvin;  // strictly monotone
    Eigen::VectorXd area_central;   // integrated Qb_inv over field, tesla units
    Eigen::VectorXd area_sat_low;   // may be empty (no satellites tracked)
    Eigen::VectorXd area_sat_high;
    Eigen::VectorXd err_central;    // optional 1-sigma errors; empty = unweighted
    Eigen::VectorXd err_sat_low;
    Eigen::VectorXd err_sat_high;
};

struct AngleSeries {
    Eigen::VectorXd theta_deg;
    Eigen::VectorXd g_app;
};

struct PeakPositionRow {
    double f_res_hz = 0.0;   // resonator frequency
    double b_tesla = 0.0;    // measured peak field
    TransitionLabel label = TransitionLabel::Central;
};

struct PeakPositionData {
    std::vector<PeakPositionRow> rows;
};

// ---------------------------------------------------------------------------
// Resonator trace fit
// ---------------------------------------------------------------------------

struct ResonanceFit {
    double f0_hz = 0.0;
    double q = 0.0;                    // total
    std::complex<double> qc = {0, 0};  // coupling, complex
    double q_internal = 0.0;           // 1/Qi = 1/Q - Re(1/Qc)
    FitResult fit;
};

// Algebraic circle fit for the starting point, phase fit for (f0, kappa),
// then a full complex Levenberg-Marquardt polish of
// S21 = 1 + kappa_c / (i(omega - omega0) - kappa).  Throws FitError when the
// trace holds no resolvable dip.
ResonanceFit fit_resonance(const S21Trace& trace);

// ---------------------------------------------------------------------------
// Field sweep fit
// ---------------------------------------------------------------------------

struct SweepFitOptions {
    bool robust = false;      // soft-L1, suppresses flux-jump segments
    bool include_df = true;   // fit the frequency-shift channel jointly
    bool fit_background = true;
    int max_iter = 300;
    double prominence = 0.08; // auto-init peak detection threshold (fraction of max)
};

struct SweepFit {
    SpectrumModel model;      // template with fitted values filled in
    double q0_inv = 0.0;      // fitted resonator baseline 1/Q
    FitResult fit;
    std::vector<double> areas_tesla;  // per peak: pi Omega^2 / (omega0 |d omega_s/d B|)
    std::vector<double> t2e_s;        // per peak: 2 pi / gamma2 (Lorentzian), NaN otherwise
};

// Template peaks with b_peak = NaN are located by a smoothed prominence scan
// (peaks matched to the template in field order).  Width/coupling starting
// values are taken from the data when not finite in the template.
SweepFit fit_sweep(const SweepTrace& trace, const SpectrumModel& tmpl,
                   const SweepFitOptions& options = {});

// ---------------------------------------------------------------------------
// Multi-resonator peak position fit (hyperfine constant and g-factors)
// ---------------------------------------------------------------------------

struct PeakPositionsFit {
    double a_hz = 0.0;
    double g_hyperfine = 0.0;
    double g_central = 0.0;
    FitResult fit;   // params: a_hz, g_hyperfine, g_central
};

struct PeakPositionsInit {
    double a_hz = 1.4e9;
    double g = 2.0;
    bool nuclear_zeeman = true;
    double g_n = 5.5856946893;
};

// Joint least squares in field space: predicted satellite fields come from
// the diagonalized hyperfine system (root-refined), central fields from the
// free doublet.  Residuals are scaled to millitesla.
PeakPositionsFit fit_peak_positions(const PeakPositionData& data,
                                    const PeakPositionsInit& init = {});

// ---------------------------------------------------------------------------
// Temperature dependence and species abundance
// ---------------------------------------------------------------------------

struct TemperaturePeakFields {
    double central = 0.0;   // tesla
    double sat_low = 0.0;
    double sat_high = 0.0;
};

struct HypothesisResult {
    SpinSystem spin;
    double rss = 0.0;    // residual sum of squares on the central-peak series
    double aicc = 0.0;   // small-sample corrected Akaike score
    FitResult fit;       // single scale parameter
};

struct TemperatureFit {
    std::vector<HypothesisResult> ranking;  // best (lowest rss) first
    // Per-peak scales corrected by the two-level polarization
    // beta(T) = tanh(h f0 / 2 k_B T) at the common resonator frequency; the
    // correction cancels between peaks, making the abundance ratio a pure
    // area ratio at a single temperature.
    double scale_central = 0.0;
    double scale_sat_low = 0.0;
    double scale_sat_high = 0.0;
    double abundance = 0.0;      // (scale_sat_low + scale_sat_high) / scale_central
    double abundance_sigma = 0.0;
};

// Ranks level-structure hypotheses for the central peak by how well
// scale * peak_area_factor(T) reproduces area_central(T); computes the
// hydrogen-to-free-electron abundance from the satellite columns when
// present.
TemperatureFit fit_temperature(const TemperatureSeries& ts,
                               const std::vector<SpinSystem>& hypotheses, double f0_hz,
                               const TemperaturePeakFields& b_peaks);

// ---------------------------------------------------------------------------
// Power saturation
// ---------------------------------------------------------------------------

struct SaturationFit {
    double qs0_inv = 0.0;
    double p_sat_watt = 0.0;  // in circulating-power units
    double epsilon = 0.0;
    FitResult fit;
};

// 1/Q_s(P0) = 1/Q_s(0) (1 + P0/P_sat)^(-epsilon), relative residuals.
SaturationFit fit_saturation(const SaturationCurve& curve);

// T1 = 1 / (P_sat T2e gamma_e^2 alpha^2) with gamma_e = g mu_B / h in Hz/T.
double derive_t1(double p_sat_watt, double t2e_s, double alpha_t_per_sqrt_w, double g);

// ---------------------------------------------------------------------------
// Angular dependence of the apparent g-factor
// ---------------------------------------------------------------------------

struct AngleFit {
    double g = 0.0;
    double a = 0.0;  // sin(theta) coefficient
    double b = 0.0;  // sin(2 theta) coefficient
    FitResult fit;
};

// g_app(theta) = g + a sin(theta) + b sin(2 theta); angle in degrees on input.
// A series measured at a single angle leaves a and b flagged unconstrained.
AngleFit fit_angle(const AngleSeries& series);

}  // namespace esr
