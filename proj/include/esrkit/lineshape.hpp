#pragma once

#include <complex>
#include <vector>

#include "esrkit/spin_levels.hpp"

namespace esr {

// ---------------------------------------------------------------------------
// Spin-ensemble load on the resonator
// ---------------------------------------------------------------------------
//
// Each peak contributes a complex response W(omega) to the resonator pole,
//   S21(omega) = 1 + kappa_c / (i (omega - omega0) - kappa + sum_k W_k)
// with kappa = omega0 / Q, kappa_c = omega0 / Qc (Qc complex).  The real part
// of W is the absorbed power channel (always <= 0), the imaginary part pulls
// the resonance frequency.
//
//   Lorentzian:  W = Omega^2 / (i (omega - omega_s) - gamma2 / 2)
//   Voigt:       Gaussian distribution of line centers, HWHM Delta,
//                convolved with the Lorentzian; closed form
//                W = -sqrt(pi) (Omega^2 sqrt(ln2) / Delta) w(z),
//                z = ((omega - omega_s) + i gamma2/2) sqrt(ln2) / Delta
//
// The Voigt form reduces exactly to the Lorentzian as Delta -> 0 and
// conserves the absorbed area: integral of -Re W over omega = pi Omega^2 for
// both shapes, independent of gamma2 and Delta.

enum class LineShape { Lorentzian, Voigt };

struct Peak {
    TransitionLabel label = TransitionLabel::Central;
    SpinSystem spin;       // supplies the field-to-frequency curve of `label`
    double b_peak = 0.0;   // tesla; field where the line crosses the resonator
    double omega = 0.0;    // collective coupling Omega, rad/s, >= 0
    double gamma2 = 0.0;   // homogeneous (T2) width, rad/s, >= 0
    double delta = 0.0;    // inhomogeneous Gaussian HWHM, rad/s, >= 0
    LineShape shape = LineShape::Lorentzian;

    void validate() const;  // shape == Voigt requires delta > 0, and vice versa
};

// Field-independent loss plateau switching on around b_on, shaped as a
// normal CDF of width sigma_on; models the onset of a continuum background.
struct Background {
    double c = 0.0;         // plateau height, adds to Qb_inv
    double b_on = 0.0;      // tesla
    double sigma_on = 1e-3; // tesla, > 0
};

struct ResonatorParams {
    double f0_hz = 5e9;
    double q = 1e5;                      // total (loaded) quality factor
    std::complex<double> qc = {2e5, 0};  // coupling Q, complex (Khalil convention)
};

struct SpectrumModel {
    ResonatorParams resonator;
    std::vector<Peak> peaks;
    Background background;
};

// W(omega) of one peak given the probe and the spin frequency (both rad/s).
std::complex<double> ensemble_response(const Peak& p, double omega_rad_s,
                                       double omega_s_rad_s);

// Spin frequency of the peak's labeled line at field B, anchored so the line
// crosses omega0 exactly at b_peak:
//   omega_s(B) = omega0 + 2 pi (nu(B) - nu(b_peak)).
// The spin system supplies the slope and curvature of nu(B); b_peak places it.
double peak_omega_s(const Peak& p, double omega0_rad_s, double b_tesla);

double background_loss(const Background& bg, double b_tesla);

struct SweepPoint {
    double qb_inv = 0.0;  // added inverse quality factor, >= 0
    double df_hz = 0.0;   // resonance frequency shift channel, Im(sum W)/2pi
};

// Spin load at one field point of a sweep, probe fixed at omega0.
SweepPoint sweep_point(const SpectrumModel& m, double b_tesla);

// Full transmission at probe frequency f_hz with the spins at field b_tesla.
// Peaks may be empty (bare resonator).
std::complex<double> s21(const SpectrumModel& m, double f_hz, double b_tesla);

}  // namespace esr
