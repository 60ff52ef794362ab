#pragma once

#include <complex>

namespace esr {

// ---------------------------------------------------------------------------
// Resonator cross-section and spin-density conversion
// ---------------------------------------------------------------------------
//
// The resonator conductor pair is modeled as two coplanar strips of width w
// whose inner edges sit at x = +-b (so the outer edges are at +-S, S = b + w),
// carrying the single-photon current I0 = sqrt(2 hbar omega^2 / Z).  The
// magnetic field on the surface line y = 0 is
//
//   B(x) = mu0 I0 S^2 / (2 S K(sqrt(1 - b^2/S^2)) sqrt((x^2-b^2)(x^2-S^2)))
//
// with inverse-square-root divergences at the four strip edges.  Spin count
// conversions integrate |B|^2 along the surface excluding a cutoff
// neighborhood delta_cut of each edge (the physical film thickness sets the
// default 140 nm): the integral diverges logarithmically as delta_cut -> 0,
// so n is always quoted together with its cutoff sensitivity.

struct StripGeometry {
    double b = 5e-6;          // inner half-gap, m
    double w = 2e-6;          // strip width, m
    double delta_cut = 140e-9;  // edge exclusion, m
    double z0 = 50.0;         // line impedance, ohm
    double l_res = 3e-3;      // resonator length, m

    double outer() const { return b + w; }  // S
    void validate() const;
};

// Complete elliptic integral of the first kind, modulus convention
// K(k) = int_0^{pi/2} dt / sqrt(1 - k^2 sin^2 t), 0 <= k < 1.  AGM iteration,
// relative accuracy ~1e-15.
double elliptic_k(double k);

// I0 = sqrt(2 hbar omega^2 / Z), amps per photon.
double single_photon_current(double f0_hz, double z_ohm);

// Complex field at (x, y) in tesla (principal sqrt branch; use the magnitude
// away from the cut artifacts).
std::complex<double> strip_field(const StripGeometry& g, double f0_hz, double x_m,
                                 double y_m);

// integral of |B(x,0)|^2 dx over the full line minus delta_cut neighborhoods
// of +-b and +-S, in T^2 m.  Edge pieces are computed under u^2 = x - edge;
// the tail beyond 60 S is added analytically.
double field_integral(const StripGeometry& g, double f0_hz);

// Field-to-power conversion at the strip surface, T/sqrt(W):
// alpha = mu0 / (2 sqrt(2 Z) S K w) * int_S^{S+w} |S^2/sqrt((x^2-b^2)(x^2-S^2))| dx.
double alpha_conversion(const StripGeometry& g);

// Surface spin density behind a fitted collective coupling Omega (rad/s):
// n = 8 Omega^2 pi^2 hbar^2 / (beta(T) mu_B^2 L_res integral), beta(T) =
// tanh(hbar omega0 / 2 k_B T).  Per meter squared.
double spin_density(double omega_rad_s, double t_kelvin, double f0_hz,
                    const StripGeometry& g);

struct DensityResult {
    double n_central = 0.0;   // m^-2
    double n_sat_low = 0.0;
    double n_sat_high = 0.0;
    double n_total = 0.0;
    double ratio_h_e = 0.0;   // (n_sat_low + n_sat_high) / n_central
    double dn_ddelta = 0.0;   // d n_total / d delta_cut, m^-2 per m
    double log_sensitivity = 0.0;  // d ln n_total / d ln delta_cut
};

// Breakdown for the three-peak spectrum; omegas in rad/s, any may be zero.
DensityResult density_breakdown(double omega_central, double omega_sat_low,
                                double omega_sat_high, double t_kelvin, double f0_hz,
                                const StripGeometry& g);

}  // namespace esr
