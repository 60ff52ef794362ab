#pragma once

// Independent reference implementations used only by the test suite.  Each
// one deliberately takes a different route than the library (quadrature
// instead of closed forms, closed forms instead of diagonalization) so that
// agreement is evidence, not tautology.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

// CODATA 2018, matching the library so tight agreement checks are meaningful.
constexpr double kPi = 3.14159265358979323846;
constexpr double kPlanck = 6.62607015e-34;
constexpr double kHbar = 1.054571817e-34;
constexpr double kBoltzmann = 1.380649e-23;
constexpr double kMuB = 9.2740100783e-24;
constexpr double kMuN = 5.0507837461e-27;
constexpr double kMu0 = 1.25663706212e-6;

// ---------------------------------------------------------------------------
// Faddeeva function by trapezoidal sum
// ---------------------------------------------------------------------------
//
// For Im z > 0,  w(z) = (i/pi) int exp(-t^2)/(z-t) dt.  A midpoint trapezoid
// with spacing h converges geometrically; the residue of the pole picked up
// by shifting the contour gives the closing correction
//   w(z) ~ (ih/pi) sum_k exp(-t_k^2)/(z - t_k) + 2 exp(-z^2)/(1 + exp(-2 pi i z / h))
// with t_k = (k + 1/2) h.  The lower half plane goes through the reflection
// w(z) = 2 exp(-z^2) - w(-z), which is exact but loses precision once
// exp(Im(z)^2) dominates; callers keep |Im z| modest there.
inline std::complex<double> faddeeva_w(std::complex<double> z) {
    const std::complex<double> i(0.0, 1.0);
    if (z.imag() < 0.0) {
        return 2.0 * std::exp(-z * z) - faddeeva_w(-z);
    }
    const double h = 0.25;
    // Sum until exp(-t^2) is below 1e-20 relative to the largest term near
    // Re z; |t| up to |Re z| + 8 covers that with slack.
    const int n = static_cast<int>(std::ceil((std::abs(z.real()) + 8.0) / h));
    std::complex<double> sum(0.0, 0.0);
    for (int k = -n; k < n; ++k) {
        const double t = (k + 0.5) * h;
        sum += std::exp(-t * t) / (z - t);
    }
    std::complex<double> w = (i * h / kPi) * sum;
    // The correction term only matters for Im z < pi/h; guard the exp.
    const std::complex<double> arg = -2.0 * kPi * i * z / h;
    if (arg.real() < 200.0) {
        w += 2.0 * std::exp(-z * z) / (1.0 + std::exp(arg));
    }
    return w;
}

// ---------------------------------------------------------------------------
// Hyperfine doublet by closed-form energies
// ---------------------------------------------------------------------------
//
// S=1/2, I=1/2, H/h = A I.S + ge_hz B Sz - gn_hz B Iz.  The product states
// |++> and |--> are exact eigenstates; the m=0 pair mixes through a 2x2
// block.  All four eigenvalues in Hz:
//   E(++) =  A/4 + (ge_hz - gn_hz) B / 2
//   E(--) =  A/4 - (ge_hz - gn_hz) B / 2
//   E(+-), E(-+) = -A/4 +- sqrt(A^2 + ((ge_hz + gn_hz) B)^2) / 2
struct HyperfineClosedForm {
    double a_hz;
    double ge_hz;  // g_e mu_B / h, Hz per tesla
    double gn_hz;  // g_n mu_N / h, Hz per tesla (0 when the term is dropped)

    HyperfineClosedForm(double a, double g_e, double g_n, bool nuclear_zeeman)
        : a_hz(a),
          ge_hz(g_e * kMuB / kPlanck),
          gn_hz(nuclear_zeeman ? g_n * kMuN / kPlanck : 0.0) {}

    // Electron-flip branch frequencies at field B.  nu_high crosses a fixed
    // resonator frequency at the lower field (the low-field satellite).
    double nu_high(double b) const {
        const double eup = a_hz / 4 + (ge_hz - gn_hz) * b / 2;
        const double emid_lo =
            -a_hz / 4 - 0.5 * std::sqrt(a_hz * a_hz + std::pow((ge_hz + gn_hz) * b, 2));
        return eup - emid_lo;
    }
    double nu_low(double b) const {
        const double edn = a_hz / 4 - (ge_hz - gn_hz) * b / 2;
        const double emid_hi =
            -a_hz / 4 + 0.5 * std::sqrt(a_hz * a_hz + std::pow((ge_hz + gn_hz) * b, 2));
        return emid_hi - edn;
    }

    // Field where branch nu(B) = f_res, bisected to ~1e-13 relative.  Both
    // branches are strictly increasing in B.
    static double invert(const std::function<double(double)>& nu, double f_res,
                         double b_hi) {
        double lo = 0.0, hi = b_hi;
        if (nu(hi) < f_res) throw std::runtime_error("bracket too small");
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (nu(mid) < f_res ? lo : hi) = mid;
            if (hi - lo < 1e-16 * b_hi) break;
        }
        return 0.5 * (lo + hi);
    }

    double field_sat_low(double f_res, double b_hi = 5.0) const {
        return invert([this](double b) { return nu_high(b); }, f_res, b_hi);
    }
    double field_sat_high(double f_res, double b_hi = 5.0) const {
        return invert([this](double b) { return nu_low(b); }, f_res, b_hi);
    }
};

inline double free_doublet_field(double g, double f_res) {
    return kPlanck * f_res / (g * kMuB);
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature
// ---------------------------------------------------------------------------

namespace detail {
inline double simpson_step(const std::function<double(double)>& f, double a, double b,
                           double fa, double fm, double fb, double whole, double tol,
                           int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6 * (fa + 4 * flm + fm);
    const double right = (b - m) / 6 * (fm + 4 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15 * tol) {
        return left + right + delta / 15;
    }
    return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}
}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol, int depth = 48) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, depth);
}

// ---------------------------------------------------------------------------
// Voigt response by direct convolution
// ---------------------------------------------------------------------------
//
// The inhomogeneous line is a Gaussian distribution of Lorentzian centers,
// HWHM delta (all rates in rad/s).  Convolve numerically:
//   W(omega) = int g(s) * Omega^2 / (i (omega - omega_s - s) - gamma2/2) ds
//   g(s) = sqrt(ln2/pi)/delta * exp(-ln2 s^2 / delta^2)
inline std::complex<double> voigt_by_convolution(double omega, double omega_s,
                                                 double omega_c, double gamma2,
                                                 double delta) {
    const double ln2 = std::log(2.0);
    const double norm = std::sqrt(ln2 / kPi) / delta;
    const double span = 9.0 * delta / std::sqrt(ln2);  // exp(-81) tail, negligible
    auto lor_re = [&](double s) {
        const double d = omega - omega_s - s;
        const double g = norm * std::exp(-ln2 * s * s / (delta * delta));
        return g * (-gamma2 / 2) / (d * d + gamma2 * gamma2 / 4);
    };
    auto lor_im = [&](double s) {
        const double d = omega - omega_s - s;
        const double g = norm * std::exp(-ln2 * s * s / (delta * delta));
        return g * (-d) / (d * d + gamma2 * gamma2 / 4);
    };
    // Scale-free tolerance: the real part peaks near 2/gamma2 (times the
    // Gaussian smearing), use the max of both channel scales.
    const double scale = 1.0 / std::max(gamma2, delta);
    const double tol = 1e-11 * scale;
    const double re = integrate(lor_re, -span, span, tol);
    const double im = integrate(lor_im, -span, span, tol);
    return omega_c * omega_c * std::complex<double>(re, im);
}

// ---------------------------------------------------------------------------
// Thermal population factors from closed-form level energies
// ---------------------------------------------------------------------------

// Free doublet: levels +-ge_hz*B/2, factor p_lower - p_upper = tanh(h f / 2kT).
inline double doublet_factor(double f_hz, double t_kelvin) {
    return std::tanh(kPlanck * f_hz / (2 * kBoltzmann * t_kelvin));
}

// Triplet, D = 0: levels -f, 0, +f (Hz) with f = ge_hz*B; the two degenerate
// lines sum to p(-1) - p(+1) over the 3-level partition function.
inline double triplet_factor(double f_hz, double t_kelvin) {
    const double x = kPlanck * f_hz / (kBoltzmann * t_kelvin);
    // populations ~ exp(-E/kT) with E/h in {-f, 0, +f}
    const double z = std::exp(x) + 1.0 + std::exp(-x);
    return (std::exp(x) - std::exp(-x)) / z;
}

// ---------------------------------------------------------------------------
// Strip field integral by brute-force quadrature
// ---------------------------------------------------------------------------
//
// |B(x,0)|^2 integrated along the surface with delta_cut neighborhoods of the
// four edges removed.  The integrand is smooth on the clipped intervals, so
// plain adaptive Simpson suffices; beyond x_max the 1/x^4 tail is added in
// closed form.
inline double field_integral_brute(double b, double w, double delta_cut, double z0,
                                   double f0_hz) {
    const double s = b + w;
    const double omega = 2 * kPi * f0_hz;
    const double i0 = std::sqrt(2 * kHbar * omega * omega / z0);
    const double k = std::sqrt(1.0 - (b * b) / (s * s));
    // K(k) by AGM, the test's own copy.
    double a0 = 1.0, g0 = std::sqrt(1.0 - k * k);
    for (int it = 0; it < 60 && std::abs(a0 - g0) > 1e-17 * a0; ++it) {
        const double an = 0.5 * (a0 + g0);
        g0 = std::sqrt(a0 * g0);
        a0 = an;
    }
    const double big_k = kPi / (2 * a0);
    const double c = kMu0 * i0 * s * s / (2 * s * big_k);
    auto b2 = [&](double x) {
        const double p = std::abs((x * x - b * b) * (x * x - s * s));
        return c * c / p;
    };
    const double x_max = 400 * s;
    const double tol_scale = b2(s + delta_cut) * delta_cut;
    double total = 0.0;
    total += integrate(b2, 0.0, b - delta_cut, 1e-11 * tol_scale);
    total += integrate(b2, b + delta_cut, s - delta_cut, 1e-11 * tol_scale);
    total += integrate(b2, s + delta_cut, x_max, 1e-11 * tol_scale);
    // tail: |B|^2 -> c^2/x^4, integral from x_max to infinity
    total += c * c / (3 * x_max * x_max * x_max);
    return 2.0 * total;  // symmetric in x
}

}  // namespace oracle
