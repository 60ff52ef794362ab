#include "esrkit/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "esrkit/constants.hpp"
#include "esrkit/quadrature.hpp"

namespace esr {

namespace k = constants;

void StripGeometry::validate() const
{
    if (!(b > 0.0) || !(w > 0.0)) throw std::domain_error("geometry: b and w must be > 0");
    if (!(delta_cut > 0.0) || !(delta_cut < 0.4 * std::min(b, w)))
        throw std::domain_error("geometry: delta_cut must be > 0 and small against b, w");
    if (!(z0 > 0.0)) throw std::domain_error("geometry: impedance must be > 0");
    if (!(l_res > 0.0)) throw std::domain_error("geometry: resonator length must be > 0");
}

double elliptic_k(double k_mod)
{
    if (!(k_mod >= 0.0) || k_mod >= 1.0)
        throw std::domain_error("elliptic_k: modulus must satisfy 0 <= k < 1");
    double a = 1.0;
    double b = std::sqrt(1.0 - k_mod * k_mod);
    // AGM is quadratic; cap the rounds because a and b can land one ulp apart
    // and oscillate there, never passing a tolerance tighter than one ulp.
    for (int i = 0; i < 40 && std::abs(a - b) > 4.0 * std::numeric_limits<double>::epsilon() * a; ++i) {
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return k::pi / (2.0 * a);
}

double single_photon_current(double f0_hz, double z_ohm)
{
    if (!(f0_hz > 0.0) || !(z_ohm > 0.0))
        throw std::domain_error("single_photon_current: f0 and Z must be > 0");
    const double omega = k::two_pi * f0_hz;
    return omega * std::sqrt(2.0 * k::hbar / z_ohm);
}

namespace {

// mu0 I0 S^2 / (2 S K), tesla times m^2 scale of the kernel
double field_prefactor(const StripGeometry& g, double f0_hz)
{
    const double s = g.outer();
    const double kk = std::sqrt(1.0 - (g.b * g.b) / (s * s));
    return k::mu_0 * single_photon_current(f0_hz, g.z0) / (2.0 * s * elliptic_k(kk));
}

// |S^2 / sqrt((x^2-b^2)(x^2-S^2))| on the real axis, dimensionless
double kernel_abs(const StripGeometry& g, double x)
{
    const double s = g.outer();
    const double q = std::abs((x * x - g.b * g.b) * (x * x - s * s));
    return s * s / std::sqrt(q);
}

}  // namespace

std::complex<double> strip_field(const StripGeometry& g, double f0_hz, double x_m,
                                 double y_m)
{
    g.validate();
    const std::complex<double> zeta(x_m, y_m);
    const double s = g.outer();
    const std::complex<double> rad =
        std::sqrt((zeta * zeta - g.b * g.b) * (zeta * zeta - s * s));
    return -field_prefactor(g, f0_hz) * (s * s) / rad;
}

double field_integral(const StripGeometry& g, double f0_hz)
{
    g.validate();
    const double b = g.b, s = g.outer(), d = g.delta_cut;
    const double pref = field_prefactor(g, f0_hz);
    const double c2 = pref * pref;  // T^2, multiplies the dimensionless kernel^2

    auto f = [&](double x) {
        const double kk = kernel_abs(g, x);
        return kk * kk;
    };
    // u^2 = |x - edge| substitution; integrand 2 u f(edge +- u^2) is smooth
    auto edge_piece = [&](double edge, double sign, double u_lo, double u_hi) {
        auto t = [&](double u) { return 2.0 * u * f(edge + sign * u * u); };
        return integrate(t, u_lo, u_hi, 1e-11);
    };

    const double x_far = 60.0 * s;
    double total = 0.0;
    // [0, b - d], approaching the inner edge from below
    total += integrate(f, 0.0, 0.5 * b, 1e-11);
    total += edge_piece(b, -1.0, std::sqrt(d), std::sqrt(0.5 * b));
    // [b + d, s - d], both ends singular; split at the midpoint
    const double mid = 0.5 * (b + s);
    total += edge_piece(b, +1.0, std::sqrt(d), std::sqrt(mid - b));
    total += edge_piece(s, -1.0, std::sqrt(d), std::sqrt(s - mid));
    // [s + d, x_far]
    total += edge_piece(s, +1.0, std::sqrt(d), std::sqrt(s));  // up to x = 2s
    total += integrate(f, 2.0 * s, x_far, 1e-11);
    // tail: kernel^2 -> S^4 (1/x^4 + (b^2+S^2)/x^6 + ...)
    const double s4 = s * s * s * s;
    total += s4 * (1.0 / (3.0 * x_far * x_far * x_far) +
                   (b * b + s * s) / (5.0 * std::pow(x_far, 5)));
    return 2.0 * c2 * total;  // symmetric in x
}

double alpha_conversion(const StripGeometry& g)
{
    g.validate();
    const double s = g.outer();
    const double kk = std::sqrt(1.0 - (g.b * g.b) / (s * s));
    // strip integral under u^2 = x - S: d x / sqrt(x - S) stays finite
    auto t = [&](double u) {
        const double x = s + u * u;
        return 2.0 * s * s / std::sqrt((x * x - g.b * g.b) * (x + s));
    };
    const double integral = integrate(t, 0.0, std::sqrt(g.w), 1e-11);
    return k::mu_0 * integral /
           (2.0 * std::sqrt(2.0 * g.z0) * s * elliptic_k(kk) * g.w);
}

double spin_density(double omega_rad_s, double t_kelvin, double f0_hz,
                    const StripGeometry& g)
{
    if (!(omega_rad_s >= 0.0)) throw std::domain_error("spin_density: Omega must be >= 0");
    if (!(t_kelvin > 0.0)) throw std::domain_error("spin_density: temperature must be > 0");
    const double omega0 = k::two_pi * f0_hz;
    const double beta = std::tanh(k::hbar * omega0 / (2.0 * k::k_b * t_kelvin));
    const double num = 8.0 * omega_rad_s * omega_rad_s * k::pi * k::pi * k::hbar * k::hbar;
    return num / (beta * k::mu_b * k::mu_b * g.l_res * field_integral(g, f0_hz));
}

DensityResult density_breakdown(double omega_central, double omega_sat_low,
                                double omega_sat_high, double t_kelvin, double f0_hz,
                                const StripGeometry& g)
{
    DensityResult r;
    r.n_central = spin_density(omega_central, t_kelvin, f0_hz, g);
    r.n_sat_low = spin_density(omega_sat_low, t_kelvin, f0_hz, g);
    r.n_sat_high = spin_density(omega_sat_high, t_kelvin, f0_hz, g);
    r.n_total = r.n_central + r.n_sat_low + r.n_sat_high;
    r.ratio_h_e = r.n_central > 0.0 ? (r.n_sat_low + r.n_sat_high) / r.n_central : 0.0;

    // cutoff sensitivity of the total, central difference at +-10% delta
    StripGeometry lo = g, hi = g;
    lo.delta_cut = 0.9 * g.delta_cut;
    hi.delta_cut = 1.1 * g.delta_cut;
    const double il = field_integral(lo, f0_hz);
    const double ih = field_integral(hi, f0_hz);
    const double i0 = field_integral(g, f0_hz);
    // n scales as 1/integral
    const double dn = r.n_total * (i0 / ih - i0 / il) / (0.2 * g.delta_cut);
    r.dn_ddelta = dn;
    r.log_sensitivity = dn * g.delta_cut / (r.n_total > 0.0 ? r.n_total : 1.0);
    return r;
}

}  // namespace esr
