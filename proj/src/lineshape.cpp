#include "esrkit/lineshape.hpp"

#include <cmath>
#include <stdexcept>

#include "esrkit/constants.hpp"
#include "esrkit/errors.hpp"
#include "esrkit/faddeeva.hpp"

namespace esr {

namespace k = constants;

namespace {
constexpr double kSqrtLn2 = 0.83255461115769775635;  // sqrt(ln 2)
constexpr double kSqrtPi = 1.7724538509055160273;
}  // namespace

void Peak::validate() const
{
    spin.validate();
    if (!(omega >= 0.0)) throw std::domain_error("peak: Omega must be >= 0");
    if (!(gamma2 >= 0.0)) throw std::domain_error("peak: gamma2 must be >= 0");
    if (!(delta >= 0.0)) throw std::domain_error("peak: Delta must be >= 0");
    const bool voigt = shape == LineShape::Voigt;
    if (voigt != (delta > 0.0))
        throw std::domain_error("peak: shape is Voigt exactly when Delta > 0");
    if (!voigt && !(gamma2 > 0.0))
        throw std::domain_error("peak: Lorentzian needs gamma2 > 0");
}

std::complex<double> ensemble_response(const Peak& p, double omega_rad_s,
                                       double omega_s_rad_s)
{
    const double det = omega_rad_s - omega_s_rad_s;
    const double o2 = p.omega * p.omega;
    if (p.shape == LineShape::Lorentzian) {
        return o2 / std::complex<double>(-0.5 * p.gamma2, det);
    }
    const double s = kSqrtLn2 / p.delta;
    const std::complex<double> z(det * s, 0.5 * p.gamma2 * s);
    return -kSqrtPi * o2 * s * faddeeva(z);
}

double peak_omega_s(const Peak& p, double omega0_rad_s, double b_tesla)
{
    const auto nu_b = transition_frequency(p.spin, b_tesla, p.label);
    const auto nu_0 = transition_frequency(p.spin, p.b_peak, p.label);
    if (!nu_b || !nu_0)
        throw NumericError("peak transition '" + to_string(p.label) +
                           "' not present at the requested field");
    return omega0_rad_s + k::two_pi * (*nu_b - *nu_0);
}

double background_loss(const Background& bg, double b_tesla)
{
    if (!(bg.sigma_on > 0.0)) throw std::domain_error("background: sigma_on must be > 0");
    const double t = (b_tesla - bg.b_on) / bg.sigma_on;
    return bg.c * 0.5 * std::erfc(-t / std::sqrt(2.0));
}

SweepPoint sweep_point(const SpectrumModel& m, double b_tesla)
{
    const double omega0 = k::two_pi * m.resonator.f0_hz;
    std::complex<double> w_sum = 0.0;
    for (const auto& p : m.peaks) {
        p.validate();
        w_sum += ensemble_response(p, omega0, peak_omega_s(p, omega0, b_tesla));
    }
    SweepPoint out;
    out.qb_inv = -w_sum.real() / omega0 + background_loss(m.background, b_tesla);
    out.df_hz = w_sum.imag() / k::two_pi;
    return out;
}

std::complex<double> s21(const SpectrumModel& m, double f_hz, double b_tesla)
{
    const auto& r = m.resonator;
    if (!(r.f0_hz > 0.0) || !(r.q > 0.0))
        throw std::domain_error("resonator: f0 and Q must be > 0");
    const double omega0 = k::two_pi * r.f0_hz;
    const double omega = k::two_pi * f_hz;
    const double kappa = omega0 / r.q;
    const std::complex<double> kappa_c = omega0 / r.qc;

    std::complex<double> w_sum = 0.0;
    for (const auto& p : m.peaks) {
        p.validate();
        w_sum += ensemble_response(p, omega, peak_omega_s(p, omega0, b_tesla));
    }
    // the background plateau is a plain loss channel, so it enters the pole
    // the same way Re W does; keeps s21 consistent with sweep_point
    w_sum -= omega0 * background_loss(m.background, b_tesla);
    const std::complex<double> den =
        std::complex<double>(0.0, omega - omega0) - kappa + w_sum;
    return 1.0 + kappa_c / den;
}

}  // namespace esr
