#include "esrkit/faddeeva.hpp"

#include <cmath>

namespace esr {
namespace {

// Weideman rational approximation, N = 48.  Coefficients are the Fourier
// coefficients of exp(-L^2 tan^2(t/2)) (L^2 + L^2 tan^2(t/2)) computed once
// at full double precision; c[0] multiplies Z^47.
constexpr double kL = 5.825901260487881;

constexpr double kCoef[48] = {
    -3.7007434154171883e-17, 3.908097080905041e-17,  8.9130453596412514e-17,
    4.336469876763116e-17,   2.1035780900744799e-17, 7.0683134796397921e-20,
    3.859105048166247e-16,   7.2537975485229261e-16, -1.8792328220691556e-15,
    -5.2391585950953433e-15, 9.5275363607545155e-15, 4.2342555584235587e-14,
    -3.1933415962846563e-14, -3.2277573109725459e-13, -9.6550173898425105e-14,
    2.2154187772000165e-12,  3.4253340904418414e-12, -1.1935451266839411e-11,
    -4.3865867675270371e-11, 2.1622002347965739e-11, 3.8794220773032034e-10,
    5.7752898554791089e-10,  -2.015659927316155e-09, -9.5962547130788443e-09,
    -6.3868099289015055e-09, 6.9270006360260761e-08, 2.6549492006870939e-07,
    1.949433746724146e-07,   -1.9445657790098968e-06, -9.4756382404508275e-06,
    -1.9054461619112019e-05, 1.7506316371117585e-05, 0.00030786913640889043,
    0.0014864991251956183,   0.0051258135482256861,  0.014546837792237402,
    0.035861369983376683,    0.078955895534700046,   0.1578633044338047,
    0.28979989079604812,     0.49225702391399057,    0.77806241914842278,
    1.1492204645397781,      1.5913084691178003,     2.0707599716742915,
    2.5370484874446904,      2.9304498956237564,     3.194064589395071,
};

constexpr double kInvSqrtPi = 0.56418958354775628695;

std::complex<double> upper_half(std::complex<double> z)
{
    const std::complex<double> iz(-z.imag(), z.real());
    const std::complex<double> d = kL - iz;
    const std::complex<double> zz = (kL + iz) / d;
    std::complex<double> p = kCoef[0];
    for (int k = 1; k < 48; ++k) p = p * zz + kCoef[k];
    return 2.0 * p / (d * d) + kInvSqrtPi / d;
}

}  // namespace

std::complex<double> faddeeva(std::complex<double> z)
{
    if (z.imag() == 0.0) {
        // On the axis Re w = exp(-x^2) exactly; the rational form only
        // reaches absolute accuracy there and would lose the far tail.
        return {std::exp(-z.real() * z.real()), upper_half(z).imag()};
    }
    if (z.imag() >= 0.0) return upper_half(z);
    // w(z) = 2 exp(-z^2) - w(-z); -z lies in the upper half plane
    const std::complex<double> e = std::exp(-z * z);
    return 2.0 * e - upper_half(-z);
}

}  // namespace esr
