#pragma once

#include <cmath>
#include <complex>
#include <random>

namespace testutil {

// Gaussian noise pinned across platforms: mt19937_64 output (sequence fixed
// by the standard) through an explicit Box-Muller transform.  Seeds picked
// for pinned-noise test cases stay valid when the standard library changes.
struct PinnedGauss {
    std::mt19937_64 rng;
    bool have = false;
    double spare = 0.0;
    explicit PinnedGauss(uint64_t seed) : rng(seed) {}
    double uniform() { return (rng() >> 11) * 0x1.0p-53; }  // [0, 1)
    double operator()() {
        if (have) {
            have = false;
            return spare;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare = r * std::sin(a);
        have = true;
        return r * std::cos(a);
    }
};

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::abs(want);
}

inline double rel_err(std::complex<double> got, std::complex<double> want) {
    return std::abs(got - want) / std::abs(want);
}

// Reference w(z) values computed in 30-digit arithmetic and rounded to
// double.  Spot grid spanning the real axis, imaginary axis, both tails,
// near-real points, and the |z| = 30 boundary.
struct WofzRef {
    double re, im, wre, wim;
};

inline constexpr WofzRef kWofzTable[] = {
    {0, 0, 1, 0},
    {1, 0, 0.36787944117144233, 0.60715770584139372},
    {-1, 0, 0.36787944117144233, -0.60715770584139372},
    {0, 1, 0.427583576155807, 0},
    {2, 1, 0.14023958136627795, 0.22221344017989911},
    {-3, 0.5, 0.037126366054692342, -0.19298375530036208},
    {5, 0, 1.3887943864964021e-11, 0.11524596183093659},
    {10, 0, 3.7200759760208361e-44, 0.056705394232887597},
    {30, 0, 0, 0.018816784868660726},
    {-30, 0, 0, -0.018816784868660726},
    {0, 30, 0.018795888861416751, 0},
    {21, 21, 0.013440687462839515, 0.013425457280788054},
    {-15, 0.002, 5.0488292660002218e-06, -0.037696785381400366},
    {8, 9.9999999999999995e-08, 9.0306208161814978e-10, 0.071088111744480861},
    {0.10000000000000001, 0.10000000000000001, 0.88847856247564372, 0.09433165105728511},
    {-0.5, 4, 0.13515598496200035, -0.015984075293486211},
    {3, 0, 0.00012340980408667956, 0.2011573170376004},
    {12, 6, 0.018921959268556082, 0.037632859530572174},
    {-7.2999999999999998, 0.02, 0.0002180012038246477, -0.078032214502260597},
    {29, 1, 0.00067125423124603028, 0.019443212272044184},
    {0.0001, 0.0001, 0.99988716208479478, 0.00011281791821405681},
    {6, 0, 2.3195228302435696e-16, 0.09539620896911076},
    {-6, 25, 0.021325876252302024, -0.0051104937792625128},
    {17, 0.29999999999999999, 0.00058854478310121439, 0.033234900576958409},
};

}  // namespace testutil
