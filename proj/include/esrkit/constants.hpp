#pragma once

// CODATA 2018 values. These are fixed; analysis-level defaults that users may
// tune (g-factor priors, thresholds) live in the config layer instead.

namespace esr::constants {

inline constexpr double h = 6.62607015e-34;          // Planck, J s (exact)
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double k_b = 1.380649e-23;          // Boltzmann, J/K (exact)
inline constexpr double mu_b = 9.2740100783e-24;     // Bohr magneton, J/T
inline constexpr double mu_n = 5.0507837461e-27;     // nuclear magneton, J/T
inline constexpr double mu_0 = 1.25663706212e-6;     // vacuum permeability, T m/A
inline constexpr double g_free_electron = 2.00231930436256;
inline constexpr double g_proton = 5.5856946893;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Electron gyromagnetic ratio in Hz/T for a given g-factor.
inline constexpr double gamma_e_hz_per_t(double g) { return g * mu_b / h; }

}  // namespace esr::constants
