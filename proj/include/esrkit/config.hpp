#pragma once

#include <cstdint>
#include <string>

#include "esrkit/fitting.hpp"
#include "esrkit/geometry.hpp"
#include "esrkit/lineshape.hpp"

namespace esr {

// Tool configuration, read from a flat TOML-subset text file: [section]
// headers, `key = value` lines holding numbers, true/false, or quoted
// strings, '#' comments.  Unknown sections or keys are errors.  Every field
// has a default, so running without a file is valid.
//
// Sections and keys:
//   [geometry]  b_m, w_m, delta_cut_m, z0_ohm, l_res_m
//   [resonator] f0_hz, q, qc_re, qc_im
//   [spin]      kind ("free_doublet" | "hyperfine" | "triplet"), g_e, a_hz,
//               g_n, nuclear_zeeman, d_hz, g_central
//   [fit]       robust, include_df, fit_background, max_iter, prominence
//   [run]       t_kelvin, seed
struct Config {
    StripGeometry geometry;
    ResonatorParams resonator;
    SpinSystem spin = SpinSystem::hyperfine(2.0, 1.4204e9);  // satellite prior
    double g_central = 2.0;                                  // central-line prior
    SweepFitOptions sweep;
    double t_kelvin = 0.05;
    uint64_t seed = 0;

    // Canonical serialization of every effective value in a fixed order; its
    // hash stamps all outputs so results trace back to their settings.
    std::string canonical() const;
    std::string hash() const;  // 16 hex digits of FNV-1a 64
};

// Defaults overridden by the file at `path`; empty path returns defaults.
Config load_config(const std::string& path);

uint64_t fnv1a64(const std::string& s);

}  // namespace esr
