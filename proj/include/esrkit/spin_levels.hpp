#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace esr {

// ---------------------------------------------------------------------------
// Spin communities
// ---------------------------------------------------------------------------
//
// Three level-structure models cover the surface-spin species seen by the
// resonator:
//   FreeDoublet       electron spin 1/2, pure Zeeman line
//   HyperfineDoublet  electron 1/2 coupled to a nuclear 1/2 (isotropic A),
//                     the atomic-hydrogen-like case
//   Triplet           spin 1 with optional axial zero-field splitting D
//
// All energies are returned in Hz (E/h).  The static Hamiltonian is
//   H/h = A I.S + (g_e mu_B/h) B S_z - (g_n mu_N/h) B I_z
// in the product basis, diagonalized exactly.

enum class SpinKind { FreeDoublet, HyperfineDoublet, Triplet };

struct SpinSystem {
    SpinKind kind = SpinKind::FreeDoublet;
    double g_e = 2.0;   // electron g-factor, > 0
    double a_hz = 0.0;  // hyperfine constant (HyperfineDoublet), Hz
    double g_n = 5.5856946893;   // nuclear g-factor; proton by default
    bool nuclear_zeeman = true;  // include the -g_n mu_N B I_z term
    double d_hz = 0.0;           // zero-field splitting (Triplet), Hz

    int dim() const;
    void validate() const;  // throws std::domain_error

    static SpinSystem free_doublet(double ge);
    static SpinSystem hyperfine(double ge, double a_hz);
    static SpinSystem triplet(double ge, double d_hz = 0.0);
};

struct LevelSet {
    double b_tesla = 0.0;
    Eigen::VectorXd energies_hz;  // ascending
    Eigen::MatrixXd states;       // column i is the eigenvector of level i
};

// Peak labels name the position of the line in a field sweep at fixed
// resonator frequency: SatLow is the satellite met at the LOWER field, which
// is the higher-frequency electron-flip branch at fixed B.  SatHigh is the
// converse.  The free-electron Zeeman line is Central.
enum class TransitionLabel { Central, SatLow, SatHigh, Other };

std::string to_string(TransitionLabel label);
std::optional<TransitionLabel> transition_label_from_string(const std::string& s);

struct Transition {
    double frequency_hz = 0.0;  // E_upper - E_lower, >= 0
    double strength = 0.0;      // |<upper| S_x |lower>|^2
    int lower = 0;              // indices into LevelSet energies (ascending)
    int upper = 0;
    TransitionLabel label = TransitionLabel::Other;
};

// Exact eigensystem at field B (tesla, >= 0).
LevelSet eigensystem(const SpinSystem& spin, double b_tesla);

// Magnetic dipole (S_x) transitions with strength >= min_strength, sorted by
// frequency.  Spin-1/2 operators bound the strength by 1/4; the triplet
// lines carry 1/2.
std::vector<Transition> transitions(const SpinSystem& spin, double b_tesla,
                                    double min_strength = 0.01);

// Frequency of the labeled line at B, or nullopt when no transition carries
// that label there.
std::optional<double> transition_frequency(const SpinSystem& spin, double b_tesla,
                                           TransitionLabel label,
                                           double min_strength = 0.01);

// All fields in (0, b_max] where a transition crosses f_res_hz, found by a
// 2000-point grid scan plus bisection to 1e-7 T.  With `only` set, restricted
// to that labeled line.  Result sorted ascending.
std::vector<double> resonance_fields(const SpinSystem& spin, double f_res_hz,
                                     double b_max_tesla,
                                     std::optional<TransitionLabel> only = std::nullopt,
                                     double min_strength = 0.01);

// Single-root refinement near an initial bracket, same diagonalization route
// as resonance_fields but polished to ~1e-12 T so that finite-difference
// Jacobians in the fits stay smooth.  Returns nullopt if the bracket holds
// no crossing of the labeled line.
std::optional<double> resonance_field_near(const SpinSystem& spin, TransitionLabel label,
                                           double f_res_hz, double b_lo, double b_hi,
                                           double min_strength = 0.01);

// Thermal weight of the peak the transition t belongs to: the Boltzmann
// population difference p_lower - p_upper with populations normalized over
// ALL levels, summed over every transition degenerate with t (equal frequency
// within 1e-6 relative).  For the FreeDoublet this is tanh(h f / 2 k_B T);
// for the D = 0 triplet the two overlapping lines give p(-1) - p(+1).
// Monotone non-increasing in T, -> 1 as T -> 0 for a ground-state transition.
double peak_area_factor(const SpinSystem& spin, const Transition& t, double b_tesla,
                        double t_kelvin);

// g = h f_res / (mu_B B_peak), the sweep-position g-factor of a peak.
double apparent_g(double b_peak_tesla, double f_res_hz);

}  // namespace esr
