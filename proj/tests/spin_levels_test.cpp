#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "esrkit/spin_levels.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using esr::SpinSystem;
using esr::TransitionLabel;
using testutil::rel_err;

namespace {
// Atomic hydrogen hyperfine constant; the zero-field splitting of this
// system is the 21 cm line, a convenient exact anchor.
constexpr double kHydrogenA = 1420.405751768e6;

const esr::Transition& labeled(const std::vector<esr::Transition>& lines,
                               TransitionLabel want) {
    for (const auto& t : lines)
        if (t.label == want) return t;
    REQUIRE(false);
    return lines.front();
}
}  // namespace

TEST_CASE("spin system dimensions and validation") {
    CHECK(SpinSystem::free_doublet(2.0).dim() == 2);
    CHECK(SpinSystem::hyperfine(2.0, 1.4e9).dim() == 4);
    CHECK(SpinSystem::triplet(2.0).dim() == 3);
    CHECK_THROWS_AS(SpinSystem::free_doublet(-1.0).validate(), std::domain_error);
    CHECK_THROWS_AS(SpinSystem::free_doublet(0.0).validate(), std::domain_error);
}

TEST_CASE("hydrogen-like system at zero field") {
    auto spin = SpinSystem::hyperfine(2.0023, kHydrogenA);
    auto ls = esr::eigensystem(spin, 0.0);
    REQUIRE(ls.energies_hz.size() == 4);
    // singlet at -3A/4, triplet at +A/4
    CHECK(rel_err(ls.energies_hz[0], -0.75 * kHydrogenA) < 1e-12);
    for (int i = 1; i < 4; ++i) CHECK(rel_err(ls.energies_hz[i], 0.25 * kHydrogenA) < 1e-12);
    // singlet-triplet lines sit exactly at the zero-field splitting A, while
    // intra-triplet lines collapse to zero frequency in the B -> 0 limit
    auto lines = esr::transitions(spin, 0.0);
    REQUIRE(lines.size() >= 1);
    bool saw_splitting = false;
    for (const auto& t : lines) {
        if (t.frequency_hz > 0.5 * kHydrogenA) {
            saw_splitting = true;
            CHECK(rel_err(t.frequency_hz, kHydrogenA) < 1e-12);
        } else {
            CHECK(std::abs(t.frequency_hz) < 1e-3 * kHydrogenA);
        }
    }
    CHECK(saw_splitting);
}

TEST_CASE("hyperfine eigenvalues match the closed-form solution") {
    const double a = 1.423e9, g = 2.0;
    auto spin = SpinSystem::hyperfine(g, a);
    oracle::HyperfineClosedForm cf(a, g, spin.g_n, true);
    for (double b : {1e-6, 1e-3, 0.05, 0.149, 0.2, 0.5, 2.0}) {
        auto ls = esr::eigensystem(spin, b);
        std::vector<double> want = {
            a / 4 + (cf.ge_hz - cf.gn_hz) * b / 2,
            a / 4 - (cf.ge_hz - cf.gn_hz) * b / 2,
            -a / 4 + 0.5 * std::sqrt(a * a + std::pow((cf.ge_hz + cf.gn_hz) * b, 2)),
            -a / 4 - 0.5 * std::sqrt(a * a + std::pow((cf.ge_hz + cf.gn_hz) * b, 2))};
        std::sort(want.begin(), want.end());
        CAPTURE(b);
        for (int i = 0; i < 4; ++i) {
            CHECK(std::abs(ls.energies_hz[i] - want[static_cast<size_t>(i)]) <
                  1e-6 + 1e-12 * std::abs(want[static_cast<size_t>(i)]));
        }
    }
}

TEST_CASE("eigensystem invariants") {
    for (auto spin : {SpinSystem::free_doublet(1.9), SpinSystem::hyperfine(2.1, 9e8),
                      SpinSystem::triplet(2.0, 3e7)}) {
        auto ls = esr::eigensystem(spin, 0.13);
        for (int i = 1; i < ls.energies_hz.size(); ++i)
            CHECK(ls.energies_hz[i] >= ls.energies_hz[i - 1]);
        Eigen::MatrixXd gram = ls.states.transpose() * ls.states;
        CHECK((gram - Eigen::MatrixXd::Identity(spin.dim(), spin.dim()))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
}

TEST_CASE("transition strengths respect the spin-operator bounds") {
    auto hyp = SpinSystem::hyperfine(2.0, 1.423e9);
    for (double b : {0.01, 0.149, 0.3, 1.0}) {
        auto lines = esr::transitions(hyp, b, 1e-6);
        for (const auto& t : lines) {
            CHECK(t.frequency_hz >= 0.0);
            CHECK(t.strength > 0.0);
            CHECK(t.strength <= 0.25 + 1e-9);
        }
        CHECK(std::is_sorted(lines.begin(), lines.end(),
                             [](const esr::Transition& x, const esr::Transition& y) {
                                 return x.frequency_hz < y.frequency_hz;
                             }));
    }
    for (const auto& t : esr::transitions(SpinSystem::triplet(2.0, 5e7), 0.1))
        CHECK(t.strength <= 0.5 + 1e-9);
}

TEST_CASE("satellite labels order by sweep position") {
    // At fixed field the low-field satellite is the higher-frequency branch.
    auto spin = SpinSystem::hyperfine(2.0, 1.423e9);
    auto lines = esr::transitions(spin, 0.149);
    const auto& lo = labeled(lines, TransitionLabel::SatLow);
    const auto& hi = labeled(lines, TransitionLabel::SatHigh);
    CHECK(lo.frequency_hz > hi.frequency_hz);
    // and the fields where they cross a fixed resonator frequency order the
    // other way around
    auto b_lo = esr::resonance_fields(spin, 5.0e9, 1.0, TransitionLabel::SatLow);
    auto b_hi = esr::resonance_fields(spin, 5.0e9, 1.0, TransitionLabel::SatHigh);
    REQUIRE(b_lo.size() == 1);
    REQUIRE(b_hi.size() == 1);
    CHECK(b_lo[0] < b_hi[0]);
}

TEST_CASE("triplet lines split by twice the zero-field parameter") {
    const double d = 5e7;
    auto lines = esr::transitions(SpinSystem::triplet(2.0, d), 0.1);
    REQUIRE(lines.size() == 2);
    CHECK(rel_err(lines[1].frequency_hz - lines[0].frequency_hz, 2 * d) < 1e-6);
    auto degen = esr::transitions(SpinSystem::triplet(2.0, 0.0), 0.1);
    REQUIRE(degen.size() == 2);
    CHECK(std::abs(degen[1].frequency_hz - degen[0].frequency_hz) < 1.0);
}

TEST_CASE("resonance fields agree with the closed-form inversion") {
    const double a = 1.423e9, g = 2.0;
    auto spin = SpinSystem::hyperfine(g, a);
    oracle::HyperfineClosedForm cf(a, g, spin.g_n, true);
    for (double f : {3.0e9, 5.0e9, 9.7e9, 20.0e9, 40.0e9}) {
        auto lo = esr::resonance_fields(spin, f, 3.0, TransitionLabel::SatLow);
        auto hi = esr::resonance_fields(spin, f, 3.0, TransitionLabel::SatHigh);
        REQUIRE(lo.size() == 1);
        REQUIRE(hi.size() == 1);
        CAPTURE(f);
        CHECK(std::abs(lo[0] - cf.field_sat_low(f)) < 2e-7);
        CHECK(std::abs(hi[0] - cf.field_sat_high(f)) < 2e-7);
    }
    // free-electron line inverts in closed form
    auto fd = SpinSystem::free_doublet(2.0023);
    auto bc = esr::resonance_fields(fd, 5.0e9, 1.0, TransitionLabel::Central);
    REQUIRE(bc.size() == 1);
    CHECK(std::abs(bc[0] - oracle::free_doublet_field(2.0023, 5.0e9)) < 2e-7);
}

TEST_CASE("satellite splitting at 5 GHz, exact value") {
    // The first-order splitting A h / (g mu_B) is 50.835 mT; at a 5 GHz
    // resonator the exact level curvature widens it by about 1.05 mT.  Value
    // frozen from the closed-form solution.
    auto spin = SpinSystem::hyperfine(2.0, 1.423e9);
    auto lo = esr::resonance_fields(spin, 5.0e9, 1.0, TransitionLabel::SatLow);
    auto hi = esr::resonance_fields(spin, 5.0e9, 1.0, TransitionLabel::SatHigh);
    const double split = hi[0] - lo[0];
    CHECK(std::abs(split - 51.884218e-3) < 5e-7);
    const double first_order = 1.423e9 * oracle::kPlanck / (2.0 * oracle::kMuB);
    CHECK(split > first_order + 1.0e-3);  // curvature term is real at 5 GHz
}

TEST_CASE("root refinement stays on the labeled branch") {
    auto spin = SpinSystem::hyperfine(2.0, 1.423e9);
    oracle::HyperfineClosedForm cf(1.423e9, 2.0, spin.g_n, true);
    auto b = esr::resonance_field_near(spin, TransitionLabel::SatLow, 5.0e9, 0.10, 0.18);
    REQUIRE(b.has_value());
    CHECK(std::abs(*b - cf.field_sat_low(5.0e9)) < 1e-9);
    CHECK_FALSE(
        esr::resonance_field_near(spin, TransitionLabel::SatLow, 5.0e9, 0.4, 0.6));
}

TEST_CASE("nuclear Zeeman term shifts satellites by microtesla") {
    // the nucleus is a spectator in both satellite lines, so the shift is a
    // second-order mixing effect, microtesla against a 0.16 T resonance
    auto on = SpinSystem::hyperfine(2.0, 1.423e9);
    auto off = on;
    off.nuclear_zeeman = false;
    auto b_on = esr::resonance_fields(on, 5.0e9, 1.0, TransitionLabel::SatLow)[0];
    auto b_off = esr::resonance_fields(off, 5.0e9, 1.0, TransitionLabel::SatLow)[0];
    CHECK(std::abs(b_on - b_off) > 1e-7);
    CHECK(std::abs(b_on - b_off) < 2e-5);
    oracle::HyperfineClosedForm cf_on(1.423e9, 2.0, on.g_n, true);
    oracle::HyperfineClosedForm cf_off(1.423e9, 2.0, on.g_n, false);
    const double want = cf_on.field_sat_low(5.0e9) - cf_off.field_sat_low(5.0e9);
    // each field carries the root solver's 1e-7 T bracket tolerance
    CHECK(std::abs((b_on - b_off) - want) < 2e-7);
}

TEST_CASE("thermal area factor of the free doublet is tanh(hf/2kT)") {
    auto fd = SpinSystem::free_doublet(2.0023);
    const double b = oracle::free_doublet_field(2.0023, 5.0e9);
    auto lines = esr::transitions(fd, b);
    REQUIRE(lines.size() == 1);
    for (double t : {0.01, 0.05, 0.1, 0.3, 1.0, 30.0}) {
        CHECK(rel_err(esr::peak_area_factor(fd, lines[0], b, t),
                      oracle::doublet_factor(lines[0].frequency_hz, t)) < 1e-12);
    }
}

TEST_CASE("thermal area factor sums degenerate triplet lines") {
    auto tp = SpinSystem::triplet(2.0, 0.0);
    auto lines = esr::transitions(tp, 0.1786);
    REQUIRE(lines.size() == 2);
    for (double t : {0.02, 0.05, 0.3, 2.0}) {
        CHECK(rel_err(esr::peak_area_factor(tp, lines[0], 0.1786, t),
                      oracle::triplet_factor(lines[0].frequency_hz, t)) < 1e-12);
    }
}

TEST_CASE("thermal area factor of a hyperfine satellite from level populations") {
    const double a = 1.423e9, g = 2.0023, f0 = 5.015e9;
    auto spin = SpinSystem::hyperfine(g, a);
    oracle::HyperfineClosedForm cf(a, g, spin.g_n, true);
    const double b = esr::resonance_fields(spin, f0, 1.0, TransitionLabel::SatLow)[0];
    auto lines = esr::transitions(spin, b);
    const auto& line = labeled(lines, TransitionLabel::SatLow);
    // SatLow runs from the lowest level (mixed pair, minus root) to the
    // highest (aligned product state); populations over all four levels.
    const double e_lo = -a / 4 - 0.5 * std::sqrt(a * a + std::pow((cf.ge_hz + cf.gn_hz) * b, 2));
    const double e_hi = a / 4 + (cf.ge_hz - cf.gn_hz) * b / 2;
    const double e_m1 = a / 4 - (cf.ge_hz - cf.gn_hz) * b / 2;
    const double e_m2 = -a / 4 + 0.5 * std::sqrt(a * a + std::pow((cf.ge_hz + cf.gn_hz) * b, 2));
    for (double t : {0.05, 0.1, 0.3}) {
        const double kt = oracle::kBoltzmann * t / oracle::kPlanck;  // Hz units
        const double z = std::exp(-e_lo / kt) + std::exp(-e_hi / kt) +
                         std::exp(-e_m1 / kt) + std::exp(-e_m2 / kt);
        const double want = (std::exp(-e_lo / kt) - std::exp(-e_hi / kt)) / z;
        CHECK(rel_err(esr::peak_area_factor(spin, line, b, t), want) < 1e-10);
    }
    // four thermally active levels halve the factor against the doublet
    const double ratio = esr::peak_area_factor(spin, line, b, 0.3) /
                         oracle::doublet_factor(f0, 0.3);
    CHECK(ratio > 0.45);
    CHECK(ratio < 0.55);
}

TEST_CASE("thermal area factor is monotone in temperature and saturates at 1") {
    auto fd = SpinSystem::free_doublet(2.0);
    const double b = 0.1786;
    auto lines = esr::transitions(fd, b);
    double prev = 2.0;
    for (double t : {1e-3, 0.01, 0.05, 0.1, 0.3, 1.0, 10.0}) {
        const double f = esr::peak_area_factor(fd, lines[0], b, t);
        CHECK(f > 0.0);
        CHECK(f <= 1.0);
        CHECK(f <= prev + 1e-15);
        prev = f;
    }
    CHECK(esr::peak_area_factor(fd, lines[0], b, 1e-4) > 1.0 - 1e-12);
}

TEST_CASE("apparent g inverts the peak position") {
    for (double g : {1.9, 2.0, 2.0023, 2.1}) {
        const double f = 5.015e9;
        const double b = oracle::free_doublet_field(g, f);
        CHECK(rel_err(esr::apparent_g(b, f), g) < 1e-12);
    }
}
