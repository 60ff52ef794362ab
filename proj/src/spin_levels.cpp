#include "esrkit/spin_levels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "esrkit/constants.hpp"

namespace esr {

namespace k = constants;

int SpinSystem::dim() const
{
    switch (kind) {
        case SpinKind::FreeDoublet: return 2;
        case SpinKind::HyperfineDoublet: return 4;
        case SpinKind::Triplet: return 3;
    }
    return 0;
}

void SpinSystem::validate() const
{
    if (!(g_e > 0.0) || !std::isfinite(g_e))
        throw std::domain_error("spin system: g_e must be positive");
    if (kind == SpinKind::HyperfineDoublet && !std::isfinite(a_hz))
        throw std::domain_error("spin system: hyperfine constant must be finite");
    if (!std::isfinite(d_hz)) throw std::domain_error("spin system: D must be finite");
}

SpinSystem SpinSystem::free_doublet(double ge)
{
    SpinSystem s;
    s.kind = SpinKind::FreeDoublet;
    s.g_e = ge;
    return s;
}

SpinSystem SpinSystem::hyperfine(double ge, double a_hz)
{
    SpinSystem s;
    s.kind = SpinKind::HyperfineDoublet;
    s.g_e = ge;
    s.a_hz = a_hz;
    return s;
}

SpinSystem SpinSystem::triplet(double ge, double d_hz)
{
    SpinSystem s;
    s.kind = SpinKind::Triplet;
    s.g_e = ge;
    s.d_hz = d_hz;
    return s;
}

std::string to_string(TransitionLabel label)
{
    switch (label) {
        case TransitionLabel::Central: return "Central";
        case TransitionLabel::SatLow: return "SatLow";
        case TransitionLabel::SatHigh: return "SatHigh";
        case TransitionLabel::Other: return "Other";
    }
    return "Other";
}

std::optional<TransitionLabel> transition_label_from_string(const std::string& s)
{
    std::string low;
    for (char c : s) low += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (low == "central") return TransitionLabel::Central;
    if (low == "satlow" || low == "sat_low") return TransitionLabel::SatLow;
    if (low == "sathigh" || low == "sat_high") return TransitionLabel::SatHigh;
    if (low == "other") return TransitionLabel::Other;
    return std::nullopt;
}

namespace {

void check_field(double b)
{
    if (!(b >= 0.0) || !std::isfinite(b))
        throw std::domain_error("magnetic field must be finite and >= 0");
}

// Hamiltonian H/h in Hz.  Basis orders:
//   FreeDoublet      |+1/2>, |-1/2>
//   HyperfineDoublet |mS mI> = |++>, |+->, |-+>, |-->
//   Triplet          |+1>, |0>, |-1>
Eigen::MatrixXd hamiltonian_hz(const SpinSystem& spin, double b)
{
    const double fe = spin.g_e * k::mu_b * b / k::h;
    switch (spin.kind) {
        case SpinKind::FreeDoublet: {
            Eigen::Matrix2d h;
            h << 0.5 * fe, 0.0, 0.0, -0.5 * fe;
            return h;
        }
        case SpinKind::HyperfineDoublet: {
            const double a = spin.a_hz;
            const double fn = spin.nuclear_zeeman ? spin.g_n * k::mu_n * b / k::h : 0.0;
            Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
            // diagonal: A mS mI + fe mS - fn mI
            h(0, 0) = 0.25 * a + 0.5 * fe - 0.5 * fn;
            h(1, 1) = -0.25 * a + 0.5 * fe + 0.5 * fn;
            h(2, 2) = -0.25 * a - 0.5 * fe - 0.5 * fn;
            h(3, 3) = 0.25 * a - 0.5 * fe + 0.5 * fn;
            // flip-flop (S+I- + S-I+)/2 couples |+-> and |-+>
            h(1, 2) = h(2, 1) = 0.5 * a;
            return h;
        }
        case SpinKind::Triplet: {
            const double d = spin.d_hz;
            Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
            h(0, 0) = fe + d / 3.0;   // m = +1: D(m^2 - 2/3)
            h(1, 1) = -2.0 * d / 3.0; // m = 0
            h(2, 2) = -fe + d / 3.0;  // m = -1
            return h;
        }
    }
    throw std::logic_error("unreachable");
}

// electron S_x in the same basis
Eigen::MatrixXd sx_operator(const SpinSystem& spin)
{
    switch (spin.kind) {
        case SpinKind::FreeDoublet: {
            Eigen::Matrix2d sx;
            sx << 0.0, 0.5, 0.5, 0.0;
            return sx;
        }
        case SpinKind::HyperfineDoublet: {
            Eigen::Matrix4d sx = Eigen::Matrix4d::Zero();
            sx(0, 2) = sx(2, 0) = 0.5;  // |++> <-> |-+>
            sx(1, 3) = sx(3, 1) = 0.5;  // |+-> <-> |-->
            return sx;
        }
        case SpinKind::Triplet: {
            const double r = 1.0 / std::sqrt(2.0);
            Eigen::Matrix3d sx = Eigen::Matrix3d::Zero();
            sx(0, 1) = sx(1, 0) = r;
            sx(1, 2) = sx(2, 1) = r;
            return sx;
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace

LevelSet eigensystem(const SpinSystem& spin, double b_tesla)
{
    spin.validate();
    check_field(b_tesla);
    const Eigen::MatrixXd h = hamiltonian_hz(spin, b_tesla);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    LevelSet out;
    out.b_tesla = b_tesla;
    out.energies_hz = solver.eigenvalues();  // ascending
    out.states = solver.eigenvectors();
    return out;
}

std::vector<Transition> transitions(const SpinSystem& spin, double b_tesla,
                                    double min_strength)
{
    const LevelSet ls = eigensystem(spin, b_tesla);
    const Eigen::MatrixXd sx = sx_operator(spin);
    const int n = spin.dim();

    std::vector<Transition> all;
    for (int l = 0; l < n; ++l) {
        for (int u = l + 1; u < n; ++u) {
            Transition t;
            t.lower = l;
            t.upper = u;
            t.frequency_hz = ls.energies_hz(u) - ls.energies_hz(l);
            const double m = ls.states.col(u).dot(sx * ls.states.col(l));
            t.strength = m * m;
            all.push_back(t);
        }
    }

    // label the strong electron-flip lines
    if (spin.kind == SpinKind::FreeDoublet) {
        for (auto& t : all) t.label = TransitionLabel::Central;
    } else if (spin.kind == SpinKind::Triplet) {
        for (auto& t : all)
            t.label = t.strength > 0.1 ? TransitionLabel::Central : TransitionLabel::Other;
    } else {
        // two largest strengths with nonzero frequency; the higher frequency
        // branch crosses a fixed resonator at the lower sweep field
        std::vector<int> idx;
        for (int i = 0; i < (int)all.size(); ++i)
            if (all[i].frequency_hz > 0.0) idx.push_back(i);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (all[a].strength != all[b].strength) return all[a].strength > all[b].strength;
            return all[a].frequency_hz > all[b].frequency_hz;
        });
        for (auto& t : all) t.label = TransitionLabel::Other;
        if (idx.size() >= 2) {
            Transition& a = all[idx[0]];
            Transition& b = all[idx[1]];
            if (a.frequency_hz >= b.frequency_hz) {
                a.label = TransitionLabel::SatLow;
                b.label = TransitionLabel::SatHigh;
            } else {
                a.label = TransitionLabel::SatHigh;
                b.label = TransitionLabel::SatLow;
            }
        }
    }

    std::vector<Transition> out;
    for (const auto& t : all)
        if (t.strength >= min_strength) out.push_back(t);
    std::sort(out.begin(), out.end(), [](const Transition& a, const Transition& b) {
        return a.frequency_hz < b.frequency_hz;
    });
    return out;
}

std::optional<double> transition_frequency(const SpinSystem& spin, double b_tesla,
                                           TransitionLabel label, double min_strength)
{
    for (const auto& t : transitions(spin, b_tesla, min_strength))
        if (t.label == label) return t.frequency_hz;
    return std::nullopt;
}

namespace {

double labeled_freq_or_nan(const SpinSystem& spin, double b, TransitionLabel label,
                           double min_strength)
{
    const auto f = transition_frequency(spin, b, label, min_strength);
    return f ? *f : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::vector<double> resonance_fields(const SpinSystem& spin, double f_res_hz,
                                     double b_max_tesla, std::optional<TransitionLabel> only,
                                     double min_strength)
{
    spin.validate();
    if (!(f_res_hz > 0.0)) throw std::domain_error("resonance frequency must be > 0");
    if (!(b_max_tesla > 0.0)) throw std::domain_error("field range must be > 0");

    constexpr int kGrid = 2000;
    constexpr double kTol = 1e-7;  // tesla

    std::vector<TransitionLabel> labels;
    if (only) {
        labels = {*only};
    } else {
        labels = {TransitionLabel::Central, TransitionLabel::SatLow, TransitionLabel::SatHigh,
                  TransitionLabel::Other};
    }

    std::vector<double> roots;
    for (TransitionLabel label : labels) {
        double b_prev = b_max_tesla / kGrid;
        double g_prev = labeled_freq_or_nan(spin, b_prev, label, min_strength) - f_res_hz;
        for (int i = 2; i <= kGrid; ++i) {
            const double b = b_max_tesla * i / kGrid;
            const double g = labeled_freq_or_nan(spin, b, label, min_strength) - f_res_hz;
            if (std::isfinite(g_prev) && std::isfinite(g) &&
                ((g_prev <= 0.0 && g > 0.0) || (g_prev >= 0.0 && g < 0.0))) {
                double lo = b_prev, hi = b, glo = g_prev;
                while (hi - lo > kTol) {
                    const double mid = 0.5 * (lo + hi);
                    const double gm =
                        labeled_freq_or_nan(spin, mid, label, min_strength) - f_res_hz;
                    if (!std::isfinite(gm)) break;
                    if ((glo <= 0.0) == (gm <= 0.0)) {
                        lo = mid;
                        glo = gm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push_back(0.5 * (lo + hi));
            }
            b_prev = b;
            g_prev = g;
        }
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) { return std::abs(a - b) < 2e-7; }),
                roots.end());
    return roots;
}

std::optional<double> resonance_field_near(const SpinSystem& spin, TransitionLabel label,
                                           double f_res_hz, double b_lo, double b_hi,
                                           double min_strength)
{
    if (!(b_hi > b_lo) || !(b_lo >= 0.0))
        throw std::domain_error("resonance_field_near: bad bracket");
    auto g = [&](double b) { return labeled_freq_or_nan(spin, b, label, min_strength) - f_res_hz; };

    // coarse scan for a sign change, then bisection with a secant polish
    constexpr int kScan = 64;
    double lo = b_lo, hi = b_hi, glo = g(lo), ghi = 0.0;
    bool found = false;
    double prev_b = lo, prev_g = glo;
    for (int i = 1; i <= kScan; ++i) {
        const double b = b_lo + (b_hi - b_lo) * i / kScan;
        const double gb = g(b);
        if (std::isfinite(prev_g) && std::isfinite(gb) && (prev_g <= 0.0) != (gb <= 0.0)) {
            lo = prev_b;
            hi = b;
            glo = prev_g;
            ghi = gb;
            found = true;
            break;
        }
        prev_b = b;
        prev_g = gb;
    }
    if (!found) return std::nullopt;

    for (int it = 0; it < 80 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        // secant proposal, fall back to midpoint when outside/degenerate
        double mid = 0.5 * (lo + hi);
        if (std::isfinite(glo) && std::isfinite(ghi) && ghi != glo) {
            const double s = lo - glo * (hi - lo) / (ghi - glo);
            if (s > lo && s < hi) mid = s;
        }
        const double gm = g(mid);
        if (!std::isfinite(gm)) return std::nullopt;
        if ((glo <= 0.0) == (gm <= 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }
    return 0.5 * (lo + hi);
}

double peak_area_factor(const SpinSystem& spin, const Transition& t, double b_tesla,
                        double t_kelvin)
{
    if (!(t_kelvin > 0.0)) throw std::domain_error("temperature must be > 0");
    const LevelSet ls = eigensystem(spin, b_tesla);
    const int n = spin.dim();

    // Boltzmann populations over all levels, shifted for stability
    Eigen::VectorXd p(n);
    const double e0 = ls.energies_hz.minCoeff();
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        p(i) = std::exp(-k::h * (ls.energies_hz(i) - e0) / (k::k_b * t_kelvin));
        z += p(i);
    }
    p /= z;

    // sum population differences over lines degenerate with t
    const double tol = std::max(1e-6 * t.frequency_hz, 1e-3);
    double factor = 0.0;
    for (const auto& tr : transitions(spin, b_tesla, 1e-9)) {
        if (std::abs(tr.frequency_hz - t.frequency_hz) <= tol)
            factor += p(tr.lower) - p(tr.upper);
    }
    return factor;
}

double apparent_g(double b_peak_tesla, double f_res_hz)
{
    if (!(b_peak_tesla > 0.0)) throw std::domain_error("peak field must be > 0");
    return k::h * f_res_hz / (k::mu_b * b_peak_tesla);
}

}  // namespace esr
