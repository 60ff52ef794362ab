#include "esrkit/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "esrkit/constants.hpp"
#include "esrkit/errors.hpp"

namespace esr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_strictly_monotone(const Eigen::VectorXd& x, const char* what) {
    if (x.size() < 2) return;
    const bool up = x[1] > x[0];
    for (Eigen::Index i = 1; i < x.size(); ++i) {
        const bool ok = up ? x[i] > x[i - 1] : x[i] < x[i - 1];
        if (!ok) throw InputError(std::string(what) + " must be strictly monotone");
    }
}

double median_inplace(std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (hi + v[mid - 1]);
}

// Noise scale from first differences; insensitive to smooth structure.
double diff_noise(const Eigen::VectorXd& y) {
    if (y.size() < 3) return 0.0;
    std::vector<double> d(static_cast<size_t>(y.size()) - 1);
    for (Eigen::Index i = 0; i + 1 < y.size(); ++i) d[i] = std::abs(y[i + 1] - y[i]);
    return 1.4826 * median_inplace(d) / std::sqrt(2.0);
}

Eigen::VectorXd moving_average(const Eigen::VectorXd& y, int w) {
    const Eigen::Index n = y.size();
    Eigen::VectorXd out(n);
    const int half = std::max(1, w / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + half);
        out[i] = y.segment(lo, hi - lo + 1).mean();
    }
    return out;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Keep logistic-bounded starting values strictly inside their interval.
ParamSpec clamped(std::string name, double init, double lo, double hi) {
    if (std::isfinite(lo) && std::isfinite(hi)) {
        const double pad = 1e-3 * (hi - lo);
        init = std::clamp(init, lo + pad, hi - pad);
    } else if (std::isfinite(lo)) {
        init = std::max(init, lo + 1e-12 * std::max(1.0, std::abs(lo)) + 1e-300);
    } else if (std::isfinite(hi)) {
        init = std::min(init, hi - 1e-12 * std::max(1.0, std::abs(hi)) - 1e-300);
    }
    return ParamSpec{std::move(name), init, lo, hi};
}

}  // namespace

// ---------------------------------------------------------------------------
// Resonator trace
// ---------------------------------------------------------------------------

ResonanceFit fit_resonance(const S21Trace& trace) {
    const Eigen::Index n = trace.f_hz.size();
    if (n < 8) throw InputError("resonance trace needs at least 8 points");
    if (trace.s21.size() != n) throw InputError("frequency and S21 columns differ in length");
    require_strictly_monotone(trace.f_hz, "f_hz");

    const Eigen::VectorXd re = trace.s21.real();
    const Eigen::VectorXd im = trace.s21.imag();

    // Baseline from the trace edges; the model tends to 1 off resonance but
    // the data may sit anywhere in the plane.
    const Eigen::Index edge = std::max<Eigen::Index>(2, n / 20);
    std::complex<double> baseline =
        (trace.s21.head(edge).sum() + trace.s21.tail(edge).sum()) /
        static_cast<double>(2 * edge);

    // Least-squares circle through the trace (mean-centered normal equations).
    const double xm = re.mean();
    const double ym = im.mean();
    Eigen::VectorXd u = re.array() - xm;
    Eigen::VectorXd v = im.array() - ym;
    Eigen::VectorXd z = u.array().square() + v.array().square();
    Eigen::Matrix2d m2;
    m2 << u.dot(u), u.dot(v), u.dot(v), v.dot(v);
    Eigen::Vector2d rhs(0.5 * u.dot(z), 0.5 * v.dot(z));
    Eigen::Vector2d cuv = m2.fullPivLu().solve(rhs);
    const double radius =
        std::sqrt(std::max(0.0, cuv.squaredNorm() + z.mean()));
    const std::complex<double> center(xm + cuv[0], ym + cuv[1]);

    // Reject traces with no resolvable dip before asking the optimizer.
    std::vector<double> dev(static_cast<size_t>(n));
    double depth = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        dev[i] = std::abs(std::abs(trace.s21[i] - center) - radius);
        depth = std::max(depth, std::abs(trace.s21[i] - baseline));
    }
    std::vector<double> dmag(static_cast<size_t>(n) - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i) dmag[i] = std::abs(trace.s21[i + 1] - trace.s21[i]);
    const double noise = 1.4826 * median_inplace(dmag) / std::sqrt(2.0);
    const double med_dev = median_inplace(dev);
    if (!std::isfinite(radius) || radius <= 3.0 * med_dev || depth <= 6.0 * noise)
        throw FitError("no resonance dip detected");

    // Starting values.  f0 at the point farthest from the baseline; kappa from
    // the half-depth width of |S21 - baseline| (Lorentzian magnitude profile
    // falls to half at detuning sqrt(3) kappa).
    Eigen::Index i0 = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = std::abs(trace.s21[i] - baseline);
        if (d > best) { best = d; i0 = i; }
    }
    Eigen::Index il = i0, ir = i0;
    while (il > 0 && std::abs(trace.s21[il] - baseline) >= 0.5 * depth) --il;
    while (ir < n - 1 && std::abs(trace.s21[ir] - baseline) >= 0.5 * depth) ++ir;
    const double f_lo = std::min(trace.f_hz[0], trace.f_hz[n - 1]);
    const double f_hi = std::max(trace.f_hz[0], trace.f_hz[n - 1]);
    const double span = f_hi - f_lo;
    double width_f = std::abs(trace.f_hz[ir] - trace.f_hz[il]);
    width_f = std::clamp(width_f, 2.0 * span / static_cast<double>(n), span);
    const double f0_init = trace.f_hz[i0];
    const double kappa_init = constants::pi * width_f / std::sqrt(3.0);

    // Phase around the circle center: phi = phi0 + 2 atan(delta / kappa).
    Eigen::VectorXd phi(n);
    for (Eigen::Index i = 0; i < n; ++i) phi[i] = std::arg(trace.s21[i] - center);
    auto phase_resid = [&](const Eigen::VectorXd& p) {
        const double f0 = p[0], kappa = p[1], phi0 = p[2];
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double delta = constants::two_pi * (trace.f_hz[i] - f0);
            const double model = phi0 + 2.0 * std::atan(delta / kappa);
            const double d = phi[i] - model;
            r[i] = std::atan2(std::sin(d), std::cos(d));  // wrapped difference
        }
        return r;
    };
    std::vector<ParamSpec> pspec;
    pspec.push_back(clamped("f0_hz", f0_init, f_lo - 0.05 * span, f_hi + 0.05 * span));
    pspec.push_back(clamped("kappa", kappa_init, 0.0, kInf));
    pspec.push_back(ParamSpec{"phi0", phi[i0], -kInf, kInf});
    FitOptions phase_opt;
    phase_opt.max_iter = 200;
    FitResult phase_fit = lm_fit(phase_resid, pspec, phase_opt);

    const double f0_p = phase_fit.param("f0_hz");
    const double kappa_p = phase_fit.param("kappa");
    const double phi0_p = phase_fit.param("phi0");
    // Off resonance the circle point sits at angle phi0 + pi from the center
    // with |kappa_c| = 2 kappa radius.
    const std::complex<double> kc_init =
        2.0 * kappa_p * radius *
        std::exp(std::complex<double>(0.0, phi0_p + constants::pi));

    // Full complex polish.
    auto full_resid = [&](const Eigen::VectorXd& p) {
        const double f0 = p[0], kappa = p[1];
        const std::complex<double> kc(p[2], p[3]);
        Eigen::VectorXd r(2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double delta = constants::two_pi * (trace.f_hz[i] - f0);
            const std::complex<double> model =
                1.0 + kc / (std::complex<double>(-kappa, delta));
            r[i] = model.real() - re[i];
            r[n + i] = model.imag() - im[i];
        }
        return r;
    };
    std::vector<ParamSpec> fspec;
    fspec.push_back(clamped("f0_hz", f0_p, f_lo - 0.05 * span, f_hi + 0.05 * span));
    fspec.push_back(clamped("kappa", kappa_p, 0.0, kInf));
    fspec.push_back(ParamSpec{"kc_re", kc_init.real(), -kInf, kInf});
    fspec.push_back(ParamSpec{"kc_im", kc_init.imag(), -kInf, kInf});
    FitOptions full_opt;
    full_opt.max_iter = 300;
    FitResult fit = lm_fit(full_resid, fspec, full_opt);

    ResonanceFit out;
    out.f0_hz = fit.param("f0_hz");
    const double kappa = fit.param("kappa");
    const std::complex<double> kc(fit.param("kc_re"), fit.param("kc_im"));
    const double omega0 = constants::two_pi * out.f0_hz;
    out.q = omega0 / kappa;
    out.qc = omega0 / kc;
    const double ki = kappa - kc.real();
    out.q_internal = ki > 0.0 ? omega0 / ki : kInf;
    out.fit = std::move(fit);
    return out;
}

// ---------------------------------------------------------------------------
// Field sweep
// ---------------------------------------------------------------------------

namespace {

double labeled_nu(const SpinSystem& spin, TransitionLabel label, double b) {
    auto nu = transition_frequency(spin, b, label);
    return nu ? *nu : kNaN;
}

// |d omega_s / d B| of the labeled line, rad/s per tesla.
double line_slope(const SpinSystem& spin, TransitionLabel label, double b) {
    const double h = std::max(1e-5, 1e-4 * std::abs(b));
    const double lo = labeled_nu(spin, label, std::max(0.0, b - h));
    const double hi = labeled_nu(spin, label, b + h);
    double s = constants::two_pi * std::abs(hi - lo) / (2.0 * h);
    if (!std::isfinite(s) || s < 1e3)
        s = constants::two_pi * constants::gamma_e_hz_per_t(2.0);
    return s;
}

struct SweepLayout {
    int q0 = -1;
    int foff = -1;
    int bg_c = -1, bg_on = -1, bg_sig = -1;
    struct PeakIdx {
        int b = -1, om = -1, g2 = -1, de = -1;
    };
    std::vector<PeakIdx> pk;
};

}  // namespace

SweepFit fit_sweep(const SweepTrace& trace, const SpectrumModel& tmpl,
                   const SweepFitOptions& options) {
    Eigen::Index n = trace.b_tesla.size();
    if (n < 16) throw InputError("field sweep needs at least 16 points");
    if (trace.q_inv.size() != n) throw InputError("b_tesla and q_inv columns differ in length");
    if (options.include_df && trace.f0_hz.size() != n)
        throw InputError("f0_hz column required when fitting the frequency channel");
    require_strictly_monotone(trace.b_tesla, "b_tesla");
    if (tmpl.peaks.empty()) throw InputError("model template needs at least one peak");
    if (tmpl.resonator.f0_hz <= 0) throw InputError("resonator frequency must be positive");

    // Work on an ascending-field copy.
    Eigen::VectorXd B = trace.b_tesla, Q = trace.q_inv, F = trace.f0_hz;
    if (n >= 2 && B[1] < B[0]) {
        B.reverseInPlace();
        Q.reverseInPlace();
        if (F.size() == n) F.reverseInPlace();
    }

    const double f0 = tmpl.resonator.f0_hz;
    const double omega0 = constants::two_pi * f0;
    const double b_min = B[0], b_max = B[n - 1];
    const double b_range = b_max - b_min;

    // Labeled transition frequency of each peak cached over the field grid;
    // b_peak only shifts the anchor, so the cache survives the whole fit.
    const size_t np = tmpl.peaks.size();
    std::vector<Eigen::VectorXd> nu_grid(np);
    for (size_t k = 0; k < np; ++k) {
        tmpl.peaks[k].spin.validate();
        nu_grid[k].resize(n);
        bool any = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            nu_grid[k][i] = labeled_nu(tmpl.peaks[k].spin, tmpl.peaks[k].label, B[i]);
            any = any || std::isfinite(nu_grid[k][i]);
        }
        if (!any)
            throw InputError("peak '" + to_string(tmpl.peaks[k].label) +
                             "': labeled transition never visible over the field range");
    }

    // ---- starting values ----------------------------------------------
    const int w = std::max<int>(5, static_cast<int>(n / 100)) | 1;
    const Eigen::VectorXd sm = moving_average(Q, w);
    const double q0_init = sm.minCoeff();

    double bg_c_init = 0.0, bg_on_init = b_min + 0.3 * b_range,
           bg_sig_init = 0.05 * b_range;
    if (options.fit_background) {
        std::vector<double> rel(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) rel[i] = sm[i] - q0_init;
        const double med = median_inplace(rel);
        bg_c_init = std::max(med, 1e-4 * (sm.maxCoeff() - q0_init) + 1e-300);
        for (Eigen::Index i = 0; i < n; ++i)
            if (sm[i] - q0_init >= 0.5 * bg_c_init) { bg_on_init = B[i]; break; }
    }

    Background bg_fixed = tmpl.background;  // used when the background is not fitted
    auto bg_init_loss = [&](double b) {
        if (!options.fit_background) return background_loss(bg_fixed, b);
        Background bgi{bg_c_init, bg_on_init, bg_sig_init};
        return background_loss(bgi, b);
    };

    // Peak detection for template entries without a starting field.
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) h[i] = sm[i] - q0_init - bg_init_loss(B[i]);
    const double h_max = h.maxCoeff();
    std::vector<std::pair<double, Eigen::Index>> maxima;  // height, index
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        if (h[i] < options.prominence * h_max) continue;
        const Eigen::Index lo = std::max<Eigen::Index>(0, i - w);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + w);
        bool is_max = true;
        for (Eigen::Index j = lo; j <= hi && is_max; ++j) is_max = h[j] <= h[i];
        if (is_max) {
            maxima.emplace_back(h[i], i);
            i = hi;  // one candidate per window
        }
    }
    size_t n_auto = 0;
    for (const auto& p : tmpl.peaks) n_auto += std::isfinite(p.b_peak) && p.b_peak > 0 ? 0 : 1;
    if (maxima.size() < n_auto)
        throw FitError("auto-init found " + std::to_string(maxima.size()) +
                       " peak(s), template needs " + std::to_string(n_auto));
    std::sort(maxima.begin(), maxima.end(),
              [](auto& a, auto& b) { return a.first > b.first; });
    maxima.resize(std::max(n_auto, size_t(1)));
    std::sort(maxima.begin(), maxima.end(),
              [](auto& a, auto& b) { return a.second < b.second; });

    // Height -> coupling via the unit-coupling response at line center.
    auto omega_from_height = [&](const Peak& p, double amp) {
        Peak unit = p;
        unit.omega = 1.0;
        const double h1 = -ensemble_response(unit, omega0, omega0).real() / omega0;
        const double a = std::max(amp, 0.05 * h_max);
        return std::sqrt(a / std::max(h1, 1e-300));
    };

    std::vector<Peak> peaks = tmpl.peaks;
    std::vector<double> slope0(np);
    {
        size_t next_max = 0;
        for (size_t k = 0; k < np; ++k) {
            Peak& p = peaks[k];
            double amp;
            Eigen::Index ic;
            if (std::isfinite(p.b_peak) && p.b_peak > 0) {
                // Nearest grid point supplies the height estimate.
                ic = 0;
                for (Eigen::Index i = 1; i < n; ++i)
                    if (std::abs(B[i] - p.b_peak) < std::abs(B[ic] - p.b_peak)) ic = i;
                amp = h[ic];
            } else {
                ic = maxima[next_max++].second;
                p.b_peak = B[ic];
                amp = h[ic];
            }
            slope0[k] = line_slope(p.spin, p.label, p.b_peak);
            // Half-height field width -> angular width.
            Eigen::Index il = ic, ir = ic;
            while (il > 0 && h[il] >= 0.5 * amp) --il;
            while (ir < n - 1 && h[ir] >= 0.5 * amp) ++ir;
            const double db =
                std::max(B[ir] - B[il], 2.0 * b_range / static_cast<double>(n));
            const double fwhm_w = slope0[k] * db;
            if (p.shape == LineShape::Lorentzian) {
                if (!(std::isfinite(p.gamma2) && p.gamma2 > 0)) p.gamma2 = fwhm_w;
            } else {
                if (!(std::isfinite(p.gamma2) && p.gamma2 > 0)) p.gamma2 = 0.3 * fwhm_w;
                if (!(std::isfinite(p.delta) && p.delta > 0))
                    p.delta = std::max(0.5 * (fwhm_w - 0.5346 * p.gamma2), 0.05 * fwhm_w);
            }
            if (!(std::isfinite(p.omega) && p.omega > 0)) p.omega = omega_from_height(p, amp);
        }
    }

    // ---- parameter vector ------------------------------------------------
    SweepLayout lay;
    lay.pk.resize(np);
    std::vector<ParamSpec> specs;
    auto add = [&](ParamSpec s) {
        specs.push_back(std::move(s));
        return static_cast<int>(specs.size()) - 1;
    };
    lay.q0 = add(ParamSpec{"q0_inv", q0_init, -kInf, kInf});
    Eigen::VectorXd df_data;
    if (options.include_df) {
        df_data = F.array() - F.mean();
        lay.foff = add(ParamSpec{"f_offset_hz", 0.0, -kInf, kInf});
    }
    std::vector<std::string> prefixes(np);
    for (size_t k = 0; k < np; ++k) {
        std::string base = lower(to_string(peaks[k].label));
        int dup = 0;
        for (size_t j = 0; j < k; ++j)
            if (peaks[j].label == peaks[k].label) ++dup;
        prefixes[k] = dup ? base + std::to_string(dup + 1) : base;
        lay.pk[k].b = add(clamped(prefixes[k] + ".b_peak", peaks[k].b_peak, b_min, b_max));
        lay.pk[k].om = add(clamped(prefixes[k] + ".omega", peaks[k].omega, 0.0, kInf));
        lay.pk[k].g2 = add(clamped(prefixes[k] + ".gamma2", peaks[k].gamma2, 0.0, kInf));
        if (peaks[k].shape == LineShape::Voigt)
            lay.pk[k].de = add(clamped(prefixes[k] + ".delta", peaks[k].delta, 0.0, kInf));
    }
    if (options.fit_background) {
        lay.bg_c = add(clamped("bg.c", bg_c_init, 0.0, kInf));
        lay.bg_on = add(clamped("bg.b_on", bg_on_init, b_min - 0.5 * b_range,
                                b_max + 0.5 * b_range));
        lay.bg_sig = add(clamped("bg.sigma_on", bg_sig_init, 1e-4 * b_range, 10.0 * b_range));
    }
    const Eigen::Index m_data = options.include_df ? 2 * n : n;
    if (m_data < static_cast<Eigen::Index>(specs.size()))
        throw InputError("fewer data points than free parameters");

    // Channel scales fixed before the fit keeps the two residual blocks
    // commensurate and the fit deterministic.
    const double sig_q = std::max(diff_noise(Q), 1e-9 * Q.cwiseAbs().maxCoeff() + 1e-300);
    const double sig_f =
        options.include_df ? std::max(diff_noise(F), 1e-12 * f0 + 1e-300) : 1.0;

    const Eigen::Index m = options.include_df ? 2 * n : n;
    auto resid = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        Eigen::VectorXd r(m);
        // Anchor frequencies at the trial peak fields.
        std::vector<double> nu_pk(np);
        for (size_t k = 0; k < np; ++k) {
            nu_pk[k] = labeled_nu(peaks[k].spin, peaks[k].label, p[lay.pk[k].b]);
            if (!std::isfinite(nu_pk[k])) return Eigen::VectorXd::Constant(m, 1e6);
        }
        Background bg = bg_fixed;
        if (options.fit_background) {
            bg.c = p[lay.bg_c];
            bg.b_on = p[lay.bg_on];
            bg.sigma_on = p[lay.bg_sig];
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            std::complex<double> sum = 0.0;
            for (size_t k = 0; k < np; ++k) {
                if (!std::isfinite(nu_grid[k][i])) continue;
                Peak pk = peaks[k];
                pk.omega = p[lay.pk[k].om];
                pk.gamma2 = p[lay.pk[k].g2];
                if (lay.pk[k].de >= 0) pk.delta = p[lay.pk[k].de];
                const double om_s =
                    omega0 + constants::two_pi * (nu_grid[k][i] - nu_pk[k]);
                sum += ensemble_response(pk, omega0, om_s);
            }
            const double q_model =
                -sum.real() / omega0 + p[lay.q0] + background_loss(bg, B[i]);
            r[i] = (q_model - Q[i]) / sig_q;
            if (options.include_df) {
                const double f_model = p[lay.foff] + sum.imag() / constants::two_pi;
                r[n + i] = (f_model - df_data[i]) / sig_f;
            }
        }
        return r;
    };

    FitOptions lm_opt;
    lm_opt.max_iter = options.max_iter;
    FitResult fit;
    if (options.robust) {
        // Plain pass first; the robust loss then refines from a sane point.
        FitOptions pre = lm_opt;
        pre.max_iter = std::max(20, options.max_iter / 2);
        FitResult stage1 = lm_fit(resid, specs, pre);
        for (size_t j = 0; j < specs.size(); ++j)
            specs[j] = clamped(specs[j].name, stage1.params[static_cast<Eigen::Index>(j)],
                               specs[j].lo, specs[j].hi);
        lm_opt.robust = true;
        lm_opt.f_scale = 1.0;  // residuals are already in noise units
        fit = lm_fit(resid, specs, lm_opt);
    } else {
        fit = lm_fit(resid, specs, lm_opt);
    }

    // ---- results -----------------------------------------------------------
    SweepFit out;
    out.q0_inv = fit.params[lay.q0];
    out.model = tmpl;
    out.model.peaks = peaks;
    if (out.q0_inv > 0) out.model.resonator.q = 1.0 / out.q0_inv;
    if (options.fit_background) {
        out.model.background.c = fit.params[lay.bg_c];
        out.model.background.b_on = fit.params[lay.bg_on];
        out.model.background.sigma_on = fit.params[lay.bg_sig];
    }
    out.areas_tesla.resize(np);
    out.t2e_s.resize(np);
    for (size_t k = 0; k < np; ++k) {
        Peak& p = out.model.peaks[k];
        p.b_peak = fit.params[lay.pk[k].b];
        p.omega = fit.params[lay.pk[k].om];
        p.gamma2 = fit.params[lay.pk[k].g2];
        if (lay.pk[k].de >= 0) p.delta = fit.params[lay.pk[k].de];
        const double slope = line_slope(p.spin, p.label, p.b_peak);
        out.areas_tesla[k] = constants::pi * p.omega * p.omega / (omega0 * slope);
        out.t2e_s[k] =
            p.shape == LineShape::Lorentzian ? constants::two_pi / p.gamma2 : kNaN;
    }
    out.fit = std::move(fit);
    return out;
}

// ---------------------------------------------------------------------------
// Peak positions across resonators
// ---------------------------------------------------------------------------

PeakPositionsFit fit_peak_positions(const PeakPositionData& data,
                                    const PeakPositionsInit& init) {
    const size_t m = data.rows.size();
    if (m < 1) throw InputError("peak position fit needs at least one row");
    bool any_sat = false;
    for (const auto& row : data.rows) {
        if (!(row.f_res_hz > 0) || !(row.b_tesla > 0))
            throw InputError("peak position rows need positive frequency and field");
        if (row.label == TransitionLabel::Other)
            throw InputError("peak position rows must be labeled central or satellite");
        any_sat = any_sat || row.label != TransitionLabel::Central;
    }

    auto resid = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        const double a = p[0], gh = p[1], gc = p[2];
        Eigen::VectorXd r(static_cast<Eigen::Index>(m));
        SpinSystem spin = SpinSystem::hyperfine(gh, a);
        spin.nuclear_zeeman = init.nuclear_zeeman;
        spin.g_n = init.g_n;
        for (size_t i = 0; i < m; ++i) {
            const auto& row = data.rows[i];
            double bm;
            if (row.label == TransitionLabel::Central) {
                bm = constants::h * row.f_res_hz / (gc * constants::mu_b);
            } else {
                const double bz = constants::h * row.f_res_hz / (gh * constants::mu_b);
                const double ba = constants::h * a / (2.0 * gh * constants::mu_b);
                const double lo = std::max(1e-7, bz - 4.0 * ba - 0.05 * bz);
                const double hi = bz + 4.0 * ba + 0.05 * bz;
                auto b = resonance_field_near(spin, row.label, row.f_res_hz, lo, hi);
                bm = b ? *b : row.b_tesla + 10.0;  // out-of-bracket penalty
            }
            r[static_cast<Eigen::Index>(i)] = (bm - row.b_tesla) / 1e-3;
        }
        return r;
    };

    std::vector<ParamSpec> specs;
    specs.push_back(clamped("a_hz", init.a_hz, 0.0, kInf));
    specs.push_back(clamped("g_hyperfine", init.g, 1.0, 3.0));
    specs.push_back(clamped("g_central", init.g, 1.0, 3.0));
    FitOptions opt;
    opt.max_iter = 200;
    FitResult fit = lm_fit(resid, specs, opt);

    PeakPositionsFit out;
    out.a_hz = fit.param("a_hz");
    out.g_hyperfine = fit.param("g_hyperfine");
    out.g_central = fit.param("g_central");
    if (!any_sat)
        fit.notes.push_back("no satellite rows: a_hz and g_hyperfine are unconstrained");
    std::vector<double> freqs;
    for (const auto& row : data.rows) freqs.push_back(row.f_res_hz);
    std::sort(freqs.begin(), freqs.end());
    freqs.erase(std::unique(freqs.begin(), freqs.end()), freqs.end());
    if (freqs.size() < 3)
        fit.notes.push_back("fewer than 3 distinct resonator frequencies: fit may be rank-deficient");
    out.fit = std::move(fit);
    return out;
}

// ---------------------------------------------------------------------------
// Temperature dependence
// ---------------------------------------------------------------------------

namespace {

// Weighted one-parameter linear fit area = s * basis; returns scale and its
// variance.  Weighted: exact-sigma formula; unweighted: residual variance.
struct LinearScale {
    double s = 0.0;
    double var = 0.0;
    double rss_w = 0.0;  // weighted residual sum of squares
};

LinearScale linear_scale(const Eigen::VectorXd& area, const Eigen::VectorXd& err,
                         const Eigen::VectorXd& basis) {
    const Eigen::Index n = area.size();
    const bool weighted = err.size() == n;
    double swab = 0.0, swbb = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double w = weighted ? 1.0 / (err[j] * err[j]) : 1.0;
        swab += w * area[j] * basis[j];
        swbb += w * basis[j] * basis[j];
    }
    LinearScale out;
    out.s = swab / swbb;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double w = weighted ? 1.0 / (err[j] * err[j]) : 1.0;
        const double r = area[j] - out.s * basis[j];
        out.rss_w += w * r * r;
    }
    if (weighted) {
        out.var = 1.0 / swbb;
    } else {
        const double dof = std::max<double>(1, n - 1);
        out.var = (out.rss_w / dof) / swbb;
    }
    return out;
}

}  // namespace

TemperatureFit fit_temperature(const TemperatureSeries& ts,
                               const std::vector<SpinSystem>& hypotheses, double f0_hz,
                               const TemperaturePeakFields& b_peaks) {
    const Eigen::Index nT = ts.t_kelvin.size();
    if (nT < 3) throw InputError("temperature series needs at least 3 points");
    if (ts.area_central.size() != nT)
        throw InputError("t_kelvin and area_central columns differ in length");
    for (Eigen::Index j = 0; j < nT; ++j)
        if (!(ts.t_kelvin[j] > 0)) throw InputError("temperatures must be positive");
    if (!(f0_hz > 0)) throw InputError("resonator frequency must be positive");
    if (hypotheses.empty()) throw InputError("need at least one level-structure hypothesis");
    const bool werr = ts.err_central.size() == nT;

    TemperatureFit out;
    for (const auto& hyp : hypotheses) {
        hyp.validate();
        HypothesisResult hr;
        hr.spin = hyp;
        // The line the resonator sees: the transition closest to f0 at the
        // central peak field.
        auto trans = transitions(hyp, b_peaks.central, 1e-4);
        if (trans.empty()) throw InputError("hypothesis has no visible transition");
        const Transition* line = &trans[0];
        for (const auto& t : trans)
            if (std::abs(t.frequency_hz - f0_hz) < std::abs(line->frequency_hz - f0_hz))
                line = &t;
        Eigen::VectorXd basis(nT);
        for (Eigen::Index j = 0; j < nT; ++j)
            basis[j] = peak_area_factor(hyp, *line, b_peaks.central, ts.t_kelvin[j]);

        LinearScale ls = linear_scale(ts.area_central, ts.err_central, basis);
        auto resid = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
            Eigen::VectorXd r(nT);
            for (Eigen::Index j = 0; j < nT; ++j) {
                const double w = werr ? 1.0 / ts.err_central[j] : 1.0;
                r[j] = w * (p[0] * basis[j] - ts.area_central[j]);
            }
            return r;
        };
        FitResult fit = lm_fit(
            resid, {clamped("scale", std::max(ls.s, 1e-300), 0.0, kInf)}, FitOptions{});
        hr.rss = 2.0 * fit.cost;
        const int k = 2;  // scale + noise variance
        hr.aicc = nT > k + 1
                      ? nT * std::log(std::max(hr.rss, 1e-300) / nT) + 2.0 * k +
                            2.0 * k * (k + 1) / static_cast<double>(nT - k - 1)
                      : kNaN;
        hr.fit = std::move(fit);
        out.ranking.push_back(std::move(hr));
    }
    std::stable_sort(out.ranking.begin(), out.ranking.end(),
                     [](const HypothesisResult& a, const HypothesisResult& b) {
                         return a.rss < b.rss;
                     });

    // Abundance from the two-level polarization at the common resonator
    // frequency; the correction is identical for every peak so it cancels in
    // the ratio.
    Eigen::VectorXd beta(nT);
    for (Eigen::Index j = 0; j < nT; ++j)
        beta[j] = std::tanh(constants::h * f0_hz /
                            (2.0 * constants::k_b * ts.t_kelvin[j]));
    LinearScale sc = linear_scale(ts.area_central, ts.err_central, beta);
    out.scale_central = sc.s;
    const bool sats =
        ts.area_sat_low.size() == nT && ts.area_sat_high.size() == nT;
    if (sats) {
        LinearScale sl = linear_scale(ts.area_sat_low, ts.err_sat_low, beta);
        LinearScale sh = linear_scale(ts.area_sat_high, ts.err_sat_high, beta);
        out.scale_sat_low = sl.s;
        out.scale_sat_high = sh.s;
        const double num = sl.s + sh.s;
        out.abundance = num / sc.s;
        out.abundance_sigma =
            std::sqrt((sl.var + sh.var) / (sc.s * sc.s) +
                      num * num * sc.var / (sc.s * sc.s * sc.s * sc.s));
    } else {
        out.abundance = kNaN;
        out.abundance_sigma = kNaN;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Power saturation
// ---------------------------------------------------------------------------

Eigen::VectorXd SaturationCurve::p0_watt() const {
    if (!(q > 0) || !(q_ext > 0))
        throw InputError("saturation curve needs positive Q and Q_ext");
    return (2.0 * q * q / q_ext) * p_drive_watt;
}

SaturationFit fit_saturation(const SaturationCurve& curve) {
    const Eigen::Index n = curve.p_drive_watt.size();
    if (n < 4) throw InputError("saturation fit needs at least 4 points");
    if (curve.qs_inv.size() != n)
        throw InputError("p_watt and q_inv columns differ in length");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(curve.p_drive_watt[i] > 0) || !(curve.qs_inv[i] > 0))
            throw InputError("saturation data must be positive");
    require_strictly_monotone(curve.p_drive_watt, "p_watt");

    const Eigen::VectorXd p0 = curve.p0_watt();
    const double qs0_init = curve.qs_inv.maxCoeff();
    double psat_init = p0[n - 1];
    for (Eigen::Index i = 0; i < n; ++i)
        if (curve.qs_inv[i] <= 0.5 * qs0_init) { psat_init = p0[i]; break; }

    auto resid = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double model =
                p[0] * std::pow(1.0 + p0[i] / p[1], -p[2]);
            r[i] = model / curve.qs_inv[i] - 1.0;  // multiplicative noise
        }
        return r;
    };
    std::vector<ParamSpec> specs;
    specs.push_back(clamped("qs0_inv", qs0_init, 0.0, kInf));
    specs.push_back(clamped("p_sat_watt", psat_init, 0.0, kInf));
    specs.push_back(clamped("epsilon", 1.0, 0.0, kInf));
    FitOptions opt;
    opt.max_iter = 300;
    FitResult fit = lm_fit(resid, specs, opt);

    SaturationFit out;
    out.qs0_inv = fit.param("qs0_inv");
    out.p_sat_watt = fit.param("p_sat_watt");
    out.epsilon = fit.param("epsilon");
    if (out.p_sat_watt >= p0[n - 1])
        fit.notes.push_back(
            "saturation knee beyond the measured power range: p_sat_watt is a lower bound");
    out.fit = std::move(fit);
    return out;
}

double derive_t1(double p_sat_watt, double t2e_s, double alpha_t_per_sqrt_w, double g) {
    if (!(p_sat_watt > 0) || !(t2e_s > 0) || !(alpha_t_per_sqrt_w > 0) || !(g > 0))
        throw InputError("t1 derivation needs positive inputs");
    const double gamma_e = constants::gamma_e_hz_per_t(g);
    return 1.0 / (p_sat_watt * t2e_s * gamma_e * gamma_e * alpha_t_per_sqrt_w *
                  alpha_t_per_sqrt_w);
}

// ---------------------------------------------------------------------------
// Angular dependence
// ---------------------------------------------------------------------------

AngleFit fit_angle(const AngleSeries& series) {
    const Eigen::Index n = series.theta_deg.size();
    if (n < 1) throw InputError("angle series is empty");
    if (series.g_app.size() != n)
        throw InputError("theta_deg and g_app columns differ in length");

    // sin(theta) and sin(2 theta) need three distinct angles to separate;
    // fewer angles freeze the higher terms at zero.
    std::vector<double> uniq(series.theta_deg.data(), series.theta_deg.data() + n);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const int order = std::min<int>(3, static_cast<int>(uniq.size()));

    auto resid = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double th = series.theta_deg[i] * constants::pi / 180.0;
            double model = p[0];
            if (order > 1) model += p[1] * std::sin(th);
            if (order > 2) model += p[2] * std::sin(2.0 * th);
            r[i] = model - series.g_app[i];
        }
        return r;
    };
    std::vector<ParamSpec> specs;
    specs.push_back(ParamSpec{"g", series.g_app.mean(), -kInf, kInf});
    if (order > 1) specs.push_back(ParamSpec{"a", 0.0, -kInf, kInf});
    if (order > 2) specs.push_back(ParamSpec{"b", 0.0, -kInf, kInf});
    FitResult fit = lm_fit(resid, specs, FitOptions{});

    AngleFit out;
    out.g = fit.param("g");
    out.a = order > 1 ? fit.param("a") : 0.0;
    out.b = order > 2 ? fit.param("b") : 0.0;
    if (order < 2)
        fit.notes.push_back("parameter 'a' is unconstrained by the data (single angle)");
    if (order < 3)
        fit.notes.push_back("parameter 'b' is unconstrained by the data (fewer than 3 angles)");
    out.fit = std::move(fit);
    return out;
}

}  // namespace esr
