#include "esrkit/synth.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "esrkit/constants.hpp"
#include "esrkit/errors.hpp"
#include "esrkit/lineshape.hpp"
#include "esrkit/spin_levels.hpp"
#include "esrkit/version.hpp"

namespace esr {

namespace {

constexpr const char* kRngId = "mt19937_64+box-muller";

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = constants::two_pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
    throw InputError("scenario " + ctx + ": " + msg);
}

void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                const std::string& ctx) {
    if (!j.is_object()) fail(ctx, "expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) fail(ctx, "unknown key '" + it.key() + "'");
}

const ordered_json& need(const ordered_json& j, const char* key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) fail(ctx, std::string("missing key '") + key + "'");
    return *it;
}

double num(const ordered_json& j, const char* key, const std::string& ctx) {
    const auto& v = need(j, key, ctx);
    if (!v.is_number()) fail(ctx, std::string("'") + key + "' must be a number");
    return v.get<double>();
}

double num_or(const ordered_json& j, const char* key, double dflt, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) return dflt;
    if (!it->is_number()) fail(ctx, std::string("'") + key + "' must be a number");
    return it->get<double>();
}

int count_of(const ordered_json& j, const char* key, const std::string& ctx) {
    const double v = num(j, key, ctx);
    const int n = static_cast<int>(v);
    if (n < 2 || v != n) fail(ctx, std::string("'") + key + "' must be an integer >= 2");
    return n;
}

std::string str(const ordered_json& j, const char* key, const std::string& ctx) {
    const auto& v = need(j, key, ctx);
    if (!v.is_string()) fail(ctx, std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

Eigen::VectorXd linspace(double a, double b, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

Eigen::VectorXd logspace(double a, double b, int n, const std::string& ctx) {
    if (!(a > 0) || !(b > 0)) fail(ctx, "log spacing needs positive endpoints");
    Eigen::VectorXd v = linspace(std::log(a), std::log(b), n);
    return v.array().exp();
}

SpinSystem parse_spin(const ordered_json& j, const std::string& ctx) {
    check_keys(j, {"kind", "g_e", "a_hz", "g_n", "nuclear_zeeman", "d_hz"}, ctx);
    const std::string kind = str(j, "kind", ctx);
    SpinSystem s;
    if (kind == "free_doublet")
        s = SpinSystem::free_doublet(num(j, "g_e", ctx));
    else if (kind == "hyperfine")
        s = SpinSystem::hyperfine(num(j, "g_e", ctx), num(j, "a_hz", ctx));
    else if (kind == "triplet")
        s = SpinSystem::triplet(num(j, "g_e", ctx), num_or(j, "d_hz", 0.0, ctx));
    else
        fail(ctx, "unknown spin kind '" + kind + "'");
    s.g_n = num_or(j, "g_n", s.g_n, ctx);
    if (auto it = j.find("nuclear_zeeman"); it != j.end()) {
        if (!it->is_boolean()) fail(ctx, "'nuclear_zeeman' must be a boolean");
        s.nuclear_zeeman = it->get<bool>();
    }
    s.validate();
    return s;
}

TransitionLabel parse_label(const std::string& s, const std::string& ctx) {
    auto label = transition_label_from_string(s);
    if (!label) fail(ctx, "unknown label '" + s + "'");
    return *label;
}

Peak parse_peak(const ordered_json& j, const std::string& ctx) {
    check_keys(j,
               {"label", "shape", "spin", "b_peak_tesla", "omega_over_2pi_hz",
                "gamma2_over_2pi_hz", "delta_over_2pi_hz"},
               ctx);
    Peak p;
    p.label = parse_label(str(j, "label", ctx), ctx);
    const std::string shape = str(j, "shape", ctx);
    if (shape == "lorentzian")
        p.shape = LineShape::Lorentzian;
    else if (shape == "voigt")
        p.shape = LineShape::Voigt;
    else
        fail(ctx, "unknown shape '" + shape + "'");
    p.spin = parse_spin(need(j, "spin", ctx), ctx + ".spin");
    p.b_peak = num(j, "b_peak_tesla", ctx);
    p.omega = constants::two_pi * num(j, "omega_over_2pi_hz", ctx);
    p.gamma2 = constants::two_pi * num(j, "gamma2_over_2pi_hz", ctx);
    p.delta = constants::two_pi * num_or(j, "delta_over_2pi_hz", 0.0, ctx);
    p.validate();
    return p;
}

ResonatorParams parse_resonator(const ordered_json& j, const std::string& ctx) {
    check_keys(j, {"f0_hz", "q", "qc_re", "qc_im"}, ctx);
    ResonatorParams r;
    r.f0_hz = num(j, "f0_hz", ctx);
    r.q = num(j, "q", ctx);
    r.qc = {num(j, "qc_re", ctx), num_or(j, "qc_im", 0.0, ctx)};
    if (!(r.f0_hz > 0) || !(r.q > 0) || !(std::abs(r.qc) > 0))
        fail(ctx, "resonator parameters must be positive");
    return r;
}

Background parse_background(const ordered_json& j, const std::string& ctx) {
    check_keys(j, {"c", "b_on_tesla", "sigma_on_tesla"}, ctx);
    Background bg;
    bg.c = num(j, "c", ctx);
    bg.b_on = num(j, "b_on_tesla", ctx);
    bg.sigma_on = num(j, "sigma_on_tesla", ctx);
    if (bg.c < 0 || !(bg.sigma_on > 0)) fail(ctx, "background needs c >= 0 and sigma_on > 0");
    return bg;
}

double nonneg(double v, const char* what, const std::string& ctx) {
    if (v < 0) fail(ctx, std::string(what) + " must be >= 0");
    return v;
}

ordered_json base_manifest(const std::string& kind, uint64_t seed,
                           const ordered_json& scenario) {
    ordered_json m;
    m["tool"] = "esrkit";
    m["tool_version"] = kVersion;
    m["kind"] = kind;
    m["seed"] = seed;
    m["rng"] = kRngId;
    m["scenario"] = scenario;
    return m;
}

// ---- kind: sweep ----------------------------------------------------------

SynthTable synth_sweep(const ordered_json& sc, uint64_t seed) {
    const std::string ctx = "sweep";
    check_keys(sc, {"kind", "seed", "resonator", "q0_inv", "field", "peaks",
                    "background", "noise"}, ctx);
    SpectrumModel model;
    model.resonator = parse_resonator(need(sc, "resonator", ctx), ctx + ".resonator");
    const double q0_inv = nonneg(num_or(sc, "q0_inv", 0.0, ctx), "q0_inv", ctx);
    const auto& fld = need(sc, "field", ctx);
    check_keys(fld, {"start_tesla", "stop_tesla", "points"}, ctx + ".field");
    const double b0 = num(fld, "start_tesla", ctx);
    const double b1 = num(fld, "stop_tesla", ctx);
    const int n = count_of(fld, "points", ctx + ".field");
    if (!(b1 > b0) || b0 < 0) fail(ctx, "field range must be ascending and non-negative");

    const auto& jp = need(sc, "peaks", ctx);
    if (!jp.is_array() || jp.empty()) fail(ctx, "'peaks' must be a non-empty array");
    for (size_t k = 0; k < jp.size(); ++k)
        model.peaks.push_back(parse_peak(jp[k], ctx + ".peaks[" + std::to_string(k) + "]"));
    if (auto it = sc.find("background"); it != sc.end())
        model.background = parse_background(*it, ctx + ".background");

    double q_rel = 0.0, df_sigma = 0.0, jump_lo = 0.0, jump_hi = 0.0;
    int jump_count = 0, jump_width = 3;
    if (auto it = sc.find("noise"); it != sc.end()) {
        check_keys(*it, {"q_rel", "df_sigma_hz", "flux_jump_count", "flux_jump_min_hz",
                         "flux_jump_max_hz", "flux_jump_width"},
                   ctx + ".noise");
        q_rel = nonneg(num_or(*it, "q_rel", 0.0, ctx), "q_rel", ctx);
        df_sigma = nonneg(num_or(*it, "df_sigma_hz", 0.0, ctx), "df_sigma_hz", ctx);
        jump_count = static_cast<int>(num_or(*it, "flux_jump_count", 0.0, ctx));
        if (jump_count < 0) fail(ctx, "flux_jump_count must be >= 0");
        jump_lo = nonneg(num_or(*it, "flux_jump_min_hz", 0.0, ctx), "flux_jump_min_hz", ctx);
        jump_hi = num_or(*it, "flux_jump_max_hz", jump_lo, ctx);
        if (jump_hi < jump_lo) fail(ctx, "flux jump amplitude range is inverted");
        jump_width = static_cast<int>(num_or(*it, "flux_jump_width", 3.0, ctx));
        if (jump_width < 1) fail(ctx, "flux_jump_width must be >= 1");
    }

    Rng rng(seed);
    // Transient frequency offsets; the loss channel is never touched.
    Eigen::VectorXd jump(n);
    jump.setZero();
    for (int jmp = 0; jmp < jump_count; ++jmp) {
        const int start = static_cast<int>(rng.uniform() * std::max(1, n - jump_width));
        const double amp = jump_lo + (jump_hi - jump_lo) * rng.uniform();
        const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
        for (int i = start; i < std::min(n, start + jump_width); ++i) jump[i] += sign * amp;
    }

    SynthTable out;
    out.columns = {"B_tesla", "f_hz", "q_inv"};
    out.data.resize(n, 3);
    const Eigen::VectorXd B = linspace(b0, b1, n);
    for (int i = 0; i < n; ++i) {
        const SweepPoint sp = sweep_point(model, B[i]);
        const double q_clean = q0_inv + sp.qb_inv;
        const double f_clean = model.resonator.f0_hz + sp.df_hz;
        out.data(i, 0) = B[i];
        out.data(i, 1) = f_clean + jump[i] + df_sigma * rng.normal();
        out.data(i, 2) = q_clean * (1.0 + q_rel * rng.normal());
    }
    out.manifest = base_manifest("sweep", seed, sc);
    out.manifest["columns"] = out.columns;
    out.manifest["rows"] = n;
    return out;
}

// ---- kind: s21 ------------------------------------------------------------

SynthTable synth_s21(const ordered_json& sc, uint64_t seed) {
    const std::string ctx = "s21";
    check_keys(sc, {"kind", "seed", "resonator", "peaks", "b_tesla", "f_center_hz",
                    "span_hz", "points", "noise"}, ctx);
    SpectrumModel model;
    model.resonator = parse_resonator(need(sc, "resonator", ctx), ctx + ".resonator");
    if (auto it = sc.find("peaks"); it != sc.end())
        for (size_t k = 0; k < it->size(); ++k)
            model.peaks.push_back(parse_peak((*it)[k], ctx + ".peaks[" + std::to_string(k) + "]"));
    const double b = nonneg(num_or(sc, "b_tesla", 0.0, ctx), "b_tesla", ctx);
    const double fc = num_or(sc, "f_center_hz", model.resonator.f0_hz, ctx);
    const double span = num(sc, "span_hz", ctx);
    if (!(span > 0)) fail(ctx, "span_hz must be positive");
    const int n = count_of(sc, "points", ctx);

    double snr_db = 40.0;
    bool noiseless = false;
    if (auto it = sc.find("noise"); it != sc.end()) {
        check_keys(*it, {"snr_db"}, ctx + ".noise");
        snr_db = num_or(*it, "snr_db", 40.0, ctx);
        noiseless = !std::isfinite(snr_db);
    } else {
        noiseless = true;
    }

    const Eigen::VectorXd f = linspace(fc - 0.5 * span, fc + 0.5 * span, n);
    Eigen::VectorXcd clean(n);
    double depth = 0.0;
    for (int i = 0; i < n; ++i) {
        clean[i] = s21(model, f[i], b);
        depth = std::max(depth, std::abs(clean[i] - 1.0));
    }
    const double sigma = noiseless ? 0.0 : depth * std::pow(10.0, -snr_db / 20.0);

    Rng rng(seed);
    SynthTable out;
    out.columns = {"f_hz", "s21_re", "s21_im"};
    out.data.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        out.data(i, 0) = f[i];
        out.data(i, 1) = clean[i].real() + sigma * rng.normal();
        out.data(i, 2) = clean[i].imag() + sigma * rng.normal();
    }
    out.manifest = base_manifest("s21", seed, sc);
    out.manifest["columns"] = out.columns;
    out.manifest["rows"] = n;
    out.manifest["noise_sigma"] = sigma;
    return out;
}

// ---- kind: saturation -----------------------------------------------------

SynthTable synth_saturation(const ordered_json& sc, uint64_t seed) {
    const std::string ctx = "saturation";
    check_keys(sc, {"kind", "seed", "q", "q_ext", "qs0_inv", "p_sat_watt", "epsilon",
                    "power", "noise"}, ctx);
    const double q = num(sc, "q", ctx);
    const double q_ext = num(sc, "q_ext", ctx);
    const double qs0 = num(sc, "qs0_inv", ctx);
    const double psat = num(sc, "p_sat_watt", ctx);
    const double eps = num(sc, "epsilon", ctx);
    if (!(q > 0) || !(q_ext > 0) || !(qs0 > 0) || !(psat > 0) || !(eps > 0))
        fail(ctx, "q, q_ext, qs0_inv, p_sat_watt, epsilon must be positive");
    const auto& pw = need(sc, "power", ctx);
    check_keys(pw, {"start_watt", "stop_watt", "points"}, ctx + ".power");
    const int n = count_of(pw, "points", ctx + ".power");
    const Eigen::VectorXd p_drive =
        logspace(num(pw, "start_watt", ctx), num(pw, "stop_watt", ctx), n, ctx);

    double q_rel = 0.0;
    if (auto it = sc.find("noise"); it != sc.end()) {
        check_keys(*it, {"q_rel"}, ctx + ".noise");
        q_rel = nonneg(num_or(*it, "q_rel", 0.0, ctx), "q_rel", ctx);
    }

    Rng rng(seed);
    SynthTable out;
    out.columns = {"p_watt", "q_inv"};
    out.data.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const double p0 = 2.0 * q * q * p_drive[i] / q_ext;
        const double qs = qs0 * std::pow(1.0 + p0 / psat, -eps);
        out.data(i, 0) = p_drive[i];
        out.data(i, 1) = qs * (1.0 + q_rel * rng.normal());
    }
    out.manifest = base_manifest("saturation", seed, sc);
    out.manifest["columns"] = out.columns;
    out.manifest["rows"] = n;
    return out;
}

// ---- kind: temperature ----------------------------------------------------

SynthTable synth_temperature(const ordered_json& sc, uint64_t seed) {
    const std::string ctx = "temperature";
    check_keys(sc, {"kind", "seed", "f0_hz", "spin", "b_peaks", "temps_k",
                    "scale_central", "scale_sat_low", "scale_sat_high", "noise"}, ctx);
    const double f0 = num(sc, "f0_hz", ctx);
    if (!(f0 > 0)) fail(ctx, "f0_hz must be positive");
    const SpinSystem spin = parse_spin(need(sc, "spin", ctx), ctx + ".spin");
    const auto& bp = need(sc, "b_peaks", ctx);
    check_keys(bp, {"central_tesla", "sat_low_tesla", "sat_high_tesla"}, ctx + ".b_peaks");
    const double b_central = num(bp, "central_tesla", ctx);

    const auto& jt = need(sc, "temps_k", ctx);
    if (!jt.is_array() || jt.size() < 3) fail(ctx, "'temps_k' must list at least 3 temperatures");
    Eigen::VectorXd T(jt.size());
    for (size_t i = 0; i < jt.size(); ++i) {
        T[static_cast<Eigen::Index>(i)] = jt[i].get<double>();
        if (!(T[static_cast<Eigen::Index>(i)] > 0)) fail(ctx, "temperatures must be positive");
    }
    const int n = static_cast<int>(T.size());

    const double s_c = num(sc, "scale_central", ctx);
    const bool sats = sc.contains("scale_sat_low") || sc.contains("scale_sat_high");
    const double s_l = num_or(sc, "scale_sat_low", 0.0, ctx);
    const double s_h = num_or(sc, "scale_sat_high", 0.0, ctx);

    double rel = 0.0;
    if (auto it = sc.find("noise"); it != sc.end()) {
        check_keys(*it, {"rel"}, ctx + ".noise");
        rel = nonneg(num_or(*it, "rel", 0.0, ctx), "rel", ctx);
    }

    // The central column follows the hypothesis' full level populations; the
    // satellite columns are written in the two-level-corrected convention the
    // abundance analysis assumes, so the configured scales are recoverable.
    auto trans = transitions(spin, b_central, 1e-4);
    if (trans.empty()) fail(ctx, "spin system has no visible transition at b_peaks.central");
    const Transition* line = &trans[0];
    for (const auto& t : trans)
        if (std::abs(t.frequency_hz - f0) < std::abs(line->frequency_hz - f0)) line = &t;

    Rng rng(seed);
    SynthTable out;
    out.columns = {"t_kelvin", "area_central", "err_central"};
    if (sats) {
        out.columns.insert(out.columns.end(),
                           {"area_satlow", "err_satlow", "area_sathigh", "err_sathigh"});
    }
    out.data.resize(n, static_cast<Eigen::Index>(out.columns.size()));
    for (int i = 0; i < n; ++i) {
        const double fac = peak_area_factor(spin, *line, b_central, T[i]);
        const double beta =
            std::tanh(constants::h * f0 / (2.0 * constants::k_b * T[i]));
        const double ac = s_c * fac;
        out.data(i, 0) = T[i];
        out.data(i, 1) = ac * (1.0 + rel * rng.normal());
        out.data(i, 2) = std::max(rel * ac, 1e-300);
        if (sats) {
            const double al = s_l * beta;
            const double ah = s_h * beta;
            out.data(i, 3) = al * (1.0 + rel * rng.normal());
            out.data(i, 4) = std::max(rel * al, 1e-300);
            out.data(i, 5) = ah * (1.0 + rel * rng.normal());
            out.data(i, 6) = std::max(rel * ah, 1e-300);
        }
    }
    out.manifest = base_manifest("temperature", seed, sc);
    out.manifest["columns"] = out.columns;
    out.manifest["rows"] = n;
    return out;
}

// ---- kind: angle ----------------------------------------------------------

SynthTable synth_angle(const ordered_json& sc, uint64_t seed) {
    const std::string ctx = "angle";
    check_keys(sc, {"kind", "seed", "g", "a", "b", "thetas_deg", "noise"}, ctx);
    const double g = num(sc, "g", ctx);
    const double a = num_or(sc, "a", 0.0, ctx);
    const double b = num_or(sc, "b", 0.0, ctx);
    const auto& jt = need(sc, "thetas_deg", ctx);
    if (!jt.is_array() || jt.empty()) fail(ctx, "'thetas_deg' must be a non-empty array");
    double sigma = 0.0;
    if (auto it = sc.find("noise"); it != sc.end()) {
        check_keys(*it, {"sigma_g"}, ctx + ".noise");
        sigma = nonneg(num_or(*it, "sigma_g", 0.0, ctx), "sigma_g", ctx);
    }

    Rng rng(seed);
    const int n = static_cast<int>(jt.size());
    SynthTable out;
    out.columns = {"theta_deg", "g_app"};
    out.data.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const double th_deg = jt[static_cast<size_t>(i)].get<double>();
        if (th_deg < 0.0 || th_deg > 90.0) fail(ctx, "angles must lie in [0, 90] degrees");
        const double th = th_deg * constants::pi / 180.0;
        out.data(i, 0) = th_deg;
        out.data(i, 1) =
            g + a * std::sin(th) + b * std::sin(2.0 * th) + sigma * rng.normal();
    }
    out.manifest = base_manifest("angle", seed, sc);
    out.manifest["columns"] = out.columns;
    out.manifest["rows"] = n;
    return out;
}

// ---- kind: peak_positions -------------------------------------------------

SynthTable synth_peak_positions(const ordered_json& sc, uint64_t seed) {
    const std::string ctx = "peak_positions";
    check_keys(sc, {"kind", "seed", "spin", "g_central", "f_res_hz", "b_max_tesla",
                    "noise"}, ctx);
    const SpinSystem spin = parse_spin(need(sc, "spin", ctx), ctx + ".spin");
    if (spin.kind != SpinKind::HyperfineDoublet)
        fail(ctx, "satellite positions need a hyperfine spin system");
    const double g_central = num(sc, "g_central", ctx);
    if (!(g_central > 0)) fail(ctx, "g_central must be positive");
    const auto& jf = need(sc, "f_res_hz", ctx);
    if (!jf.is_array() || jf.empty()) fail(ctx, "'f_res_hz' must be a non-empty array");
    const double b_max = num_or(sc, "b_max_tesla", 1.0, ctx);
    double sigma_b = 0.0;
    if (auto it = sc.find("noise"); it != sc.end()) {
        check_keys(*it, {"sigma_b_tesla"}, ctx + ".noise");
        sigma_b = nonneg(num_or(*it, "sigma_b_tesla", 0.0, ctx), "sigma_b_tesla", ctx);
    }

    Rng rng(seed);
    std::vector<double> f_col, b_col;
    std::vector<std::string> labels;
    for (size_t i = 0; i < jf.size(); ++i) {
        const double f = jf[i].get<double>();
        if (!(f > 0)) fail(ctx, "resonator frequencies must be positive");
        const double b_central = constants::h * f / (g_central * constants::mu_b);
        f_col.push_back(f);
        b_col.push_back(b_central + sigma_b * rng.normal());
        labels.push_back(to_string(TransitionLabel::Central));
        for (TransitionLabel lab : {TransitionLabel::SatLow, TransitionLabel::SatHigh}) {
            auto fields = resonance_fields(spin, f, b_max, lab);
            if (fields.empty())
                fail(ctx, "no " + to_string(lab) + " crossing below b_max_tesla at " +
                              std::to_string(f) + " Hz");
            f_col.push_back(f);
            b_col.push_back(fields.front() + sigma_b * rng.normal());
            labels.push_back(to_string(lab));
        }
    }

    const int n = static_cast<int>(f_col.size());
    SynthTable out;
    out.columns = {"f_hz", "B_tesla"};
    out.data.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        out.data(i, 0) = f_col[static_cast<size_t>(i)];
        out.data(i, 1) = b_col[static_cast<size_t>(i)];
    }
    out.labels = std::move(labels);
    out.manifest = base_manifest("peak_positions", seed, sc);
    out.manifest["columns"] = {"f_hz", "B_tesla", "label"};
    out.manifest["rows"] = n;
    return out;
}

}  // namespace

SynthTable synthesize(const ordered_json& scenario) {
    if (!scenario.is_object()) throw InputError("scenario must be a JSON object");
    auto kit = scenario.find("kind");
    if (kit == scenario.end() || !kit->is_string())
        throw InputError("scenario: missing string key 'kind'");
    const std::string kind = kit->get<std::string>();
    uint64_t seed = 0;
    if (auto it = scenario.find("seed"); it != scenario.end()) {
        if (!it->is_number_integer() && !it->is_number_unsigned())
            throw InputError("scenario: 'seed' must be an integer");
        seed = it->get<uint64_t>();
    }

    if (kind == "sweep") return synth_sweep(scenario, seed);
    if (kind == "s21") return synth_s21(scenario, seed);
    if (kind == "saturation") return synth_saturation(scenario, seed);
    if (kind == "temperature") return synth_temperature(scenario, seed);
    if (kind == "angle") return synth_angle(scenario, seed);
    if (kind == "peak_positions") return synth_peak_positions(scenario, seed);
    throw InputError("scenario: unknown kind '" + kind + "'");
}

}  // namespace esr
