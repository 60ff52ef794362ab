// esrkit command line front end.  Batch-oriented: every subcommand reads
// files, writes files, and exits; no interactive state.  Exit codes:
//   0  success
//   2  malformed input (CSV/JSON/config), diagnostic on stderr
//   3  fit did not converge or lost a resolvable signal; partial JSON written
//   64 usage error (unknown flag, missing argument)

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "esrkit/config.hpp"
#include "esrkit/constants.hpp"
#include "esrkit/errors.hpp"
#include "esrkit/fitting.hpp"
#include "esrkit/geometry.hpp"
#include "esrkit/io.hpp"
#include "esrkit/lineshape.hpp"
#include "esrkit/report.hpp"
#include "esrkit/spin_levels.hpp"
#include "esrkit/svg.hpp"
#include "esrkit/synth.hpp"
#include "esrkit/version.hpp"

namespace {

using esr::ordered_json;
namespace consts = esr::constants;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct Common {
    std::string data;    // input CSV (fit commands)
    std::string config;  // config path; $ESRKIT_CONFIG when empty
    std::string out;     // result JSON path; stdout when empty
    std::string plot;    // optional SVG path
};

// Partial-result sink: armed before the heavy work of each fit so that a
// FitError/NumericError still leaves a diagnostic JSON at --out.
struct Sink {
    bool armed = false;
    std::string out;
    ordered_json envelope;
};
Sink g_sink;

esr::Config load_cfg(const std::string& flag_path) {
    std::string path = flag_path;
    if (path.empty())
        if (const char* env = std::getenv("ESRKIT_CONFIG"); env && *env) path = env;
    if (path.empty()) return esr::Config{};
    return esr::load_config(path);
}

ordered_json base_result(const std::string& command, const esr::Config& cfg,
                         const std::vector<std::string>& inputs) {
    ordered_json r;
    r["command"] = command;
    r["tool"] = "esrkit";
    r["tool_version"] = esr::kVersion;
    r["config_hash"] = cfg.hash();
    r["inputs"] = inputs;
    return r;
}

void arm_sink(const Common& c, const ordered_json& envelope) {
    g_sink.armed = true;
    g_sink.out = c.out;
    g_sink.envelope = envelope;
}

void put_fit(ordered_json& r, const esr::FitResult& fit) {
    r["converged"] = fit.converged;
    r["iterations"] = fit.iterations;
    r["residual_norm"] = std::sqrt(2.0 * fit.cost);
    ordered_json params = ordered_json::object();
    for (size_t i = 0; i < fit.names.size(); ++i) {
        ordered_json p;
        p["value"] = fit.params[static_cast<Eigen::Index>(i)];
        p["ci95"] = fit.ci95[static_cast<Eigen::Index>(i)];
        params[fit.names[i]] = std::move(p);
    }
    r["params"] = std::move(params);
    r["notes"] = fit.notes;
}

// Writes the result JSON (or prints it) and maps convergence to the exit code.
int finish(const Common& c, const ordered_json& r, bool ok) {
    const std::string text = r.dump(2) + "\n";
    if (!c.out.empty())
        esr::atomic_write_text(c.out, text);
    else
        std::cout << text;
    return ok ? 0 : 3;
}

// Plot failures warn but never change the exit code.
void try_plot(const std::string& path, const esr::PlotSpec& spec) {
    if (path.empty()) return;
    try {
        esr::write_svg_plot(path, spec);
    } catch (const std::exception& e) {
        std::cerr << "warning: plot not written: " << e.what() << "\n";
    }
}

std::vector<std::string> provenance(const esr::Config& cfg,
                                    const std::vector<std::string>& inputs) {
    std::vector<std::string> p;
    p.push_back(std::string("esrkit ") + esr::kVersion);
    p.push_back("config " + cfg.hash());
    for (const auto& in : inputs) p.push_back("input " + in);
    return p;
}

std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

// Same naming scheme the sweep fit uses for its parameters, so derived keys
// and decomposition columns line up with the fitted parameter names.
std::vector<std::string> peak_prefixes(const std::vector<esr::Peak>& peaks) {
    std::vector<std::string> out(peaks.size());
    for (size_t i = 0; i < peaks.size(); ++i) {
        std::string base = lower(esr::to_string(peaks[i].label));
        int dup = 0;
        for (size_t j = 0; j < i; ++j)
            if (peaks[j].label == peaks[i].label) ++dup;
        out[i] = dup ? base + std::to_string(dup + 1) : base;
    }
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return kNaN;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid) - 1, v.end());
    return 0.5 * (v[mid - 1] + hi);
}

std::string num_str(double v) { return ordered_json(v).dump(); }

// ---------------------------------------------------------------------------
// fit-resonance
// ---------------------------------------------------------------------------

int cmd_fit_resonance(const Common& c) {
    const esr::Config cfg = load_cfg(c.config);
    ordered_json r = base_result("fit-resonance", cfg, {c.data});
    arm_sink(c, r);
    const esr::S21Trace trace = esr::load_s21(c.data);
    const esr::ResonanceFit res = esr::fit_resonance(trace);

    put_fit(r, res.fit);
    ordered_json d;
    d["f0_hz"] = res.f0_hz;
    d["q"] = res.q;
    d["qc_re"] = res.qc.real();
    d["qc_im"] = res.qc.imag();
    d["qc_mag"] = std::abs(res.qc);
    d["q_internal"] = res.q_internal;
    r["derived"] = std::move(d);

    if (!c.plot.empty()) {
        esr::SpectrumModel m;
        m.resonator = {res.f0_hz, res.q, res.qc};
        esr::PlotSpec spec;
        spec.title = "resonator transmission";
        spec.xlabel = "f (Hz)";
        spec.ylabel = "|S21|";
        esr::PlotSeries data{{}, {}, "data", "#1f77b4", true};
        esr::PlotSeries model{{}, {}, "fit", "#d62728", false};
        for (Eigen::Index i = 0; i < trace.f_hz.size(); ++i) {
            data.x.push_back(trace.f_hz[i]);
            data.y.push_back(std::abs(trace.s21[i]));
            model.x.push_back(trace.f_hz[i]);
            model.y.push_back(std::abs(esr::s21(m, trace.f_hz[i], 0.0)));
        }
        spec.series = {data, model};
        spec.provenance = provenance(cfg, {c.data});
        try_plot(c.plot, spec);
    }
    return finish(c, r, res.fit.converged);
}

// ---------------------------------------------------------------------------
// fit-sweep
// ---------------------------------------------------------------------------

struct SweepCmd {
    Common c;
    std::string peaks = "satlow:voigt,central:lorentzian,sathigh:voigt";
    std::string decomp;
    double f0_hz = 0.0;
    int max_iter = 0;
    double prominence = 0.0;
    CLI::Option* f0_opt = nullptr;
    CLI::Option* robust_opt = nullptr;
    CLI::Option* no_df_opt = nullptr;
    CLI::Option* no_bg_opt = nullptr;
    CLI::Option* max_iter_opt = nullptr;
    CLI::Option* prom_opt = nullptr;
};

std::vector<esr::Peak> parse_peak_spec(const std::string& s, const esr::Config& cfg) {
    std::vector<esr::Peak> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        const size_t comma = s.find(',', pos);
        std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
        while (!tok.empty() && tok.back() == ' ') tok.pop_back();
        if (tok.empty()) throw esr::InputError("--peaks: empty entry");
        const size_t colon = tok.find(':');
        const std::string lab = tok.substr(0, colon);
        const std::string shp =
            colon == std::string::npos ? "lorentzian" : tok.substr(colon + 1);
        const auto label = esr::transition_label_from_string(lab);
        if (!label)
            throw esr::InputError("--peaks: unknown label '" + lab +
                                  "' (central, satlow, sathigh, other)");
        esr::Peak p;
        p.label = *label;
        p.spin = (*label == esr::TransitionLabel::Central)
                     ? esr::SpinSystem::free_doublet(cfg.g_central)
                     : cfg.spin;
        if (shp == "lorentzian") {
            p.shape = esr::LineShape::Lorentzian;
            p.delta = 0.0;
        } else if (shp == "voigt") {
            p.shape = esr::LineShape::Voigt;
            p.delta = kNaN;  // auto-init from data
        } else {
            throw esr::InputError("--peaks: unknown shape '" + shp +
                                  "' (lorentzian, voigt)");
        }
        p.b_peak = kNaN;
        p.omega = kNaN;
        p.gamma2 = kNaN;
        out.push_back(std::move(p));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw esr::InputError("--peaks: no peaks given");
    return out;
}

int cmd_fit_sweep(const SweepCmd& o) {
    const esr::Config cfg = load_cfg(o.c.config);
    ordered_json r = base_result("fit-sweep", cfg, {o.c.data});
    arm_sink(o.c, r);
    const esr::SweepTrace trace = esr::load_sweep(o.c.data);

    esr::SweepFitOptions opt = cfg.sweep;
    if (o.robust_opt->count()) opt.robust = true;
    if (o.no_df_opt->count()) opt.include_df = false;
    if (o.no_bg_opt->count()) opt.fit_background = false;
    if (o.max_iter_opt->count()) opt.max_iter = o.max_iter;
    if (o.prom_opt->count()) opt.prominence = o.prominence;

    std::vector<std::string> extra_notes;
    if (opt.include_df && trace.f0_hz.size() != trace.b_tesla.size()) {
        opt.include_df = false;
        extra_notes.push_back("no f_hz column in the input: frequency channel not fitted");
    }

    // Resonator frequency: explicit flag, else the median of the measured
    // frequency channel (most points sit off-peak), else the config value.
    double f0 = cfg.resonator.f0_hz;
    if (o.f0_opt->count()) {
        f0 = o.f0_hz;
    } else if (trace.f0_hz.size() > 0) {
        std::vector<double> v;
        for (Eigen::Index i = 0; i < trace.f0_hz.size(); ++i)
            if (std::isfinite(trace.f0_hz[i])) v.push_back(trace.f0_hz[i]);
        const double med = median_of(v);
        if (std::isfinite(med) && med > 0) f0 = med;
    }

    esr::SpectrumModel tmpl;
    tmpl.resonator = cfg.resonator;
    tmpl.resonator.f0_hz = f0;
    tmpl.peaks = parse_peak_spec(o.peaks, cfg);

    const esr::SweepFit sw = esr::fit_sweep(trace, tmpl, opt);

    put_fit(r, sw.fit);
    for (const auto& n : extra_notes) r["notes"].push_back(n);

    const std::vector<std::string> prefixes = peak_prefixes(sw.model.peaks);
    ordered_json d;
    d["f0_hz"] = f0;
    d["q0_inv"] = sw.q0_inv;
    for (size_t k = 0; k < sw.model.peaks.size(); ++k) {
        const esr::Peak& p = sw.model.peaks[k];
        d[prefixes[k] + ".omega_over_2pi_hz"] = p.omega / consts::two_pi;
        d[prefixes[k] + ".gamma2_over_2pi_hz"] = p.gamma2 / consts::two_pi;
        if (p.shape == esr::LineShape::Voigt)
            d[prefixes[k] + ".delta_over_2pi_hz"] = p.delta / consts::two_pi;
        d[prefixes[k] + ".area_tesla"] = sw.areas_tesla[k];
        d[prefixes[k] + ".t2e_s"] = sw.t2e_s[k];
        d[prefixes[k] + ".apparent_g"] = esr::apparent_g(p.b_peak, f0);
    }
    r["derived"] = std::move(d);

    // Model curves on the data grid, for the plot and the decomposition file.
    const Eigen::Index n = trace.b_tesla.size();
    std::vector<double> bx(static_cast<size_t>(n));
    std::vector<double> q_model(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        bx[static_cast<size_t>(i)] = trace.b_tesla[i];
        q_model[static_cast<size_t>(i)] =
            sw.q0_inv + esr::sweep_point(sw.model, trace.b_tesla[i]).qb_inv;
    }

    if (!o.decomp.empty()) {
        std::vector<std::string> cols = {"B_tesla", "q_inv_data", "q_inv_model",
                                         "q_inv_background"};
        for (const auto& pre : prefixes) cols.push_back("q_inv_" + pre);
        Eigen::MatrixXd m(n, static_cast<Eigen::Index>(cols.size()));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double b = trace.b_tesla[i];
            m(i, 0) = b;
            m(i, 1) = trace.q_inv[i];
            m(i, 2) = q_model[static_cast<size_t>(i)];
            m(i, 3) = sw.q0_inv + esr::background_loss(sw.model.background, b);
            for (size_t k = 0; k < sw.model.peaks.size(); ++k) {
                esr::SpectrumModel single;
                single.resonator = sw.model.resonator;
                single.peaks = {sw.model.peaks[k]};
                m(i, 4 + static_cast<Eigen::Index>(k)) =
                    esr::sweep_point(single, b).qb_inv;
            }
        }
        std::vector<std::string> comments = provenance(cfg, {o.c.data});
        comments.push_back("per-peak decomposition of the fitted sweep model");
        esr::write_csv_table(o.decomp, cols, m, {}, comments);
    }

    if (!o.c.plot.empty()) {
        esr::PlotSpec spec;
        spec.title = "field sweep: spin load on the resonator";
        spec.xlabel = "B (T)";
        spec.ylabel = "1/Q";
        esr::PlotSeries data{bx, {}, "data", "#1f77b4", true};
        for (Eigen::Index i = 0; i < n; ++i) data.y.push_back(trace.q_inv[i]);
        esr::PlotSeries model{bx, q_model, "fit", "#d62728", false};
        spec.series = {data, model};
        spec.provenance = provenance(cfg, {o.c.data});
        try_plot(o.c.plot, spec);
    }
    return finish(o.c, r, sw.fit.converged);
}

// ---------------------------------------------------------------------------
// fit-levels
// ---------------------------------------------------------------------------

struct LevelsFitCmd {
    Common c;
    double a_init = 0.0;
    double g_init = 0.0;
    CLI::Option* a_opt = nullptr;
    CLI::Option* g_opt = nullptr;
    CLI::Option* no_nz_opt = nullptr;
};

int cmd_fit_levels(const LevelsFitCmd& o) {
    const esr::Config cfg = load_cfg(o.c.config);
    ordered_json r = base_result("fit-levels", cfg, {o.c.data});
    arm_sink(o.c, r);
    const esr::PeakPositionData data = esr::load_peak_positions(o.c.data);

    esr::PeakPositionsInit init;
    init.a_hz = cfg.spin.a_hz > 0 ? cfg.spin.a_hz : init.a_hz;
    init.g = cfg.g_central;
    init.nuclear_zeeman = cfg.spin.nuclear_zeeman;
    init.g_n = cfg.spin.g_n;
    if (o.a_opt->count()) init.a_hz = o.a_init;
    if (o.g_opt->count()) init.g = o.g_init;
    if (o.no_nz_opt->count()) init.nuclear_zeeman = false;

    const esr::PeakPositionsFit res = esr::fit_peak_positions(data, init);
    put_fit(r, res.fit);
    ordered_json d;
    d["a_mhz"] = res.a_hz / 1e6;
    r["derived"] = std::move(d);

    if (!o.c.plot.empty()) {
        esr::SpinSystem hf = esr::SpinSystem::hyperfine(res.g_hyperfine, res.a_hz);
        hf.nuclear_zeeman = init.nuclear_zeeman;
        hf.g_n = init.g_n;
        const esr::SpinSystem central = esr::SpinSystem::free_doublet(res.g_central);
        double b_lo = 1e9, b_hi = 0.0;
        esr::PlotSpec spec;
        spec.title = "peak positions vs level diagram";
        spec.xlabel = "B (T)";
        spec.ylabel = "f (Hz)";
        esr::PlotSeries pts{{}, {}, "measured peaks", "#1f77b4", true};
        for (const auto& row : data.rows) {
            pts.x.push_back(row.b_tesla);
            pts.y.push_back(row.f_res_hz);
            b_lo = std::min(b_lo, row.b_tesla);
            b_hi = std::max(b_hi, row.b_tesla);
        }
        spec.series.push_back(pts);
        const double pad = 0.1 * (b_hi - b_lo) + 1e-3;
        b_lo = std::max(0.0, b_lo - pad);
        b_hi += pad;
        const struct {
            const esr::SpinSystem* spin;
            esr::TransitionLabel label;
            const char* name;
            const char* color;
        } curves[] = {
            {&central, esr::TransitionLabel::Central, "central", "#d62728"},
            {&hf, esr::TransitionLabel::SatLow, "satellite (low field)", "#2ca02c"},
            {&hf, esr::TransitionLabel::SatHigh, "satellite (high field)", "#9467bd"},
        };
        for (const auto& cv : curves) {
            esr::PlotSeries s{{}, {}, cv.name, cv.color, false};
            for (int i = 0; i < 200; ++i) {
                const double b = b_lo + (b_hi - b_lo) * i / 199.0;
                const auto f = esr::transition_frequency(*cv.spin, b, cv.label);
                if (f) {
                    s.x.push_back(b);
                    s.y.push_back(*f);
                }
            }
            spec.series.push_back(std::move(s));
        }
        spec.provenance = provenance(cfg, {o.c.data});
        try_plot(o.c.plot, spec);
    }
    return finish(o.c, r, res.fit.converged);
}

// ---------------------------------------------------------------------------
// fit-temperature
// ---------------------------------------------------------------------------

struct TempCmd {
    Common c;
    double f0_hz = 0.0;
    double b_central = 0.0;
    std::string hypotheses = "doublet,triplet";
    CLI::Option* f0_opt = nullptr;
    CLI::Option* bc_opt = nullptr;
};

std::string hyp_name(const esr::SpinSystem& s) {
    switch (s.kind) {
        case esr::SpinKind::FreeDoublet: return "doublet";
        case esr::SpinKind::HyperfineDoublet: return "hyperfine";
        case esr::SpinKind::Triplet:
            return s.d_hz != 0.0 ? "triplet(d_hz=" + num_str(s.d_hz) + ")" : "triplet";
    }
    return "?";
}

std::vector<esr::SpinSystem> parse_hypotheses(const std::string& s,
                                              const esr::Config& cfg) {
    std::vector<esr::SpinSystem> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        const size_t comma = s.find(',', pos);
        std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
        while (!tok.empty() && tok.back() == ' ') tok.pop_back();
        if (tok == "doublet" || tok == "free") {
            out.push_back(esr::SpinSystem::free_doublet(cfg.g_central));
        } else if (tok == "hyperfine") {
            out.push_back(cfg.spin);
        } else if (tok == "triplet") {
            out.push_back(esr::SpinSystem::triplet(cfg.g_central, 0.0));
        } else if (tok.rfind("triplet:", 0) == 0) {
            char* end = nullptr;
            const std::string num = tok.substr(8);
            const double dhz = std::strtod(num.c_str(), &end);
            if (num.empty() || end != num.c_str() + num.size())
                throw esr::InputError("--hypotheses: bad zero-field splitting in '" +
                                      tok + "'");
            out.push_back(esr::SpinSystem::triplet(cfg.g_central, dhz));
        } else {
            throw esr::InputError("--hypotheses: unknown entry '" + tok +
                                  "' (doublet, hyperfine, triplet, triplet:<D_hz>)");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

int cmd_fit_temperature(const TempCmd& o) {
    const esr::Config cfg = load_cfg(o.c.config);
    ordered_json r = base_result("fit-temperature", cfg, {o.c.data});
    arm_sink(o.c, r);
    const esr::TemperatureSeries ts = esr::load_temperature(o.c.data);

    const double f0 = o.f0_opt->count() ? o.f0_hz : cfg.resonator.f0_hz;
    // Default central-peak field: the free-doublet crossing of f0.
    const double bc = o.bc_opt->count()
                          ? o.b_central
                          : consts::h * f0 / (cfg.g_central * consts::mu_b);
    const std::vector<esr::SpinSystem> hyps = parse_hypotheses(o.hypotheses, cfg);

    const esr::TemperatureFit tf =
        esr::fit_temperature(ts, hyps, f0, esr::TemperaturePeakFields{bc, 0.0, 0.0});

    const esr::HypothesisResult& best = tf.ranking.front();
    bool all_ok = true;
    for (const auto& h : tf.ranking) all_ok = all_ok && h.fit.converged;

    put_fit(r, best.fit);
    r["converged"] = all_ok;
    ordered_json ranking = ordered_json::array();
    for (const auto& h : tf.ranking) {
        ordered_json e;
        e["hypothesis"] = hyp_name(h.spin);
        e["rss"] = h.rss;
        e["aicc"] = h.aicc;
        e["scale"] = h.fit.param("scale");
        ranking.push_back(std::move(e));
    }
    r["ranking"] = std::move(ranking);
    ordered_json d;
    d["best_hypothesis"] = hyp_name(best.spin);
    d["b_central_tesla"] = bc;
    d["abundance"] = tf.abundance;
    d["abundance_sigma"] = tf.abundance_sigma;
    d["scale_central"] = tf.scale_central;
    d["scale_sat_low"] = tf.scale_sat_low;
    d["scale_sat_high"] = tf.scale_sat_high;
    r["derived"] = std::move(d);

    if (!o.c.plot.empty()) {
        esr::PlotSpec spec;
        spec.title = "central peak area vs temperature";
        spec.xlabel = "T (K)";
        spec.ylabel = "area (T)";
        esr::PlotSeries data{{}, {}, "data", "#1f77b4", true};
        for (Eigen::Index i = 0; i < ts.t_kelvin.size(); ++i) {
            data.x.push_back(ts.t_kelvin[i]);
            data.y.push_back(ts.area_central[i]);
        }
        spec.series.push_back(data);
        const auto trans = esr::transitions(best.spin, bc, 1e-4);
        const esr::Transition* line = trans.empty() ? nullptr : &trans[0];
        for (const auto& t : trans)
            if (std::abs(t.frequency_hz - f0) < std::abs(line->frequency_hz - f0))
                line = &t;
        if (line) {
            const double t_lo = ts.t_kelvin[0];
            const double t_hi = ts.t_kelvin[ts.t_kelvin.size() - 1];
            const double scale = best.fit.param("scale");
            esr::PlotSeries model{{}, {}, hyp_name(best.spin), "#d62728", false};
            for (int i = 0; i < 200; ++i) {
                const double t = t_lo + (t_hi - t_lo) * i / 199.0;
                model.x.push_back(t);
                model.y.push_back(scale *
                                  esr::peak_area_factor(best.spin, *line, bc, t));
            }
            spec.series.push_back(std::move(model));
        }
        spec.provenance = provenance(cfg, {o.c.data});
        try_plot(o.c.plot, spec);
    }
    return finish(o.c, r, all_ok);
}

// ---------------------------------------------------------------------------
// fit-saturation
// ---------------------------------------------------------------------------

struct SatCmd {
    Common c;
    double q = 0.0;
    double q_ext = 0.0;
    double t2e_s = 0.0;
    double alpha = 0.0;
    double g = 0.0;
    CLI::Option* t2e_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* g_opt = nullptr;
};

int cmd_fit_saturation(const SatCmd& o) {
    const esr::Config cfg = load_cfg(o.c.config);
    ordered_json r = base_result("fit-saturation", cfg, {o.c.data});
    arm_sink(o.c, r);
    const esr::SaturationCurve curve = esr::load_saturation(o.c.data, o.q, o.q_ext);
    const esr::SaturationFit res = esr::fit_saturation(curve);

    put_fit(r, res.fit);
    const Eigen::VectorXd p0 = curve.p0_watt();
    const double alpha = o.alpha_opt->count() ? o.alpha
                                              : esr::alpha_conversion(cfg.geometry);
    const double g = o.g_opt->count() ? o.g : cfg.g_central;
    ordered_json d;
    d["p0_min_watt"] = p0[0];
    d["p0_max_watt"] = p0[p0.size() - 1];
    d["alpha_t_per_sqrt_w"] = alpha;
    if (o.t2e_opt->count()) {
        d["t2e_s"] = o.t2e_s;
        d["t1_s"] = esr::derive_t1(res.p_sat_watt, o.t2e_s, alpha, g);
    }
    r["derived"] = std::move(d);

    if (!o.c.plot.empty()) {
        esr::PlotSpec spec;
        spec.title = "spin-loss saturation";
        spec.xlabel = "circulating power (W)";
        spec.ylabel = "1/Qs";
        spec.logx = true;
        esr::PlotSeries data{{}, {}, "data", "#1f77b4", true};
        esr::PlotSeries model{{}, {}, "fit", "#d62728", false};
        for (Eigen::Index i = 0; i < p0.size(); ++i) {
            data.x.push_back(p0[i]);
            data.y.push_back(curve.qs_inv[i]);
        }
        const double lo = std::log10(p0[0]);
        const double hi = std::log10(p0[p0.size() - 1]);
        for (int i = 0; i < 200; ++i) {
            const double p = std::pow(10.0, lo + (hi - lo) * i / 199.0);
            model.x.push_back(p);
            model.y.push_back(res.qs0_inv *
                              std::pow(1.0 + p / res.p_sat_watt, -res.epsilon));
        }
        spec.series = {data, model};
        spec.provenance = provenance(cfg, {o.c.data});
        try_plot(o.c.plot, spec);
    }
    return finish(o.c, r, res.fit.converged);
}

// ---------------------------------------------------------------------------
// fit-angle
// ---------------------------------------------------------------------------

int cmd_fit_angle(const Common& c) {
    const esr::Config cfg = load_cfg(c.config);
    ordered_json r = base_result("fit-angle", cfg, {c.data});
    arm_sink(c, r);
    const esr::AngleSeries series = esr::load_angle(c.data);
    const esr::AngleFit res = esr::fit_angle(series);
    put_fit(r, res.fit);

    if (!c.plot.empty()) {
        esr::PlotSpec spec;
        spec.title = "apparent g-factor vs field angle";
        spec.xlabel = "theta (deg)";
        spec.ylabel = "apparent g";
        esr::PlotSeries data{{}, {}, "data", "#1f77b4", true};
        for (Eigen::Index i = 0; i < series.theta_deg.size(); ++i) {
            data.x.push_back(series.theta_deg[i]);
            data.y.push_back(series.g_app[i]);
        }
        esr::PlotSeries model{{}, {}, "fit", "#d62728", false};
        for (int i = 0; i < 181; ++i) {
            const double th = i * 0.5;
            const double rad = th * consts::pi / 180.0;
            model.x.push_back(th);
            model.y.push_back(res.g + res.a * std::sin(rad) +
                              res.b * std::sin(2.0 * rad));
        }
        spec.series = {data, model};
        spec.provenance = provenance(cfg, {c.data});
        try_plot(c.plot, spec);
    }
    return finish(c, r, res.fit.converged);
}

// ---------------------------------------------------------------------------
// spin-density
// ---------------------------------------------------------------------------

struct DensityCmd {
    Common c;
    std::vector<double> omega_hz;  // Omega/2pi; order: central, sat_low, sat_high
    std::string geometry;
    double f0_hz = 0.0;
    double t_kelvin = 0.0;
    CLI::Option* f0_opt = nullptr;
    CLI::Option* t_opt = nullptr;
};

int cmd_spin_density(const DensityCmd& o) {
    esr::Config cfg = load_cfg(o.c.config);
    if (!o.geometry.empty()) cfg.geometry = esr::load_config(o.geometry).geometry;
    ordered_json r = base_result("spin-density", cfg, {});
    const double f0 = o.f0_opt->count() ? o.f0_hz : cfg.resonator.f0_hz;
    const double t = o.t_opt->count() ? o.t_kelvin : cfg.t_kelvin;

    const double wc = consts::two_pi * o.omega_hz[0];
    const double wl = o.omega_hz.size() > 1 ? consts::two_pi * o.omega_hz[1] : 0.0;
    const double wh = o.omega_hz.size() > 2 ? consts::two_pi * o.omega_hz[2] : 0.0;
    const esr::DensityResult res =
        esr::density_breakdown(wc, wl, wh, t, f0, cfg.geometry);

    ordered_json params = ordered_json::object();
    auto put_in = [&params](const std::string& name, double v) {
        ordered_json p;
        p["value"] = v;
        params[name] = std::move(p);
    };
    put_in("omega_central_over_2pi_hz", o.omega_hz[0]);
    if (o.omega_hz.size() > 1) put_in("omega_sat_low_over_2pi_hz", o.omega_hz[1]);
    if (o.omega_hz.size() > 2) put_in("omega_sat_high_over_2pi_hz", o.omega_hz[2]);
    put_in("f0_hz", f0);
    put_in("t_kelvin", t);
    r["params"] = std::move(params);

    ordered_json d;
    d["n_central_per_m2"] = res.n_central;
    d["n_sat_low_per_m2"] = res.n_sat_low;
    d["n_sat_high_per_m2"] = res.n_sat_high;
    d["n_total_per_m2"] = res.n_total;
    d["ratio_h_e"] = res.ratio_h_e;
    d["dn_ddelta_per_m3"] = res.dn_ddelta;
    d["log_sensitivity"] = res.log_sensitivity;
    d["alpha_t_per_sqrt_w"] = esr::alpha_conversion(cfg.geometry);
    d["field_integral"] = esr::field_integral(cfg.geometry, f0);
    r["derived"] = std::move(d);
    return finish(o.c, r, true);
}

// ---------------------------------------------------------------------------
// levels
// ---------------------------------------------------------------------------

struct LevelsCmd {
    std::string config;
    std::string out = "levels.csv";
    std::string spin = "config";
    std::string brange;
    std::string plot;
    double g = 0.0;
    double a_hz = 0.0;
    double d_hz = 0.0;
    double g_n = 0.0;
    CLI::Option* g_opt = nullptr;
    CLI::Option* a_opt = nullptr;
    CLI::Option* d_opt = nullptr;
    CLI::Option* gn_opt = nullptr;
    CLI::Option* no_nz_opt = nullptr;
};

void parse_brange(const std::string& s, double& lo, double& hi, int& points) {
    const size_t c1 = s.find(':');
    const size_t c2 = c1 == std::string::npos ? std::string::npos : s.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw esr::InputError("--B: expected start:stop:points, got '" + s + "'");
    auto num = [&s](size_t from, size_t to) {
        const std::string part = s.substr(from, to - from);
        char* end = nullptr;
        const double v = std::strtod(part.c_str(), &end);
        if (part.empty() || end != part.c_str() + part.size())
            throw esr::InputError("--B: bad number '" + part + "'");
        return v;
    };
    lo = num(0, c1);
    hi = num(c1 + 1, c2);
    const double pts = num(c2 + 1, s.size());
    points = static_cast<int>(pts);
    if (points != pts || points < 2) throw esr::InputError("--B: points must be an integer >= 2");
    if (!(lo >= 0.0) || !(hi > lo)) throw esr::InputError("--B: need 0 <= start < stop");
}

int cmd_levels(const LevelsCmd& o) {
    const esr::Config cfg = load_cfg(o.config);
    esr::SpinSystem spin;
    if (o.spin == "config") {
        spin = cfg.spin;
    } else if (o.spin == "hydrogen") {
        spin = esr::SpinSystem::hyperfine(2.0, 1420.405751768e6);
    } else if (o.spin == "free") {
        spin = esr::SpinSystem::free_doublet(consts::g_free_electron);
    } else if (o.spin == "triplet") {
        spin = esr::SpinSystem::triplet(2.0, 0.0);
    } else {
        throw esr::InputError("--spin: unknown preset '" + o.spin +
                              "' (config, hydrogen, free, triplet)");
    }
    if (o.g_opt->count()) spin.g_e = o.g;
    if (o.a_opt->count()) {
        spin.kind = esr::SpinKind::HyperfineDoublet;
        spin.a_hz = o.a_hz;
    }
    if (o.d_opt->count()) {
        spin.kind = esr::SpinKind::Triplet;
        spin.d_hz = o.d_hz;
    }
    if (o.gn_opt->count()) spin.g_n = o.g_n;
    if (o.no_nz_opt->count()) spin.nuclear_zeeman = false;
    spin.validate();

    double b_lo = 0.0, b_hi = 0.0;
    int points = 0;
    parse_brange(o.brange, b_lo, b_hi, points);

    const int dim = spin.dim();
    std::vector<std::string> cols = {"B_tesla"};
    for (int i = 0; i < dim; ++i) cols.push_back("e" + std::to_string(i + 1) + "_hz");
    cols.push_back("f1_hz");
    cols.push_back("f2_hz");

    Eigen::MatrixXd m(points, static_cast<Eigen::Index>(cols.size()));
    for (int i = 0; i < points; ++i) {
        const double b = b_lo + (b_hi - b_lo) * i / (points - 1.0);
        const esr::LevelSet ls = esr::eigensystem(spin, b);
        m(i, 0) = b;
        for (int j = 0; j < dim; ++j) m(i, 1 + j) = ls.energies_hz[j];
        // Two strongest finite-frequency lines, reported low frequency first.
        const double span =
            ls.energies_hz[dim - 1] - ls.energies_hz[0];
        const double tol = 1e-6 * span + 1e-9;
        auto trans = esr::transitions(spin, b, 0.01);
        trans.erase(std::remove_if(trans.begin(), trans.end(),
                                   [tol](const esr::Transition& t) {
                                       return !(t.frequency_hz > tol);
                                   }),
                    trans.end());
        std::stable_sort(trans.begin(), trans.end(),
                         [](const esr::Transition& x, const esr::Transition& y) {
                             if (x.strength != y.strength) return x.strength > y.strength;
                             return x.frequency_hz < y.frequency_hz;
                         });
        double f1 = kNaN, f2 = kNaN;
        if (trans.size() > 0) f1 = trans[0].frequency_hz;
        if (trans.size() > 1) f2 = trans[1].frequency_hz;
        if (f2 < f1) std::swap(f1, f2);
        m(i, 1 + dim) = f1;
        m(i, 2 + dim) = f2;
    }

    std::vector<std::string> comments = provenance(cfg, {});
    comments.push_back("spin levels (E/h) and the two strongest lines per field");
    esr::write_csv_table(o.out, cols, m, {}, comments);

    if (!o.plot.empty()) {
        esr::PlotSpec spec;
        spec.title = "spin level diagram";
        spec.xlabel = "B (T)";
        spec.ylabel = "E/h (Hz)";
        const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
        for (int j = 0; j < dim; ++j) {
            esr::PlotSeries s{{}, {}, "level " + std::to_string(j + 1),
                              colors[j % 4], false};
            for (int i = 0; i < points; ++i) {
                s.x.push_back(m(i, 0));
                s.y.push_back(m(i, 1 + j));
            }
            spec.series.push_back(std::move(s));
        }
        spec.provenance = provenance(cfg, {});
        try_plot(o.plot, spec);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimCmd {
    std::string config;
    std::string scenario;
    std::string out = "out.csv";
    std::string manifest;
    uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
};

int cmd_simulate(const SimCmd& o) {
    const esr::Config cfg = load_cfg(o.config);
    std::ifstream in(o.scenario);
    if (!in) throw esr::InputError("cannot open scenario file: " + o.scenario);
    ordered_json sc;
    try {
        sc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw esr::InputError("scenario " + o.scenario + ": " + e.what());
    }
    if (o.seed_opt->count()) sc["seed"] = o.seed;

    const esr::SynthTable table = esr::synthesize(sc);

    std::string manifest_path = o.manifest;
    if (manifest_path.empty()) {
        manifest_path = o.out;
        const std::string suffix = ".csv";
        if (manifest_path.size() > suffix.size() &&
            manifest_path.compare(manifest_path.size() - suffix.size(), suffix.size(),
                                  suffix) == 0)
            manifest_path.resize(manifest_path.size() - suffix.size());
        manifest_path += ".manifest.json";
    }

    ordered_json manifest = table.manifest;
    manifest["config_hash"] = cfg.hash();

    std::vector<std::string> comments = provenance(cfg, {o.scenario});
    comments.push_back("kind " + manifest["kind"].get<std::string>());
    comments.push_back("seed " + manifest["seed"].dump());
    comments.push_back("manifest " + manifest_path);
    esr::write_csv_table(o.out, table.columns, table.data, table.labels, comments);
    esr::atomic_write_text(manifest_path, manifest.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportCmd {
    std::vector<std::string> in;
    std::string out;
};

int cmd_report(const ReportCmd& o) {
    std::vector<ordered_json> results;
    for (const auto& path : o.in) {
        std::ifstream f(path);
        if (!f) throw esr::InputError("cannot open result file: " + path);
        try {
            results.push_back(ordered_json::parse(f));
        } catch (const nlohmann::json::parse_error& e) {
            throw esr::InputError("result " + path + ": " + e.what());
        }
    }
    esr::atomic_write_text(o.out, esr::render_report(results));
    return 0;
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

void add_common(CLI::App* sub, Common& c, bool with_plot = true) {
    sub->add_option("--config", c.config,
                    "analysis config file (default: $ESRKIT_CONFIG if set)");
    sub->add_option("-o,--out", c.out, "write the result JSON here (default: stdout)");
    if (with_plot) sub->add_option("--plot", c.plot, "write an SVG plot here");
}

int fail_with_partial(const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    if (g_sink.armed && !g_sink.out.empty()) {
        g_sink.envelope["error"] = msg;
        try {
            esr::atomic_write_text(g_sink.out, g_sink.envelope.dump(2) + "\n");
        } catch (const std::exception& e) {
            std::cerr << "error: could not write partial result: " << e.what() << "\n";
        }
    }
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    std::ios::sync_with_stdio(false);
    CLI::App app{"esrkit: model, simulate, and fit on-chip ESR spectra of dilute "
                 "surface spins"};
    app.require_subcommand(1);
    int rc = 0;

    // fit-resonance
    Common res_c;
    auto* res = app.add_subcommand("fit-resonance",
                                   "fit a complex S21 trace for f0, Q, Qc, Qi");
    res->add_option("data", res_c.data, "CSV with f_hz, s21_re, s21_im")->required();
    add_common(res, res_c);
    res->callback([&]() { rc = cmd_fit_resonance(res_c); });

    // fit-sweep
    SweepCmd sw;
    auto* swp = app.add_subcommand(
        "fit-sweep", "fit a field sweep of 1/Q (and df) with ESR peaks");
    swp->add_option("data", sw.c.data, "CSV with B_tesla, q_inv and optional f_hz")
        ->required();
    add_common(swp, sw.c);
    sw.robust_opt = swp->add_flag("--robust", "soft-L1 loss, resists flux jumps");
    sw.no_df_opt = swp->add_flag("--no-df", "ignore the frequency-shift channel");
    sw.no_bg_opt = swp->add_flag("--no-background", "fix the background at zero");
    sw.f0_opt = swp->add_option("--f0-hz", sw.f0_hz,
                                "resonator frequency (default: median f_hz)");
    swp->add_option("--peaks", sw.peaks,
                    "comma list of label:shape in ascending field order (labels "
                    "central/satlow/sathigh/other, shapes lorentzian/voigt)")
        ->capture_default_str();
    sw.max_iter_opt = swp->add_option("--max-iter", sw.max_iter, "iteration cap");
    sw.prom_opt = swp->add_option("--prominence", sw.prominence,
                                  "peak detection threshold, fraction of max");
    swp->add_option("--decomp", sw.decomp, "write a per-peak decomposition CSV here");
    swp->callback([&]() { rc = cmd_fit_sweep(sw); });

    // fit-levels
    LevelsFitCmd lv;
    auto* lvf = app.add_subcommand(
        "fit-levels", "fit hyperfine constant and g-factors to peak positions");
    lvf->add_option("data", lv.c.data, "CSV with f_hz, B_tesla, label")->required();
    add_common(lvf, lv.c);
    lv.a_opt = lvf->add_option("--a-init", lv.a_init, "starting hyperfine constant, Hz");
    lv.g_opt = lvf->add_option("--g-init", lv.g_init, "starting g-factor");
    lv.no_nz_opt = lvf->add_flag("--no-nuclear-zeeman",
                                 "drop the nuclear Zeeman term from the model");
    lvf->callback([&]() { rc = cmd_fit_levels(lv); });

    // fit-temperature
    TempCmd tc;
    auto* tmp = app.add_subcommand(
        "fit-temperature", "rank level-structure hypotheses on peak area vs T");
    tmp->add_option("data", tc.c.data,
                    "CSV with t_kelvin, area_central and optional satellites")
        ->required();
    add_common(tmp, tc.c);
    tc.f0_opt = tmp->add_option("--f0-hz", tc.f0_hz, "resonator frequency");
    tc.bc_opt = tmp->add_option("--b-central", tc.b_central,
                                "central peak field, tesla (default: from g)");
    tmp->add_option("--hypotheses", tc.hypotheses,
                    "comma list: doublet, hyperfine, triplet, triplet:<D_hz>")
        ->capture_default_str();
    tmp->callback([&]() { rc = cmd_fit_temperature(tc); });

    // fit-saturation
    SatCmd sat;
    auto* satc = app.add_subcommand(
        "fit-saturation", "fit the power saturation of the spin loss channel");
    satc->add_option("data", sat.c.data, "CSV with p_watt, q_inv")->required();
    add_common(satc, sat.c);
    satc->add_option("--q", sat.q, "loaded quality factor")->required();
    satc->add_option("--q-ext", sat.q_ext, "external quality factor")->required();
    sat.t2e_opt = satc->add_option("--t2e-s", sat.t2e_s,
                                   "echo T2, seconds; enables the T1 estimate");
    sat.alpha_opt = satc->add_option(
        "--alpha", sat.alpha, "field conversion T/sqrt(W) (default: from geometry)");
    sat.g_opt = satc->add_option("--g", sat.g, "g-factor for the T1 estimate");
    satc->callback([&]() { rc = cmd_fit_saturation(sat); });

    // fit-angle
    Common ang_c;
    auto* ang = app.add_subcommand("fit-angle",
                                   "fit the apparent g-factor vs field angle");
    ang->add_option("data", ang_c.data, "CSV with theta_deg, g_app")->required();
    add_common(ang, ang_c);
    ang->callback([&]() { rc = cmd_fit_angle(ang_c); });

    // spin-density
    DensityCmd dc;
    auto* den = app.add_subcommand(
        "spin-density", "convert fitted couplings to a surface spin density");
    den->add_option("--omega-hz", dc.omega_hz,
                    "coupling Omega/2pi in Hz; order: central, sat_low, sat_high")
        ->required()
        ->expected(1, 3);
    den->add_option("--geometry", dc.geometry,
                    "config file supplying the [geometry] section");
    dc.f0_opt = den->add_option("--f0-hz", dc.f0_hz, "resonator frequency");
    dc.t_opt = den->add_option("--t-kelvin", dc.t_kelvin, "sample temperature");
    add_common(den, dc.c, false);
    den->callback([&]() { rc = cmd_spin_density(dc); });

    // levels
    LevelsCmd lc;
    auto* lev = app.add_subcommand("levels",
                                   "tabulate spin levels and strong lines vs field");
    lev->add_option("--spin", lc.spin, "preset: config, hydrogen, free, triplet")
        ->capture_default_str();
    lc.g_opt = lev->add_option("--g", lc.g, "electron g-factor override");
    lc.a_opt = lev->add_option("--a-hz", lc.a_hz,
                               "hyperfine constant, Hz (forces the hyperfine model)");
    lc.d_opt = lev->add_option("--d-hz", lc.d_hz,
                               "zero-field splitting, Hz (forces the triplet model)");
    lc.gn_opt = lev->add_option("--g-n", lc.g_n, "nuclear g-factor override");
    lc.no_nz_opt = lev->add_flag("--no-nuclear-zeeman",
                                 "drop the nuclear Zeeman term");
    lev->add_option("--B,--b", lc.brange, "field grid start:stop:points, tesla")
        ->required();
    lev->add_option("--config", lc.config,
                    "analysis config file (default: $ESRKIT_CONFIG if set)");
    lev->add_option("-o,--out", lc.out, "output CSV path")->capture_default_str();
    lev->add_option("--plot", lc.plot, "write an SVG level diagram here");
    lev->callback([&]() { rc = cmd_levels(lc); });

    // simulate
    SimCmd sim;
    auto* simc = app.add_subcommand("simulate",
                                    "generate a synthetic dataset from a scenario");
    simc->add_option("--scenario", sim.scenario, "scenario JSON file")->required();
    sim.seed_opt = simc->add_option("--seed", sim.seed, "override the scenario seed");
    simc->add_option("-o,--out", sim.out, "output CSV path")->capture_default_str();
    simc->add_option("--manifest", sim.manifest,
                     "manifest JSON path (default: derived from --out)");
    simc->add_option("--config", sim.config,
                     "analysis config file (default: $ESRKIT_CONFIG if set)");
    simc->callback([&]() { rc = cmd_simulate(sim); });

    // report
    ReportCmd rep;
    auto* repc = app.add_subcommand("report",
                                    "render saved result JSONs as one markdown report");
    repc->add_option("--in", rep.in, "result JSON files, in order")
        ->required()
        ->expected(1, 64);
    repc->add_option("-o,--out", rep.out, "output markdown path")->required();
    repc->callback([&]() { rc = cmd_report(rep); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    } catch (const esr::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const esr::FitError& e) {
        return fail_with_partial(e.what());
    } catch (const esr::NumericError& e) {
        return fail_with_partial(e.what());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return rc;
}
