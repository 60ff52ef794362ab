#include "esrkit/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

#include "esrkit/errors.hpp"

namespace esr {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct Value {
    enum Kind { Number, Boolean, Text } kind;
    double num = 0.0;
    bool flag = false;
    std::string text;
};

Value parse_value(const std::string& raw, const std::string& path, long line) {
    if (raw == "true") return {Value::Boolean, 0.0, true, {}};
    if (raw == "false") return {Value::Boolean, 0.0, false, {}};
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
        return {Value::Text, 0.0, false, raw.substr(1, raw.size() - 2)};
    char* end = nullptr;
    const double v = std::strtod(raw.c_str(), &end);
    if (raw.empty() || end != raw.c_str() + raw.size())
        throw InputError(path + ": cannot parse value '" + raw + "'", line);
    return {Value::Number, v, false, {}};
}

double as_num(const Value& v, const std::string& key, const std::string& path, long line) {
    if (v.kind != Value::Number)
        throw InputError(path + ": '" + key + "' must be a number", line);
    return v.num;
}

bool as_bool(const Value& v, const std::string& key, const std::string& path, long line) {
    if (v.kind != Value::Boolean)
        throw InputError(path + ": '" + key + "' must be true or false", line);
    return v.flag;
}

std::string as_text(const Value& v, const std::string& key, const std::string& path,
                    long line) {
    if (v.kind != Value::Text)
        throw InputError(path + ": '" + key + "' must be a quoted string", line);
    return v.text;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* spin_kind_name(SpinKind k) {
    switch (k) {
        case SpinKind::FreeDoublet: return "free_doublet";
        case SpinKind::HyperfineDoublet: return "hyperfine";
        case SpinKind::Triplet: return "triplet";
    }
    return "?";
}

}  // namespace

std::string Config::canonical() const {
    std::string s;
    s += "fit.fit_background=" + std::string(sweep.fit_background ? "true" : "false") + "\n";
    s += "fit.include_df=" + std::string(sweep.include_df ? "true" : "false") + "\n";
    s += "fit.max_iter=" + std::to_string(sweep.max_iter) + "\n";
    s += "fit.prominence=" + fmt(sweep.prominence) + "\n";
    s += "fit.robust=" + std::string(sweep.robust ? "true" : "false") + "\n";
    s += "geometry.b_m=" + fmt(geometry.b) + "\n";
    s += "geometry.delta_cut_m=" + fmt(geometry.delta_cut) + "\n";
    s += "geometry.l_res_m=" + fmt(geometry.l_res) + "\n";
    s += "geometry.w_m=" + fmt(geometry.w) + "\n";
    s += "geometry.z0_ohm=" + fmt(geometry.z0) + "\n";
    s += "resonator.f0_hz=" + fmt(resonator.f0_hz) + "\n";
    s += "resonator.q=" + fmt(resonator.q) + "\n";
    s += "resonator.qc_im=" + fmt(resonator.qc.imag()) + "\n";
    s += "resonator.qc_re=" + fmt(resonator.qc.real()) + "\n";
    s += "run.seed=" + std::to_string(seed) + "\n";
    s += "run.t_kelvin=" + fmt(t_kelvin) + "\n";
    s += "spin.a_hz=" + fmt(spin.a_hz) + "\n";
    s += "spin.d_hz=" + fmt(spin.d_hz) + "\n";
    s += "spin.g_central=" + fmt(g_central) + "\n";
    s += "spin.g_e=" + fmt(spin.g_e) + "\n";
    s += "spin.g_n=" + fmt(spin.g_n) + "\n";
    s += "spin.kind=" + std::string(spin_kind_name(spin.kind)) + "\n";
    s += "spin.nuclear_zeeman=" + std::string(spin.nuclear_zeeman ? "true" : "false") + "\n";
    return s;
}

std::string Config::hash() const {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical())));
    return buf;
}

Config load_config(const std::string& path) {
    Config cfg;
    if (path.empty()) return cfg;

    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open config file");

    std::string spin_kind = spin_kind_name(cfg.spin.kind);

    using Setter = std::function<void(const Value&, long)>;
    const std::map<std::string, Setter> setters = {
        {"geometry.b_m", [&](const Value& v, long l) { cfg.geometry.b = as_num(v, "b_m", path, l); }},
        {"geometry.w_m", [&](const Value& v, long l) { cfg.geometry.w = as_num(v, "w_m", path, l); }},
        {"geometry.delta_cut_m",
         [&](const Value& v, long l) { cfg.geometry.delta_cut = as_num(v, "delta_cut_m", path, l); }},
        {"geometry.z0_ohm",
         [&](const Value& v, long l) { cfg.geometry.z0 = as_num(v, "z0_ohm", path, l); }},
        {"geometry.l_res_m",
         [&](const Value& v, long l) { cfg.geometry.l_res = as_num(v, "l_res_m", path, l); }},
        {"resonator.f0_hz",
         [&](const Value& v, long l) { cfg.resonator.f0_hz = as_num(v, "f0_hz", path, l); }},
        {"resonator.q", [&](const Value& v, long l) { cfg.resonator.q = as_num(v, "q", path, l); }},
        {"resonator.qc_re",
         [&](const Value& v, long l) {
             cfg.resonator.qc = {as_num(v, "qc_re", path, l), cfg.resonator.qc.imag()};
         }},
        {"resonator.qc_im",
         [&](const Value& v, long l) {
             cfg.resonator.qc = {cfg.resonator.qc.real(), as_num(v, "qc_im", path, l)};
         }},
        {"spin.kind", [&](const Value& v, long l) { spin_kind = as_text(v, "kind", path, l); }},
        {"spin.g_e", [&](const Value& v, long l) { cfg.spin.g_e = as_num(v, "g_e", path, l); }},
        {"spin.a_hz", [&](const Value& v, long l) { cfg.spin.a_hz = as_num(v, "a_hz", path, l); }},
        {"spin.g_n", [&](const Value& v, long l) { cfg.spin.g_n = as_num(v, "g_n", path, l); }},
        {"spin.nuclear_zeeman",
         [&](const Value& v, long l) { cfg.spin.nuclear_zeeman = as_bool(v, "nuclear_zeeman", path, l); }},
        {"spin.d_hz", [&](const Value& v, long l) { cfg.spin.d_hz = as_num(v, "d_hz", path, l); }},
        {"spin.g_central",
         [&](const Value& v, long l) { cfg.g_central = as_num(v, "g_central", path, l); }},
        {"fit.robust",
         [&](const Value& v, long l) { cfg.sweep.robust = as_bool(v, "robust", path, l); }},
        {"fit.include_df",
         [&](const Value& v, long l) { cfg.sweep.include_df = as_bool(v, "include_df", path, l); }},
        {"fit.fit_background",
         [&](const Value& v, long l) { cfg.sweep.fit_background = as_bool(v, "fit_background", path, l); }},
        {"fit.max_iter",
         [&](const Value& v, long l) {
             const double n = as_num(v, "max_iter", path, l);
             if (n < 1 || n != static_cast<int>(n))
                 throw InputError(path + ": 'max_iter' must be a positive integer", l);
             cfg.sweep.max_iter = static_cast<int>(n);
         }},
        {"fit.prominence",
         [&](const Value& v, long l) { cfg.sweep.prominence = as_num(v, "prominence", path, l); }},
        {"run.t_kelvin",
         [&](const Value& v, long l) { cfg.t_kelvin = as_num(v, "t_kelvin", path, l); }},
        {"run.seed",
         [&](const Value& v, long l) {
             const double n = as_num(v, "seed", path, l);
             if (n < 0 || n != static_cast<uint64_t>(n))
                 throw InputError(path + ": 'seed' must be a non-negative integer", l);
             cfg.seed = static_cast<uint64_t>(n);
         }},
    };

    std::string line, section;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw InputError(path + ": malformed section header", lineno);
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty())
                throw InputError(path + ": empty section name", lineno);
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw InputError(path + ": expected 'key = value'", lineno);
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) throw InputError(path + ": empty key", lineno);
        const std::string full = section.empty() ? key : section + "." + key;
        auto it = setters.find(full);
        if (it == setters.end())
            throw InputError(path + ": unknown key '" + full + "'", lineno);
        it->second(parse_value(trim(s.substr(eq + 1)), path, lineno), lineno);
    }

    if (spin_kind == "free_doublet")
        cfg.spin.kind = SpinKind::FreeDoublet;
    else if (spin_kind == "hyperfine")
        cfg.spin.kind = SpinKind::HyperfineDoublet;
    else if (spin_kind == "triplet")
        cfg.spin.kind = SpinKind::Triplet;
    else
        throw InputError(path + ": unknown spin kind '" + spin_kind + "'");
    cfg.spin.validate();
    cfg.geometry.validate();
    return cfg;
}

}  // namespace esr
