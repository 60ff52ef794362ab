#include "esrkit/io.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "esrkit/errors.hpp"

namespace esr {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_number(const std::string& tok, const std::string& path, long line) {
    if (tok.empty()) throw InputError(path + ": empty numeric field", line);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
        throw InputError(path + ": cannot parse '" + tok + "' as a number", line);
    return v;
}

[[noreturn]] void missing_column(const std::string& path, const std::string& name,
                                 const CsvTable& t) {
    std::string have;
    for (const auto& c : t.columns) have += (have.empty() ? "" : ", ") + c;
    throw InputError(path + ": required column '" + name + "' not found (header has: " +
                     have + ")");
}

// Strictly monotone axis check naming the first offending data row.
void require_monotone_axis(const CsvTable& t, const Eigen::VectorXd& x,
                           const std::string& name, const std::string& path,
                           bool ascending_only) {
    if (x.size() < 2) return;
    const bool up = ascending_only ? true : x[1] > x[0];
    for (Eigen::Index i = 1; i < x.size(); ++i) {
        const bool ok = up ? x[i] > x[i - 1] : x[i] < x[i - 1];
        if (!ok)
            throw InputError(path + ": column '" + name + "' is not strictly monotone",
                             t.row_lines[static_cast<size_t>(i)]);
    }
}

void require_finite(const CsvTable& t, const Eigen::VectorXd& x, const std::string& name,
                    const std::string& path) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]))
            throw InputError(path + ": non-finite value in column '" + name + "'",
                             t.row_lines[static_cast<size_t>(i)]);
}

}  // namespace

int CsvTable::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

Eigen::VectorXd CsvTable::column(const std::string& name) const {
    const int idx = column_index(name);
    if (idx < 0) throw InputError("required column '" + name + "' not found");
    return data.col(idx);
}

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open file");

    CsvTable t;
    std::string line;
    long lineno = 0;
    bool have_header = false;
    int label_col = -1;
    std::vector<std::vector<double>> rows;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto fields = split_csv_line(s);
        if (!have_header) {
            for (size_t i = 0; i < fields.size(); ++i) {
                if (fields[i].empty())
                    throw InputError(path + ": empty column name in header", lineno);
                if (fields[i] == "label") {
                    label_col = static_cast<int>(i);
                } else {
                    if (label_col >= 0)
                        throw InputError(path + ": 'label' must be the last column", lineno);
                    t.columns.push_back(fields[i]);
                }
            }
            if (t.columns.empty())
                throw InputError(path + ": header declares no numeric columns", lineno);
            have_header = true;
            continue;
        }
        const size_t expect = t.columns.size() + (label_col >= 0 ? 1 : 0);
        if (fields.size() != expect)
            throw InputError(path + ": expected " + std::to_string(expect) +
                                 " fields, found " + std::to_string(fields.size()),
                             lineno);
        std::vector<double> row(t.columns.size());
        for (size_t i = 0; i < t.columns.size(); ++i)
            row[i] = parse_number(fields[i], path, lineno);
        rows.push_back(std::move(row));
        if (label_col >= 0) t.labels.push_back(fields[static_cast<size_t>(label_col)]);
        t.row_lines.push_back(lineno);
    }
    if (!have_header) throw InputError(path + ": missing header row");
    if (rows.empty()) throw InputError(path + ": no data rows");

    t.data.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(t.columns.size()));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < t.columns.size(); ++j)
            t.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError(tmp + ": cannot open for writing");
        out << content;
        if (!out) throw InputError(tmp + ": write failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw InputError(path + ": rename failed: " + std::strerror(errno));
    }
}

void write_csv_table(const std::string& path, const std::vector<std::string>& columns,
                     const Eigen::MatrixXd& data, const std::vector<std::string>& labels,
                     const std::vector<std::string>& comments) {
    if (data.cols() != static_cast<Eigen::Index>(columns.size()))
        throw InputError("column count does not match data width");
    if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != data.rows())
        throw InputError("label count does not match row count");

    std::string out;
    for (const auto& c : comments) out += "# " + c + "\n";
    for (size_t j = 0; j < columns.size(); ++j)
        out += (j ? "," : "") + columns[j];
    if (!labels.empty()) out += ",label";
    out += "\n";
    char buf[40];
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.12e", data(i, j));
            if (j) out += ",";
            out += buf;
        }
        if (!labels.empty()) out += "," + labels[static_cast<size_t>(i)];
        out += "\n";
    }
    atomic_write_text(path, out);
}

// ---------------------------------------------------------------------------
// Typed loaders
// ---------------------------------------------------------------------------

S21Trace load_s21(const std::string& path) {
    CsvTable t = read_csv_table(path);
    for (const char* c : {"f_hz", "s21_re", "s21_im"})
        if (t.column_index(c) < 0) missing_column(path, c, t);
    S21Trace tr;
    tr.f_hz = t.column("f_hz");
    const Eigen::VectorXd re = t.column("s21_re");
    const Eigen::VectorXd im = t.column("s21_im");
    require_finite(t, tr.f_hz, "f_hz", path);
    require_finite(t, re, "s21_re", path);
    require_finite(t, im, "s21_im", path);
    require_monotone_axis(t, tr.f_hz, "f_hz", path, false);
    tr.s21.resize(tr.f_hz.size());
    tr.s21.real() = re;
    tr.s21.imag() = im;
    return tr;
}

SweepTrace load_sweep(const std::string& path) {
    CsvTable t = read_csv_table(path);
    for (const char* c : {"B_tesla", "q_inv"})
        if (t.column_index(c) < 0) missing_column(path, c, t);
    SweepTrace tr;
    tr.b_tesla = t.column("B_tesla");
    tr.q_inv = t.column("q_inv");
    require_finite(t, tr.b_tesla, "B_tesla", path);
    require_finite(t, tr.q_inv, "q_inv", path);
    require_monotone_axis(t, tr.b_tesla, "B_tesla", path, false);
    if (t.column_index("f_hz") >= 0) {
        tr.f0_hz = t.column("f_hz");
        require_finite(t, tr.f0_hz, "f_hz", path);
    }
    return tr;
}

SaturationCurve load_saturation(const std::string& path, double q, double q_ext) {
    CsvTable t = read_csv_table(path);
    for (const char* c : {"p_watt", "q_inv"})
        if (t.column_index(c) < 0) missing_column(path, c, t);
    SaturationCurve c;
    c.p_drive_watt = t.column("p_watt");
    c.qs_inv = t.column("q_inv");
    c.q = q;
    c.q_ext = q_ext;
    require_finite(t, c.p_drive_watt, "p_watt", path);
    require_finite(t, c.qs_inv, "q_inv", path);
    for (Eigen::Index i = 0; i < c.p_drive_watt.size(); ++i)
        if (!(c.p_drive_watt[i] > 0))
            throw InputError(path + ": p_watt must be positive",
                             t.row_lines[static_cast<size_t>(i)]);
    require_monotone_axis(t, c.p_drive_watt, "p_watt", path, true);
    return c;
}

TemperatureSeries load_temperature(const std::string& path) {
    CsvTable t = read_csv_table(path);
    for (const char* c : {"t_kelvin", "area_central"})
        if (t.column_index(c) < 0) missing_column(path, c, t);
    TemperatureSeries ts;
    ts.t_kelvin = t.column("t_kelvin");
    ts.area_central = t.column("area_central");
    require_finite(t, ts.t_kelvin, "t_kelvin", path);
    require_finite(t, ts.area_central, "area_central", path);
    for (Eigen::Index i = 0; i < ts.t_kelvin.size(); ++i) {
        if (!(ts.t_kelvin[i] > 0))
            throw InputError(path + ": t_kelvin must be positive",
                             t.row_lines[static_cast<size_t>(i)]);
        if (ts.area_central[i] < 0)
            throw InputError(path + ": areas must be non-negative",
                             t.row_lines[static_cast<size_t>(i)]);
    }
    require_monotone_axis(t, ts.t_kelvin, "t_kelvin", path, true);
    auto optional_col = [&](const char* name, Eigen::VectorXd& dst, bool positive) {
        if (t.column_index(name) < 0) return;
        dst = t.column(name);
        require_finite(t, dst, name, path);
        for (Eigen::Index i = 0; i < dst.size(); ++i) {
            const bool ok = positive ? dst[i] > 0 : dst[i] >= 0;
            if (!ok)
                throw InputError(path + ": column '" + std::string(name) +
                                     (positive ? "' must be positive" : "' must be >= 0"),
                                 t.row_lines[static_cast<size_t>(i)]);
        }
    };
    optional_col("area_satlow", ts.area_sat_low, false);
    optional_col("area_sathigh", ts.area_sat_high, false);
    optional_col("err_central", ts.err_central, true);
    optional_col("err_satlow", ts.err_sat_low, true);
    optional_col("err_sathigh", ts.err_sat_high, true);
    if (ts.area_sat_low.size() != ts.area_sat_high.size())
        throw InputError(path + ": satellite area columns must come as a pair");
    return ts;
}

AngleSeries load_angle(const std::string& path) {
    CsvTable t = read_csv_table(path);
    for (const char* c : {"theta_deg", "g_app"})
        if (t.column_index(c) < 0) missing_column(path, c, t);
    AngleSeries a;
    a.theta_deg = t.column("theta_deg");
    a.g_app = t.column("g_app");
    require_finite(t, a.theta_deg, "theta_deg", path);
    require_finite(t, a.g_app, "g_app", path);
    for (Eigen::Index i = 0; i < a.theta_deg.size(); ++i)
        if (a.theta_deg[i] < 0.0 || a.theta_deg[i] > 90.0)
            throw InputError(path + ": theta_deg must lie in [0, 90]",
                             t.row_lines[static_cast<size_t>(i)]);
    return a;
}

PeakPositionData load_peak_positions(const std::string& path) {
    CsvTable t = read_csv_table(path);
    for (const char* c : {"f_hz", "B_tesla"})
        if (t.column_index(c) < 0) missing_column(path, c, t);
    if (t.labels.empty()) throw InputError(path + ": missing 'label' column");
    const Eigen::VectorXd f = t.column("f_hz");
    const Eigen::VectorXd b = t.column("B_tesla");
    require_finite(t, f, "f_hz", path);
    require_finite(t, b, "B_tesla", path);
    PeakPositionData d;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const auto label = transition_label_from_string(t.labels[static_cast<size_t>(i)]);
        if (!label)
            throw InputError(path + ": unknown label '" + t.labels[static_cast<size_t>(i)] +
                                 "'",
                             t.row_lines[static_cast<size_t>(i)]);
        if (!(f[i] > 0) || !(b[i] > 0))
            throw InputError(path + ": f_hz and B_tesla must be positive",
                             t.row_lines[static_cast<size_t>(i)]);
        d.rows.push_back(PeakPositionRow{f[i], b[i], *label});
    }
    return d;
}

}  // namespace esr
