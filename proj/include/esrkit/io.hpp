#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "esrkit/fitting.hpp"

namespace esr {

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------
//
// Format: optional '#' comment lines, one mandatory header row naming the
// columns (unit-suffixed: B_tesla, f_hz, q_inv, s21_re, s21_im, t_kelvin,
// p_watt, theta_deg, area_*/err_*), then comma-separated numeric rows.  A
// trailing 'label' column may hold transition labels as text.  All parse
// failures carry the source line number.

struct CsvTable {
    std::vector<std::string> columns;  // numeric columns in file order
    Eigen::MatrixXd data;              // rows x columns
    std::vector<std::string> labels;   // 'label' column when present
    std::vector<long> row_lines;       // source line of each data row

    int column_index(const std::string& name) const;        // -1 when absent
    Eigen::VectorXd column(const std::string& name) const;  // throws InputError
};

CsvTable read_csv_table(const std::string& path);

void write_csv_table(const std::string& path, const std::vector<std::string>& columns,
                     const Eigen::MatrixXd& data,
                     const std::vector<std::string>& labels = {},
                     const std::vector<std::string>& comments = {});

// Writes to <path>.tmp then renames, so readers never see a half file.
void atomic_write_text(const std::string& path, const std::string& content);

// ---------------------------------------------------------------------------
// Typed loaders: column lookup plus the physical invariants of each dataset,
// all diagnostics line-numbered.
// ---------------------------------------------------------------------------

S21Trace load_s21(const std::string& path);
SweepTrace load_sweep(const std::string& path);
SaturationCurve load_saturation(const std::string& path, double q, double q_ext);
TemperatureSeries load_temperature(const std::string& path);
AngleSeries load_angle(const std::string& path);
PeakPositionData load_peak_positions(const std::string& path);

}  // namespace esr
