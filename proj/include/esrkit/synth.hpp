#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

namespace esr {

using ordered_json = nlohmann::ordered_json;

// Synthetic dataset plus the full generating record.  The manifest embeds
// every parameter the generator used (scenario echo, RNG identifier, seed,
// column names) so a later fit can be checked against ground truth.
struct SynthTable {
    std::vector<std::string> columns;  // numeric columns, CSV order
    Eigen::MatrixXd data;              // rows x columns
    std::vector<std::string> labels;   // optional trailing "label" column; empty if none
    ordered_json manifest;
};

// Deterministic generator driven by a scenario JSON (schema in the README).
// Scenario kinds: "s21", "sweep", "saturation", "temperature", "angle",
// "peak_positions".  The seed fully determines the output: noise comes from
// one mt19937_64 stream through a Box-Muller transform, drawn in a fixed
// documented order (artifact placement first, then channel noise point by
// point).  Injected flux jumps perturb only the frequency channel of a sweep,
// never the loss channel.
SynthTable synthesize(const ordered_json& scenario);

}  // namespace esr
