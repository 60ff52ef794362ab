#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace esr {

// Markdown summary built from saved result JSONs.  Pure function of its
// input: regenerating from the same files yields identical bytes.
std::string render_report(const std::vector<nlohmann::ordered_json>& results);

}  // namespace esr
