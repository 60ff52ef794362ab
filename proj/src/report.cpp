#include "esrkit/report.hpp"

namespace esr {

namespace {

using nlohmann::ordered_json;

std::string dump_value(const ordered_json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void render_one(std::string& md, const ordered_json& r, size_t index) {
    const std::string cmd = r.value("command", std::string("result"));
    md += "## " + std::to_string(index + 1) + ". " + cmd + "\n\n";

    if (r.contains("tool"))
        md += "- tool: " + dump_value(r["tool"]) + " " +
              (r.contains("tool_version") ? dump_value(r["tool_version"]) : "") + "\n";
    if (r.contains("config_hash")) md += "- config: `" + dump_value(r["config_hash"]) + "`\n";
    if (r.contains("inputs") && r["inputs"].is_array())
        for (const auto& in : r["inputs"]) md += "- input: " + dump_value(in) + "\n";
    if (r.contains("converged")) {
        md += "- converged: " + std::string(r["converged"].get<bool>() ? "yes" : "no");
        if (r.contains("iterations")) md += " (" + dump_value(r["iterations"]) + " iterations";
        if (r.contains("residual_norm"))
            md += ", residual norm " + dump_value(r["residual_norm"]);
        if (r.contains("iterations")) md += ")";
        md += "\n";
    }
    md += "\n";

    if (r.contains("params") && r["params"].is_object() && !r["params"].empty()) {
        md += "| parameter | value | 95% ci |\n|---|---|---|\n";
        for (auto it = r["params"].begin(); it != r["params"].end(); ++it) {
            const auto& p = it.value();
            md += "| " + it.key() + " | " + dump_value(p.contains("value") ? p["value"] : p) +
                  " | " + (p.contains("ci95") ? dump_value(p["ci95"]) : "") + " |\n";
        }
        md += "\n";
    }

    if (r.contains("derived") && r["derived"].is_object() && !r["derived"].empty()) {
        md += "| derived quantity | value |\n|---|---|\n";
        for (auto it = r["derived"].begin(); it != r["derived"].end(); ++it)
            md += "| " + it.key() + " | " + dump_value(it.value()) + " |\n";
        md += "\n";
    }

    if (r.contains("ranking") && r["ranking"].is_array() && !r["ranking"].empty()) {
        md += "| hypothesis | rss | aicc |\n|---|---|---|\n";
        for (const auto& h : r["ranking"])
            md += "| " + (h.contains("hypothesis") ? dump_value(h["hypothesis"]) : "?") +
                  " | " + (h.contains("rss") ? dump_value(h["rss"]) : "") + " | " +
                  (h.contains("aicc") ? dump_value(h["aicc"]) : "") + " |\n";
        md += "\n";
    }

    if (r.contains("error")) md += "Error: " + dump_value(r["error"]) + "\n\n";

    if (r.contains("notes") && r["notes"].is_array() && !r["notes"].empty()) {
        md += "Notes:\n";
        for (const auto& n : r["notes"]) md += "- " + dump_value(n) + "\n";
        md += "\n";
    }
}

}  // namespace

std::string render_report(const std::vector<ordered_json>& results) {
    std::string md = "# esrkit analysis report\n\n";
    for (size_t i = 0; i < results.size(); ++i) render_one(md, results[i], i);
    return md;
}

}  // namespace esr
