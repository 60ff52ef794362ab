#include "esrkit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "esrkit/errors.hpp"
#include "esrkit/io.hpp"

namespace esr {

namespace {

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string g4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

void write_svg_plot(const std::string& path, const PlotSpec& spec) {
    constexpr double W = 800, H = 500;
    constexpr double ml = 75, mr = 25, mt = 45, mb = 55;

    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    for (const auto& s : spec.series) {
        if (s.x.size() != s.y.size()) throw InputError("plot series length mismatch");
        for (size_t i = 0; i < s.x.size(); ++i) {
            double x = s.x[i];
            const double y = s.y[i];
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (spec.logx) {
                if (!(x > 0)) continue;
                x = std::log10(x);
            }
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
    }
    if (!(xhi >= xlo) || !(yhi >= ylo)) throw InputError("plot has no finite points");
    if (xhi == xlo) { xlo -= 0.5; xhi += 0.5; }
    if (yhi == ylo) { ylo -= 0.5; yhi += 0.5; }
    const double ypad = 0.05 * (yhi - ylo);
    ylo -= ypad;
    yhi += ypad;

    auto px = [&](double x) {
        if (spec.logx) x = std::log10(x);
        return ml + (x - xlo) / (xhi - xlo) * (W - ml - mr);
    };
    auto py = [&](double y) { return H - mb - (y - ylo) / (yhi - ylo) * (H - mt - mb); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
           "viewBox=\"0 0 800 500\">\n";
    for (const auto& p : spec.provenance) svg += "<!-- " + escape_xml(p) + " -->\n";
    svg += "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
    svg += "<text x=\"" + f2(W / 2) + "\" y=\"25\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">" +
           escape_xml(spec.title) + "</text>\n";

    // Frame and ticks.
    svg += "<rect x=\"" + f2(ml) + "\" y=\"" + f2(mt) + "\" width=\"" + f2(W - ml - mr) +
           "\" height=\"" + f2(H - mt - mb) +
           "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    constexpr int nticks = 6;
    for (int i = 0; i < nticks; ++i) {
        const double fx = xlo + (xhi - xlo) * i / (nticks - 1);
        const double vx = spec.logx ? std::pow(10.0, fx) : fx;
        const double sx = ml + (fx - xlo) / (xhi - xlo) * (W - ml - mr);
        svg += "<line x1=\"" + f2(sx) + "\" y1=\"" + f2(H - mb) + "\" x2=\"" + f2(sx) +
               "\" y2=\"" + f2(H - mb + 5) + "\" stroke=\"#333\"/>\n";
        svg += "<text x=\"" + f2(sx) + "\" y=\"" + f2(H - mb + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               g4(vx) + "</text>\n";
        const double vy = ylo + (yhi - ylo) * i / (nticks - 1);
        const double sy = py(vy);
        svg += "<line x1=\"" + f2(ml - 5) + "\" y1=\"" + f2(sy) + "\" x2=\"" + f2(ml) +
               "\" y2=\"" + f2(sy) + "\" stroke=\"#333\"/>\n";
        svg += "<text x=\"" + f2(ml - 8) + "\" y=\"" + f2(sy + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               g4(vy) + "</text>\n";
    }
    svg += "<text x=\"" + f2(ml + (W - ml - mr) / 2) + "\" y=\"" + f2(H - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           escape_xml(spec.xlabel) + (spec.logx ? " (log scale)" : "") + "</text>\n";
    svg += "<text x=\"18\" y=\"" + f2(mt + (H - mt - mb) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18 " +
           f2(mt + (H - mt - mb) / 2) + ")\">" + escape_xml(spec.ylabel) + "</text>\n";

    for (const auto& s : spec.series) {
        if (s.markers) {
            for (size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                if (spec.logx && !(s.x[i] > 0)) continue;
                svg += "<circle cx=\"" + f2(px(s.x[i])) + "\" cy=\"" + f2(py(s.y[i])) +
                       "\" r=\"2.5\" fill=\"" + s.color + "\"/>\n";
            }
        } else {
            std::string pts;
            for (size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                if (spec.logx && !(s.x[i] > 0)) continue;
                pts += f2(px(s.x[i])) + "," + f2(py(s.y[i])) + " ";
            }
            if (!pts.empty()) pts.pop_back();
            svg += "<polyline fill=\"none\" stroke=\"" + s.color +
                   "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        }
    }

    // Legend.
    double ly = mt + 14;
    for (const auto& s : spec.series) {
        if (s.name.empty()) continue;
        svg += "<line x1=\"" + f2(W - mr - 150) + "\" y1=\"" + f2(ly - 4) + "\" x2=\"" +
               f2(W - mr - 125) + "\" y2=\"" + f2(ly - 4) + "\" stroke=\"" + s.color +
               "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + f2(W - mr - 118) + "\" y=\"" + f2(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + escape_xml(s.name) +
               "</text>\n";
        ly += 16;
    }
    svg += "</svg>\n";
    atomic_write_text(path, svg);
}

}  // namespace esr
