#include "ifm/svg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ifm/types.hpp"

namespace ifm::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 520.0;
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 56.0;

double map_x(double f) { return kMarginLeft + f * (kWidth - kMarginLeft - kMarginRight); }
double map_y(double v) {
    return kHeight - kMarginBottom - v * (kHeight - kMarginTop - kMarginBottom);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

// One polyline per contiguous run of defined points.
void append_polyline(std::string& out, const std::vector<std::pair<double, double>>& pts,
                     const char* color, double width, bool dashed = false) {
    if (pts.size() < 2) return;
    out += "<polyline fill=\"none\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"" + fmt(width) + "\"";
    if (dashed) out += " stroke-dasharray=\"6,5\"";
    out += " points=\"";
    for (const auto& [x, y] : pts) {
        out += fmt(map_x(x));
        out += ',';
        out += fmt(map_y(y));
        out += ' ';
    }
    out += "\"/>\n";
}

struct Series {
    std::vector<std::pair<double, double>> mean, lo, hi;
};

void flush_series(std::string& out, Series& s, const char* color) {
    append_polyline(out, s.lo, color, 1.0);
    append_polyline(out, s.hi, color, 1.0);
    append_polyline(out, s.mean, color, 2.5);
    s = {};
}

}  // namespace

std::string render_enrichment_curves(const std::vector<protocol::EnrichmentPoint>& curve,
                                     const std::string& title) {
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
           fmt(kHeight) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
           title + "</text>\n";

    // axes and ticks
    out += "<line x1=\"" + fmt(map_x(0)) + "\" y1=\"" + fmt(map_y(0)) + "\" x2=\"" + fmt(map_x(1)) +
           "\" y2=\"" + fmt(map_y(0)) + "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    out += "<line x1=\"" + fmt(map_x(0)) + "\" y1=\"" + fmt(map_y(0)) + "\" x2=\"" + fmt(map_x(0)) +
           "\" y2=\"" + fmt(map_y(1)) + "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double v = i / 5.0;
        out += "<line x1=\"" + fmt(map_x(v)) + "\" y1=\"" + fmt(map_y(0)) + "\" x2=\"" +
               fmt(map_x(v)) + "\" y2=\"" + fmt(map_y(0) + 6) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + fmt(map_x(v)) + "\" y=\"" + fmt(map_y(0) + 22) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + fmt(v) +
               "</text>\n";
        out += "<line x1=\"" + fmt(map_x(0) - 6) + "\" y1=\"" + fmt(map_y(v)) + "\" x2=\"" +
               fmt(map_x(0)) + "\" y2=\"" + fmt(map_y(v)) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + fmt(map_x(0) - 10) + "\" y=\"" + fmt(map_y(v) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" + fmt(v) +
               "</text>\n";
    }
    out += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"" + fmt(kHeight - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">original black "
           "fraction</text>\n";

    // no-separation diagonal
    append_polyline(out, {{0.0, 0.0}, {1.0, 1.0}}, "#888888", 1.5, true);

    Series black, trans;
    for (const auto& p : curve) {
        if (p.black_in_ii_defined) {
            black.mean.emplace_back(p.f_original, p.black_in_ii.value);
            black.lo.emplace_back(p.f_original, std::max(0.0, p.black_in_ii.value - p.black_in_ii.sigma));
            black.hi.emplace_back(p.f_original, std::min(1.0, p.black_in_ii.value + p.black_in_ii.sigma));
        } else {
            flush_series(out, black, "#1f5fbf");
        }
        if (p.trans_in_i_defined) {
            trans.mean.emplace_back(p.f_original, p.trans_in_i.value);
            trans.lo.emplace_back(p.f_original, std::max(0.0, p.trans_in_i.value - p.trans_in_i.sigma));
            trans.hi.emplace_back(p.f_original, std::min(1.0, p.trans_in_i.value + p.trans_in_i.sigma));
        } else {
            flush_series(out, trans, "#bf3f1f");
        }
    }
    flush_series(out, black, "#1f5fbf");
    flush_series(out, trans, "#bf3f1f");

    out += "<text x=\"" + fmt(map_x(0.02)) + "\" y=\"" + fmt(map_y(0.97)) +
           "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f5fbf\">black fraction in group "
           "ii</text>\n";
    out += "<text x=\"" + fmt(map_x(0.02)) + "\" y=\"" + fmt(map_y(0.92)) +
           "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#bf3f1f\">transparent fraction in "
           "group i</text>\n";
    out += "</svg>\n";
    return out;
}

void write_enrichment_curves(const std::string& path,
                             const std::vector<protocol::EnrichmentPoint>& curve,
                             const std::string& title) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write svg file: " + path);
    out << render_enrichment_curves(curve, title);
}

}  // namespace ifm::svg
