#include "contraseg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "contraseg/metrics.hpp"

namespace contraseg::svg {

namespace {

std::string rgb_hex(double r, double g, double b) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround(r * 255)),
                  static_cast<int>(std::lround(g * 255)),
                  static_cast<int>(std::lround(b * 255)));
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string class_color(int class_id) {
    // Golden-ratio hue stepping keeps neighbouring ids visually distinct.
    const double h = std::fmod(0.61803398875 * class_id, 1.0) * 6.0;
    const double s = 0.62, v = 0.85;
    const int i = static_cast<int>(h);
    const double f = h - i;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i % 6) {
        case 0: return rgb_hex(v, t, p);
        case 1: return rgb_hex(q, v, p);
        case 2: return rgb_hex(p, v, t);
        case 3: return rgb_hex(p, q, v);
        case 4: return rgb_hex(t, p, v);
        default: return rgb_hex(v, p, q);
    }
}

std::string timeline_svg(const std::vector<int>& gt, const std::vector<int>& pred,
                         const std::string& title) {
    const double width = 800.0, row_h = 40.0, gap = 12.0, top = 24.0;
    const double height = top + 2 * row_h + gap + 20.0;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    if (!title.empty())
        out << "  <text x=\"4\" y=\"16\" font-size=\"12\" font-family=\"sans-serif\">" << title
            << "</text>\n";

    auto draw_row = [&](const std::vector<int>& labels, double y, const char* tag) {
        const auto segs = metrics::segments_from_labels(labels);
        const double scale = width / static_cast<double>(labels.size());
        for (const auto& s : segs) {
            out << "  <rect class=\"" << tag << "\" x=\"" << fmt(s.start * scale) << "\" y=\""
                << fmt(y) << "\" width=\"" << fmt(s.length() * scale) << "\" height=\""
                << fmt(row_h) << "\" fill=\"" << class_color(s.label) << "\"/>\n";
        }
        out << "  <text x=\"4\" y=\"" << fmt(y + row_h + 12.0)
            << "\" font-size=\"10\" font-family=\"sans-serif\">" << tag << "</text>\n";
    };

    draw_row(gt, top, "gt");
    draw_row(pred, top + row_h + gap, "pred");
    out << "</svg>\n";
    return out.str();
}

std::string curve_svg(const std::vector<Series>& series, const std::string& title) {
    const double width = 800.0, height = 400.0, margin = 40.0;

    double lo = 0.0, hi = 1.0;
    size_t epochs = 0;
    bool first = true;
    for (const auto& s : series) {
        epochs = std::max(epochs, s.values.size());
        for (double v : s.values) {
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi <= lo) hi = lo + 1.0;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    if (!title.empty())
        out << "  <text x=\"4\" y=\"16\" font-size=\"12\" font-family=\"sans-serif\">" << title
            << "</text>\n";
    out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"#444\"/>\n";
    out << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << height - margin << "\" stroke=\"#444\"/>\n";

    const double plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        if (s.values.empty()) continue;
        out << "  <polyline data-name=\"" << s.name << "\" fill=\"none\" stroke=\""
            << class_color(static_cast<int>(si)) << "\" stroke-width=\"1.5\" points=\"";
        for (size_t e = 0; e < s.values.size(); ++e) {
            const double x =
                margin + (epochs > 1 ? plot_w * static_cast<double>(e) / (epochs - 1) : 0.0);
            const double y = height - margin - plot_h * (s.values[e] - lo) / (hi - lo);
            out << fmt(x) << "," << fmt(y) << (e + 1 < s.values.size() ? " " : "");
        }
        out << "\"/>\n";
        out << "  <text x=\"" << width - margin + 4 << "\" y=\"" << margin + 14.0 * si
            << "\" font-size=\"10\" font-family=\"sans-serif\" fill=\""
            << class_color(static_cast<int>(si)) << "\">" << s.name << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace contraseg::svg
