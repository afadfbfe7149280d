#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tvopt/common.hpp"

namespace tvopt {

/// One polyline on a panel.
struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    bool dashed = false;
};

/// One chart panel; panels stack vertically in the output file.
struct PlotPanel {
    std::string title;
    std::string x_label = "t [s]";
    std::string y_label;
    bool log_y = false;
    std::vector<PlotSeries> series;
};

namespace detail {

inline const char* plot_palette(size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

/// Round tick spacing to 1/2/5 times a power of ten.
inline double nice_step(double span, int target_ticks) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    if (norm < 1.5) return mag;
    if (norm < 3.5) return 2.0 * mag;
    if (norm < 7.5) return 5.0 * mag;
    return 10.0 * mag;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

/// Renders stacked line-chart panels as a standalone SVG document.
inline std::string render_svg(const std::vector<PlotPanel>& panels, int width = 960, int panel_height = 300) {
    const int margin_left = 72, margin_right = 24, margin_top = 36, margin_bottom = 44;
    const int total_height = panel_height * static_cast<int>(panels.size());
    std::string svg = strf(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
        "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n",
        width, total_height);
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (size_t pi = 0; pi < panels.size(); ++pi) {
        const PlotPanel& panel = panels[pi];
        const int top = static_cast<int>(pi) * panel_height + margin_top;
        const int plot_w = width - margin_left - margin_right;
        const int plot_h = panel_height - margin_top - margin_bottom;

        double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
        double y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
        double log_floor = std::numeric_limits<double>::infinity();
        if (panel.log_y) {
            for (const auto& s : panel.series)
                for (double v : s.y)
                    if (v > 0.0) log_floor = std::min(log_floor, v);
            if (!std::isfinite(log_floor)) log_floor = 1e-16;
            log_floor = std::max(log_floor / 10.0, 1e-300);
        }
        auto y_transform = [&](double v) { return panel.log_y ? std::log10(std::max(v, log_floor)) : v; };
        for (const auto& s : panel.series) {
            for (size_t k = 0; k < s.x.size(); ++k) {
                if (!std::isfinite(s.x[k])) continue;
                const double ty = y_transform(s.y[k]);
                if (!std::isfinite(ty)) continue;
                x_min = std::min(x_min, s.x[k]);
                x_max = std::max(x_max, s.x[k]);
                y_min = std::min(y_min, ty);
                y_max = std::max(y_max, ty);
            }
        }
        if (!std::isfinite(x_min)) { x_min = 0; x_max = 1; }
        if (!std::isfinite(y_min)) { y_min = 0; y_max = 1; }
        if (x_max - x_min < 1e-12) x_max = x_min + 1.0;
        if (y_max - y_min < 1e-12) { y_max += 0.5; y_min -= 0.5; }
        const double y_pad = 0.05 * (y_max - y_min);
        y_min -= y_pad;
        y_max += y_pad;

        auto px = [&](double x) { return margin_left + (x - x_min) / (x_max - x_min) * plot_w; };
        auto py = [&](double ty) { return top + plot_h - (ty - y_min) / (y_max - y_min) * plot_h; };

        svg += strf("<text x=\"%d\" y=\"%d\" font-weight=\"bold\">%s</text>\n", margin_left, top - 14,
                    detail::svg_escape(panel.title).c_str());
        svg += strf("<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" stroke=\"#333\"/>\n",
                    margin_left, top, plot_w, plot_h);

        // x ticks
        const double xstep = detail::nice_step(x_max - x_min, 8);
        for (double x = std::ceil(x_min / xstep) * xstep; x <= x_max + 1e-12; x += xstep) {
            svg += strf("<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"#ccc\"/>\n", px(x), top, px(x),
                        top + plot_h);
            svg += strf("<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%g</text>\n", px(x), top + plot_h + 16, x);
        }
        // y ticks
        if (panel.log_y) {
            for (double e = std::ceil(y_min); e <= std::floor(y_max) + 1e-12; e += 1.0) {
                svg += strf("<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#ccc\"/>\n", margin_left,
                            py(e), margin_left + plot_w, py(e));
                svg += strf("<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">1e%g</text>\n", margin_left - 6,
                            py(e) + 4, e);
            }
        } else {
            const double ystep = detail::nice_step(y_max - y_min, 5);
            for (double yv = std::ceil(y_min / ystep) * ystep; yv <= y_max + 1e-12; yv += ystep) {
                svg += strf("<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#ccc\"/>\n", margin_left,
                            py(yv), margin_left + plot_w, py(yv));
                svg += strf("<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">%g</text>\n", margin_left - 6,
                            py(yv) + 4, yv);
            }
        }
        svg += strf("<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">%s</text>\n", margin_left + plot_w / 2,
                    top + plot_h + 34, detail::svg_escape(panel.x_label).c_str());
        svg += strf(
            "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" transform=\"rotate(-90 %d %d)\">%s</text>\n",
            margin_left - 50, top + plot_h / 2, margin_left - 50, top + plot_h / 2,
            detail::svg_escape(panel.y_label).c_str());

        for (const auto& s : panel.series) {
            std::string points;
            for (size_t k = 0; k < s.x.size(); ++k) {
                const double ty = y_transform(s.y[k]);
                if (!std::isfinite(ty) || !std::isfinite(s.x[k])) continue;
                points += strf("%.2f,%.2f ", px(s.x[k]), py(ty));
            }
            svg += strf("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.4\"%s points=\"%s\"/>\n",
                        s.color.c_str(), s.dashed ? " stroke-dasharray=\"6,4\"" : "", points.c_str());
        }
        // legend
        int ly = top + 14;
        for (const auto& s : panel.series) {
            svg += strf("<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"%s\" stroke-width=\"2\"%s/>\n",
                        margin_left + plot_w - 150, ly - 4, margin_left + plot_w - 126, ly - 4, s.color.c_str(),
                        s.dashed ? " stroke-dasharray=\"6,4\"" : "");
            svg += strf("<text x=\"%d\" y=\"%d\">%s</text>\n", margin_left + plot_w - 120, ly,
                        detail::svg_escape(s.label).c_str());
            ly += 16;
        }
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace tvopt
