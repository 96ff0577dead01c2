#include "tsenas/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace tsenas {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '&':
                out += "&amp;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

}  // namespace

std::string render_svg(const LineChart& chart) {
    const double left = 64;
    const double right = 180;
    const double top = 40;
    const double bottom = 56;
    const double plot_w = chart.width - left - right;
    const double plot_h = chart.height - top - bottom;

    Range xr;
    Range yr;
    for (const auto& s : chart.series) {
        for (const auto& [x, y] : s.points) {
            if (std::isfinite(x) && std::isfinite(y)) {
                xr.add(x);
                yr.add(y);
            }
        }
    }
    xr.finish();
    yr.finish();
    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        chart.width, chart.height);
    out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                       left + plot_w / 2, escape(chart.title));
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, top + plot_h,
                       left + plot_w);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top,
                       top + plot_h);
    constexpr int ticks = 5;
    for (int k = 0; k <= ticks; ++k) {
        const double xv = xr.lo + (xr.hi - xr.lo) * k / ticks;
        const double yv = yr.lo + (yr.hi - yr.lo) * k / ticks;
        out += fmt::format(
            "<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"black\"/>"
            "<text x=\"{0:.2f}\" y=\"{3}\" text-anchor=\"middle\">{4:.4g}</text>\n",
            px(xv), top + plot_h, top + plot_h + 5, top + plot_h + 18, xv);
        out += fmt::format(
            "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"black\"/>"
            "<text x=\"{3}\" y=\"{1:.2f}\" text-anchor=\"end\" dominant-baseline=\"middle\">{4:.4g}</text>\n",
            left - 5, py(yv), left, left - 8, yv);
    }
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + plot_w / 2,
                       chart.height - 14, escape(chart.x_label));
    out += fmt::format(
        "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        top + plot_h / 2, escape(chart.y_label));

    for (std::size_t i = 0; i < chart.series.size(); ++i) {
        const auto& s = chart.series[i];
        const char* colour = kPalette[i % std::size(kPalette)];
        std::string points;
        for (const auto& [x, y] : s.points) {
            if (std::isfinite(x) && std::isfinite(y)) {
                points += fmt::format("{:.2f},{:.2f} ", px(x), py(y));
            }
        }
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", colour,
                           points);
        const double ly = top + 10 + 18 * static_cast<double>(i);
        const double lx = left + plot_w + 12;
        out += fmt::format(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
            "<text x=\"{4}\" y=\"{1}\" dominant-baseline=\"middle\">{5}</text>\n",
            lx, ly, lx + 20, colour, lx + 26, escape(s.label));
    }
    out += "</svg>\n";
    return out;
}

}  // namespace tsenas
