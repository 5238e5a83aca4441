#include "mcvd/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mcvd/errors.hpp"

namespace mcvd::svg {

namespace {

constexpr double kWidth = 800;
constexpr double kHeight = 450;
constexpr double kLeft = 70;
constexpr double kRight = 250;
constexpr double kTop = 40;
constexpr double kBottom = 60;

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string& s) {
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

// Roughly five ticks at 1, 2 or 5 times a power of ten.
std::vector<double> ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(t);
    return out;
}

}  // namespace

std::string render(const LineChart& chart) {
    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    for (const Series& s : chart.series) {
        if (s.x.size() != s.y.size()) throw ValidationError("chart series '" + s.label + "' has mismatched lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || !std::isfinite(s.x[i])) continue;
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    }
    if (!std::isfinite(x_lo)) {
        x_lo = 0;
        x_hi = 1;
        y_lo = 0;
        y_hi = 1;
    }
    if (chart.y_min) y_lo = std::max(y_lo, *chart.y_min);
    if (chart.y_max) y_hi = std::min(y_hi, *chart.y_max);
    if (x_hi <= x_lo) x_hi = x_lo + 1;
    if (y_hi <= y_lo) y_hi = y_lo + 1;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    const auto py = [&](double y) { return kTop + (1.0 - (std::clamp(y, y_lo, y_hi) - y_lo) / (y_hi - y_lo)) * plot_h; };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(kWidth) + "\" height=\"" +
           num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\">" + escape(chart.title) + "</text>\n";
    out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(plot_w) + "\" height=\"" +
           num(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";

    for (double t : ticks(x_lo, x_hi)) {
        out += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" + num(px(t)) + "\" y2=\"" +
               num(kTop + plot_h + 5) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + num(px(t)) + "\" y=\"" + num(kTop + plot_h + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + tick_label(t) + "</text>\n";
    }
    for (double t : ticks(y_lo, y_hi)) {
        out += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(kLeft + plot_w) +
               "\" y2=\"" + num(py(t)) + "\" stroke=\"#dddddd\"/>\n";
        out += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py(t) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + tick_label(t) + "</text>\n";
    }
    out += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"" + num(kHeight - 15) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(chart.x_label) +
           "</text>\n";
    out += "<text x=\"18\" y=\"" + num(kTop + plot_h / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\" transform=\"rotate(-90 18 " + num(kTop + plot_h / 2) + ")\">" + escape(chart.y_label) +
           "</text>\n";

    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const Series& s = chart.series[k];
        const std::string color = s.color.empty() ? kPalette[k % kPalette.size()] : s.color;
        const std::string dash = s.dashed ? "\" stroke-dasharray=\"6,3" : "";
        std::string points;
        const auto flush = [&] {
            if (!points.empty()) {
                out += "<polyline fill=\"none\" stroke=\"" + color + dash + "\" stroke-width=\"1.5\" points=\"" +
                       points + "\"/>\n";
                points.clear();
            }
        };
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || !std::isfinite(s.x[i])) {
                flush();
                continue;
            }
            if (!points.empty()) points += ' ';
            points += num(px(s.x[i])) + "," + num(py(s.y[i]));
        }
        flush();
        const double ly = kTop + 12 + 20 * static_cast<double>(k);
        const double lx = kLeft + plot_w + 15;
        out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 22) + "\" y2=\"" + num(ly) +
               "\" stroke=\"" + color + dash + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + num(lx + 28) + "\" y=\"" + num(ly + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(s.label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace mcvd::svg
