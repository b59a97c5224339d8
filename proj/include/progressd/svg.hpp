// Progress-curve emission: self-contained SVG (ground-truth line plus one
// polyline per prediction series) and the matching raw-series CSV.
#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "progressd/common.hpp"

namespace progressd::plot {

struct Series {
    std::string name;           // legend label
    std::vector<double> values; // one prediction per labeled frame
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline void validate_series(const std::vector<double>& truth,
                            const std::vector<Series>& series) {
    check(!truth.empty(), "plot: empty ground-truth series");
    check(all_finite(truth), "plot: non-finite ground-truth value");
    for (const auto& s : series) {
        check(s.values.size() == truth.size(), "plot: series '", s.name,
              "' has ", s.values.size(), " points, ground truth has ",
              truth.size());
        check(all_finite(s.values), "plot: non-finite value in series '", s.name,
              "'");
    }
}

// CSV of the raw values: header frame,truth[,<name>...], one row per frame.
inline std::string series_csv(const std::vector<double>& truth,
                              const std::vector<Series>& series) {
    validate_series(truth, series);
    std::string out = "frame,truth";
    for (const auto& s : series) {
        std::string name = s.name;
        for (char& c : name)
            if (c == ',' || c == '\n' || c == '\r') c = '_';
        out += "," + name;
    }
    out += "\n";
    for (std::size_t i = 0; i < truth.size(); ++i) {
        out += std::to_string(i) + "," + detail::fmt17(truth[i]);
        for (const auto& s : series) out += "," + detail::fmt17(s.values[i]);
        out += "\n";
    }
    return out;
}

// Self-contained SVG progress chart. The ground truth is drawn with the same
// point formatting as the prediction polylines, so a perfect predictor's
// curve is coordinate-identical to the truth line.
inline std::string progress_svg(const std::string& title,
                                const std::vector<double>& truth,
                                const std::vector<Series>& series) {
    validate_series(truth, series);
    const double width = 720, height = 480;
    const double left = 64, right = 700, top = 48, bottom = 432;
    const auto n = truth.size();

    auto x_of = [&](std::size_t i) {
        if (n == 1) return (left + right) / 2.0;
        return left + (right - left) * static_cast<double>(i) /
                          static_cast<double>(n - 1);
    };
    auto y_of = [&](double p) { return bottom - (bottom - top) * p; };
    auto points = [&](const std::vector<double>& values) {
        std::string pts;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) pts += " ";
            pts += detail::fmt(x_of(i)) + "," + detail::fmt(y_of(values[i]));
        }
        return pts;
    };

    static const std::array<const char*, 6> palette = {
        "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           detail::fmt(width) + "\" height=\"" + detail::fmt(height) +
           "\" viewBox=\"0 0 " + detail::fmt(width) + " " + detail::fmt(height) +
           "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + detail::fmt(width) +
           "\" height=\"" + detail::fmt(height) + "\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::fmt((left + right) / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">" +
           detail::xml_escape(title) + "</text>\n";

    // axes and progress grid lines every 25%
    svg += "<g stroke=\"#cccccc\" stroke-width=\"1\">\n";
    for (int tick = 0; tick <= 4; ++tick) {
        double y = y_of(tick / 4.0);
        svg += "<line x1=\"" + detail::fmt(left) + "\" y1=\"" + detail::fmt(y) +
               "\" x2=\"" + detail::fmt(right) + "\" y2=\"" + detail::fmt(y) +
               "\"/>\n";
    }
    svg += "</g>\n";
    svg += "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
    for (int tick = 0; tick <= 4; ++tick) {
        double p = tick / 4.0;
        svg += "<text x=\"" + detail::fmt(left - 8) + "\" y=\"" +
               detail::fmt(y_of(p) + 4) + "\" text-anchor=\"end\">" +
               detail::fmt(p) + "</text>\n";
    }
    svg += "<text x=\"" + detail::fmt(left - 8) + "\" y=\"" +
           detail::fmt((top + bottom) / 2) +
           "\" text-anchor=\"end\" transform=\"rotate(-90 " +
           detail::fmt(left - 40) + " " + detail::fmt((top + bottom) / 2) +
           ")\">progress</text>\n";
    svg += "<text x=\"" + detail::fmt((left + right) / 2) + "\" y=\"" +
           detail::fmt(bottom + 32) + "\" text-anchor=\"middle\">frame (0.." +
           std::to_string(n - 1) + ")</text>\n";
    svg += "</g>\n";
    svg += "<line x1=\"" + detail::fmt(left) + "\" y1=\"" + detail::fmt(top) +
           "\" x2=\"" + detail::fmt(left) + "\" y2=\"" + detail::fmt(bottom) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "<line x1=\"" + detail::fmt(left) + "\" y1=\"" + detail::fmt(bottom) +
           "\" x2=\"" + detail::fmt(right) + "\" y2=\"" + detail::fmt(bottom) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

    // ground truth first, predictions on top
    svg += "<polyline class=\"truth\" fill=\"none\" stroke=\"#555555\" "
           "stroke-width=\"2\" stroke-dasharray=\"6 4\" points=\"" +
           points(truth) + "\"/>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        svg += std::string("<polyline class=\"series\" fill=\"none\" stroke=\"") +
               palette[s % palette.size()] + "\" stroke-width=\"2\" points=\"" +
               points(series[s].values) + "\"/>\n";
    }

    // legend
    double ly = top + 8;
    svg += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<line x1=\"" + detail::fmt(left + 12) + "\" y1=\"" +
           detail::fmt(ly) + "\" x2=\"" + detail::fmt(left + 44) + "\" y2=\"" +
           detail::fmt(ly) +
           "\" stroke=\"#555555\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>\n";
    svg += "<text x=\"" + detail::fmt(left + 50) + "\" y=\"" +
           detail::fmt(ly + 4) + "\">ground truth</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        ly += 18;
        svg += std::string("<line x1=\"") + detail::fmt(left + 12) + "\" y1=\"" +
               detail::fmt(ly) + "\" x2=\"" + detail::fmt(left + 44) +
               "\" y2=\"" + detail::fmt(ly) + "\" stroke=\"" +
               palette[s % palette.size()] + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::fmt(left + 50) + "\" y=\"" +
               detail::fmt(ly + 4) + "\">" + detail::xml_escape(series[s].name) +
               "</text>\n";
    }
    svg += "</g>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace progressd::plot
