#pragma once

// Static SVG plots: CDF line charts and grouped bar charts. Output depends only
// on the inputs (fixed-precision coordinates, no timestamps).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fedmeta/csv.hpp"
#include "fedmeta/error.hpp"

namespace fedmeta::svg {

struct XY {
    double x = 0.0;
    double y = 0.0;
};

struct LineSeries {
    std::string name;
    std::vector<XY> points;
};

/// One group per metric; `values[a]` is algorithm a's bar in that group.
struct BarGroup {
    std::string metric;
    std::vector<double> values;
};

struct BarChart {
    std::vector<std::string> series_names;
    std::vector<BarGroup> groups;
};

namespace detail {

inline constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
inline constexpr double width = 640, height = 420, left = 70, right = 170, top = 40, bottom = 60;

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

inline void header(std::ostringstream& os, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << num(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n";
}

inline void axes(std::ostringstream& os, const std::string& xlabel, const std::string& ylabel) {
    const double x1 = width - right, y1 = height - bottom;
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y1)
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\"" << num(y1)
       << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << num((left + x1) / 2) << "\" y=\"" << num(height - 15) << "\" text-anchor=\"middle\">"
       << escape(xlabel) << "</text>\n"
       << "<text x=\"18\" y=\"" << num((top + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << num((top + y1) / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

inline void legend(std::ostringstream& os, std::span<const std::string> names) {
    const double x = width - right + 15;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = top + 10 + 20 * static_cast<double>(i);
        os << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 9) << "\" width=\"12\" height=\"12\" fill=\""
           << palette[i % std::size(palette)] << "\"/>\n"
           << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y + 2) << "\">" << escape(names[i]) << "</text>\n";
    }
}

inline void y_ticks(std::ostringstream& os, double lo, double hi) {
    const double y1 = height - bottom;
    for (int t = 0; t <= 4; ++t) {
        const double f = t / 4.0;
        const double y = y1 - f * (y1 - top);
        os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
           << label(lo + f * (hi - lo)) << "</text>\n";
    }
}

} // namespace detail

/// Step-free line chart, one polyline per series. With `log_x`, x values are
/// plotted on a log10 axis (non-positive values are clamped to the smallest
/// positive value present).
inline std::string cdf_lines(std::span<const LineSeries> series, const std::string& title, const std::string& xlabel,
                             bool log_x = false) {
    using namespace detail;
    require(!series.empty(), errc::empty_input, "plot without series");
    double min_pos = INFINITY;
    for (const auto& s : series)
        for (const auto& p : s.points)
            if (p.x > 0.0) min_pos = std::min(min_pos, p.x);
    auto tx = [&](double x) { return log_x ? std::log10(std::max(x, std::isfinite(min_pos) ? min_pos : 1.0)) : x; };

    double xlo = INFINITY, xhi = -INFINITY;
    for (const auto& s : series)
        for (const auto& p : s.points) {
            xlo = std::min(xlo, tx(p.x));
            xhi = std::max(xhi, tx(p.x));
        }
    if (!std::isfinite(xlo)) xlo = 0.0, xhi = 1.0;
    if (xhi <= xlo) xhi = xlo + 1.0;

    std::ostringstream os;
    header(os, title);
    axes(os, log_x ? "log10 " + xlabel : xlabel, "fraction of trials");
    y_ticks(os, 0.0, 1.0);
    const double x1 = width - right, y1 = height - bottom;
    for (int t = 0; t <= 4; ++t) {
        const double f = t / 4.0;
        os << "<text x=\"" << num(left + f * (x1 - left)) << "\" y=\"" << num(y1 + 16) << "\" text-anchor=\"middle\">"
           << label(xlo + f * (xhi - xlo)) << "</text>\n";
    }
    std::vector<std::string> names;
    for (std::size_t i = 0; i < series.size(); ++i) {
        names.push_back(series[i].name);
        os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << palette[i % std::size(palette)]
           << "\" points=\"";
        for (std::size_t j = 0; j < series[i].points.size(); ++j) {
            const auto& p = series[i].points[j];
            const double px = left + (tx(p.x) - xlo) / (xhi - xlo) * (x1 - left);
            const double py = y1 - std::clamp(p.y, 0.0, 1.0) * (y1 - top);
            os << (j ? " " : "") << num(px) << ',' << num(py);
        }
        os << "\"/>\n";
    }
    legend(os, names);
    os << "</svg>\n";
    return os.str();
}

/// Bars grouped by metric. Each group is scaled to its own maximum so metrics
/// with different units share one chart; the raw value is printed on each bar.
inline std::string grouped_bars(const BarChart& chart, const std::string& title) {
    using namespace detail;
    require(!chart.groups.empty() && !chart.series_names.empty(), errc::empty_input, "bar chart without data");
    for (const auto& g : chart.groups)
        require(g.values.size() == chart.series_names.size(), errc::shape_mismatch,
                "bar group '" + g.metric + "' has the wrong number of values");

    std::ostringstream os;
    header(os, title);
    axes(os, "", "relative to group maximum");
    y_ticks(os, 0.0, 1.0);
    const double x1 = width - right, y1 = height - bottom;
    const double group_w = (x1 - left) / static_cast<double>(chart.groups.size());
    const double bar_w = 0.8 * group_w / static_cast<double>(chart.series_names.size());
    for (std::size_t g = 0; g < chart.groups.size(); ++g) {
        const auto& grp = chart.groups[g];
        double top_value = 0.0;
        for (double v : grp.values) top_value = std::max(top_value, v);
        const double gx = left + group_w * static_cast<double>(g) + 0.1 * group_w;
        for (std::size_t a = 0; a < grp.values.size(); ++a) {
            const double frac = top_value > 0.0 ? std::max(grp.values[a], 0.0) / top_value : 0.0;
            const double h = frac * (y1 - top);
            const double x = gx + bar_w * static_cast<double>(a);
            os << "<rect x=\"" << num(x) << "\" y=\"" << num(y1 - h) << "\" width=\"" << num(bar_w * 0.9)
               << "\" height=\"" << num(h) << "\" fill=\"" << palette[a % std::size(palette)] << "\"><title>"
               << escape(chart.series_names[a]) << ": " << label(grp.values[a]) << "</title></rect>\n"
               << "<text x=\"" << num(x + bar_w * 0.45) << "\" y=\"" << num(y1 - h - 3)
               << "\" text-anchor=\"middle\" font-size=\"9\">" << label(grp.values[a]) << "</text>\n";
        }
        os << "<text x=\"" << num(left + group_w * (static_cast<double>(g) + 0.5)) << "\" y=\"" << num(y1 + 16)
           << "\" text-anchor=\"middle\">" << escape(grp.metric) << "</text>\n";
    }
    legend(os, chart.series_names);
    os << "</svg>\n";
    return os.str();
}

inline void write_svg(const std::filesystem::path& path, const std::string& svg_text) { write_text_file(path, svg_text); }

} // namespace fedmeta::svg
