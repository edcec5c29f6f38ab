#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "boxlab/box.hpp"
#include "boxlab/errors.hpp"
#include "boxlab/table.hpp"

namespace boxlab {

struct RenderSpec {
    int width = 800;
    int height = 600;
    double score_min = 0.0;  // equal bounds mean: derive the range from the scores
    double score_max = 0.0;
    double stroke_width = 1.0;
    bool labels = false;

    void validate() const {
        if (width <= 0 || height <= 0) throw input_error("canvas must be positive");
        if (!std::isfinite(score_min) || !std::isfinite(score_max))
            throw input_error("score range must be finite");
        if (score_max < score_min) throw input_error("score range is inverted");
        if (stroke_width < 0.0) throw input_error("stroke width must be non-negative");
    }
};

namespace detail {

/// Diverging red-white-blue ramp (low scores red, high blue) anchored at the
/// midpoint of the score range.
inline std::array<int, 3> diverging_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const std::array<double, 3> low = {178.0, 24.0, 43.0};
    const std::array<double, 3> mid = {247.0, 247.0, 247.0};
    const std::array<double, 3> high = {33.0, 102.0, 172.0};
    std::array<int, 3> out{};
    for (int c = 0; c < 3; ++c) {
        double v = t < 0.5 ? low[c] + (mid[c] - low[c]) * (2.0 * t)
                           : mid[c] + (high[c] - mid[c]) * (2.0 * t - 1.0);
        out[c] = static_cast<int>(std::lround(v));
    }
    return out;
}

inline std::string hex_color(const std::array<int, 3>& rgb) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

inline std::string svg_num(double v) {
    if (!std::isfinite(v)) throw input_error("non-finite coordinate in render");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string xml_escape(const std::string& text) {
    std::string out;
    for (char c : text) {
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

}  // namespace detail

/// Draw a 2D box table as score-colored rectangles. Large boxes go down
/// first so nested detail stays visible, unscored boxes render neutral gray,
/// and a fixed legend maps the color ramp back to scores. Output bytes are a
/// pure function of the inputs.
inline void render_svg(const BoxTable& table, const ScoreTable& scores, const RenderSpec& spec,
                       const std::string& path) {
    spec.validate();
    if (table.dim() != 2 && !table.empty())
        throw input_error("render requires 2D boxes, got dimension " +
                          std::to_string(table.dim()));

    double lo = spec.score_min, hi = spec.score_max;
    if (lo == hi) {
        bool any = false;
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (!scores.has(table.id(i))) continue;
            double s = scores.at(table.id(i));
            lo = any ? std::min(lo, s) : s;
            hi = any ? std::max(hi, s) : s;
            any = true;
        }
        if (!any) {
            lo = 0.0;
            hi = 1.0;
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }

    double wx0 = 0.0, wy0 = 0.0, wx1 = 1.0, wy1 = 1.0;
    if (!table.empty()) {
        wx0 = wy0 = std::numeric_limits<double>::infinity();
        wx1 = wy1 = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < table.size(); ++i) {
            const BoxEmbed& box = table.box(i);
            wx0 = std::min(wx0, box.lower(0));
            wy0 = std::min(wy0, box.lower(1));
            wx1 = std::max(wx1, box.upper(0));
            wy1 = std::max(wy1, box.upper(1));
        }
    }

    const double margin = 12.0;
    const double legend_width = 72.0;
    const double plot_w = std::max(1.0, spec.width - 2.0 * margin - legend_width);
    const double plot_h = std::max(1.0, spec.height - 2.0 * margin);
    // One shared scale for both axes keeps relative areas honest.
    const double scale = std::min(plot_w / (wx1 - wx0), plot_h / (wy1 - wy0));
    const double offset_x = margin + (plot_w - (wx1 - wx0) * scale) / 2.0;
    const double offset_y = margin + (plot_h - (wy1 - wy0) * scale) / 2.0;
    auto px = [&](double x) { return offset_x + (x - wx0) * scale; };
    auto py = [&](double y) { return offset_y + (wy1 - y) * scale; };

    std::vector<std::size_t> order(table.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double va = hard_volume(table.box(a));
        double vb = hard_volume(table.box(b));
        if (va != vb) return va > vb;
        return table.id(a) < table.id(b);
    });

    std::string body;
    body += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
            "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
            std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
    body += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
            std::to_string(spec.height) + "\" fill=\"#ffffff\"/>\n";

    for (std::size_t i : order) {
        const BoxEmbed& box = table.box(i);
        const std::string& id = table.id(i);
        std::string fill = "#969696";
        if (scores.has(id)) {
            double t = (scores.at(id) - lo) / (hi - lo);
            fill = detail::hex_color(detail::diverging_color(t));
        }
        body += "<rect x=\"" + detail::svg_num(px(box.lower(0))) + "\" y=\"" +
                detail::svg_num(py(box.upper(1))) + "\" width=\"" +
                detail::svg_num((box.upper(0) - box.lower(0)) * scale) + "\" height=\"" +
                detail::svg_num((box.upper(1) - box.lower(1)) * scale) + "\" fill=\"" + fill +
                "\" fill-opacity=\"0.85\" stroke=\"#333333\" stroke-width=\"" +
                detail::svg_num(spec.stroke_width) + "\"/>\n";
        if (spec.labels) {
            body += "<text x=\"" + detail::svg_num(px(box.center()[0])) + "\" y=\"" +
                    detail::svg_num(py(box.center()[1])) +
                    "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"middle\">" +
                    detail::xml_escape(id) + "</text>\n";
        }
    }

    const double legend_x = spec.width - margin - legend_width + 16.0;
    const double legend_top = margin + 16.0;
    const double legend_h = std::max(60.0, plot_h * 0.5);
    const int swatches = 10;
    body += "<text x=\"" + detail::svg_num(legend_x) + "\" y=\"" +
            detail::svg_num(legend_top - 6.0) +
            "\" font-size=\"11\" font-family=\"sans-serif\">score</text>\n";
    for (int s = 0; s < swatches; ++s) {
        // Top swatch carries the highest score.
        double t = 1.0 - (s + 0.5) / swatches;
        body += "<rect x=\"" + detail::svg_num(legend_x) + "\" y=\"" +
                detail::svg_num(legend_top + legend_h * s / swatches) + "\" width=\"14\" height=\"" +
                detail::svg_num(legend_h / swatches) + "\" fill=\"" +
                detail::hex_color(detail::diverging_color(t)) + "\"/>\n";
    }
    const std::array<std::pair<double, double>, 3> ticks = {
        {{hi, legend_top}, {(lo + hi) / 2.0, legend_top + legend_h / 2.0},
         {lo, legend_top + legend_h}}};
    for (const auto& [value, y] : ticks) {
        body += "<text x=\"" + detail::svg_num(legend_x + 18.0) + "\" y=\"" +
                detail::svg_num(y + 4.0) + "\" font-size=\"10\" font-family=\"sans-serif\">" +
                detail::svg_num(value) + "</text>\n";
    }
    body += "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write " + path);
    out << body;
    if (!out) throw input_error("cannot write " + path);
}

}  // namespace boxlab
