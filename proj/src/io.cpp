// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/io.hpp"

#include "w2s/textio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace w2s::io {

namespace {

// Fixed-precision numbers keep the SVG bytes stable across platforms.
std::string num(double v) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.2f", v);
    return buf.data();
}

std::string escape_xml(std::string_view s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string tick_label(double v) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf.data();
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw std::runtime_error("CSV has no column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

std::string CsvTable::str() const {
    if (header.empty()) {
        throw std::logic_error("CSV header is mandatory");
    }
    auto line = [](const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].find_first_of(",\"\n\r") != std::string::npos) {
                throw std::invalid_argument("CSV cell needs quoting: '" + cells[i] + "'");
            }
            s += (i ? "," : "") + cells[i];
        }
        return s + "\n";
    };
    std::string out = line(header);
    for (const auto& r : rows) {
        if (r.size() != header.size()) {
            throw std::logic_error("CSV row width differs from the header");
        }
        out += line(r);
    }
    return out;
}

CsvTable CsvTable::parse(std::string_view text) {
    CsvTable t;
    std::size_t line_no = 0;
    for (auto raw : text::lines(text)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') {
            raw.remove_suffix(1);
        }
        if (raw.empty()) {
            continue;
        }
        if (raw.find('"') != std::string_view::npos) {
            throw std::runtime_error("quoted CSV cells are not supported (line " + std::to_string(line_no) + ")");
        }
        std::vector<std::string> cells;
        for (auto c : text::split(raw, ',')) {
            cells.emplace_back(text::trim(c));
        }
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size()) {
                throw std::runtime_error("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                         " cells, header has " + std::to_string(t.header.size()));
            }
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) {
        throw std::runtime_error("CSV is empty (header row is mandatory)");
    }
    return t;
}

std::string points_csv(std::span<const Vec2> x, std::span<const Condition> c) {
    if (x.size() != c.size()) {
        throw std::invalid_argument("points_csv: size mismatch");
    }
    std::string out = "x,y,class\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        out += text::fmt(x[i].x()) + ',' + text::fmt(x[i].y()) + ',' + std::to_string(c[i].raw()) + '\n';
    }
    return out;
}

void parse_points_csv(std::string_view text, std::vector<Vec2>& x, std::vector<Condition>& c) {
    const auto t = CsvTable::parse(text);
    const auto ix = t.column("x");
    const auto iy = t.column("y");
    const auto ic = t.column("class");
    x.clear();
    c.clear();
    x.reserve(t.rows.size());
    c.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        x.emplace_back(text::to_double(r[ix]), text::to_double(r[iy]));
        c.push_back(Condition::from_raw(static_cast<int>(text::to_int(r[ic]))));
    }
}

std::string dataset_csv(const Dataset& data) {
    std::string out = "x,y,class\n";
    for (const auto& p : data.points) {
        out += text::fmt(p.x0.x()) + ',' + text::fmt(p.x0.y()) + ',' + std::to_string(p.class_label) + '\n';
    }
    return out;
}

Dataset parse_dataset_csv(std::string_view text, std::string source_spec_hash) {
    std::vector<Vec2> x;
    std::vector<Condition> c;
    parse_points_csv(text, x, c);
    if (x.empty()) {
        throw std::runtime_error("dataset CSV has no points");
    }
    Dataset d;
    d.source_spec_hash = std::move(source_spec_hash);
    d.points.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (c[i].is_null()) {
            throw std::runtime_error("dataset points need a class label >= 1");
        }
        d.points.push_back({x[i], c[i].raw()});
    }
    return d;
}

std::string error_curves_csv(std::span<const ErrorCurve> curves) {
    CsvTable t;
    t.header = {"guidance", "w", "t", "mse", "stderr", "n_states"};
    for (const auto& cv : curves) {
        for (std::size_t j = 0; j < cv.t_grid.size(); ++j) {
            t.rows.push_back({cv.guidance_label, text::fmt(cv.w), text::fmt(cv.t_grid[j]), text::fmt(cv.values[j]),
                              text::fmt(cv.stderr_[j]), std::to_string(cv.n_states)});
        }
    }
    return t.str();
}

std::vector<ErrorCurve> parse_error_curves_csv(std::string_view text) {
    const auto t = CsvTable::parse(text);
    const auto ig = t.column("guidance"), iw = t.column("w"), it = t.column("t"), im = t.column("mse"),
               is = t.column("stderr"), in = t.column("n_states");
    std::vector<ErrorCurve> out;
    for (const auto& r : t.rows) {
        if (out.empty() || out.back().guidance_label != r[ig]) {
            out.emplace_back();
            out.back().guidance_label = r[ig];
            out.back().w = text::to_double(r[iw]);
            out.back().n_states = static_cast<std::size_t>(text::to_int(r[in]));
        }
        out.back().t_grid.push_back(text::to_double(r[it]));
        out.back().values.push_back(text::to_double(r[im]));
        out.back().stderr_.push_back(text::to_double(r[is]));
    }
    return out;
}

// --- SVG ---------------------------------------------------------------

std::string_view palette_color(std::size_t i) {
    static constexpr std::array<std::string_view, 24> kPalette = {
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
        "#e6550d", "#31a354", "#756bb1", "#636363", "#fd8d3c", "#74c476", "#9e9ac8", "#fdd0a2",
    };
    return kPalette[i % kPalette.size()];
}

std::string_view class_color(int label) {
    return label <= 0 ? std::string_view("#555555") : palette_color(static_cast<std::size_t>(label - 1));
}

Bounds Bounds::of(std::span<const Vec2> x, double pad_frac) {
    Bounds b{HUGE_VAL, -HUGE_VAL, HUGE_VAL, -HUGE_VAL};
    for (const auto& p : x) {
        if (!p.allFinite()) {
            continue;
        }
        b.x_lo = std::min(b.x_lo, p.x());
        b.x_hi = std::max(b.x_hi, p.x());
        b.y_lo = std::min(b.y_lo, p.y());
        b.y_hi = std::max(b.y_hi, p.y());
    }
    if (!(b.x_lo <= b.x_hi)) {
        return Bounds{};
    }
    // Square aspect so branch angles are drawn faithfully.
    const double span = std::max({b.x_hi - b.x_lo, b.y_hi - b.y_lo, 1e-9}) * (1.0 + 2.0 * pad_frac);
    const double cx = 0.5 * (b.x_lo + b.x_hi), cy = 0.5 * (b.y_lo + b.y_hi);
    return {cx - span / 2, cx + span / 2, cy - span / 2, cy + span / 2};
}

SvgPanel::SvgPanel(double left, double top, double width, double height, Bounds b)
    : left_(left), top_(top), width_(width), height_(height), b_(b) {
    if (!(b.x_hi > b.x_lo) || !(b.y_hi > b.y_lo)) {
        throw std::invalid_argument("SvgPanel: degenerate bounds");
    }
    body_ += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(width) + "\" height=\"" +
             num(height) + "\" fill=\"white\" stroke=\"#333333\" stroke-width=\"0.8\"/>\n";
}

double SvgPanel::px(double x) const { return left_ + (x - b_.x_lo) / (b_.x_hi - b_.x_lo) * width_; }
double SvgPanel::py(double y) const { return top_ + (b_.y_hi - y) / (b_.y_hi - b_.y_lo) * height_; }

void SvgPanel::axes(int ticks) {
    const double bottom = top_ + height_;
    for (int k = 0; k <= ticks; ++k) {
        const double f = static_cast<double>(k) / ticks;
        const double xv = b_.x_lo + f * (b_.x_hi - b_.x_lo);
        const double yv = b_.y_lo + f * (b_.y_hi - b_.y_lo);
        const double X = px(xv), Y = py(yv);
        body_ += "<line x1=\"" + num(X) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(X) + "\" y2=\"" +
                 num(bottom + 4) + "\" stroke=\"#333333\"/>\n";
        body_ += "<text x=\"" + num(X) + "\" y=\"" + num(bottom + 14) +
                 "\" font-size=\"9\" text-anchor=\"middle\">" + tick_label(xv) + "</text>\n";
        body_ += "<line x1=\"" + num(left_ - 4) + "\" y1=\"" + num(Y) + "\" x2=\"" + num(left_) + "\" y2=\"" + num(Y) +
                 "\" stroke=\"#333333\"/>\n";
        body_ += "<text x=\"" + num(left_ - 6) + "\" y=\"" + num(Y + 3) + "\" font-size=\"9\" text-anchor=\"end\">" +
                 tick_label(yv) + "</text>\n";
    }
}

void SvgPanel::title(std::string_view s) {
    body_ += "<text x=\"" + num(left_ + width_ / 2) + "\" y=\"" + num(top_ - 8) +
             "\" font-size=\"13\" text-anchor=\"middle\">" + escape_xml(s) + "</text>\n";
}

void SvgPanel::x_label(std::string_view s) {
    body_ += "<text x=\"" + num(left_ + width_ / 2) + "\" y=\"" + num(top_ + height_ + 30) +
             "\" font-size=\"11\" text-anchor=\"middle\">" + escape_xml(s) + "</text>\n";
}

void SvgPanel::y_label(std::string_view s) {
    const double x = left_ - 40, y = top_ + height_ / 2;
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 " +
             num(x) + " " + num(y) + ")\">" + escape_xml(s) + "</text>\n";
}

void SvgPanel::scatter(std::span<const Vec2> x, std::span<const std::string_view> colors, double radius,
                       double opacity) {
    if (colors.size() != x.size()) {
        throw std::invalid_argument("scatter: one color per point");
    }
    // Group by color so the markup stays compact.
    std::map<std::string_view, std::string> groups;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& p = x[i];
        if (!p.allFinite() || p.x() < b_.x_lo || p.x() > b_.x_hi || p.y() < b_.y_lo || p.y() > b_.y_hi) {
            continue;
        }
        groups[colors[i]] += "<circle cx=\"" + num(px(p.x())) + "\" cy=\"" + num(py(p.y())) + "\" r=\"" +
                             num(radius) + "\"/>";
    }
    for (const auto& [color, circles] : groups) {
        body_ += "<g fill=\"" + std::string(color) + "\" fill-opacity=\"" + num(opacity) + "\">" + circles + "</g>\n";
    }
}

void SvgPanel::polyline(std::span<const Vec2> x, std::string_view color, double width) {
    std::string pts;
    for (const auto& p : x) {
        if (!p.allFinite()) {
            continue;
        }
        pts += (pts.empty() ? "" : " ") + num(px(p.x())) + "," + num(py(p.y()));
    }
    body_ += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"" + num(width) +
             "\" points=\"" + pts + "\"/>\n";
}

void SvgPanel::legend(std::span<const std::string> labels, std::span<const std::string_view> colors) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double y = top_ + 14 + 14 * static_cast<double>(i);
        const double x = left_ + width_ - 150;
        body_ += "<line x1=\"" + num(x) + "\" y1=\"" + num(y - 4) + "\" x2=\"" + num(x + 18) + "\" y2=\"" +
                 num(y - 4) + "\" stroke=\"" + std::string(colors[i]) + "\" stroke-width=\"2\"/>\n";
        body_ += "<text x=\"" + num(x + 22) + "\" y=\"" + num(y) + "\" font-size=\"10\">" + escape_xml(labels[i]) +
                 "</text>\n";
    }
}

std::string SvgDocument::str() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           num(width_) + "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) +
           "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ +
           "</svg>\n";
}

std::string scatter_figure(std::span<const ScatterPanel> panels, const Bounds& bounds, double panel_px) {
    constexpr double kMargin = 50.0, kGap = 40.0, kTop = 36.0;
    const double width = 2 * kMargin + static_cast<double>(panels.size()) * panel_px +
                         static_cast<double>(panels.size() > 0 ? panels.size() - 1 : 0) * kGap;
    SvgDocument doc(width, kTop + panel_px + 40.0);
    for (std::size_t k = 0; k < panels.size(); ++k) {
        const auto& p = panels[k];
        SvgPanel panel(kMargin + static_cast<double>(k) * (panel_px + kGap), kTop, panel_px, panel_px, bounds);
        std::vector<std::string_view> colors;
        colors.reserve(p.c.size());
        for (const auto& c : p.c) {
            colors.push_back(class_color(c.raw()));
        }
        panel.scatter(p.x, colors);
        panel.axes();
        panel.title(p.title);
        doc.add(panel);
    }
    return doc.str();
}

std::string curves_figure(std::span<const ErrorCurve> curves, std::string_view title, bool log_y) {
    auto yv = [&](double v) { return log_y ? std::log10(std::max(v, 1e-12)) : v; };
    std::vector<Vec2> all;
    for (const auto& cv : curves) {
        for (std::size_t j = 0; j < cv.t_grid.size(); ++j) {
            all.emplace_back(cv.t_grid[j], yv(cv.values[j]));
        }
    }
    Bounds b{0.0, 1.0, -1.0, 1.0};
    if (!all.empty()) {
        double lo = HUGE_VAL, hi = -HUGE_VAL;
        for (const auto& p : all) {
            lo = std::min(lo, p.y());
            hi = std::max(hi, p.y());
        }
        const double pad = std::max(0.05 * (hi - lo), 1e-6);
        b.y_lo = lo - pad;
        b.y_hi = hi + pad;
    }
    SvgDocument doc(560.0, 400.0);
    SvgPanel panel(70.0, 36.0, 460.0, 310.0, b);
    std::vector<std::string> labels;
    std::vector<std::string_view> colors;
    for (std::size_t k = 0; k < curves.size(); ++k) {
        std::vector<Vec2> pts;
        for (std::size_t j = 0; j < curves[k].t_grid.size(); ++j) {
            pts.emplace_back(curves[k].t_grid[j], yv(curves[k].values[j]));
        }
        panel.polyline(pts, palette_color(k));
        labels.push_back(curves[k].guidance_label);
        colors.push_back(palette_color(k));
    }
    panel.axes();
    panel.title(title);
    panel.x_label("t");
    panel.y_label(log_y ? "log10 MSE to oracle" : "MSE to oracle");
    panel.legend(labels, colors);
    doc.add(panel);
    return doc.str();
}

}  // namespace w2s::io
