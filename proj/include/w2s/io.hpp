// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// CSV tables (comma-separated, '.' decimals, LF line endings, mandatory
// header) and a hand-rolled SVG emitter for scatter and line figures.

#pragma once

#include "w2s/common.hpp"
#include "w2s/mixture.hpp"
#include "w2s/oracle.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace w2s::io {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a named column; throws if absent.
    std::size_t column(std::string_view name) const;
    std::string str() const;
    static CsvTable parse(std::string_view text);
};

/// Points with their prompts: columns x,y,class (class 0 = null).
std::string points_csv(std::span<const Vec2> x, std::span<const Condition> c);
void parse_points_csv(std::string_view text, std::vector<Vec2>& x, std::vector<Condition>& c);

std::string dataset_csv(const Dataset& data);
Dataset parse_dataset_csv(std::string_view text, std::string source_spec_hash = {});

/// Long format: one row per (curve, t).
std::string error_curves_csv(std::span<const ErrorCurve> curves);
std::vector<ErrorCurve> parse_error_curves_csv(std::string_view text);

// --- SVG ---------------------------------------------------------------

/// Fixed 24-entry palette; index wraps.
std::string_view palette_color(std::size_t i);
/// Color of a class label (null -> neutral grey).
std::string_view class_color(int label);

struct Bounds {
    double x_lo = -1.0, x_hi = 1.0, y_lo = -1.0, y_hi = 1.0;

    static Bounds of(std::span<const Vec2> x, double pad_frac = 0.05);
};

/// One plotting area inside a document: data coordinates map to a pixel box.
class SvgPanel {
public:
    SvgPanel(double left, double top, double width, double height, Bounds b);

    void axes(int ticks = 5);
    void title(std::string_view s);
    void x_label(std::string_view s);
    void y_label(std::string_view s);
    void scatter(std::span<const Vec2> x, std::span<const std::string_view> colors, double radius = 1.2,
                 double opacity = 0.6);
    void polyline(std::span<const Vec2> x, std::string_view color, double width = 1.5);
    void legend(std::span<const std::string> labels, std::span<const std::string_view> colors);

    std::string str() const { return body_; }

private:
    double px(double x) const;
    double py(double y) const;

    double left_, top_, width_, height_;
    Bounds b_;
    std::string body_;
};

class SvgDocument {
public:
    SvgDocument(double width, double height) : width_(width), height_(height) {}
    void add(const SvgPanel& p) { body_ += p.str(); }
    std::string str() const;

private:
    double width_, height_;
    std::string body_;
};

struct ScatterPanel {
    std::string title;
    std::vector<Vec2> x;
    std::vector<Condition> c;
};

/// Side-by-side scatter panels on shared bounds, colored by class.
std::string scatter_figure(std::span<const ScatterPanel> panels, const Bounds& bounds, double panel_px = 320.0);

/// Error curves against t, one polyline per curve.
std::string curves_figure(std::span<const ErrorCurve> curves, std::string_view title, bool log_y = true);

}  // namespace w2s::io
