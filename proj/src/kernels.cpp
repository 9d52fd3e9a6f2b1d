// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/kernels.hpp"

#include "w2s/mixture.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace w2s::kernels {

int PackedMixture::begin(int raw) const { return raw == 0 ? class_begin[0] : class_begin[static_cast<std::size_t>(raw)]; }
int PackedMixture::end(int raw) const {
    return raw == 0 ? class_begin[static_cast<std::size_t>(num_classes) + 1]
                    : class_begin[static_cast<std::size_t>(raw) + 1];
}
double PackedMixture::log_prior(int raw) const { return raw == 0 ? -std::log(static_cast<double>(num_selected)) : 0.0; }

int PackedPoints::begin(int raw) const { return raw == 0 ? class_begin[0] : class_begin[static_cast<std::size_t>(raw)]; }
int PackedPoints::end(int raw) const {
    return raw == 0 ? class_begin[static_cast<std::size_t>(num_classes) + 1]
                    : class_begin[static_cast<std::size_t>(raw) + 1];
}

PackedMixture pack(const MixtureSpec& spec, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::domain_error("pack: t must lie in [0, 1]");
    }
    PackedMixture m;
    m.t = t;
    m.num_classes = spec.num_classes();
    m.num_selected = static_cast<int>(spec.selected_classes().size());
    m.class_begin.assign(static_cast<std::size_t>(m.num_classes) + 2, 0);
    const double a = 1.0 - t;
    int cursor = 0;
    for (int c = 1; c <= m.num_classes; ++c) {
        m.class_begin[static_cast<std::size_t>(c)] = cursor;
        if (!spec.is_selected(c)) {
            continue;
        }
        for (int i : spec.class_components(c)) {
            const auto& g = spec.components()[static_cast<std::size_t>(i)];
            const Mat2 cov = a * a * g.cov + t * t * Mat2::Identity();
            const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
            const double pxx = cov(1, 1) / det;
            const double pxy = -cov(0, 1) / det;
            const double pyy = cov(0, 0) / det;
            Mat2 prec;
            prec << pxx, pxy, pxy, pyy;
            const Mat2 gain = a * g.cov * prec;
            m.mean_x.push_back(a * g.mean.x());
            m.mean_y.push_back(a * g.mean.y());
            m.prec_xx.push_back(pxx);
            m.prec_xy.push_back(pxy);
            m.prec_yy.push_back(pyy);
            m.log_norm.push_back(-kLog2Pi - 0.5 * std::log(det));
            m.log_pi.push_back(std::log(spec.class_weight(i)));
            m.gain_xx.push_back(gain(0, 0));
            m.gain_xy.push_back(gain(0, 1));
            m.gain_yx.push_back(gain(1, 0));
            m.gain_yy.push_back(gain(1, 1));
            m.mu_x.push_back(g.mean.x());
            m.mu_y.push_back(g.mean.y());
            m.source_index.push_back(i);
            m.label.push_back(c);
            ++cursor;
        }
    }
    m.class_begin[static_cast<std::size_t>(m.num_classes) + 1] = cursor;
    return m;
}

PackedPoints pack_points(std::span<const Vec2> points, std::span<const int> labels, int num_classes) {
    if (points.size() != labels.size()) {
        throw std::invalid_argument("pack_points: size mismatch");
    }
    PackedPoints p;
    p.num_classes = num_classes;
    std::vector<int> counts(static_cast<std::size_t>(num_classes) + 1, 0);
    for (int l : labels) {
        if (l < 0 || l > num_classes) {
            throw std::invalid_argument("pack_points: label " + std::to_string(l) + " out of range");
        }
        ++counts[static_cast<std::size_t>(l)];
    }
    p.class_begin.assign(static_cast<std::size_t>(num_classes) + 2, 0);
    for (int c = 0; c <= num_classes; ++c) {
        p.class_begin[static_cast<std::size_t>(c) + 1] =
            p.class_begin[static_cast<std::size_t>(c)] + counts[static_cast<std::size_t>(c)];
    }
    p.x.resize(points.size());
    p.y.resize(points.size());
    std::vector<int> fill(p.class_begin.begin(), p.class_begin.end() - 1);
    for (std::size_t k = 0; k < points.size(); ++k) {
        const auto slot = static_cast<std::size_t>(fill[static_cast<std::size_t>(labels[k])]++);
        p.x[slot] = points[k].x();
        p.y[slot] = points[k].y();
    }
    return p;
}

namespace {

inline double component_log_pdf(const PackedMixture& m, std::size_t i, double x, double y) {
    const double dx = x - m.mean_x[i];
    const double dy = y - m.mean_y[i];
    const double q = m.prec_xx[i] * dx * dx + 2.0 * m.prec_xy[i] * dx * dy + m.prec_yy[i] * dy * dy;
    return m.log_norm[i] - 0.5 * q;
}

inline double log_density_one(const PackedMixture& m, const Vec2& x, int raw) {
    const auto b = static_cast<std::size_t>(m.begin(raw));
    const auto e = static_cast<std::size_t>(m.end(raw));
    double mx = -HUGE_VAL;
    for (std::size_t i = b; i < e; ++i) {
        mx = std::max(mx, m.log_pi[i] + component_log_pdf(m, i, x.x(), x.y()));
    }
    if (!std::isfinite(mx)) {
        return mx;
    }
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) {
        s += std::exp(m.log_pi[i] + component_log_pdf(m, i, x.x(), x.y()) - mx);
    }
    return m.log_prior(raw) + mx + std::log(s);
}

inline Vec2 posterior_mean_one(const PackedMixture& m, const Vec2& x, int raw, double* weights) {
    const auto b = static_cast<std::size_t>(m.begin(raw));
    const auto e = static_cast<std::size_t>(m.end(raw));
    double mx = -HUGE_VAL;
    for (std::size_t i = b; i < e; ++i) {
        mx = std::max(mx, m.log_pi[i] + component_log_pdf(m, i, x.x(), x.y()));
    }
    double s = 0.0;
    double ex = 0.0;
    double ey = 0.0;
    for (std::size_t i = b; i < e; ++i) {
        const double w = std::exp(m.log_pi[i] + component_log_pdf(m, i, x.x(), x.y()) - mx);
        const double rx = x.x() - m.mean_x[i];
        const double ry = x.y() - m.mean_y[i];
        const double px = m.mu_x[i] + m.gain_xx[i] * rx + m.gain_xy[i] * ry;
        const double py = m.mu_y[i] + m.gain_yx[i] * rx + m.gain_yy[i] * ry;
        s += w;
        ex += w * px;
        ey += w * py;
        if (weights != nullptr) {
            weights[i - b] = w;
        }
    }
    if (weights != nullptr) {
        for (std::size_t i = b; i < e; ++i) {
            weights[i - b] /= s;
        }
    }
    return {ex / s, ey / s};
}

inline Vec2 mixture_velocity_one(const PackedMixture& m, const Vec2& x, int raw) {
    const Vec2 e = posterior_mean_one(m, x, raw, nullptr);
    return (x - e) / m.t;
}

inline Vec2 empirical_velocity_one(const PackedPoints& p, double t, const Vec2& x, int raw) {
    const auto b = static_cast<std::size_t>(p.begin(raw));
    const auto e = static_cast<std::size_t>(p.end(raw));
    const double a = 1.0 - t;
    const double inv = 1.0 / (2.0 * t * t);
    double mx = -HUGE_VAL;
    for (std::size_t i = b; i < e; ++i) {
        const double dx = x.x() - a * p.x[i];
        const double dy = x.y() - a * p.y[i];
        mx = std::max(mx, -(dx * dx + dy * dy) * inv);
    }
    double s = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    for (std::size_t i = b; i < e; ++i) {
        const double dx = x.x() - a * p.x[i];
        const double dy = x.y() - a * p.y[i];
        const double w = std::exp(-(dx * dx + dy * dy) * inv - mx);
        s += w;
        vx += w * (x.x() - p.x[i]);
        vy += w * (x.y() - p.y[i]);
    }
    return {vx / (t * s), vy / (t * s)};
}

inline std::uint8_t coverage_one(const PackedMixture& m, const PackedPoints& s, double r2, std::size_t i) {
    const int label = m.label[i];
    auto scan = [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            const double dx = s.x[k] - m.mean_x[i];
            const double dy = s.y[k] - m.mean_y[i];
            const double q = m.prec_xx[i] * dx * dx + 2.0 * m.prec_xy[i] * dx * dy + m.prec_yy[i] * dy * dy;
            if (q <= r2) {
                return true;
            }
        }
        return false;
    };
    const bool hit = scan(static_cast<std::size_t>(s.class_begin[0]), static_cast<std::size_t>(s.class_begin[1])) ||
                     (label <= s.num_classes && scan(static_cast<std::size_t>(s.class_begin[static_cast<std::size_t>(label)]),
                                                     static_cast<std::size_t>(s.class_begin[static_cast<std::size_t>(label) + 1])));
    return hit ? 1 : 0;
}

void check_sizes(std::size_t n, std::size_t cond, std::size_t out) {
    if (cond != n || out != n) {
        throw std::invalid_argument("kernel: input/output size mismatch");
    }
}

void check_mixture_conditions(const PackedMixture& m, std::span<const int> cond, bool need_positive_t) {
    if (need_positive_t && !(m.t > 0.0)) {
        throw std::domain_error("mixture velocity needs t > 0");
    }
    for (int c : cond) {
        if (c < 0 || c > m.num_classes || m.begin(c) == m.end(c)) {
            throw std::invalid_argument("condition " + std::to_string(c) + " has no mixture components");
        }
    }
}

void check_point_conditions(const PackedPoints& p, double t, std::span<const int> cond) {
    if (!(t > 0.0) || !(t <= 1.0)) {
        throw std::domain_error("empirical velocity needs t in (0, 1]");
    }
    for (int c : cond) {
        if (c < 0 || c > p.num_classes || p.begin(c) == p.end(c)) {
            throw std::invalid_argument("empirical oracle: class " + std::to_string(c) + " has no data points");
        }
    }
}

}  // namespace

Vec2 mixture_posterior(const PackedMixture& m, const Vec2& x, int raw, std::span<double> weights) {
    check_mixture_conditions(m, std::span<const int>(&raw, 1), false);
    if (weights.size() != static_cast<std::size_t>(m.end(raw) - m.begin(raw))) {
        throw std::invalid_argument("mixture_posterior: weight buffer has the wrong length");
    }
    return posterior_mean_one(m, x, raw, weights.data());
}

namespace serial {

void mixture_velocity(const PackedMixture& m, std::span<const Vec2> x, std::span<const int> cond, std::span<Vec2> out) {
    check_sizes(x.size(), cond.size(), out.size());
    check_mixture_conditions(m, cond, true);
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = mixture_velocity_one(m, x[k], cond[k]);
    }
}

void mixture_log_density(const PackedMixture& m, std::span<const Vec2> x, std::span<const int> cond,
                         std::span<double> out) {
    check_sizes(x.size(), cond.size(), out.size());
    check_mixture_conditions(m, cond, false);
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = log_density_one(m, x[k], cond[k]);
    }
}

void empirical_velocity(const PackedPoints& p, double t, std::span<const Vec2> x, std::span<const int> cond,
                        std::span<Vec2> out) {
    check_sizes(x.size(), cond.size(), out.size());
    check_point_conditions(p, t, cond);
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = empirical_velocity_one(p, t, x[k], cond[k]);
    }
}

void coverage_hits(const PackedMixture& m, const PackedPoints& samples, double radius, std::span<std::uint8_t> hit) {
    if (hit.size() != m.size() || m.t != 0.0) {
        throw std::invalid_argument("coverage_hits: needs a t=0 mixture and one slot per component");
    }
    const double r2 = radius * radius;
    for (std::size_t i = 0; i < m.size(); ++i) {
        hit[i] = coverage_one(m, samples, r2, i);
    }
}

}  // namespace serial

namespace parallel {

void mixture_velocity(const PackedMixture& m, std::span<const Vec2> x, std::span<const int> cond, std::span<Vec2> out) {
    check_sizes(x.size(), cond.size(), out.size());
    check_mixture_conditions(m, cond, true);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        out[static_cast<std::size_t>(k)] = mixture_velocity_one(m, x[static_cast<std::size_t>(k)], cond[static_cast<std::size_t>(k)]);
    }
}

void mixture_log_density(const PackedMixture& m, std::span<const Vec2> x, std::span<const int> cond,
                         std::span<double> out) {
    check_sizes(x.size(), cond.size(), out.size());
    check_mixture_conditions(m, cond, false);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        out[static_cast<std::size_t>(k)] = log_density_one(m, x[static_cast<std::size_t>(k)], cond[static_cast<std::size_t>(k)]);
    }
}

void empirical_velocity(const PackedPoints& p, double t, std::span<const Vec2> x, std::span<const int> cond,
                        std::span<Vec2> out) {
    check_sizes(x.size(), cond.size(), out.size());
    check_point_conditions(p, t, cond);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        out[static_cast<std::size_t>(k)] =
            empirical_velocity_one(p, t, x[static_cast<std::size_t>(k)], cond[static_cast<std::size_t>(k)]);
    }
}

void coverage_hits(const PackedMixture& m, const PackedPoints& samples, double radius, std::span<std::uint8_t> hit) {
    if (hit.size() != m.size() || m.t != 0.0) {
        throw std::invalid_argument("coverage_hits: needs a t=0 mixture and one slot per component");
    }
    const double r2 = radius * radius;
    const auto n = static_cast<std::ptrdiff_t>(m.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        hit[static_cast<std::size_t>(i)] = coverage_one(m, samples, r2, static_cast<std::size_t>(i));
    }
}

}  // namespace parallel

int max_threads() { return omp_get_max_threads(); }

}  // namespace w2s::kernels
