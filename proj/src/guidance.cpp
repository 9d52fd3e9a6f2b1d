// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/guidance.hpp"

#include "w2s/textio.hpp"

#include <cmath>
#include <stdexcept>

namespace w2s {

std::unique_ptr<VelocityField> VelocityField::with_skipped_blocks(std::span<const int>) const {
    throw std::logic_error("this velocity field has no residual blocks to skip");
}

Vec2 VelocityField::at(const Vec2& x, double t, Condition c) const {
    Vec2 out;
    eval(std::span<const Vec2>(&x, 1), t, std::span<const Condition>(&c, 1), std::span<Vec2>(&out, 1));
    return out;
}

void FunctionField::eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const {
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = fn_(x[k], t, c[k]);
    }
}

std::vector<int> raw_conditions(std::span<const Condition> c) {
    std::vector<int> out(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        out[k] = c[k].raw();
    }
    return out;
}

std::string_view to_string(GuidanceKind k) {
    switch (k) {
        case GuidanceKind::none:
            return "none";
        case GuidanceKind::cdg_cfg:
            return "cfg";
        case GuidanceKind::cag_ag:
            return "ag";
        case GuidanceKind::cag_skip:
            return "skip";
        case GuidanceKind::sgg:
            return "sgg";
    }
    return "?";
}

GuidanceKind parse_guidance_kind(std::string_view s) {
    if (s == "none" || s == "unguided") {
        return GuidanceKind::none;
    }
    if (s == "cfg" || s == "cdg" || s == "cdg_cfg") {
        return GuidanceKind::cdg_cfg;
    }
    if (s == "ag" || s == "cag_ag") {
        return GuidanceKind::cag_ag;
    }
    if (s == "skip" || s == "slg" || s == "cag_skip") {
        return GuidanceKind::cag_skip;
    }
    if (s == "sgg") {
        return GuidanceKind::sgg;
    }
    throw std::invalid_argument("unknown guidance kind '" + std::string(s) + "' (none, cfg, ag, skip, sgg)");
}

std::string_view to_string(CagSource s) { return s == CagSource::weak_model ? "ag" : "skip"; }

CagSource parse_cag_source(std::string_view s) {
    if (s == "ag" || s == "weak_model") {
        return CagSource::weak_model;
    }
    if (s == "skip" || s == "skip_blocks") {
        return CagSource::skip_blocks;
    }
    throw std::invalid_argument("unknown CAG source '" + std::string(s) + "' (ag, skip)");
}

GuidanceSpec GuidanceSpec::unguided() { return {}; }

GuidanceSpec GuidanceSpec::cfg(double w) {
    GuidanceSpec g;
    g.kind = GuidanceKind::cdg_cfg;
    g.w = w;
    return g;
}

GuidanceSpec GuidanceSpec::ag(double w) {
    GuidanceSpec g;
    g.kind = GuidanceKind::cag_ag;
    g.w = w;
    return g;
}

GuidanceSpec GuidanceSpec::skip(double w, std::vector<int> blocks) {
    GuidanceSpec g;
    g.kind = GuidanceKind::cag_skip;
    g.w = w;
    g.skip_blocks = std::move(blocks);
    return g;
}

GuidanceSpec GuidanceSpec::segmented(double w_cdg, double w_cag, double tau) {
    GuidanceSpec g;
    g.kind = GuidanceKind::sgg;
    g.w_cdg = w_cdg;
    g.w_cag = w_cag;
    g.tau = tau;
    return g;
}

void GuidanceSpec::validate() const {
    if (!std::isfinite(w) || !std::isfinite(w_cdg) || !std::isfinite(w_cag)) {
        throw std::invalid_argument("guidance scales must be finite");
    }
    if (!(t_lo <= t_hi)) {
        throw std::invalid_argument("guidance interval needs t_lo <= t_hi");
    }
    if (kind == GuidanceKind::sgg && !(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("SGG needs tau in (0, 1)");
    }
    if (needs_skip_field() && skip_blocks.empty()) {
        throw std::invalid_argument("layer-skip guidance needs at least one skip block");
    }
}

bool GuidanceSpec::needs_weak_model() const {
    return kind == GuidanceKind::cag_ag || (kind == GuidanceKind::sgg && sgg_cag == CagSource::weak_model);
}

bool GuidanceSpec::needs_skip_field() const {
    return kind == GuidanceKind::cag_skip || (kind == GuidanceKind::sgg && sgg_cag == CagSource::skip_blocks);
}

std::string GuidanceSpec::label() const {
    switch (kind) {
        case GuidanceKind::none:
            return "unguided";
        case GuidanceKind::cdg_cfg:
            return "cfg_w" + text::fmt(w);
        case GuidanceKind::cag_ag:
            return "ag_w" + text::fmt(w);
        case GuidanceKind::cag_skip:
            return "skip_w" + text::fmt(w);
        case GuidanceKind::sgg:
            return "sgg_tau" + text::fmt(tau) + "_w" + text::fmt(w_cdg) + "_" + text::fmt(w_cag);
    }
    return "?";
}

GuidedField::GuidedField(GuidanceModels models, GuidanceSpec spec) : models_(models), spec_(std::move(spec)) {
    spec_.validate();
    if (models_.strong == nullptr) {
        throw std::invalid_argument("guided field needs a strong model");
    }
    if (spec_.needs_weak_model() && models_.weak == nullptr) {
        throw std::invalid_argument("guidance kind '" + spec_.label() +
                                    "' needs a weak model (missing weak checkpoint)");
    }
    if (spec_.needs_skip_field()) {
        skip_ = models_.strong->with_skipped_blocks(spec_.skip_blocks);
    }
}

void GuidedField::eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const {
    if (!(t > 0.0 && t <= 1.0)) {
        throw std::domain_error("guided velocity needs t in (0, 1]");
    }
    models_.strong->eval(x, t, c, out);
    if (spec_.kind == GuidanceKind::none || t < spec_.t_lo || t > spec_.t_hi) {
        return;
    }

    double scale = spec_.w;
    bool use_null = false;
    const VelocityField* weak = nullptr;
    switch (spec_.kind) {
        case GuidanceKind::cdg_cfg:
            use_null = true;
            break;
        case GuidanceKind::cag_ag:
            weak = models_.weak;
            break;
        case GuidanceKind::cag_skip:
            weak = skip_.get();
            break;
        case GuidanceKind::sgg:
            if (t > spec_.tau) {
                scale = spec_.w_cdg;
                use_null = true;
            } else {
                scale = spec_.w_cag;
                weak = spec_.sgg_cag == CagSource::weak_model ? models_.weak : skip_.get();
            }
            break;
        case GuidanceKind::none:
            break;
    }
    if (scale == 1.0) {
        return;
    }

    std::vector<Vec2> v_weak(x.size());
    if (use_null) {
        const std::vector<Condition> nulls(x.size(), Condition::null());
        models_.strong->eval(x, t, nulls, v_weak);
    } else {
        weak->eval(x, t, c, v_weak);
    }
    const double k = scale - 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = out[i] + k * (out[i] - v_weak[i]);
    }
}

Vec2 guided_velocity(const GuidanceModels& models, const GuidanceSpec& spec, const Vec2& x, double t, Condition c) {
    return GuidedField(models, spec).at(x, t, c);
}

}  // namespace w2s
