// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "w2s/field.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace w2s {

enum class GuidanceKind { none, cdg_cfg, cag_ag, cag_skip, sgg };

/// Where SGG takes its condition-agnostic weak signal from below tau.
enum class CagSource { weak_model, skip_blocks };

std::string_view to_string(GuidanceKind k);
GuidanceKind parse_guidance_kind(std::string_view s);
std::string_view to_string(CagSource s);
CagSource parse_cag_source(std::string_view s);

struct GuidanceSpec {
    GuidanceKind kind = GuidanceKind::none;
    double w = 1.0;      // single-scale kinds
    double w_cdg = 1.0;  // SGG above tau
    double w_cag = 1.0;  // SGG at or below tau
    double tau = 0.5;
    double t_lo = 0.0;   // guidance active for t in [t_lo, t_hi]
    double t_hi = 1.0;
    std::vector<int> skip_blocks;
    CagSource sgg_cag = CagSource::weak_model;
    std::string weak_checkpoint;  // informational reference for CAG_ag

    static GuidanceSpec unguided();
    static GuidanceSpec cfg(double w);
    static GuidanceSpec ag(double w);
    static GuidanceSpec skip(double w, std::vector<int> blocks);
    static GuidanceSpec segmented(double w_cdg, double w_cag, double tau);

    void validate() const;
    bool needs_weak_model() const;
    bool needs_skip_field() const;
    std::string label() const;
};

struct GuidanceModels {
    const VelocityField* strong = nullptr;
    const VelocityField* weak = nullptr;  // condition-aligned inferior model (AG)
};

/// v_w = v_c + (w - 1)(v_c - v_weak), with the weak signal chosen by the spec.
class GuidedField final : public VelocityField {
public:
    GuidedField(GuidanceModels models, GuidanceSpec spec);
    void eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const override;
    const GuidanceSpec& spec() const { return spec_; }

private:
    GuidanceModels models_;
    GuidanceSpec spec_;
    std::unique_ptr<VelocityField> skip_;
};

Vec2 guided_velocity(const GuidanceModels& models, const GuidanceSpec& spec, const Vec2& x, double t, Condition c);

}  // namespace w2s
