// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "w2s/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace w2s {

/// Label carried by trunk components that belong to no class.
inline constexpr int kBaseLabel = 0;

struct GaussianComponent {
    double weight_raw = 1.0;
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
    int class_label = kBaseLabel;

    /// Validates weight > 0 and a symmetric positive-definite covariance.
    static GaussianComponent make(double weight_raw, const Vec2& mean, const Mat2& cov, int class_label);
};

/// Geometry of the recursive branching toy mixture.
struct ToyConfig {
    int num_classes = 4;
    int max_depth = 1;
    int branch_factor = 1;
    std::uint64_t seed = 0;
    Vec2 scale{1.0, 1.0};
    Vec2 base_point{0.0, -1.0};
    double main_angle_deg = 85.0;
    double depth_decay = 0.6;
    int points_per_branch = 3;

    // Defaults not pinned by the construction itself; all overridable.
    double root_length = 0.5;          // s^(0), length of each class subbranch
    double class_angle_deg = 60.0;     // subbranches alternate +/- this offset from the trunk
    double child_angle_deg = 35.0;     // children spread over +/- this offset
    double child_length_ratio = 0.55;  // s^(d+1) = ratio * s^(d)
    double thickness_across = 0.03;    // std across branch = thickness_across * s^(d)
    double thickness_along = 0.08;     // std along branch = thickness_along * s^(d)
    double angle_jitter_deg = 8.0;     // seeded uniform jitter on every branch angle

    void validate() const;
    double main_branch_length() const { return 0.4 * (1.0 + 0.1 * num_classes); }
};

enum class Preset { A, B, C };

ToyConfig preset_config(Preset name);
Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset p);

class MixtureSpec {
public:
    MixtureSpec() = default;
    /// An empty selection means every class in 1..num_classes.
    MixtureSpec(std::vector<GaussianComponent> components, int num_classes, std::vector<int> selected_classes = {});

    const std::vector<GaussianComponent>& components() const { return components_; }
    int num_classes() const { return num_classes_; }
    const std::vector<int>& selected_classes() const { return selected_; }
    bool is_selected(int c) const;

    /// Indices I_c of the components carrying label c.
    std::span<const int> class_components(int c) const;
    /// Within-class normalized weight pi_i^(c) of component i.
    double class_weight(int i) const { return pi_[static_cast<std::size_t>(i)]; }

    /// Mixture-level mean E[x0 | c] and E[x0] (null).
    Vec2 class_mean(Condition c) const;

    /// Canonical text form; the digest is SHA-256 of exactly these bytes.
    std::string serialize() const;
    static MixtureSpec parse(std::string_view text);
    std::string digest() const;

    /// Same mixture after forward noising to time t: means (1-t)mu, covariances (1-t)^2 Sigma + t^2 I.
    MixtureSpec noised(double t) const;

private:
    std::vector<GaussianComponent> components_;
    int num_classes_ = 0;
    std::vector<int> selected_;
    std::vector<double> pi_;
    std::vector<std::vector<int>> by_class_;  // index c-1
};

MixtureSpec build_recursive_mixture(const ToyConfig& config);

struct LabeledPoint {
    Vec2 x0;
    int class_label = 0;
};

struct Dataset {
    std::vector<LabeledPoint> points;
    std::string source_spec_hash;
    /// Generating component per point; empty when loaded from disk.
    std::vector<int> components;

    std::string serialize() const;
    static Dataset parse(std::string_view text);
};

Dataset sample_dataset(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

/// Single ancestral draw (class uniform over the selection unless fixed).
LabeledPoint sample_point(const MixtureSpec& spec, Rng& rng, std::optional<int> fixed_class = std::nullopt,
                          int* component_out = nullptr);

/// log p_t(x | c) for t in [0,1); null c mixes classes with p(c) = 1/|C_sel|.
double log_density(const MixtureSpec& spec, const Vec2& x, Condition c, double t);

/// log N(x; mean, cov) for a 2x2 covariance.
double log_normal2(const Vec2& x, const Vec2& mean, const Mat2& cov);

}  // namespace w2s
