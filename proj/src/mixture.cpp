// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/mixture.hpp"

#include "w2s/digest.hpp"
#include "w2s/textio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace w2s {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Mat2 rotation(double angle_rad) {
    Mat2 r;
    r << std::cos(angle_rad), -std::sin(angle_rad), std::sin(angle_rad), std::cos(angle_rad);
    return r;
}

double log_sum_exp(std::span<const double> v) {
    double m = -HUGE_VAL;
    for (double x : v) {
        m = std::max(m, x);
    }
    if (!std::isfinite(m)) {
        return m;
    }
    double s = 0.0;
    for (double x : v) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

// Key/value header followed by a table introduced by `<table>:`.
struct TextTable {
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<std::vector<std::string_view>> rows;

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : header) {
            if (k == key) {
                return v;
            }
        }
        throw std::runtime_error("missing key '" + key + "'");
    }
};

TextTable parse_table(std::string_view textv, std::string_view table_name) {
    TextTable out;
    bool in_table = false;
    for (auto raw : text::lines(textv)) {
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!in_table) {
            if (line.size() == table_name.size() + 1 && line.substr(0, table_name.size()) == table_name &&
                line.back() == ':') {
                in_table = true;
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw std::runtime_error("malformed line: '" + std::string(line) + "'");
            }
            out.header.emplace_back(std::string(text::trim(line.substr(0, eq))),
                                    std::string(text::trim(line.substr(eq + 1))));
        } else {
            std::vector<std::string_view> cols;
            for (auto c : text::split(line, ' ')) {
                if (!c.empty()) {
                    cols.push_back(c);
                }
            }
            out.rows.push_back(std::move(cols));
        }
    }
    if (!in_table) {
        throw std::runtime_error("missing '" + std::string(table_name) + ":' section");
    }
    return out;
}

}  // namespace

GaussianComponent GaussianComponent::make(double weight_raw, const Vec2& mean, const Mat2& cov, int class_label) {
    if (!(weight_raw > 0.0) || !std::isfinite(weight_raw)) {
        throw std::invalid_argument("component weight must be positive and finite");
    }
    if (!mean.allFinite() || !cov.allFinite()) {
        throw std::invalid_argument("component mean/covariance must be finite");
    }
    const double asym = std::abs(cov(0, 1) - cov(1, 0));
    if (asym > 1e-12 * (std::abs(cov(0, 0)) + std::abs(cov(1, 1)))) {
        throw std::invalid_argument("component covariance is not symmetric");
    }
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(cov(0, 0) > 0.0) || !(det > 0.0)) {
        throw std::invalid_argument("component covariance is not positive definite");
    }
    if (class_label < 0) {
        throw std::invalid_argument("negative class label");
    }
    GaussianComponent g;
    g.weight_raw = weight_raw;
    g.mean = mean;
    g.cov = cov;
    g.cov(1, 0) = g.cov(0, 1);
    g.class_label = class_label;
    return g;
}

void ToyConfig::validate() const {
    if (num_classes < 1) {
        throw std::invalid_argument("toy config: num_classes must be >= 1");
    }
    if (max_depth < 1) {
        throw std::invalid_argument("toy config: max_depth must be >= 1");
    }
    if (branch_factor < 1) {
        throw std::invalid_argument("toy config: branch_factor must be >= 1");
    }
    if (!(depth_decay > 0.0 && depth_decay <= 1.0)) {
        throw std::invalid_argument("toy config: depth_decay must lie in (0, 1]");
    }
    if (points_per_branch < 1) {
        throw std::invalid_argument("toy config: points_per_branch must be >= 1");
    }
    if (!(root_length > 0.0) || !(child_length_ratio > 0.0)) {
        throw std::invalid_argument("toy config: branch lengths must be positive");
    }
}

ToyConfig preset_config(Preset name) {
    ToyConfig c;
    switch (name) {
        case Preset::A:
            c.num_classes = 4;
            c.max_depth = 3;
            c.branch_factor = 2;
            break;
        case Preset::B:
            c.num_classes = 24;
            c.max_depth = 1;
            c.branch_factor = 2;
            break;
        case Preset::C:
            c.num_classes = 12;
            c.max_depth = 2;
            c.branch_factor = 2;
            break;
    }
    return c;
}

Preset parse_preset(std::string_view name) {
    if (name == "A" || name == "a") {
        return Preset::A;
    }
    if (name == "B" || name == "b") {
        return Preset::B;
    }
    if (name == "C" || name == "c") {
        return Preset::C;
    }
    throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected A, B or C)");
}

std::string_view preset_name(Preset p) {
    switch (p) {
        case Preset::A:
            return "A";
        case Preset::B:
            return "B";
        case Preset::C:
            return "C";
    }
    return "?";
}

MixtureSpec::MixtureSpec(std::vector<GaussianComponent> components, int num_classes, std::vector<int> selected_classes)
    : components_(std::move(components)), num_classes_(num_classes), selected_(std::move(selected_classes)) {
    if (num_classes_ < 1) {
        throw std::invalid_argument("mixture: num_classes must be >= 1");
    }
    if (selected_.empty()) {
        for (int c = 1; c <= num_classes_; ++c) {
            selected_.push_back(c);
        }
    }
    std::sort(selected_.begin(), selected_.end());
    if (std::adjacent_find(selected_.begin(), selected_.end()) != selected_.end()) {
        throw std::invalid_argument("mixture: duplicate selected class");
    }
    by_class_.assign(static_cast<std::size_t>(num_classes_), {});
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const int c = components_[i].class_label;
        if (c < 0 || c > num_classes_) {
            throw std::invalid_argument("mixture: component label out of range");
        }
        if (c != kBaseLabel) {
            by_class_[static_cast<std::size_t>(c - 1)].push_back(static_cast<int>(i));
        }
    }
    pi_.assign(components_.size(), 0.0);
    for (int c : selected_) {
        if (c < 1 || c > num_classes_) {
            throw std::invalid_argument("mixture: selected class out of range");
        }
        const auto& idx = by_class_[static_cast<std::size_t>(c - 1)];
        if (idx.empty()) {
            throw std::invalid_argument("mixture: selected class " + std::to_string(c) + " has no components");
        }
    }
    for (const auto& idx : by_class_) {
        double total = 0.0;
        for (int i : idx) {
            total += components_[static_cast<std::size_t>(i)].weight_raw;
        }
        for (int i : idx) {
            pi_[static_cast<std::size_t>(i)] = components_[static_cast<std::size_t>(i)].weight_raw / total;
        }
    }
}

bool MixtureSpec::is_selected(int c) const { return std::binary_search(selected_.begin(), selected_.end(), c); }

std::span<const int> MixtureSpec::class_components(int c) const {
    if (c < 1 || c > num_classes_) {
        throw std::out_of_range("class label out of range");
    }
    return by_class_[static_cast<std::size_t>(c - 1)];
}

Vec2 MixtureSpec::class_mean(Condition c) const {
    if (!c.is_null()) {
        Vec2 m = Vec2::Zero();
        for (int i : class_components(c.value())) {
            m += class_weight(i) * components_[static_cast<std::size_t>(i)].mean;
        }
        return m;
    }
    Vec2 m = Vec2::Zero();
    for (int cls : selected_) {
        m += class_mean(Condition::label(cls));
    }
    return m / static_cast<double>(selected_.size());
}

std::string MixtureSpec::serialize() const {
    std::ostringstream os;
    os << "# w2sflow class-conditional Gaussian mixture\n";
    os << "format = w2s-mixture\n";
    os << "version = 1\n";
    os << "num_classes = " << num_classes_ << "\n";
    os << "selected_classes =";
    for (int c : selected_) {
        os << ' ' << c;
    }
    os << "\n";
    os << "num_components = " << components_.size() << "\n";
    os << "# index class weight_raw mean_x mean_y cov_xx cov_xy cov_yy\n";
    os << "components:\n";
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const auto& g = components_[i];
        os << i << ' ' << g.class_label << ' ' << text::fmt(g.weight_raw) << ' ' << text::fmt(g.mean.x()) << ' '
           << text::fmt(g.mean.y()) << ' ' << text::fmt(g.cov(0, 0)) << ' ' << text::fmt(g.cov(0, 1)) << ' '
           << text::fmt(g.cov(1, 1)) << "\n";
    }
    return std::move(os).str();
}

MixtureSpec MixtureSpec::parse(std::string_view textv) {
    const auto t = parse_table(textv, "components");
    if (t.get("format") != "w2s-mixture") {
        throw std::runtime_error("not a w2s-mixture file");
    }
    if (text::to_int(t.get("version")) != 1) {
        throw std::runtime_error("unsupported w2s-mixture version " + t.get("version"));
    }
    const int num_classes = static_cast<int>(text::to_int(t.get("num_classes")));
    std::vector<int> selected;
    for (auto tok : text::split(t.get("selected_classes"), ' ')) {
        if (!text::trim(tok).empty()) {
            selected.push_back(static_cast<int>(text::to_int(tok)));
        }
    }
    const auto n = static_cast<std::size_t>(text::to_int(t.get("num_components")));
    if (t.rows.size() != n) {
        throw std::runtime_error("component table has " + std::to_string(t.rows.size()) + " rows, expected " +
                                 std::to_string(n));
    }
    std::vector<GaussianComponent> comps;
    comps.reserve(n);
    for (const auto& r : t.rows) {
        if (r.size() != 8) {
            throw std::runtime_error("component row must have 8 columns");
        }
        Mat2 cov;
        cov << text::to_double(r[5]), text::to_double(r[6]), text::to_double(r[6]), text::to_double(r[7]);
        comps.push_back(GaussianComponent::make(text::to_double(r[2]), Vec2{text::to_double(r[3]), text::to_double(r[4])},
                                                cov, static_cast<int>(text::to_int(r[1]))));
    }
    return MixtureSpec(std::move(comps), num_classes, std::move(selected));
}

std::string MixtureSpec::digest() const { return sha256_hex(serialize()); }

MixtureSpec MixtureSpec::noised(double t) const {
    if (!(t >= 0.0 && t < 1.0)) {
        throw std::domain_error("noise level t must lie in [0, 1)");
    }
    std::vector<GaussianComponent> out;
    out.reserve(components_.size());
    const double a = 1.0 - t;
    for (const auto& g : components_) {
        GaussianComponent n = g;
        n.mean = a * g.mean;
        n.cov = a * a * g.cov + t * t * Mat2::Identity();
        out.push_back(n);
    }
    return MixtureSpec(std::move(out), num_classes_, selected_);
}

MixtureSpec build_recursive_mixture(const ToyConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::uniform_real_distribution<double> jitter(-config.angle_jitter_deg, config.angle_jitter_deg);
    auto jittered = [&](double deg) { return config.angle_jitter_deg > 0.0 ? deg + jitter(rng) : deg; };

    std::vector<GaussianComponent> comps;
    const Vec2 s = config.scale;

    auto grow = [&](auto&& self, int label, const Vec2& p, double angle_deg, double size, int depth) -> void {
        const double a = angle_deg * kDegToRad;
        const Vec2 u = size * Vec2{std::cos(a), std::sin(a)};
        const Mat2 r = rotation(a);
        Mat2 d = Mat2::Zero();
        d(0, 0) = std::pow(config.thickness_along * size, 2);
        d(1, 1) = std::pow(config.thickness_across * size, 2);
        Mat2 cov = r * d * r.transpose();
        cov(1, 0) = cov(0, 1);
        const double weight = size * std::pow(config.depth_decay, depth);
        for (int j = 0; j < config.points_per_branch; ++j) {
            const double lambda = static_cast<double>(j + 1) / static_cast<double>(config.points_per_branch + 1);
            const Vec2 mean = (p + lambda * u).cwiseProduct(s);
            try {
                comps.push_back(GaussianComponent::make(weight, mean, cov, label));
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument(std::string("recursive mixture geometry produced an invalid component: ") +
                                            e.what());
            }
        }
        if (depth + 1 >= config.max_depth) {
            return;
        }
        const Vec2 tip = p + u;
        const int b = config.branch_factor;
        for (int k = 0; k < b; ++k) {
            const double offset =
                b == 1 ? 0.0 : -config.child_angle_deg + 2.0 * config.child_angle_deg * k / static_cast<double>(b - 1);
            self(self, label, tip, jittered(angle_deg + offset), size * config.child_length_ratio, depth + 1);
        }
    };

    const double main_len = config.main_branch_length();
    const double main_a = config.main_angle_deg * kDegToRad;
    const Vec2 main_dir{std::cos(main_a), std::sin(main_a)};
    for (int k = 0; k < config.num_classes; ++k) {
        const double frac = (k + 0.5) / static_cast<double>(config.num_classes);
        const Vec2 attach = config.base_point + frac * main_len * main_dir;
        const double side = (k % 2 == 0) ? 1.0 : -1.0;
        grow(grow, k + 1, attach, jittered(config.main_angle_deg + side * config.class_angle_deg), config.root_length, 0);
    }
    return MixtureSpec(std::move(comps), config.num_classes);
}

std::string Dataset::serialize() const {
    std::ostringstream os;
    os << "# w2sflow labeled point set\n";
    os << "format = w2s-dataset\n";
    os << "version = 1\n";
    os << "source_spec_sha256 = " << source_spec_hash << "\n";
    os << "num_points = " << points.size() << "\n";
    os << "# x y class\n";
    os << "points:\n";
    for (const auto& p : points) {
        os << text::fmt(p.x0.x()) << ' ' << text::fmt(p.x0.y()) << ' ' << p.class_label << "\n";
    }
    return std::move(os).str();
}

Dataset Dataset::parse(std::string_view textv) {
    const auto t = parse_table(textv, "points");
    if (t.get("format") != "w2s-dataset") {
        throw std::runtime_error("not a w2s-dataset file");
    }
    if (text::to_int(t.get("version")) != 1) {
        throw std::runtime_error("unsupported w2s-dataset version " + t.get("version"));
    }
    Dataset d;
    d.source_spec_hash = t.get("source_spec_sha256");
    const auto n = static_cast<std::size_t>(text::to_int(t.get("num_points")));
    if (t.rows.size() != n) {
        throw std::runtime_error("point table row count mismatch");
    }
    d.points.reserve(n);
    for (const auto& r : t.rows) {
        if (r.size() != 3) {
            throw std::runtime_error("point row must have 3 columns");
        }
        d.points.push_back({Vec2{text::to_double(r[0]), text::to_double(r[1])}, static_cast<int>(text::to_int(r[2]))});
    }
    if (d.points.empty()) {
        throw std::runtime_error("dataset is empty");
    }
    return d;
}

LabeledPoint sample_point(const MixtureSpec& spec, Rng& rng, std::optional<int> fixed_class, int* component_out) {
    const auto& sel = spec.selected_classes();
    int c = 0;
    if (fixed_class) {
        c = *fixed_class;
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, sel.size() - 1);
        c = sel[pick(rng)];
    }
    const auto idx = spec.class_components(c);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double u = u01(rng);
    double acc = 0.0;
    int chosen = idx.back();
    for (int i : idx) {
        acc += spec.class_weight(i);
        if (u < acc) {
            chosen = i;
            break;
        }
    }
    const auto& g = spec.components()[static_cast<std::size_t>(chosen)];
    const double l00 = std::sqrt(g.cov(0, 0));
    const double l10 = g.cov(1, 0) / l00;
    const double l11 = std::sqrt(g.cov(1, 1) - l10 * l10);
    const Vec2 z = standard_normal2(rng);
    if (component_out != nullptr) {
        *component_out = chosen;
    }
    return {Vec2{g.mean.x() + l00 * z.x(), g.mean.y() + l10 * z.x() + l11 * z.y()}, c};
}

Dataset sample_dataset(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("sample_dataset: n must be >= 1");
    }
    Dataset d;
    d.source_spec_hash = spec.digest();
    d.points.reserve(n);
    d.components.reserve(n);
    Rng rng(seed);
    for (std::size_t k = 0; k < n; ++k) {
        int comp = -1;
        d.points.push_back(sample_point(spec, rng, std::nullopt, &comp));
        d.components.push_back(comp);
    }
    return d;
}

double log_normal2(const Vec2& x, const Vec2& mean, const Mat2& cov) {
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    const Vec2 d = x - mean;
    const double q = (cov(1, 1) * d.x() * d.x() - (cov(0, 1) + cov(1, 0)) * d.x() * d.y() + cov(0, 0) * d.y() * d.y()) / det;
    return -kLog2Pi - 0.5 * std::log(det) - 0.5 * q;
}

double log_density(const MixtureSpec& spec, const Vec2& x, Condition c, double t) {
    if (!(t >= 0.0 && t < 1.0)) {
        throw std::domain_error("log_density: t must lie in [0, 1)");
    }
    if (!c.is_null() && !spec.is_selected(c.value())) {
        throw std::invalid_argument("log_density: class " + std::to_string(c.value()) + " is not selected");
    }
    const double a = 1.0 - t;
    std::vector<double> terms;
    auto add_class = [&](int cls, double log_prior) {
        for (int i : spec.class_components(cls)) {
            const auto& g = spec.components()[static_cast<std::size_t>(i)];
            const Mat2 cov = a * a * g.cov + t * t * Mat2::Identity();
            terms.push_back(log_prior + std::log(spec.class_weight(i)) + log_normal2(x, a * g.mean, cov));
        }
    };
    if (c.is_null()) {
        const double lp = -std::log(static_cast<double>(spec.selected_classes().size()));
        for (int cls : spec.selected_classes()) {
            add_class(cls, lp);
        }
    } else {
        add_class(c.value(), 0.0);
    }
    return log_sum_exp(terms);
}

}  // namespace w2s
