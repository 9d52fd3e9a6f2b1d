// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "w2s/common.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace w2s {

/// A batched velocity field v(x, t, c). All points of one call share t.
class VelocityField {
public:
    virtual ~VelocityField() = default;

    virtual void eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const = 0;

    /// The same field with the given residual blocks bypassed (layer-skip
    /// perturbation). Fields without blocks throw std::logic_error.
    virtual std::unique_ptr<VelocityField> with_skipped_blocks(std::span<const int> blocks) const;

    Vec2 at(const Vec2& x, double t, Condition c) const;
};

/// Adapts a pointwise function; handy for closed-form test fields.
class FunctionField final : public VelocityField {
public:
    using Fn = std::function<Vec2(const Vec2&, double, Condition)>;
    explicit FunctionField(Fn fn) : fn_(std::move(fn)) {}
    void eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const override;

private:
    Fn fn_;
};

std::vector<int> raw_conditions(std::span<const Condition> c);

}  // namespace w2s
