// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Conditional velocity network:
//
//   h_0     = W_in [x; sin(f t); cos(f t); e_c] + b_in
//   h_{j+1} = h_j + W2_j silu(W1_j h_j + b1_j) + b2_j     (identity when skipped)
//   v       = W_out h_L + b_out
//   v_br    = W_br h_b + b_br                              (optional branch head)
//
// The class embedding table has one column per class plus a final column for
// the null condition. Output heads start at zero, so an untrained net is the
// zero field. Batches are columns; everything is double precision.

#pragma once

#include "w2s/field.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace w2s {

using Matrix = Eigen::MatrixXd;

struct NetArch {
    int d_c = 16;
    int d_h = 128;
    int n_blocks = 4;
    bool branch = false;
    int branch_index = 1;  // branch reads h after this many blocks
    int n_freqs = 16;
    double freq_min = 1.0;
    double freq_max = 1000.0;

    void validate() const;
    int input_dim() const { return 2 + 2 * n_freqs + d_c; }
    bool operator==(const NetArch&) const = default;
};

struct Tensor {
    std::string name;
    Matrix value;
};

struct NetParams {
    NetArch arch;
    int num_classes = 0;  // 0: unconditional, only the null column exists
    std::vector<double> freqs;
    std::vector<Tensor> tensors;

    // Named views into `tensors`.
    Matrix& embed() { return tensors[0].value; }
    const Matrix& embed() const { return tensors[0].value; }
    Matrix& w_in() { return tensors[1].value; }
    const Matrix& w_in() const { return tensors[1].value; }
    Matrix& b_in() { return tensors[2].value; }
    const Matrix& b_in() const { return tensors[2].value; }
    Matrix& w1(int j) { return tensors[block_base(j)].value; }
    const Matrix& w1(int j) const { return tensors[block_base(j)].value; }
    Matrix& b1(int j) { return tensors[block_base(j) + 1].value; }
    const Matrix& b1(int j) const { return tensors[block_base(j) + 1].value; }
    Matrix& w2(int j) { return tensors[block_base(j) + 2].value; }
    const Matrix& w2(int j) const { return tensors[block_base(j) + 2].value; }
    Matrix& b2(int j) { return tensors[block_base(j) + 3].value; }
    const Matrix& b2(int j) const { return tensors[block_base(j) + 3].value; }
    Matrix& w_out() { return tensors[head_base()].value; }
    const Matrix& w_out() const { return tensors[head_base()].value; }
    Matrix& b_out() { return tensors[head_base() + 1].value; }
    const Matrix& b_out() const { return tensors[head_base() + 1].value; }
    Matrix& w_br() { return tensors[head_base() + 2].value; }
    const Matrix& w_br() const { return tensors[head_base() + 2].value; }
    Matrix& b_br() { return tensors[head_base() + 3].value; }
    const Matrix& b_br() const { return tensors[head_base() + 3].value; }

    /// Embedding column for a raw condition (0 = null).
    int embed_column(int raw_condition) const;
    std::size_t parameter_count() const;
    bool all_finite() const;
    /// Same shapes and names, all zeros (gradient accumulator).
    NetParams zeros_like() const;

private:
    static std::size_t block_base(int j) { return 3 + 4 * static_cast<std::size_t>(j); }
    std::size_t head_base() const { return block_base(arch.n_blocks); }
};

NetParams init_params(const NetArch& arch, int num_classes, std::uint64_t seed);

/// Closed-form parameter count of an architecture.
std::size_t expected_parameter_count(const NetArch& arch, int num_classes);

struct ForwardOptions {
    std::vector<int> skip_blocks;
    bool want_branch = false;
};

/// Cached activations of one batched forward pass.
struct ForwardTrace {
    Matrix input;                // input_dim x B
    std::vector<Matrix> h;       // h_0 .. h_L, each d_h x B
    std::vector<Matrix> a;       // pre-activations per block (empty if skipped)
    std::vector<Matrix> s;       // sigmoid(a)
    std::vector<Matrix> z;       // silu(a) = a * sigmoid(a)
    std::vector<bool> skipped;
    std::vector<int> cond;       // raw conditions
    bool has_branch = false;
};

struct ForwardResult {
    Matrix velocity;  // 2 x B
    Matrix branch;    // 2 x B when requested
};

/// Batched forward. Per-sample times allow training batches with mixed t.
ForwardResult forward(const NetParams& p, std::span<const Vec2> x, std::span<const double> t,
                      std::span<const int> cond, const ForwardOptions& opts = {}, ForwardTrace* trace = nullptr);

/// Reverse-mode gradients given d(loss)/d(velocity) (and optionally
/// d(loss)/d(branch)), accumulated into `grads` (shaped like `p`).
void backward(const NetParams& p, const ForwardTrace& trace, const Matrix& grad_velocity,
              const Matrix* grad_branch, NetParams& grads);

namespace reference {
/// Unbatched, loop-based forward used to cross-check the batched path.
Vec2 forward_one(const NetParams& p, const Vec2& x, double t, int cond, const ForwardOptions& opts = {},
                 Vec2* branch = nullptr);
}  // namespace reference

struct OptState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::int64_t step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptState for_params(const NetParams& p, double lr);
};

/// Bias-corrected Adam. Throws naming the first tensor with a non-finite gradient.
void adam_step(NetParams& p, const NetParams& grads, OptState& opt);

/// A network viewed as a velocity field (main or branch head, optional block skips).
class NetField final : public VelocityField {
public:
    enum class Head { main, branch };
    explicit NetField(std::shared_ptr<const NetParams> params, Head head = Head::main, std::vector<int> skip = {});

    void eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const override;
    std::unique_ptr<VelocityField> with_skipped_blocks(std::span<const int> blocks) const override;
    const NetParams& params() const { return *params_; }

private:
    std::shared_ptr<const NetParams> params_;
    Head head_;
    std::vector<int> skip_;
};

}  // namespace w2s
