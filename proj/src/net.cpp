// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace w2s {

void NetArch::validate() const {
    if (d_c < 1 || d_h < 1 || n_blocks < 1 || n_freqs < 1) {
        throw std::invalid_argument("net architecture needs d_c, d_h, n_blocks, n_freqs >= 1");
    }
    if (branch && !(branch_index >= 1 && branch_index < n_blocks)) {
        throw std::invalid_argument("branch head needs 1 <= branch_index < n_blocks, got " +
                                    std::to_string(branch_index));
    }
    if (!(freq_min > 0.0 && freq_max >= freq_min)) {
        throw std::invalid_argument("time frequencies need 0 < freq_min <= freq_max");
    }
}

int NetParams::embed_column(int raw) const {
    if (raw == 0) {
        return num_classes;
    }
    if (raw < 0 || raw > num_classes) {
        throw std::invalid_argument("condition " + std::to_string(raw) + " outside the net's " +
                                    std::to_string(num_classes) + " classes");
    }
    return raw - 1;
}

std::size_t NetParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) {
        n += static_cast<std::size_t>(t.value.size());
    }
    return n;
}

bool NetParams::all_finite() const {
    return std::all_of(tensors.begin(), tensors.end(), [](const Tensor& t) { return t.value.allFinite(); });
}

NetParams NetParams::zeros_like() const {
    NetParams z = *this;
    for (auto& t : z.tensors) {
        t.value.setZero();
    }
    return z;
}

std::size_t expected_parameter_count(const NetArch& a, int num_classes) {
    const auto dc = static_cast<std::size_t>(a.d_c);
    const auto dh = static_cast<std::size_t>(a.d_h);
    const auto in = 2 + 2 * static_cast<std::size_t>(a.n_freqs) + dc;
    std::size_t n = dc * static_cast<std::size_t>(num_classes + 1);
    n += dh * in + dh;
    n += static_cast<std::size_t>(a.n_blocks) * 2 * (dh * dh + dh);
    n += 2 * dh + 2;
    if (a.branch) {
        n += 2 * dh + 2;
    }
    return n;
}

NetParams init_params(const NetArch& arch, int num_classes, std::uint64_t seed) {
    arch.validate();
    if (num_classes < 0) {
        throw std::invalid_argument("num_classes must be >= 0");
    }
    NetParams p;
    p.arch = arch;
    p.num_classes = num_classes;
    p.freqs.resize(static_cast<std::size_t>(arch.n_freqs));
    for (int k = 0; k < arch.n_freqs; ++k) {
        const double u = arch.n_freqs == 1 ? 0.0 : static_cast<double>(k) / (arch.n_freqs - 1);
        p.freqs[static_cast<std::size_t>(k)] = arch.freq_min * std::pow(arch.freq_max / arch.freq_min, u);
    }

    Rng rng = substream(seed, 0);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto gaussian = [&](int rows, int cols, double stddev) {
        Matrix m(rows, cols);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                m(i, j) = stddev * n01(rng);
            }
        }
        return m;
    };
    const int dh = arch.d_h;
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(arch.input_dim()));
    const double h_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    p.tensors.push_back({"embed", gaussian(arch.d_c, num_classes + 1, 1.0)});
    p.tensors.push_back({"w_in", gaussian(dh, arch.input_dim(), in_scale)});
    p.tensors.push_back({"b_in", Matrix::Zero(dh, 1)});
    for (int j = 0; j < arch.n_blocks; ++j) {
        const std::string b = "block" + std::to_string(j) + ".";
        p.tensors.push_back({b + "w1", gaussian(dh, dh, h_scale)});
        p.tensors.push_back({b + "b1", Matrix::Zero(dh, 1)});
        p.tensors.push_back({b + "w2", gaussian(dh, dh, h_scale)});
        p.tensors.push_back({b + "b2", Matrix::Zero(dh, 1)});
    }
    p.tensors.push_back({"w_out", Matrix::Zero(2, dh)});
    p.tensors.push_back({"b_out", Matrix::Zero(2, 1)});
    if (arch.branch) {
        p.tensors.push_back({"w_br", Matrix::Zero(2, dh)});
        p.tensors.push_back({"b_br", Matrix::Zero(2, 1)});
    }
    return p;
}

namespace {

std::vector<bool> skip_mask(const NetArch& arch, const std::vector<int>& skip) {
    std::vector<bool> mask(static_cast<std::size_t>(arch.n_blocks), false);
    for (int j : skip) {
        if (j < 0 || j >= arch.n_blocks) {
            throw std::invalid_argument("skip block " + std::to_string(j) + " outside 0.." +
                                        std::to_string(arch.n_blocks - 1));
        }
        mask[static_cast<std::size_t>(j)] = true;
    }
    return mask;
}

Matrix build_input(const NetParams& p, std::span<const Vec2> x, std::span<const double> t, std::span<const int> cond) {
    const auto B = static_cast<Eigen::Index>(x.size());
    const int F = p.arch.n_freqs;
    Matrix in(p.arch.input_dim(), B);
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        in(0, b) = x[ub].x();
        in(1, b) = x[ub].y();
        for (int k = 0; k < F; ++k) {
            const double arg = p.freqs[static_cast<std::size_t>(k)] * t[ub];
            in(2 + k, b) = std::sin(arg);
            in(2 + F + k, b) = std::cos(arg);
        }
        in.block(2 + 2 * F, b, p.arch.d_c, 1) = p.embed().col(p.embed_column(cond[ub]));
    }
    return in;
}

// out += g a^T, reduced over the batch in fixed 32-column panels (Eigen's
// blocking is markedly slower for a long reduction dimension).
void accumulate_outer(const Matrix& g, const Matrix& a, Matrix& out) {
    constexpr Eigen::Index kPanel = 32;
    for (Eigen::Index k = 0; k < g.cols(); k += kPanel) {
        const Eigen::Index n = std::min(kPanel, g.cols() - k);
        out.noalias() += g.middleCols(k, n) * a.middleCols(k, n).transpose();
    }
}

}  // namespace

ForwardResult forward(const NetParams& p, std::span<const Vec2> x, std::span<const double> t,
                      std::span<const int> cond, const ForwardOptions& opts, ForwardTrace* trace) {
    if (t.size() != x.size() || cond.size() != x.size()) {
        throw std::invalid_argument("forward: x, t and cond lengths differ");
    }
    if (opts.want_branch && !p.arch.branch) {
        throw std::invalid_argument("forward: branch output requested from a net without a branch head");
    }
    const auto skipped = skip_mask(p.arch, opts.skip_blocks);
    const int L = p.arch.n_blocks;

    Matrix in = build_input(p, x, t, cond);
    Matrix h(p.arch.d_h, in.cols());
    h.noalias() = p.w_in() * in;
    h.colwise() += p.b_in().col(0);

    ForwardResult r;
    if (trace != nullptr) {
        trace->h.assign(1, h);
        trace->a.assign(static_cast<std::size_t>(L), Matrix());
        trace->s.assign(static_cast<std::size_t>(L), Matrix());
        trace->z.assign(static_cast<std::size_t>(L), Matrix());
        trace->skipped = skipped;
        trace->cond.assign(cond.begin(), cond.end());
        trace->has_branch = opts.want_branch;
    }
    Matrix a(p.arch.d_h, in.cols());
    Matrix sg(p.arch.d_h, in.cols());
    Matrix z(p.arch.d_h, in.cols());
    for (int j = 0; j < L; ++j) {
        if (!skipped[static_cast<std::size_t>(j)]) {
            a.noalias() = p.w1(j) * h;
            a.colwise() += p.b1(j).col(0);
            sg = (1.0 + (-a.array()).exp()).inverse();
            z = a.array() * sg.array();
            h.noalias() += p.w2(j) * z;
            h.colwise() += p.b2(j).col(0);
            if (trace != nullptr) {
                trace->a[static_cast<std::size_t>(j)] = a;
                trace->s[static_cast<std::size_t>(j)] = sg;
                trace->z[static_cast<std::size_t>(j)] = z;
            }
        }
        if (trace != nullptr) {
            trace->h.push_back(h);
        }
        if (opts.want_branch && j + 1 == p.arch.branch_index) {
            r.branch.noalias() = p.w_br() * h;
            r.branch.colwise() += p.b_br().col(0);
        }
    }
    r.velocity.noalias() = p.w_out() * h;
    r.velocity.colwise() += p.b_out().col(0);
    if (trace != nullptr) {
        trace->input = std::move(in);
    }
    return r;
}

void backward(const NetParams& p, const ForwardTrace& tr, const Matrix& gv, const Matrix* gbr, NetParams& g) {
    const int L = p.arch.n_blocks;
    const Eigen::Index B = tr.input.cols();
    if (gv.rows() != 2 || gv.cols() != B || tr.h.size() != static_cast<std::size_t>(L) + 1) {
        throw std::invalid_argument("backward: gradient or trace shape mismatch");
    }
    if (gbr != nullptr && (!tr.has_branch || gbr->rows() != 2 || gbr->cols() != B)) {
        throw std::invalid_argument("backward: branch gradient without a matching branch trace");
    }
    if (g.tensors.size() != p.tensors.size()) {
        throw std::invalid_argument("backward: gradient accumulator shaped unlike the params");
    }

    g.w_out().noalias() += gv * tr.h.back().transpose();
    g.b_out() += gv.rowwise().sum();
    Matrix gh(p.arch.d_h, B);
    gh.noalias() = p.w_out().transpose() * gv;

    Matrix gz(p.arch.d_h, B);
    Matrix ga(p.arch.d_h, B);
    for (int j = L - 1; j >= 0; --j) {
        const auto uj = static_cast<std::size_t>(j);
        if (gbr != nullptr && j + 1 == p.arch.branch_index) {
            g.w_br().noalias() += *gbr * tr.h[uj + 1].transpose();
            g.b_br() += gbr->rowwise().sum();
            gh.noalias() += p.w_br().transpose() * *gbr;
        }
        if (tr.skipped[uj]) {
            continue;
        }
        const Matrix& a = tr.a[uj];
        accumulate_outer(gh, tr.z[uj], g.w2(j));
        g.b2(j) += gh.rowwise().sum();
        gz.noalias() = p.w2(j).transpose() * gh;
        const auto s = tr.s[uj].array();
        ga = gz.array() * s * (1.0 + a.array() * (1.0 - s));
        accumulate_outer(ga, tr.h[uj], g.w1(j));
        g.b1(j) += ga.rowwise().sum();
        gh.noalias() += p.w1(j).transpose() * ga;
    }

    accumulate_outer(gh, tr.input, g.w_in());
    g.b_in() += gh.rowwise().sum();
    Matrix ge(p.arch.d_c, B);
    ge.noalias() = p.w_in().rightCols(p.arch.d_c).transpose() * gh;
    for (Eigen::Index b = 0; b < B; ++b) {
        g.embed().col(p.embed_column(tr.cond[static_cast<std::size_t>(b)])) += ge.col(b);
    }
}

namespace reference {

Vec2 forward_one(const NetParams& p, const Vec2& x, double t, int cond, const ForwardOptions& opts, Vec2* branch) {
    const auto skipped = skip_mask(p.arch, opts.skip_blocks);
    const int F = p.arch.n_freqs;
    const int dh = p.arch.d_h;
    std::vector<double> in;
    in.push_back(x.x());
    in.push_back(x.y());
    for (int k = 0; k < F; ++k) {
        in.push_back(std::sin(p.freqs[static_cast<std::size_t>(k)] * t));
    }
    for (int k = 0; k < F; ++k) {
        in.push_back(std::cos(p.freqs[static_cast<std::size_t>(k)] * t));
    }
    const int col = p.embed_column(cond);
    for (int i = 0; i < p.arch.d_c; ++i) {
        in.push_back(p.embed()(i, col));
    }

    auto affine = [](const Matrix& w, const Matrix& b, const std::vector<double>& v) {
        std::vector<double> out(static_cast<std::size_t>(w.rows()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            double s = b(r, 0);
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                s += w(r, c) * v[static_cast<std::size_t>(c)];
            }
            out[static_cast<std::size_t>(r)] = s;
        }
        return out;
    };

    auto h = affine(p.w_in(), p.b_in(), in);
    for (int j = 0; j < p.arch.n_blocks; ++j) {
        if (!skipped[static_cast<std::size_t>(j)]) {
            auto a = affine(p.w1(j), p.b1(j), h);
            for (auto& v : a) {
                v = v / (1.0 + std::exp(-v));
            }
            const auto d = affine(p.w2(j), p.b2(j), a);
            for (int i = 0; i < dh; ++i) {
                h[static_cast<std::size_t>(i)] += d[static_cast<std::size_t>(i)];
            }
        }
        if (branch != nullptr && p.arch.branch && j + 1 == p.arch.branch_index) {
            const auto o = affine(p.w_br(), p.b_br(), h);
            *branch = Vec2(o[0], o[1]);
        }
    }
    const auto o = affine(p.w_out(), p.b_out(), h);
    return {o[0], o[1]};
}

}  // namespace reference

OptState OptState::for_params(const NetParams& p, double lr) {
    OptState s;
    s.lr = lr;
    for (const auto& t : p.tensors) {
        s.m.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
        s.v.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    }
    return s;
}

void adam_step(NetParams& p, const NetParams& grads, OptState& opt) {
    if (grads.tensors.size() != p.tensors.size() || opt.m.size() != p.tensors.size()) {
        throw std::invalid_argument("adam_step: params, grads and optimizer state disagree in shape");
    }
    for (const auto& t : grads.tensors) {
        if (!t.value.allFinite()) {
            throw std::runtime_error("adam_step: non-finite gradient in tensor '" + t.name + "'");
        }
    }
    ++opt.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (std::size_t k = 0; k < p.tensors.size(); ++k) {
        const auto g = grads.tensors[k].value.array();
        auto m = opt.m[k].array();
        auto v = opt.v[k].array();
        m = opt.beta1 * m + (1.0 - opt.beta1) * g;
        v = opt.beta2 * v + (1.0 - opt.beta2) * g.square();
        p.tensors[k].value.array() -= (opt.lr / c1) * m / ((v / c2).sqrt() + opt.eps);
    }
}

NetField::NetField(std::shared_ptr<const NetParams> params, Head head, std::vector<int> skip)
    : params_(std::move(params)), head_(head), skip_(std::move(skip)) {
    if (params_ == nullptr) {
        throw std::invalid_argument("NetField needs parameters");
    }
    if (head_ == Head::branch && !params_->arch.branch) {
        throw std::invalid_argument("NetField: branch head requested from a net without one");
    }
    skip_mask(params_->arch, skip_);
}

void NetField::eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const {
    constexpr std::size_t kChunk = 4096;
    ForwardOptions opts;
    opts.skip_blocks = skip_;
    opts.want_branch = head_ == Head::branch;
    std::vector<double> ts;
    std::vector<int> raw;
    for (std::size_t lo = 0; lo < x.size(); lo += kChunk) {
        const std::size_t n = std::min(kChunk, x.size() - lo);
        ts.assign(n, t);
        raw.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            raw[i] = c[lo + i].raw();
        }
        const auto r = forward(*params_, x.subspan(lo, n), ts, raw, opts);
        const Matrix& v = head_ == Head::branch ? r.branch : r.velocity;
        for (std::size_t i = 0; i < n; ++i) {
            out[lo + i] = v.col(static_cast<Eigen::Index>(i));
        }
    }
}

std::unique_ptr<VelocityField> NetField::with_skipped_blocks(std::span<const int> blocks) const {
    std::vector<int> skip = skip_;
    skip.insert(skip.end(), blocks.begin(), blocks.end());
    return std::make_unique<NetField>(params_, head_, std::move(skip));
}

}  // namespace w2s
