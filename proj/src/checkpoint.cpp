// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/checkpoint.hpp"

#include "w2s/digest.hpp"
#include "w2s/textio.hpp"

#include <bit>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace w2s {

namespace {

constexpr char kMagic[8] = {'W', '2', 'S', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) {
        out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
    }
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) {
        out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFFu));
    }
}

class Reader {
public:
    explicit Reader(std::string_view b) : b_(b) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + static_cast<std::size_t>(k)])) << (8 * k);
        }
        pos_ += 4;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + static_cast<std::size_t>(k)])) << (8 * k);
        }
        pos_ += 8;
        return std::bit_cast<double>(v);
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        const auto s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) {
            throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos_));
        }
    }
    std::string_view b_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view bytes) {
    return crc32(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

}  // namespace

std::string encode_checkpoint(const NetParams& p) {
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(p.num_classes));
    const NetArch& a = p.arch;
    for (int v : {a.d_c, a.d_h, a.n_blocks, a.branch ? 1 : 0, a.branch_index, a.n_freqs}) {
        put_u32(out, static_cast<std::uint32_t>(v));
    }
    put_f64(out, a.freq_min);
    put_f64(out, a.freq_max);
    put_u32(out, static_cast<std::uint32_t>(p.tensors.size()));
    for (const auto& t : p.tensors) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        put_u32(out, static_cast<std::uint32_t>(t.value.rows()));
        put_u32(out, static_cast<std::uint32_t>(t.value.cols()));
        for (Eigen::Index i = 0; i < t.value.size(); ++i) {
            put_f64(out, t.value.data()[i]);
        }
    }
    put_u32(out, crc_of(out));
    return out;
}

NetParams decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error("not a w2s checkpoint (bad magic)");
    }
    const auto body = bytes.substr(0, bytes.size() - 4);
    Reader tail(bytes.substr(bytes.size() - 4));
    if (tail.u32() != crc_of(body)) {
        throw std::runtime_error("checkpoint checksum mismatch (file corrupted)");
    }
    Reader r(body);
    r.bytes(sizeof kMagic);
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto num_classes = static_cast<int>(r.u32());
    NetArch a;
    a.d_c = r.i32();
    a.d_h = r.i32();
    a.n_blocks = r.i32();
    a.branch = r.i32() != 0;
    a.branch_index = r.i32();
    a.n_freqs = r.i32();
    a.freq_min = r.f64();
    a.freq_max = r.f64();

    // Fresh params give the expected tensor layout; values are overwritten.
    NetParams p = init_params(a, num_classes, 0);
    const auto count = r.u32();
    if (count != p.tensors.size()) {
        throw std::runtime_error("checkpoint tensor count " + std::to_string(count) + " does not match architecture (" +
                                 std::to_string(p.tensors.size()) + ")");
    }
    for (auto& t : p.tensors) {
        const auto name = r.bytes(r.u32());
        const auto rows = r.u32();
        const auto cols = r.u32();
        if (name != t.name || rows != t.value.rows() || cols != t.value.cols()) {
            throw std::runtime_error("checkpoint tensor '" + std::string(name) + "' does not match expected '" + t.name +
                                     "'");
        }
        for (Eigen::Index i = 0; i < t.value.size(); ++i) {
            t.value.data()[i] = r.f64();
        }
    }
    if (r.pos() != body.size()) {
        throw std::runtime_error("checkpoint has trailing bytes");
    }
    return p;
}

std::string checkpoint_manifest(const NetParams& p, std::string_view binary) {
    std::ostringstream os;
    os << "format = w2s-checkpoint\n";
    os << "version = " << kCheckpointVersion << "\n";
    os << "sha256 = " << sha256_hex(binary) << "\n";
    os << "num_classes = " << p.num_classes << "\n";
    os << "d_c = " << p.arch.d_c << "\n";
    os << "d_h = " << p.arch.d_h << "\n";
    os << "n_blocks = " << p.arch.n_blocks << "\n";
    os << "branch = " << (p.arch.branch ? "true" : "false") << "\n";
    os << "branch_index = " << p.arch.branch_index << "\n";
    os << "n_freqs = " << p.arch.n_freqs << "\n";
    os << "freq_min = " << text::fmt(p.arch.freq_min) << "\n";
    os << "freq_max = " << text::fmt(p.arch.freq_max) << "\n";
    os << "parameters = " << p.parameter_count() << "\n";
    os << "tensors:\n";
    for (const auto& t : p.tensors) {
        os << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << "\n";
    }
    return std::move(os).str();
}

void save_checkpoint(const std::filesystem::path& path, const NetParams& p) {
    const auto bin = encode_checkpoint(p);
    text::write_file_atomic(path, bin);
    auto side = path;
    side += ".txt";
    text::write_file_atomic(side, checkpoint_manifest(p, bin));
}

NetParams load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(text::read_file(path)); }

}  // namespace w2s
