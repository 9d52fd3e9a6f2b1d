// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint container (all integers and floats little-endian):
//
//   "W2SCKPT\0"                      8-byte magic
//   u32 version (= 1)
//   u32 num_classes
//   i32 d_c, d_h, n_blocks, branch, branch_index, n_freqs
//   f64 freq_min, freq_max
//   u32 tensor_count
//   per tensor: u32 name_len, name bytes, u32 rows, u32 cols,
//               rows*cols f64 in column-major order
//   u32 CRC-32 of every preceding byte
//
// A sidecar text manifest `<file>.txt` lists the architecture, tensor shapes
// and the SHA-256 of the binary.

#pragma once

#include "w2s/net.hpp"

#include <filesystem>
#include <string>

namespace w2s {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const NetParams& p);
NetParams decode_checkpoint(std::string_view bytes);

/// Atomic write of the binary and its sidecar manifest.
void save_checkpoint(const std::filesystem::path& path, const NetParams& p);
NetParams load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_manifest(const NetParams& p, std::string_view binary);

}  // namespace w2s
