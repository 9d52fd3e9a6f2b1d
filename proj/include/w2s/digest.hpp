// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace w2s {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::uint32_t crc32(std::span<const unsigned char> bytes);

}  // namespace w2s
