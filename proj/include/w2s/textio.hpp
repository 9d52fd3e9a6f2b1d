// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Small text helpers shared by the serializers and the CSV/config readers.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace w2s::text {

/// Shortest decimal form that round-trips exactly.
std::string fmt(double v);
std::string fmt(long long v);

double to_double(std::string_view s);
long long to_int(std::string_view s);
bool to_bool(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<std::string_view> lines(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Levenshtein distance; used for "did you mean" diagnostics.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace w2s::text
