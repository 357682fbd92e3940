// Copyright 2026 The cn3d Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Shared dump format for every Grid2D written by the toolkit:
//   one ASCII header line "H W C f32\n", then H*W*C little-endian float32
//   values in row-major (row, column, channel) order.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cn3d/geom.hpp"

namespace cn3d {

void write_grid(std::ostream& os, const Grid2D& grid);
Grid2D read_grid(std::istream& is);

void save_grid(const std::filesystem::path& path, const Grid2D& grid);
Grid2D load_grid(const std::filesystem::path& path);

/// Appends values as little-endian float32.
void append_f32_le(std::vector<char>& out, std::span<const double> values);
/// Decodes little-endian float32 values; bytes.size() must be a multiple of 4.
std::vector<double> decode_f32_le(std::span<const char> bytes);

std::vector<char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const char> bytes);
std::string read_file_text(const std::filesystem::path& path);
void write_file_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cn3d
