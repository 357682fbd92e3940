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

#include "cn3d/grid_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cn3d/error.hpp"

namespace cn3d {

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void append_f32_le(std::vector<char>& out, std::span<const double> values) {
  const std::size_t start = out.size();
  out.resize(start + 4 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    std::memcpy(out.data() + start + 4 * i, &bits, 4);
  }
}

std::vector<double> decode_f32_le(std::span<const char> bytes) {
  if (bytes.size() % 4 != 0) {
    throw ParseError("float32 payload length " + std::to_string(bytes.size()) +
                     " is not a multiple of 4");
  }
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    out[i] = std::bit_cast<float>(to_le(bits));
  }
  return out;
}

void write_grid(std::ostream& os, const Grid2D& grid) {
  os << grid.height() << ' ' << grid.width() << ' ' << grid.channels() << " f32\n";
  std::vector<char> payload;
  append_f32_le(payload, grid.data());
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

Grid2D read_grid(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) {
    throw ParseError("grid dump: missing header");
  }
  std::istringstream hs(header);
  std::size_t h = 0, w = 0, c = 0;
  std::string tag;
  if (!(hs >> h >> w >> c >> tag) || tag != "f32") {
    throw ParseError("grid dump: bad header '" + header + "'");
  }
  std::vector<char> payload(4 * h * w * c);
  is.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(is.gcount()) != payload.size()) {
    throw ParseError("grid dump: truncated payload at byte " + std::to_string(is.gcount()));
  }
  return Grid2D(h, w, c, decode_f32_le(payload));
}

void save_grid(const std::filesystem::path& path, const Grid2D& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error("cannot open " + path.string() + " for writing");
  }
  write_grid(os, grid);
}

Grid2D load_grid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error("cannot open " + path.string());
  }
  return read_grid(is);
}

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error("cannot open " + path.string() + " for writing");
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_file_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_file_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span<const char>(text.data(), text.size()));
}

}  // namespace cn3d
