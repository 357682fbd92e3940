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

#include <cstddef>

#include "cn3d/geom.hpp"

namespace cn3d {

/// The per-cell maps produced by the detection head (activated) or by target
/// encoding. All share the feature-map height and width.
struct HeadMaps {
  Grid2D center;     // C channels, (0,1)
  Grid2D corner;     // C channels, (0,1)
  Grid2D offset;     // 2 channels: sub-cell (row, col) offset, [0,1)
  Grid2D z;          // 1 channel, meters
  Grid2D size;       // 3 channels: l, w, h meters
  Grid2D direction;  // 2 channels: cos(yaw), sin(yaw)

  static HeadMaps zeros(std::size_t rows, std::size_t cols, std::size_t classes) {
    return {Grid2D(rows, cols, classes), Grid2D(rows, cols, classes), Grid2D(rows, cols, 2),
            Grid2D(rows, cols, 1),       Grid2D(rows, cols, 3),       Grid2D(rows, cols, 2)};
  }

  std::size_t rows() const { return center.height(); }
  std::size_t cols() const { return center.width(); }
  std::size_t classes() const { return center.channels(); }

  /// Throws InvalidArgument unless every map has the expected channel count and
  /// a common height and width.
  void check() const;
};

/// Feature cell plus class.
struct Peak {
  std::size_t row = 0;
  std::size_t col = 0;
  int cls = 0;
};

}  // namespace cn3d
