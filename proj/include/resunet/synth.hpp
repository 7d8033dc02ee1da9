// Copyright 2026 The resunet Authors. All Rights Reserved.
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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "resunet/image_io.hpp"

namespace resunet {

struct SceneSpec {
  std::size_t size = 64;
  std::size_t n_classes = 4;  // class 0 is background
  std::size_t count = 8;
  std::uint64_t seed = 0;
  bool height_channel = true;
  /// Makes the last class small objects (under 2% of pixels) placed on top
  /// of the stripe class.
  bool imbalanced = false;
  double noise = 0.04;

  void validate() const;
  std::size_t channels() const { return height_channel ? 4 : 3; }
};

enum class ShapeKind { rectangle, disk, stripe };

/// One painted primitive. Rectangles cover [y0, y1) x [x0, x1); disks the
/// pixels with (y - cy)^2 + (x - cx)^2 <= r^2; stripes the pixels with
/// |nx * (x - cx) + ny * (y - cy)| <= half_width.
struct SceneShape {
  ShapeKind kind = ShapeKind::rectangle;
  std::uint8_t cls = 0;
  double y0 = 0, x0 = 0, y1 = 0, x1 = 0;
  double cy = 0, cx = 0, radius = 0;
  double ny = 0, nx = 0, half_width = 0;

  bool covers(std::size_t y, std::size_t x) const;
};

struct SyntheticScene {
  Tensor<float> image;  // [channels, size, size]
  LabelPlane mask;
  std::vector<SceneShape> shapes;  // in painting order; later ones win
  std::vector<std::size_t> class_pixels;
};

/// Shape class c > 0 is drawn as kind (c - 1) % 3 in {rectangle, stripe,
/// disk}; stripes are painted first, then rectangles, disks and the small
/// objects. Every class has a base colour; the height channel is high on the
/// rectangle class and low elsewhere.
std::vector<SyntheticScene> generate(const SceneSpec& spec);

/// Writes image_NNNN.ppm (RGB), height_NNNN.pgm, mask_NNNN.pgm and
/// manifest.json under `dir`.
void write_scenes(const std::filesystem::path& dir, const SceneSpec& spec, const std::vector<SyntheticScene>& scenes);

struct LabeledImage {
  Tensor<float> image;  // [C,H,W]
  LabelPlane mask;
  std::size_t group = 0;  // spatial region id used for splitting
};

struct Dataset {
  std::size_t n_classes = 0;
  std::vector<LabeledImage> items;
};

/// Reads a manifest written by write_scenes. Throws DataError on missing or
/// inconsistent files.
Dataset read_dataset(const std::filesystem::path& manifest);

}  // namespace resunet
