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

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "resunet/labels.hpp"

namespace resunet {

struct AugmentConfig {
  double scale_lo = 0.75;
  double scale_hi = 1.33;
  double flip_prob = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mirror index into [0, n) without repeating the edge sample
/// (-1 -> 1, n -> n - 2); periodic beyond one reflection.
std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n);

/// Rotation by `angle_deg` and zoom by `scale` about (cx, cy) in pixel
/// coordinates (x to the right, y down).
struct AffineParams {
  double angle_deg = 0;
  double cx = 0, cy = 0;
  double scale = 1;
};

/// Warps image (bilinear) and mask (nearest) by inverse mapping with reflect
/// padding, then re-derives every target from the warped pair.
SampleRecord apply_affine(const SampleRecord& record, const AffineParams& params);
SampleRecord random_affine(const SampleRecord& record, const AugmentConfig& cfg, std::mt19937_64& rng);

/// Mirrors every channel of the record left-right and/or top-bottom.
SampleRecord flip_record(const SampleRecord& record, bool horizontal, bool vertical);
SampleRecord random_flip(const SampleRecord& record, std::mt19937_64& rng, double p);

struct PatchWindow {
  std::size_t y = 0, x = 0, size = 0;
};

/// Windows at offsets that are multiples of `stride` and lie fully inside the
/// h x w tile. Throws DataError when the tile is smaller than `size`.
std::vector<PatchWindow> patch_windows(std::size_t h, std::size_t w, std::size_t size, std::size_t stride);

struct Patch {
  PatchWindow window;
  Tensor<float> image;
  LabelPlane mask;
};

std::vector<Patch> extract_patches(const Tensor<float>& image, const LabelPlane& mask, std::size_t size = 256,
                                   std::size_t stride = 128);

struct DatasetSplit {
  std::vector<std::size_t> train, val, test;
};

/// Partitions items by their spatial-region group so that no group spans two
/// subsets. Groups are shuffled with `seed`; the train and validation subsets
/// take round(G * ratio) groups and the test subset the rest. Returned item
/// indices are ascending within each subset.
DatasetSplit split_dataset(const std::vector<std::size_t>& group_of_item, std::array<double, 3> ratios,
                           std::uint64_t seed);

}  // namespace resunet
