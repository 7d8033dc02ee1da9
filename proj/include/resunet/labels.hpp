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

#include "resunet/image_io.hpp"
#include "resunet/tensor.hpp"

namespace resunet {

/// One training datum with every target derived from the image and mask.
struct SampleRecord {
  Tensor<float> image;     // [C,H,W] in [0,1]
  LabelPlane mask;         // class indices
  Tensor<float> onehot;    // [K,H,W]
  Tensor<float> boundary;  // [K,H,W] in {0,1}
  Tensor<float> distance;  // [K,H,W] in [0,1]
  Tensor<float> hsv;       // [3,H,W] in [0,1]

  std::size_t classes() const { return onehot.dim(0); }
};

/// Throws DataError on a class id >= k.
Tensor<float> one_hot(const LabelPlane& mask, std::size_t k);
LabelPlane argmax_channels(const Tensor<float>& scores);

/// Binary plane of pixels equal to `cls`.
LabelPlane class_plane(const LabelPlane& mask, std::uint8_t cls);

/// On-pixels with at least one 4-neighbour off (outside the image counts as
/// off), dilated once with the 3x3 cross.
LabelPlane get_boundary(const LabelPlane& binary);

/// Exact Euclidean distance from each on-pixel to the nearest off-pixel, with
/// the ring just outside the image counted as off. Off-pixels are 0. [H,W].
Tensor<double> distance_transform(const LabelPlane& binary);

/// distance_transform scaled into [0,1]. The minimum is the off value 0, so
/// this is a division by the plane maximum; an all-off plane stays zero.
Tensor<double> get_distance(const LabelPlane& binary);

/// Hexcone HSV with hue in turns ([0,1)); gray pixels get hue 0.
Tensor<float> rgb_to_hsv(const Tensor<float>& rgb);
Tensor<float> hsv_to_rgb(const Tensor<float>& hsv);

/// Derives onehot, per-class boundary and distance, and HSV of the first three
/// image channels.
SampleRecord derive_record(Tensor<float> image, LabelPlane mask, std::size_t k);

}  // namespace resunet
