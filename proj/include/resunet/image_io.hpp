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

#include "resunet/tensor.hpp"

namespace resunet {

/// Row-major plane of 8-bit values, used for class-index masks.
struct LabelPlane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  LabelPlane() = default;
  LabelPlane(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), data(h * w, fill) {}
  std::uint8_t& operator()(std::size_t y, std::size_t x) { return data[y * width + x]; }
  std::uint8_t operator()(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  std::size_t size() const { return data.size(); }
  friend bool operator==(const LabelPlane&, const LabelPlane&) = default;
};

/// Binary (P5) PGM with maxval 255.
void write_pgm(const std::filesystem::path& path, const LabelPlane& plane);
LabelPlane read_pgm(const std::filesystem::path& path);

/// Binary (P6) PPM from a [3,H,W] tensor in [0,1].
void write_ppm(const std::filesystem::path& path, const Tensor<float>& rgb);
Tensor<float> read_ppm(const std::filesystem::path& path);

}  // namespace resunet
